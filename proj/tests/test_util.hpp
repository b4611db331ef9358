#pragma once

// Test-side oracles. Everything here is deliberately computed by a route that
// is independent of the library code under test.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "pmg/pmg.hpp"

namespace pmg::testing {

inline io::GeneratorConfig small_config(std::uint64_t seed, std::size_t players = 3, std::size_t states = 3,
                                        std::size_t horizon = 3) {
  io::GeneratorConfig cfg;
  cfg.players = players;
  cfg.states = states;
  cfg.horizon = horizon;
  cfg.seed = seed;
  return cfg;
}

inline io::GeneratorConfig discounted_config(std::uint64_t seed, double gamma, std::size_t players = 3,
                                             std::size_t states = 3) {
  auto cfg = small_config(seed, players, states);
  cfg.horizon.reset();
  cfg.gamma = gamma;
  return cfg;
}

inline Distribution random_distribution(std::size_t size, std::mt19937_64& rng) {
  std::exponential_distribution<double> e(1.0);
  Distribution d(size);
  double total = 0.0;
  for (auto& x : d) total += (x = e(rng));
  for (auto& x : d) x /= total;
  return d;
}

inline ProductPolicy random_product_policy(const MarkovGame& game, std::size_t layers, std::mt19937_64& rng) {
  ProductPolicy pi(game.action_counts(), layers, game.num_states());
  for (PlayerId k = 0; k < game.num_players(); ++k) {
    for (std::size_t h = 0; h < layers; ++h) {
      for (StateId s = 0; s < game.num_states(); ++s) pi.at(k, h, s) = random_distribution(game.num_actions(k), rng);
    }
  }
  return pi;
}

inline CorrelatedPolicy random_correlated_policy(const MarkovGame& game, std::size_t layers, std::mt19937_64& rng) {
  CorrelatedPolicy sigma(game.action_counts(), layers, game.num_states());
  for (std::size_t h = 0; h < layers; ++h) {
    for (StateId s = 0; s < game.num_states(); ++s) sigma.at(h, s) = random_distribution(sigma.space().size(), rng);
  }
  return sigma;
}

inline std::size_t policy_layers(const MarkovGame& game) {
  return game.horizon().is_finite() ? game.horizon().steps() : 1;
}

// Probability of a joint action, straight from the policy tables.
inline double joint_probability(const ProductPolicy& pi, std::size_t h, StateId s, const JointAction& a) {
  double p = 1.0;
  for (PlayerId k = 0; k < a.size(); ++k) p *= pi.factor(k).step(h, s)[a[k]];
  return p;
}

inline double joint_probability(const CorrelatedPolicy& sigma, std::size_t h, StateId s, const JointAction& a) {
  const std::size_t layer = std::min(h, sigma.num_layers() - 1);
  return sigma.at(layer, s)[sigma.space().encode(a)];
}

// Forward propagation of the state distribution, summing expected rewards
// step by step (the library evaluates backwards).
template <class Policy>
std::vector<double> forward_value(const MarkovGame& game, const Policy& policy) {
  const std::size_t n = game.num_players();
  const std::size_t S = game.num_states();
  const bool finite = game.horizon().is_finite();
  const double gamma = finite ? 1.0 : game.horizon().gamma();
  const std::size_t steps = finite ? game.num_layers() : effective_horizon(gamma, 1e-14);
  std::vector<double> value(n, 0.0);
  std::vector<double> dist = game.initial_distribution();
  double discount = 1.0;
  const auto& space = game.joint_space();
  for (std::size_t h = 0; h < steps; ++h) {
    std::vector<double> next(S, 0.0);
    for (StateId s = 0; s < S; ++s) {
      if (dist[s] == 0.0) continue;
      const auto& st = game.interaction(h, s);
      for (std::size_t i = 0; i < space.size(); ++i) {
        const auto a = space.decode(i);
        const double p = dist[s] * joint_probability(policy, h, s, a);
        if (p == 0.0) continue;
        for (PlayerId k = 0; k < n; ++k) value[k] += discount * p * reward(game, h, s, k, a);
        const auto row = static_cast<Eigen::Index>(controller_index(game, h, s, a));
        for (StateId t = 0; t < S; ++t) next[t] += p * st.transition(row, static_cast<Eigen::Index>(t));
      }
    }
    dist = std::move(next);
    discount *= gamma;
  }
  return value;
}

// Best-response value of player k by dynamic programming over the raw joint
// action space. Discounted games iterate the stationary tail to convergence
// and then recurse through the leading layers.
template <class Policy>
double oracle_best_response(const MarkovGame& game, const Policy& policy, PlayerId k) {
  const std::size_t S = game.num_states();
  const std::size_t A = game.num_actions(k);
  const bool finite = game.horizon().is_finite();
  const double gamma = finite ? 1.0 : game.horizon().gamma();
  const auto& space = game.joint_space();
  auto bellman = [&](std::size_t h, const std::vector<double>& v) {
    std::vector<double> out(S);
    for (StateId s = 0; s < S; ++s) {
      const auto& st = game.interaction(h, s);
      std::vector<double> q(A, 0.0);
      for (std::size_t i = 0; i < space.size(); ++i) {
        auto a = space.decode(i);
        if (a[k] != 0) continue;
        // Probability of the others' actions: sum over k's action.
        double p = 0.0;
        for (ActionId b = 0; b < A; ++b) {
          a[k] = b;
          p += joint_probability(policy, h, s, a);
        }
        if (p == 0.0) continue;
        for (ActionId b = 0; b < A; ++b) {
          a[k] = b;
          const auto row = static_cast<Eigen::Index>(controller_index(game, h, s, a));
          double cont = 0.0;
          for (StateId t = 0; t < S; ++t) cont += st.transition(row, static_cast<Eigen::Index>(t)) * v[t];
          q[b] += p * (reward(game, h, s, k, a) + gamma * cont);
        }
      }
      out[s] = *std::max_element(q.begin(), q.end());
    }
    return out;
  };
  std::vector<double> v(S, 0.0);
  if (finite) {
    for (std::size_t h = game.num_layers(); h-- > 0;) v = bellman(h, v);
  } else {
    const std::size_t L = policy.num_layers();
    for (int iter = 0; iter < 1000000; ++iter) {
      auto next = bellman(L - 1, v);
      double change = 0.0;
      for (StateId s = 0; s < S; ++s) change = std::max(change, std::abs(next[s] - v[s]));
      v = std::move(next);
      if (change * gamma / (1.0 - gamma) < 1e-13) break;
    }
    for (std::size_t h = L - 1; h-- > 0;) v = bellman(h, v);
  }
  double out = 0.0;
  for (StateId s = 0; s < S; ++s) out += game.initial_distribution()[s] * v[s];
  return out;
}

// Exploitability max_k (oracle best response - forward value).
template <class Policy>
double oracle_gap(const MarkovGame& game, const Policy& policy) {
  const auto v = forward_value(game, policy);
  double gap = 0.0;
  for (PlayerId k = 0; k < game.num_players(); ++k) gap = std::max(gap, oracle_best_response(game, policy, k) - v[k]);
  return gap;
}

// Every deterministic policy of player k over all (layer, state) pairs.
inline std::vector<PolicyFactor> all_deterministic(const MarkovGame& game, PlayerId k, std::size_t layers) {
  const std::size_t S = game.num_states();
  const std::size_t A = game.num_actions(k);
  const std::size_t slots = layers * S;
  std::size_t count = 1;
  for (std::size_t i = 0; i < slots; ++i) count *= A;
  std::vector<PolicyFactor> out;
  for (std::size_t code = 0; code < count; ++code) {
    PolicyFactor f(A, layers, S);
    std::size_t c = code;
    for (std::size_t i = 0; i < slots; ++i) {
      f.set_pure(i / S, i % S, c % A);
      c /= A;
    }
    out.push_back(std::move(f));
  }
  return out;
}

// Value of a 2x2 zero-sum matrix game for the row (maximising) player.
inline double matrix_game_value(double a, double b, double c, double d) {
  std::vector<double> candidates{0.0, 1.0};
  const double denom = a - b - c + d;
  if (denom != 0.0) {
    const double p = (d - c) / denom;
    if (p > 0.0 && p < 1.0) candidates.push_back(p);
  }
  double best = -1e300;
  for (double p : candidates) best = std::max(best, std::min(p * a + (1 - p) * c, p * b + (1 - p) * d));
  return best;
}

// Stage matrix of player 0 in a two-player, two-action game with continuation v.
inline Eigen::Matrix2d stage_matrix(const MarkovGame& game, std::size_t h, StateId s, const Eigen::VectorXd& v,
                                    double gamma) {
  Eigen::Matrix2d m;
  for (ActionId a = 0; a < 2; ++a) {
    for (ActionId b = 0; b < 2; ++b) {
      const JointAction joint{a, b};
      const auto row = static_cast<Eigen::Index>(controller_index(game, h, s, joint));
      m(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) =
          reward(game, h, s, 0, joint) + gamma * game.interaction(h, s).transition.row(row).dot(v);
    }
  }
  return m;
}

// Shapley value iteration with closed-form 2x2 stage values: V_0(rho) of the
// discounted game, or backward induction for a finite horizon.
inline double shapley_value(const MarkovGame& game) {
  const std::size_t S = game.num_states();
  Eigen::VectorXd v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(S));
  auto sweep = [&](std::size_t h, double gamma) {
    Eigen::VectorXd out(v.size());
    for (StateId s = 0; s < S; ++s) {
      const auto m = stage_matrix(game, h, s, v, gamma);
      out(static_cast<Eigen::Index>(s)) = matrix_game_value(m(0, 0), m(0, 1), m(1, 0), m(1, 1));
    }
    return out;
  };
  if (game.horizon().is_finite()) {
    for (std::size_t h = game.num_layers(); h-- > 0;) v = sweep(h, 1.0);
  } else {
    const double gamma = game.horizon().gamma();
    for (int iter = 0; iter < 100000; ++iter) {
      Eigen::VectorXd next = sweep(0, gamma);
      const double change = (next - v).cwiseAbs().maxCoeff();
      v = std::move(next);
      if (change < 1e-14) break;
    }
  }
  double out = 0.0;
  for (StateId s = 0; s < S; ++s) out += game.initial_distribution()[s] * v(static_cast<Eigen::Index>(s));
  return out;
}

// Two-player, two-action game with one controller per state.
inline MarkovGame two_by_two_game(std::uint64_t seed, std::size_t states, std::optional<std::size_t> horizon,
                                  double gamma = 0.8) {
  io::GeneratorConfig cfg;
  cfg.players = 2;
  cfg.states = states;
  cfg.horizon = horizon;
  cfg.gamma = gamma;
  cfg.actions = {2, 2};
  cfg.seed = seed;
  return io::generate(cfg);
}

// A feasible point of the Nash program for pi: best-response values plus
// nonnegative offsets that keep every constraint satisfied.
inline ValueTable random_feasible_values(const MarkovGame& game, const ProductPolicy& pi, std::mt19937_64& rng) {
  ValueTable w = best_response_values(game, pi);
  std::uniform_real_distribution<double> u(0.0, 0.5);
  const std::size_t L = pi.num_layers();
  const std::size_t S = game.num_states();
  const bool finite = game.horizon().is_finite();
  const double gamma = finite ? 1.0 : game.horizon().gamma();
  for (PlayerId k = 0; k < game.num_players(); ++k) {
    std::vector<double> offset(S);
    double c = u(rng);
    for (StateId s = 0; s < S; ++s) offset[s] = finite ? u(rng) : c * (1.0 + u(rng) * (1.0 - gamma) / gamma);
    for (std::size_t h = L; h-- > 0;) {
      if (h + 1 < L) {
        const double top = gamma * *std::max_element(offset.begin(), offset.end());
        for (StateId s = 0; s < S; ++s) offset[s] = top + u(rng);
      }
      for (StateId s = 0; s < S; ++s) w.at(k, h, s) += offset[s];
    }
  }
  return w;
}

}  // namespace pmg::testing
