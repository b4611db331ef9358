#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <vector>

#include "pmg/errors.hpp"
#include "pmg/game.hpp"
#include "pmg/policy.hpp"
#include "pmg/valuation.hpp"

namespace pmg {

// Single-agent MDP faced by player k when every other player follows the
// given joint policy. Layers follow the policy's layers.
struct InducedMDP {
  PlayerId player = 0;
  std::size_t num_actions = 0;
  std::size_t num_states = 0;
  double gamma = 1.0;  // 1 for finite horizons
  std::vector<Eigen::VectorXd> rewards;      // [layer * S + s](a)
  std::vector<Eigen::MatrixXd> transitions;  // [layer * S + s](a, s')

  std::size_t num_layers() const { return num_states == 0 ? 0 : rewards.size() / num_states; }
  const Eigen::VectorXd& reward(std::size_t h, StateId s) const { return rewards.at(h * num_states + s); }
  const Eigen::MatrixXd& transition(std::size_t h, StateId s) const {
    return transitions.at(h * num_states + s);
  }
};

namespace detail {

// r̄ and P̄ of player k at game layer h, using policy layer ph.
template <MarkovPolicy P>
void induce_node(const MarkovGame& game, const P& policy, PlayerId k, std::size_t h,
                 std::size_t ph, StateId s, Eigen::VectorXd& r, Eigen::MatrixXd& next) {
  const auto A = static_cast<Eigen::Index>(game.num_actions(k));
  const auto S = static_cast<Eigen::Index>(game.num_states());
  const auto& st = game.interaction(h, s);
  r = Eigen::VectorXd::Zero(A);
  for (const auto& e : st.edges) {
    if (e.from != k) continue;
    const auto m = player_marginal(policy, ph, s, e.to);
    r += e.payoff * Eigen::Map<const Eigen::VectorXd>(m.data(), static_cast<Eigen::Index>(m.size()));
  }

  // Distribution of the other controllers' joint action.
  std::vector<PlayerId> others;
  std::size_t own_pos = st.controllers.size();
  for (std::size_t i = 0; i < st.controllers.size(); ++i) {
    if (st.controllers[i] == k) {
      own_pos = i;
    } else {
      others.push_back(st.controllers[i]);
    }
  }
  const auto others_dist = subset_marginal(policy, ph, s, others);
  const auto space = game.controller_space(h, s);
  next = Eigen::MatrixXd::Zero(A, S);
  JointAction c(st.controllers.size(), 0);
  for (std::size_t i = 0; i < space.size(); ++i) {
    std::size_t other_index = 0;
    for (std::size_t j = 0; j < c.size(); ++j) {
      if (j != own_pos) other_index = other_index * game.num_actions(st.controllers[j]) + c[j];
    }
    const double w = others_dist[other_index];
    if (w != 0.0) {
      const auto row = st.transition.row(static_cast<Eigen::Index>(i));
      if (own_pos == c.size()) {
        next.rowwise() += w * row;
      } else {
        next.row(static_cast<Eigen::Index>(c[own_pos])) += w * row;
      }
    }
    space.next(c);
  }
}

// First action within 1e-12 of the maximum (lowest-index tie-breaking).
inline Eigen::Index argmax_low(const Eigen::VectorXd& q) {
  const double best = q.maxCoeff();
  const double slack = 1e-12 * std::max(1.0, std::abs(best));
  for (Eigen::Index a = 0; a < q.size(); ++a) {
    if (q[a] >= best - slack) return a;
  }
  return 0;
}

}  // namespace detail

template <MarkovPolicy P>
InducedMDP induce_mdp(const MarkovGame& game, const P& policy, PlayerId k) {
  if (k >= game.num_players()) throw DomainError("player out of range");
  check_policy(game, policy);
  InducedMDP mdp;
  mdp.player = k;
  mdp.num_actions = game.num_actions(k);
  mdp.num_states = game.num_states();
  const bool finite = game.horizon().is_finite();
  mdp.gamma = finite ? 1.0 : game.horizon().gamma();
  const std::size_t L = policy.num_layers();
  mdp.rewards.resize(L * mdp.num_states);
  mdp.transitions.resize(L * mdp.num_states);
  for (std::size_t h = 0; h < L; ++h) {
    for (StateId s = 0; s < mdp.num_states; ++s) {
      detail::induce_node(game, policy, k, finite ? h : 0, h, s, mdp.rewards[h * mdp.num_states + s],
                          mdp.transitions[h * mdp.num_states + s]);
    }
  }
  return mdp;
}

struct BestResponse {
  PolicyFactor policy;            // deterministic
  std::vector<Eigen::VectorXd> values;  // per layer, per state
  double value_at_initial = 0.0;
};

// Exact dynamic program on a finite-horizon induced MDP.
inline BestResponse solve_finite_mdp(const InducedMDP& mdp, std::span<const double> rho) {
  const std::size_t L = mdp.num_layers();
  const auto S = static_cast<Eigen::Index>(mdp.num_states);
  BestResponse br{PolicyFactor(mdp.num_actions, L, mdp.num_states), std::vector<Eigen::VectorXd>(L), 0.0};
  Eigen::VectorXd next = Eigen::VectorXd::Zero(S);
  for (std::size_t h = L; h-- > 0;) {
    Eigen::VectorXd current(S);
    for (StateId s = 0; s < mdp.num_states; ++s) {
      const Eigen::VectorXd q = mdp.reward(h, s) + mdp.transition(h, s) * next;
      const auto a = detail::argmax_low(q);
      current[static_cast<Eigen::Index>(s)] = q[a];
      br.policy.set_pure(h, s, static_cast<ActionId>(a));
    }
    br.values[h] = current;
    next = current;
  }
  for (StateId s = 0; s < mdp.num_states; ++s) br.value_at_initial += rho[s] * br.values[0][static_cast<Eigen::Index>(s)];
  return br;
}

template <MarkovPolicy P>
BestResponse best_response_finite(const MarkovGame& game, const P& policy, PlayerId k) {
  if (!game.horizon().is_finite()) throw DomainError("best_response_finite needs a finite horizon");
  return solve_finite_mdp(induce_mdp(game, policy, k), game.initial_distribution());
}

namespace detail {

inline Eigen::VectorXd evaluate_stationary(const InducedMDP& mdp, std::size_t layer,
                                           const std::vector<Eigen::Index>& actions) {
  const auto S = static_cast<Eigen::Index>(mdp.num_states);
  Eigen::MatrixXd P(S, S);
  Eigen::VectorXd r(S);
  for (Eigen::Index s = 0; s < S; ++s) {
    const auto su = static_cast<StateId>(s);
    r[s] = mdp.reward(layer, su)[actions[su]];
    P.row(s) = mdp.transition(layer, su).row(actions[su]);
  }
  const Eigen::MatrixXd A = Eigen::MatrixXd::Identity(S, S) - mdp.gamma * P;
  return A.partialPivLu().solve(r);
}

}  // namespace detail

// Discounted best response. The stationary tail layer is solved by value
// iteration to residual tol*(1-gamma)/(2*gamma), the greedy policy is
// extracted and improved by exact policy iteration until no action gains more
// than round-off; earlier layers are filled by backward recursion. Returned
// values are the exact values of the returned policy.
inline BestResponse solve_discounted_mdp(const InducedMDP& mdp, std::span<const double> rho,
                                         double tol) {
  if (!(tol > 0.0)) throw DomainError("best response tolerance must be positive");
  const std::size_t L = mdp.num_layers();
  const std::size_t tail = L - 1;
  const auto S = static_cast<Eigen::Index>(mdp.num_states);
  const double gamma = mdp.gamma;
  const double target = tol * (1.0 - gamma) / (2.0 * gamma);

  auto q_values = [&](std::size_t h, StateId s, const Eigen::VectorXd& v) {
    return Eigen::VectorXd(mdp.reward(h, s) + gamma * (mdp.transition(h, s) * v));
  };

  Eigen::VectorXd v = Eigen::VectorXd::Zero(S);
  for (std::size_t iter = 0; iter < 100'000; ++iter) {
    Eigen::VectorXd nv(S);
    for (Eigen::Index s = 0; s < S; ++s) nv[s] = q_values(tail, static_cast<StateId>(s), v).maxCoeff();
    const double residual = (nv - v).cwiseAbs().maxCoeff();
    v = std::move(nv);
    if (residual <= target) break;
  }

  std::vector<Eigen::Index> actions(static_cast<std::size_t>(S));
  for (Eigen::Index s = 0; s < S; ++s) {
    actions[static_cast<std::size_t>(s)] = detail::argmax_low(q_values(tail, static_cast<StateId>(s), v));
  }
  v = detail::evaluate_stationary(mdp, tail, actions);
  for (int round = 0; round < 1000; ++round) {
    bool changed = false;
    for (Eigen::Index s = 0; s < S; ++s) {
      const auto su = static_cast<std::size_t>(s);
      const Eigen::VectorXd q = q_values(tail, su, v);
      const auto best = detail::argmax_low(q);
      if (q[best] > q[actions[su]] + 1e-13 * std::max(1.0, std::abs(q[best]))) {
        actions[su] = best;
        changed = true;
      }
    }
    if (!changed) break;
    v = detail::evaluate_stationary(mdp, tail, actions);
  }

  BestResponse br{PolicyFactor(mdp.num_actions, L, mdp.num_states), std::vector<Eigen::VectorXd>(L), 0.0};
  for (Eigen::Index s = 0; s < S; ++s) {
    br.policy.set_pure(tail, static_cast<StateId>(s), static_cast<ActionId>(actions[static_cast<std::size_t>(s)]));
  }
  br.values[tail] = v;
  for (std::size_t h = tail; h-- > 0;) {
    Eigen::VectorXd current(S);
    for (Eigen::Index s = 0; s < S; ++s) {
      const Eigen::VectorXd q = q_values(h, static_cast<StateId>(s), br.values[h + 1]);
      const auto a = detail::argmax_low(q);
      current[s] = q[a];
      br.policy.set_pure(h, static_cast<StateId>(s), static_cast<ActionId>(a));
    }
    br.values[h] = current;
  }
  for (StateId s = 0; s < mdp.num_states; ++s) br.value_at_initial += rho[s] * br.values[0][static_cast<Eigen::Index>(s)];
  return br;
}

template <MarkovPolicy P>
BestResponse best_response_discounted(const MarkovGame& game, const P& policy, PlayerId k,
                                      double tol) {
  if (game.horizon().is_finite()) throw DomainError("best_response_discounted needs a discounted game");
  if (!(tol > 0.0)) throw DomainError("best response tolerance must be positive");
  return solve_discounted_mdp(induce_mdp(game, policy, k), game.initial_distribution(), tol);
}

template <MarkovPolicy P>
BestResponse best_response(const MarkovGame& game, const P& policy, PlayerId k, double tol = 1e-9) {
  return game.horizon().is_finite() ? best_response_finite(game, policy, k)
                                    : best_response_discounted(game, policy, k, tol);
}

struct PlayerGap {
  double best_response_value = 0.0;
  double current_value = 0.0;
  double deviation = 0.0;  // best response minus current, unclamped
  double gap = 0.0;        // max(0, deviation)
};

struct GapReport {
  std::vector<PlayerGap> players;
  double max_gap = 0.0;
  double sum_gap = 0.0;
};

// Per-player exploitability at the initial distribution: V^{dagger, policy_{-k}}(rho) - V^policy(rho).
template <MarkovPolicy P>
GapReport gap_report(const MarkovGame& game, const P& policy, double tol = 1e-9) {
  const auto values = evaluate(game, policy);
  const auto current = evaluate_at_initial(values, game.initial_distribution());
  GapReport report;
  for (PlayerId k = 0; k < game.num_players(); ++k) {
    PlayerGap g;
    g.best_response_value = best_response(game, policy, k, tol).value_at_initial;
    g.current_value = current[k];
    g.deviation = g.best_response_value - g.current_value;
    g.gap = std::max(0.0, g.deviation);
    report.max_gap = std::max(report.max_gap, g.gap);
    report.sum_gap += g.gap;
    report.players.push_back(g);
  }
  return report;
}

}  // namespace pmg
