#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <random>
#include <vector>

#include "pmg/errors.hpp"
#include "pmg/game.hpp"
#include "pmg/policy.hpp"

namespace pmg {

// w_{k,h}(s) for every player, layer and state.
class ValueTable {
 public:
  ValueTable() = default;
  ValueTable(std::size_t num_players, std::size_t num_layers, std::size_t num_states)
      : num_players_(num_players),
        num_layers_(num_layers),
        num_states_(num_states),
        data_(num_players * num_layers * num_states, 0.0) {}

  std::size_t num_players() const noexcept { return num_players_; }
  std::size_t num_layers() const noexcept { return num_layers_; }
  std::size_t num_states() const noexcept { return num_states_; }

  double& at(PlayerId k, std::size_t h, StateId s) {
    return data_.at((k * num_layers_ + h) * num_states_ + s);
  }
  double at(PlayerId k, std::size_t h, StateId s) const {
    return data_.at((k * num_layers_ + h) * num_states_ + s);
  }

  Eigen::VectorXd column(PlayerId k, std::size_t h) const {
    Eigen::VectorXd v(static_cast<Eigen::Index>(num_states_));
    for (StateId s = 0; s < num_states_; ++s) v[static_cast<Eigen::Index>(s)] = at(k, h, s);
    return v;
  }

  bool operator==(const ValueTable&) const = default;

 private:
  std::size_t num_players_ = 0;
  std::size_t num_layers_ = 0;
  std::size_t num_states_ = 0;
  std::vector<double> data_;
};

// Per-(layer, state) expected rewards and transition rows under a joint policy.
namespace detail {

template <MarkovPolicy P>
double expected_edge_payoff(const P& policy, std::size_t h, StateId s, const EdgeGame& e) {
  const PlayerId pair[] = {e.from, e.to};
  const auto joint = subset_marginal(policy, h, s, pair);
  const auto cols = static_cast<std::size_t>(e.payoff.cols());
  double total = 0.0;
  for (std::size_t i = 0; i < joint.size(); ++i) {
    if (joint[i] != 0.0) total += joint[i] * e.payoff(static_cast<Eigen::Index>(i / cols),
                                                      static_cast<Eigen::Index>(i % cols));
  }
  return total;
}

// Expected reward of every player at (h, s) under `policy` at policy layer `ph`.
template <MarkovPolicy P>
Eigen::VectorXd expected_rewards(const MarkovGame& game, const P& policy, std::size_t h,
                                 std::size_t ph, StateId s) {
  Eigen::VectorXd r = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(game.num_players()));
  for (const auto& e : game.interaction(h, s).edges) {
    r[static_cast<Eigen::Index>(e.from)] += expected_edge_payoff(policy, ph, s, e);
  }
  return r;
}

// Expected next-state distribution at (h, s). Only the controllers' marginal
// of the joint policy is needed.
template <MarkovPolicy P>
Eigen::RowVectorXd expected_transition(const MarkovGame& game, const P& policy, std::size_t h,
                                       std::size_t ph, StateId s) {
  const auto& st = game.interaction(h, s);
  const auto ctrl = subset_marginal(policy, ph, s, st.controllers);
  Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(static_cast<Eigen::Index>(game.num_states()));
  for (std::size_t c = 0; c < ctrl.size(); ++c) {
    if (ctrl[c] != 0.0) row += ctrl[c] * st.transition.row(static_cast<Eigen::Index>(c));
  }
  return row;
}

template <MarkovPolicy P>
Eigen::MatrixXd transition_matrix(const MarkovGame& game, const P& policy, std::size_t h,
                                  std::size_t ph) {
  const auto S = static_cast<Eigen::Index>(game.num_states());
  Eigen::MatrixXd P_mat(S, S);
  for (StateId s = 0; s < game.num_states(); ++s) {
    P_mat.row(static_cast<Eigen::Index>(s)) = expected_transition(game, policy, h, ph, s);
  }
  return P_mat;
}

// Rows: states, columns: players.
template <MarkovPolicy P>
Eigen::MatrixXd reward_matrix(const MarkovGame& game, const P& policy, std::size_t h,
                              std::size_t ph) {
  Eigen::MatrixXd R(static_cast<Eigen::Index>(game.num_states()),
                    static_cast<Eigen::Index>(game.num_players()));
  for (StateId s = 0; s < game.num_states(); ++s) {
    R.row(static_cast<Eigen::Index>(s)) = expected_rewards(game, policy, h, ph, s).transpose();
  }
  return R;
}

}  // namespace detail

// Exact backward recursion with zero continuation after the last reward step.
template <MarkovPolicy P>
ValueTable evaluate_finite(const MarkovGame& game, const P& policy) {
  if (!game.horizon().is_finite()) throw DomainError("evaluate_finite needs a finite horizon");
  check_policy(game, policy);
  const std::size_t H = game.num_layers();
  const std::size_t n = game.num_players();
  ValueTable values(n, H, game.num_states());
  Eigen::MatrixXd next = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(game.num_states()),
                                               static_cast<Eigen::Index>(n));
  for (std::size_t h = H; h-- > 0;) {
    const Eigen::MatrixXd current = detail::reward_matrix(game, policy, h, h) +
                                    detail::transition_matrix(game, policy, h, h) * next;
    for (PlayerId k = 0; k < n; ++k) {
      for (StateId s = 0; s < game.num_states(); ++s) {
        values.at(k, h, s) = current(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(k));
      }
    }
    next = current;
  }
  return values;
}

// (I - gamma P(policy))^{-1} for the policy's stationary tail layer.
template <MarkovPolicy P>
Eigen::MatrixXd resolvent(const MarkovGame& game, const P& policy) {
  if (game.horizon().is_finite()) throw DomainError("resolvent needs a discounted game");
  check_policy(game, policy);
  const auto S = static_cast<Eigen::Index>(game.num_states());
  const Eigen::MatrixXd A = Eigen::MatrixXd::Identity(S, S) -
                            game.horizon().gamma() *
                                detail::transition_matrix(game, policy, 0, policy.num_layers() - 1);
  return A.partialPivLu().inverse();
}

// Discounted values of a (possibly nonstationary) policy: the last policy layer
// is played forever, so its values come from a dense linear solve and earlier
// layers are filled by backward recursion.
template <MarkovPolicy P>
ValueTable evaluate_discounted(const MarkovGame& game, const P& policy) {
  if (game.horizon().is_finite()) throw DomainError("evaluate_discounted needs a discounted game");
  check_policy(game, policy);
  const double gamma = game.horizon().gamma();
  const std::size_t L = policy.num_layers();
  const std::size_t n = game.num_players();
  const auto S = static_cast<Eigen::Index>(game.num_states());
  ValueTable values(n, L, game.num_states());

  const Eigen::MatrixXd A =
      Eigen::MatrixXd::Identity(S, S) - gamma * detail::transition_matrix(game, policy, 0, L - 1);
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(A);
  if (!std::isfinite(lu.determinant()) || std::abs(lu.determinant()) < 1e-300) {
    throw StructuralError("singular policy-evaluation system");
  }
  Eigen::MatrixXd next = lu.solve(detail::reward_matrix(game, policy, 0, L - 1));
  auto store = [&](std::size_t h, const Eigen::MatrixXd& m) {
    for (PlayerId k = 0; k < n; ++k) {
      for (StateId s = 0; s < game.num_states(); ++s) {
        values.at(k, h, s) = m(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(k));
      }
    }
  };
  store(L - 1, next);
  for (std::size_t h = L - 1; h-- > 0;) {
    const Eigen::MatrixXd current = detail::reward_matrix(game, policy, 0, h) +
                                    gamma * detail::transition_matrix(game, policy, 0, h) * next;
    store(h, current);
    next = current;
  }
  return values;
}

template <MarkovPolicy P>
ValueTable evaluate(const MarkovGame& game, const P& policy) {
  return game.horizon().is_finite() ? evaluate_finite(game, policy)
                                    : evaluate_discounted(game, policy);
}

// V_k(rho) = sum_s rho(s) V_{k,h}(s), per player.
inline std::vector<double> evaluate_at_initial(const ValueTable& values,
                                               std::span<const double> rho, std::size_t h = 0) {
  if (rho.size() != values.num_states()) throw ShapeError("initial distribution has wrong length");
  std::vector<double> out(values.num_players(), 0.0);
  for (PlayerId k = 0; k < values.num_players(); ++k) {
    for (StateId s = 0; s < rho.size(); ++s) out[k] += rho[s] * values.at(k, h, s);
  }
  return out;
}

// ceil(log(1/eps) / (1 - gamma)), at least 1.
inline std::size_t effective_horizon(double gamma, double eps) {
  if (!(gamma > 0.0 && gamma < 1.0)) throw DomainError("effective_horizon: gamma must lie in (0,1)");
  if (!(eps > 0.0)) throw DomainError("effective_horizon: eps must be positive");
  const double steps = std::ceil(std::log(1.0 / eps) / (1.0 - gamma));
  return steps < 1.0 ? 1 : static_cast<std::size_t>(steps);
}

struct MonteCarloEstimate {
  std::vector<double> mean;
  std::vector<double> standard_error;
  std::size_t episodes = 0;
  std::size_t steps_per_episode = 0;
};

inline constexpr double kMonteCarloTruncation = 1e-6;

namespace detail {

inline std::size_t sample_index(std::span<const double> cdf, double u) {
  const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
  return std::min(static_cast<std::size_t>(it - cdf.begin()), cdf.size() - 1);
}

inline std::vector<double> cumulative(std::span<const double> p) {
  std::vector<double> c(p.size());
  std::partial_sum(p.begin(), p.end(), c.begin());
  return c;
}

}  // namespace detail

// Rollout estimate of V_k(rho) with its standard error. Discounted games are
// truncated after effective_horizon(gamma, 1e-6) steps, a bias of at most
// 2n * 1e-6.
template <MarkovPolicy P>
MonteCarloEstimate monte_carlo_value(const MarkovGame& game, const P& policy,
                                     std::size_t episodes, std::uint64_t seed) {
  if (episodes == 0) throw DomainError("monte_carlo_value needs at least one episode");
  check_policy(game, policy);
  const std::size_t n = game.num_players();
  const std::size_t S = game.num_states();
  const bool finite = game.horizon().is_finite();
  const double gamma = finite ? 1.0 : game.horizon().gamma();
  const std::size_t steps = finite ? game.num_layers() : effective_horizon(gamma, kMonteCarloTruncation);
  const std::size_t L = policy.num_layers();

  // Cumulative tables, per policy layer and state.
  std::vector<std::vector<std::vector<double>>> action_cdf(L * S);
  for (std::size_t h = 0; h < L; ++h) {
    for (StateId s = 0; s < S; ++s) {
      auto& slot = action_cdf[h * S + s];
      if constexpr (std::same_as<P, ProductPolicy>) {
        for (PlayerId k = 0; k < n; ++k) slot.push_back(detail::cumulative(policy.at(k, h, s)));
      } else {
        slot.push_back(detail::cumulative(policy.at(h, s)));
      }
    }
  }
  const auto rho_cdf = detail::cumulative(game.initial_distribution());
  const auto space = game.joint_space();

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> sum(n, 0.0), sum_sq(n, 0.0), ret(n);
  JointAction a(n);
  for (std::size_t ep = 0; ep < episodes; ++ep) {
    std::fill(ret.begin(), ret.end(), 0.0);
    StateId s = detail::sample_index(rho_cdf, unit(rng));
    double discount = 1.0;
    for (std::size_t t = 0; t < steps; ++t) {
      const auto& slot = action_cdf[std::min(t, L - 1) * S + s];
      if constexpr (std::same_as<P, ProductPolicy>) {
        for (PlayerId k = 0; k < n; ++k) a[k] = detail::sample_index(slot[k], unit(rng));
      } else {
        space.decode_into(detail::sample_index(slot[0], unit(rng)), a);
      }
      const auto& st = game.interaction(t, s);
      for (const auto& e : st.edges) ret[e.from] += discount * e.payoff(a[e.from], a[e.to]);
      const auto row = st.transition.row(static_cast<Eigen::Index>(controller_index(game, t, s, a)));
      const double u = unit(rng);
      double acc = 0.0;
      StateId next = S - 1;
      for (StateId s2 = 0; s2 < S; ++s2) {
        acc += row[static_cast<Eigen::Index>(s2)];
        if (u < acc) {
          next = s2;
          break;
        }
      }
      s = next;
      discount *= gamma;
    }
    for (PlayerId k = 0; k < n; ++k) {
      sum[k] += ret[k];
      sum_sq[k] += ret[k] * ret[k];
    }
  }
  MonteCarloEstimate est;
  est.episodes = episodes;
  est.steps_per_episode = steps;
  const double m = static_cast<double>(episodes);
  for (PlayerId k = 0; k < n; ++k) {
    const double mean = sum[k] / m;
    const double var = episodes > 1 ? std::max(0.0, (sum_sq[k] - m * mean * mean) / (m - 1.0)) : 0.0;
    est.mean.push_back(mean);
    est.standard_error.push_back(std::sqrt(var / m));
  }
  return est;
}

}  // namespace pmg
