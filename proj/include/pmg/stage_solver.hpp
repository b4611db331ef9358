#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "pmg/errors.hpp"
#include "pmg/game.hpp"
#include "pmg/policy.hpp"
#include "pmg/valuation.hpp"

namespace pmg {

// One-shot zero-sum polymatrix game at a (timestep, state) node. Player k's
// payoff is the sum of its edge payoffs plus continuation[k] evaluated at the
// controllers' joint action.
struct StageGame {
  std::vector<std::size_t> action_counts;
  std::vector<EdgeGame> edges;
  std::vector<PlayerId> controllers;
  std::vector<Eigen::VectorXd> continuation;  // per player, indexed by controller joint action

  std::size_t num_players() const noexcept { return action_counts.size(); }
  JointActionSpace controller_space() const {
    std::vector<std::size_t> radices;
    for (auto c : controllers) radices.push_back(action_counts[c]);
    return JointActionSpace(std::move(radices));
  }
};

inline constexpr double kContinuationSumTol = 1e-6;

// Stage game at (h, s). `next_values` holds w_{k,h+1}(s') as a states x players
// matrix (zero after the last reward step). The continuation terms are
// re-centred so they sum to zero exactly over players.
inline StageGame build_stage(const MarkovGame& game, std::size_t h, StateId s,
                             const Eigen::MatrixXd& next_values) {
  const std::size_t n = game.num_players();
  if (static_cast<std::size_t>(next_values.rows()) != game.num_states() ||
      static_cast<std::size_t>(next_values.cols()) != n) {
    throw ShapeError("continuation table has wrong shape");
  }
  for (Eigen::Index s2 = 0; s2 < next_values.rows(); ++s2) {
    const double total = next_values.row(s2).sum();
    if (std::abs(total) > kContinuationSumTol) {
      throw StructuralError("continuation values at state " + std::to_string(s2) +
                            " sum to " + std::to_string(total) + " over players");
    }
  }
  const auto& st = game.interaction(h, s);
  StageGame stage{game.action_counts(), st.edges, st.controllers, {}};
  const Eigen::MatrixXd g = st.transition * next_values;  // controller joint action x players
  Eigen::VectorXd residual = g.rowwise().sum() / static_cast<double>(n);
  for (PlayerId k = 0; k < n; ++k) {
    stage.continuation.push_back(g.col(static_cast<Eigen::Index>(k)) - residual);
  }
  return stage;
}

// Payoff of every own action of each player against the others' mixed strategies.
inline std::vector<Eigen::VectorXd> stage_utilities(const StageGame& stage,
                                                    std::span<const Distribution> profile) {
  const std::size_t n = stage.num_players();
  std::vector<Eigen::VectorXd> u(n);
  for (PlayerId k = 0; k < n; ++k) u[k] = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(stage.action_counts[k]));
  for (const auto& e : stage.edges) {
    const auto& x = profile[e.to];
    u[e.from] += e.payoff * Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
  }
  const auto space = stage.controller_space();
  const std::size_t m = stage.controllers.size();
  JointAction c(m, 0);
  for (std::size_t i = 0; i < space.size(); ++i) {
    // Probability of the controllers' joint action, with and without each controller's own factor.
    double all = 1.0;
    for (std::size_t j = 0; j < m; ++j) all *= profile[stage.controllers[j]][c[j]];
    for (PlayerId k = 0; k < n; ++k) {
      const double gk = stage.continuation[k][static_cast<Eigen::Index>(i)];
      if (gk == 0.0) continue;
      const auto it = std::find(stage.controllers.begin(), stage.controllers.end(), k);
      if (it == stage.controllers.end()) {
        u[k].array() += all * gk;
      } else {
        const auto pos = static_cast<std::size_t>(it - stage.controllers.begin());
        double others = 1.0;
        for (std::size_t j = 0; j < m; ++j) {
          if (j != pos) others *= profile[stage.controllers[j]][c[j]];
        }
        u[k][static_cast<Eigen::Index>(c[pos])] += others * gk;
      }
    }
    space.next(c);
  }
  return u;
}

// Expected stage payoff of each player under a product profile.
inline std::vector<double> stage_values(const StageGame& stage, std::span<const Distribution> profile) {
  const auto u = stage_utilities(stage, profile);
  std::vector<double> out(stage.num_players());
  for (PlayerId k = 0; k < out.size(); ++k) {
    out[k] = Eigen::Map<const Eigen::VectorXd>(profile[k].data(), u[k].size()).dot(u[k]);
  }
  return out;
}

// max_k (best pure payoff - current payoff), by exact maximisation over own actions.
inline double stage_gap(const StageGame& stage, std::span<const Distribution> profile) {
  const auto u = stage_utilities(stage, profile);
  double gap = 0.0;
  for (PlayerId k = 0; k < u.size(); ++k) {
    const double current = Eigen::Map<const Eigen::VectorXd>(profile[k].data(), u[k].size()).dot(u[k]);
    gap = std::max(gap, u[k].maxCoeff() - current);
  }
  return gap;
}

enum class Learner { kOptimistic, kMultiplicative };

inline const char* to_string(Learner l) { return l == Learner::kOptimistic ? "omwu" : "mwu"; }

struct StageSolution {
  enum class Source { kEliminated, kAverage, kLastIterate };

  std::vector<Distribution> strategies;
  std::vector<double> values;
  double gap = 0.0;             // certified, of `strategies`
  double averaged_gap = 0.0;    // certified, of the time-averaged marginals
  double regret_sum = 0.0;      // sum of players' average external regrets
  std::size_t iterations = 0;
  bool converged = false;
  Source source = Source::kAverage;
};

namespace detail {

// Iterated elimination of actions strictly dominated by another pure action.
// Returns per-player lists of surviving actions.
inline std::vector<std::vector<ActionId>> eliminate_dominated(const StageGame& stage) {
  const std::size_t n = stage.num_players();
  std::vector<std::vector<ActionId>> alive(n);
  for (PlayerId k = 0; k < n; ++k) {
    for (ActionId a = 0; a < stage.action_counts[k]; ++a) alive[k].push_back(a);
  }
  const auto ctrl_space = stage.controller_space();
  const std::size_t m = stage.controllers.size();

  // Minimum over surviving opponents of u_k(b, .) - u_k(a, .).
  auto min_advantage = [&](PlayerId k, ActionId b, ActionId a) {
    const auto it = std::find(stage.controllers.begin(), stage.controllers.end(), k);
    const bool controls = it != stage.controllers.end();
    auto coupled = [&](PlayerId j) {
      return controls && std::find(stage.controllers.begin(), stage.controllers.end(), j) !=
                             stage.controllers.end();
    };
    double total = 0.0;
    for (const auto& e : stage.edges) {
      if (e.from != k || coupled(e.to)) continue;
      double worst = std::numeric_limits<double>::infinity();
      for (auto aj : alive[e.to]) {
        worst = std::min(worst, e.payoff(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(aj)) -
                                    e.payoff(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(aj)));
      }
      total += worst;
    }
    if (!controls) return total;
    const auto pos = static_cast<std::size_t>(it - stage.controllers.begin());
    double worst = std::numeric_limits<double>::infinity();
    JointAction c(m, 0);
    for (std::size_t i = 0; i < ctrl_space.size(); ++i, ctrl_space.next(c)) {
      if (c[pos] != 0) continue;
      bool ok = true;
      for (std::size_t j = 0; j < m; ++j) {
        if (j != pos && std::find(alive[stage.controllers[j]].begin(), alive[stage.controllers[j]].end(),
                                  c[j]) == alive[stage.controllers[j]].end()) {
          ok = false;
        }
      }
      if (!ok) continue;
      JointAction cb = c, ca = c;
      cb[pos] = b;
      ca[pos] = a;
      double diff = stage.continuation[k][static_cast<Eigen::Index>(ctrl_space.encode(cb))] -
                    stage.continuation[k][static_cast<Eigen::Index>(ctrl_space.encode(ca))];
      for (const auto& e : stage.edges) {
        if (e.from != k || !coupled(e.to)) continue;
        const auto pj = static_cast<std::size_t>(
            std::find(stage.controllers.begin(), stage.controllers.end(), e.to) - stage.controllers.begin());
        diff += e.payoff(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(c[pj])) -
                e.payoff(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(c[pj]));
      }
      worst = std::min(worst, diff);
    }
    return total + worst;
  };

  for (bool changed = true; changed;) {
    changed = false;
    for (PlayerId k = 0; k < n; ++k) {
      for (std::size_t i = 0; i < alive[k].size() && alive[k].size() > 1;) {
        const ActionId a = alive[k][i];
        bool dominated = false;
        for (auto b : alive[k]) {
          if (b != a && min_advantage(k, b, a) > 1e-12) {
            dominated = true;
            break;
          }
        }
        if (dominated) {
          alive[k].erase(alive[k].begin() + static_cast<std::ptrdiff_t>(i));
          changed = true;
        } else {
          ++i;
        }
      }
    }
  }
  return alive;
}

// The stage game restricted to the surviving actions.
inline StageGame restrict_stage(const StageGame& stage, const std::vector<std::vector<ActionId>>& alive) {
  StageGame out;
  for (const auto& a : alive) out.action_counts.push_back(a.size());
  out.controllers = stage.controllers;
  for (const auto& e : stage.edges) {
    EdgeGame r{e.from, e.to,
               Eigen::MatrixXd(static_cast<Eigen::Index>(alive[e.from].size()),
                               static_cast<Eigen::Index>(alive[e.to].size()))};
    for (std::size_t i = 0; i < alive[e.from].size(); ++i) {
      for (std::size_t j = 0; j < alive[e.to].size(); ++j) {
        r.payoff(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
            e.payoff(static_cast<Eigen::Index>(alive[e.from][i]), static_cast<Eigen::Index>(alive[e.to][j]));
      }
    }
    out.edges.push_back(std::move(r));
  }
  const auto full = stage.controller_space();
  const auto reduced = out.controller_space();
  std::vector<std::size_t> index(reduced.size());
  JointAction c(stage.controllers.size(), 0);
  for (std::size_t i = 0; i < reduced.size(); ++i) {
    JointAction original(c.size());
    for (std::size_t j = 0; j < c.size(); ++j) original[j] = alive[stage.controllers[j]][c[j]];
    index[i] = full.encode(original);
    reduced.next(c);
  }
  for (const auto& g : stage.continuation) {
    Eigen::VectorXd r(static_cast<Eigen::Index>(reduced.size()));
    for (std::size_t i = 0; i < index.size(); ++i) r[static_cast<Eigen::Index>(i)] = g[static_cast<Eigen::Index>(index[i])];
    out.continuation.push_back(std::move(r));
  }
  return out;
}

inline std::vector<Distribution> expand_profile(const StageGame& stage,
                                                const std::vector<std::vector<ActionId>>& alive,
                                                std::span<const Distribution> reduced) {
  std::vector<Distribution> out;
  for (PlayerId k = 0; k < stage.num_players(); ++k) {
    Distribution d(stage.action_counts[k], 0.0);
    for (std::size_t i = 0; i < alive[k].size(); ++i) d[alive[k][i]] = reduced[k][i];
    out.push_back(std::move(d));
  }
  return out;
}

// Bound on the spread of any player's payoff across joint actions.
inline double payoff_range(const StageGame& stage) {
  double range = 0.0;
  for (PlayerId k = 0; k < stage.num_players(); ++k) {
    double r = stage.continuation[k].size() > 0
                   ? stage.continuation[k].maxCoeff() - stage.continuation[k].minCoeff()
                   : 0.0;
    for (const auto& e : stage.edges) {
      if (e.from == k) r += e.payoff.maxCoeff() - e.payoff.minCoeff();
    }
    range = std::max(range, r);
  }
  return range;
}

inline void softmax_into(const Eigen::VectorXd& logits, Distribution& out) {
  const double top = logits.maxCoeff();
  double total = 0.0;
  for (Eigen::Index a = 0; a < logits.size(); ++a) {
    out[static_cast<std::size_t>(a)] = std::exp(logits[a] - top);
    total += out[static_cast<std::size_t>(a)];
  }
  for (auto& p : out) p /= total;
}

// Simultaneous (optimistic) multiplicative weights for `iters` rounds. Tracks
// time-averaged marginals, cumulative utilities and realised payoffs. When
// `joint` is non-null, also accumulates the time-averaged joint play.
struct LearnerRun {
  std::vector<Distribution> average;
  std::vector<Distribution> last;
  std::vector<double> regret;  // average external regret per player
  std::vector<double> average_value;
  std::size_t iterations = 0;
};

class NoRegretDynamics {
 public:
  NoRegretDynamics(const StageGame& stage, Learner learner, double step, std::uint64_t seed)
      : stage_(stage), learner_(learner), step_(step) {
    const std::size_t n = stage.num_players();
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> jitter(0.0, 0.05);
    for (PlayerId k = 0; k < n; ++k) {
      const auto A = static_cast<Eigen::Index>(stage.action_counts[k]);
      cumulative_.push_back(Eigen::VectorXd::Zero(A));
      Eigen::VectorXd bias(A);
      for (Eigen::Index a = 0; a < A; ++a) bias[a] = jitter(rng);
      bias_.push_back(bias);
      current_.emplace_back(static_cast<std::size_t>(A));
      softmax_into(bias, current_.back());
      sum_.emplace_back(static_cast<std::size_t>(A), 0.0);
    }
    realised_.assign(n, 0.0);
  }

  template <class OnRound>
  void run(std::size_t iters, OnRound&& on_round) {
    for (std::size_t t = 0; t < iters; ++t) {
      const auto u = stage_utilities(stage_, current_);
      on_round(current_);
      for (PlayerId k = 0; k < u.size(); ++k) {
        for (std::size_t a = 0; a < sum_[k].size(); ++a) sum_[k][a] += current_[k][a];
        realised_[k] += Eigen::Map<const Eigen::VectorXd>(current_[k].data(), u[k].size()).dot(u[k]);
        cumulative_[k] += u[k];
        Eigen::VectorXd logits = bias_[k] + step_ * cumulative_[k];
        if (learner_ == Learner::kOptimistic) logits += step_ * u[k];
        softmax_into(logits, current_[k]);
      }
      ++rounds_;
    }
  }

  LearnerRun snapshot() const {
    LearnerRun out;
    out.iterations = rounds_;
    const double T = static_cast<double>(std::max<std::size_t>(rounds_, 1));
    for (PlayerId k = 0; k < sum_.size(); ++k) {
      Distribution avg(sum_[k].size());
      for (std::size_t a = 0; a < avg.size(); ++a) avg[a] = sum_[k][a] / T;
      out.average.push_back(std::move(avg));
      out.regret.push_back((cumulative_[k].maxCoeff() - realised_[k]) / T);
      out.average_value.push_back(realised_[k] / T);
    }
    out.last = current_;
    return out;
  }

 private:
  const StageGame& stage_;
  Learner learner_;
  double step_;
  std::vector<Eigen::VectorXd> cumulative_;
  std::vector<Eigen::VectorXd> bias_;
  std::vector<Distribution> current_;
  std::vector<Distribution> sum_;
  std::vector<double> realised_;
  std::size_t rounds_ = 0;
};

inline constexpr double kOptimisticStep = 4.0;

}  // namespace detail

// Approximate Nash equilibrium of a stage game.
//
// Strictly dominated actions are removed first (iteratively); if one action per
// player survives the profile is exact. Otherwise no-regret dynamics run on the
// reduced game: optimistic MWU with constant step 4/range, checked at doubling
// checkpoints, or plain MWU with step sqrt(8 ln A / T)/range restarted on a
// doubling schedule. The certified gap of the averaged marginals and of the
// last iterate is computed by exact best responses; the better one is returned.
inline StageSolution solve_stage(const StageGame& stage, double eps, std::size_t max_iters,
                                 std::uint64_t seed, Learner learner = Learner::kOptimistic) {
  if (!(eps > 0.0)) throw DomainError("solve_stage: eps must be positive");
  const auto alive = detail::eliminate_dominated(stage);
  const auto reduced = detail::restrict_stage(stage, alive);
  StageSolution sol;

  bool trivial = true;
  for (const auto& a : alive) trivial = trivial && a.size() == 1;
  const double range = detail::payoff_range(reduced);
  if (trivial || range == 0.0) {
    std::vector<Distribution> uniform;
    for (auto c : reduced.action_counts) uniform.emplace_back(c, 1.0 / static_cast<double>(c));
    sol.strategies = detail::expand_profile(stage, alive, uniform);
    sol.values = stage_values(stage, sol.strategies);
    sol.gap = sol.averaged_gap = stage_gap(stage, sol.strategies);
    sol.converged = sol.gap <= eps;
    sol.source = StageSolution::Source::kEliminated;
    return sol;
  }

  std::size_t amax = 1;
  for (auto c : reduced.action_counts) amax = std::max(amax, c);

  auto consider = [&](const detail::LearnerRun& run) {
    const auto avg = detail::expand_profile(stage, alive, run.average);
    const auto last = detail::expand_profile(stage, alive, run.last);
    const double avg_gap = stage_gap(stage, avg);
    const double last_gap = stage_gap(stage, last);
    sol.averaged_gap = avg_gap;
    sol.regret_sum = 0.0;
    for (double r : run.regret) sol.regret_sum += r;
    if (last_gap < avg_gap) {
      sol.strategies = last;
      sol.gap = last_gap;
      sol.source = StageSolution::Source::kLastIterate;
    } else {
      sol.strategies = avg;
      sol.gap = avg_gap;
      sol.source = StageSolution::Source::kAverage;
    }
    return sol.gap <= eps;
  };

  std::size_t used = 0;
  if (learner == Learner::kOptimistic) {
    detail::NoRegretDynamics dyn(reduced, learner, detail::kOptimisticStep / range, seed);
    std::size_t checkpoint = 64;
    while (true) {
      const std::size_t target = std::min(checkpoint, max_iters);
      dyn.run(target - used, [](const auto&) {});
      used = target;
      if (consider(dyn.snapshot()) || used >= max_iters) break;
      checkpoint *= 2;
    }
  } else {
    std::size_t epoch = 64;
    while (true) {
      const std::size_t T = std::min(epoch, max_iters - used);
      const double step = std::sqrt(8.0 * std::log(static_cast<double>(std::max<std::size_t>(amax, 2))) /
                                    static_cast<double>(T)) / range;
      detail::NoRegretDynamics dyn(reduced, learner, step, seed + used);
      dyn.run(T, [](const auto&) {});
      used += T;
      if (consider(dyn.snapshot()) || used >= max_iters) break;
      epoch *= 2;
    }
  }
  sol.iterations = used;
  sol.values = stage_values(stage, sol.strategies);
  sol.converged = sol.gap <= eps;
  return sol;
}

// Time-averaged joint play of no-regret dynamics: an approximate coarse
// correlated equilibrium of the stage game.
struct StageCce {
  Distribution joint;                  // dense over all players' joint actions
  std::vector<Distribution> marginals;
  std::vector<double> values;          // expected payoffs under the joint distribution
  std::vector<double> regret;          // average external regret per player
};

inline StageCce cce_stage(const StageGame& stage, std::size_t iters, std::uint64_t seed,
                          Learner learner = Learner::kOptimistic) {
  if (iters == 0) throw DomainError("cce_stage needs at least one iteration");
  JointActionSpace space(stage.action_counts);
  StageCce out;
  out.joint.assign(space.size(), 0.0);
  const double range = detail::payoff_range(stage);
  std::size_t amax = 1;
  for (auto c : stage.action_counts) amax = std::max(amax, c);
  const double step =
      range == 0.0 ? 0.0
      : learner == Learner::kOptimistic
          ? detail::kOptimisticStep / range
          : std::sqrt(8.0 * std::log(static_cast<double>(std::max<std::size_t>(amax, 2))) /
                      static_cast<double>(iters)) / range;
  detail::NoRegretDynamics dyn(stage, learner, step, seed);
  JointAction a(stage.num_players());
  dyn.run(iters, [&](const std::vector<Distribution>& x) {
    std::fill(a.begin(), a.end(), 0);
    for (std::size_t i = 0; i < out.joint.size(); ++i) {
      double p = 1.0;
      for (PlayerId k = 0; k < a.size(); ++k) p *= x[k][a[k]];
      out.joint[i] += p;
      space.next(a);
    }
  });
  for (auto& p : out.joint) p /= static_cast<double>(iters);
  const auto run = dyn.snapshot();
  out.marginals = run.average;
  out.values = run.average_value;
  out.regret = run.regret;
  return out;
}

}  // namespace pmg
