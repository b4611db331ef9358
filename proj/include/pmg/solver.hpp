#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <thread>
#include <vector>

#include "pmg/best_response.hpp"
#include "pmg/errors.hpp"
#include "pmg/game.hpp"
#include "pmg/policy.hpp"
#include "pmg/stage_solver.hpp"
#include "pmg/valuation.hpp"

namespace pmg {

struct SolveOptions {
  double eps = 1e-2;
  std::uint64_t seed = 0;
  std::size_t max_stage_iters = std::size_t{1} << 20;
  Learner learner = Learner::kOptimistic;
  std::size_t jobs = 1;
  double best_response_tol = 1e-9;
};

struct SolveReport {
  ProductPolicy policy;
  // Stage values w_{k,h}(s) from backward induction (on the truncated game for
  // discounted inputs).
  ValueTable stage_values;
  // Exact values of `policy` in the input game.
  ValueTable values;
  std::vector<double> stage_gaps;  // [h * S + s]
  double stage_tolerance = 0.0;
  std::size_t horizon = 0;         // layers solved (H, or the effective horizon)
  GapReport certified;
  double certified_gap = 0.0;
  std::size_t total_iterations = 0;
  double runtime_ms = 0.0;
};

// Per-node seed; independent of scheduling.
inline std::uint64_t node_seed(std::uint64_t seed, std::size_t h, StateId s) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(mix(mix(seed) ^ static_cast<std::uint64_t>(h)) ^ static_cast<std::uint64_t>(s));
}

namespace detail {

// Runs fn(s) for every state, on up to `jobs` threads.
template <class Fn>
void for_each_state(std::size_t num_states, std::size_t jobs, Fn&& fn) {
  jobs = std::max<std::size_t>(1, std::min(jobs, num_states));
  if (jobs == 1) {
    for (StateId s = 0; s < num_states; ++s) fn(s);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t j = 0; j < jobs; ++j) {
    pool.emplace_back([&] {
      for (std::size_t s = next++; s < num_states; s = next++) fn(s);
    });
  }
  for (auto& t : pool) t.join();
}

inline Eigen::MatrixXd layer_matrix(const ValueTable& w, std::size_t h) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(w.num_states()), static_cast<Eigen::Index>(w.num_players()));
  for (StateId s = 0; s < w.num_states(); ++s) {
    for (PlayerId k = 0; k < w.num_players(); ++k) {
      m(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(k)) = w.at(k, h, s);
    }
  }
  return m;
}

inline double elapsed_ms(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace detail

// Backward induction over stage games. Each stage is solved to eps/(2H); the
// returned gap is recomputed from exact best responses.
inline SolveReport solve_finite(const MarkovGame& game, const SolveOptions& opts) {
  if (!game.horizon().is_finite()) throw DomainError("solve_finite needs a finite horizon");
  if (!(opts.eps > 0.0)) throw DomainError("solve_finite: eps must be positive");
  const auto start = std::chrono::steady_clock::now();
  const std::size_t H = game.num_layers();
  const std::size_t S = game.num_states();
  const std::size_t n = game.num_players();

  SolveReport report;
  report.horizon = H;
  report.stage_tolerance = opts.eps / (2.0 * static_cast<double>(H));
  report.policy = ProductPolicy(game.action_counts(), H, S);
  report.stage_values = ValueTable(n, H, S);
  report.stage_gaps.assign(H * S, 0.0);
  std::vector<std::size_t> iterations(H * S, 0);

  Eigen::MatrixXd next = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(S), static_cast<Eigen::Index>(n));
  for (std::size_t h = H; h-- > 0;) {
    detail::for_each_state(S, opts.jobs, [&](StateId s) {
      const auto stage = build_stage(game, h, s, next);
      const auto sol = solve_stage(stage, report.stage_tolerance, opts.max_stage_iters,
                                   node_seed(opts.seed, h, s), opts.learner);
      for (PlayerId k = 0; k < n; ++k) {
        report.policy.at(k, h, s) = sol.strategies[k];
        report.stage_values.at(k, h, s) = sol.values[k];
      }
      report.stage_gaps[h * S + s] = sol.gap;
      iterations[h * S + s] = sol.iterations;
    });
    next = detail::layer_matrix(report.stage_values, h);
  }
  for (auto it : iterations) report.total_iterations += it;
  report.values = evaluate_finite(game, report.policy);
  report.certified = gap_report(game, report.policy, opts.best_response_tol);
  report.certified_gap = report.certified.max_gap;
  report.runtime_ms = detail::elapsed_ms(start);
  return report;
}

// Finite game with `steps` reward steps and rewards gamma^h r (h zero-based).
inline MarkovGame truncate_discounted(const MarkovGame& game, std::size_t steps) {
  if (game.horizon().is_finite()) throw DomainError("truncate_discounted needs a discounted game");
  if (steps == 0) throw DomainError("truncation needs at least one step");
  std::vector<std::vector<StateInteraction>> layers;
  double scale = 1.0;
  for (std::size_t h = 0; h < steps; ++h) {
    auto layer = game.layers().front();
    for (auto& st : layer) {
      for (auto& e : st.edges) e.payoff *= scale;
    }
    layers.push_back(std::move(layer));
    scale *= game.horizon().gamma();
  }
  return MarkovGame(game.action_counts(), game.num_states(), HorizonSpec::finite(steps),
                    std::move(layers), game.initial_distribution());
}

// Horizon H with 2n gamma^H / (1-gamma) <= eps/2.
inline std::size_t truncation_horizon(const MarkovGame& game, double eps) {
  const double gamma = game.horizon().gamma();
  const double n = static_cast<double>(game.num_players());
  return effective_horizon(gamma, eps * (1.0 - gamma) / (4.0 * n));
}

// Solves the truncated finite game with budget eps/2 and certifies the
// resulting nonstationary policy (last layer repeated forever) in the
// discounted game.
inline SolveReport solve_discounted(const MarkovGame& game, const SolveOptions& opts) {
  if (game.horizon().is_finite()) throw DomainError("solve_discounted needs a discounted game");
  if (!(opts.eps > 0.0)) throw DomainError("solve_discounted: eps must be positive");
  const auto start = std::chrono::steady_clock::now();
  const auto truncated = truncate_discounted(game, truncation_horizon(game, opts.eps));
  SolveOptions inner = opts;
  inner.eps = opts.eps / 2.0;
  SolveReport report = solve_finite(truncated, inner);
  report.values = evaluate_discounted(game, report.policy);
  report.certified = gap_report(game, report.policy, opts.best_response_tol);
  report.certified_gap = report.certified.max_gap;
  report.runtime_ms = detail::elapsed_ms(start);
  return report;
}

inline SolveReport solve(const MarkovGame& game, const SolveOptions& opts) {
  return game.horizon().is_finite() ? solve_finite(game, opts) : solve_discounted(game, opts);
}

struct CceSolveReport {
  CorrelatedPolicy sigma;
  ValueTable stage_values;
  double max_stage_regret = 0.0;
};

// Correlated policy built by backward induction where every stage is the
// time-averaged joint play of `iters` rounds of no-regret dynamics against the
// continuation values of the correlated policy itself.
inline CceSolveReport solve_cce_finite(const MarkovGame& game, std::size_t iters, std::uint64_t seed,
                                       Learner learner = Learner::kOptimistic, std::size_t jobs = 1) {
  if (!game.horizon().is_finite()) throw DomainError("solve_cce_finite needs a finite horizon");
  const std::size_t H = game.num_layers();
  const std::size_t S = game.num_states();
  const std::size_t n = game.num_players();
  CceSolveReport report{CorrelatedPolicy(game.action_counts(), H, S), ValueTable(n, H, S), 0.0};
  std::vector<double> regrets(H * S, 0.0);
  Eigen::MatrixXd next = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(S), static_cast<Eigen::Index>(n));
  for (std::size_t h = H; h-- > 0;) {
    detail::for_each_state(S, jobs, [&](StateId s) {
      const auto stage = build_stage(game, h, s, next);
      const auto cce = cce_stage(stage, iters, node_seed(seed, h, s), learner);
      report.sigma.at(h, s) = cce.joint;
      for (PlayerId k = 0; k < n; ++k) report.stage_values.at(k, h, s) = cce.values[k];
      regrets[h * S + s] = *std::max_element(cce.regret.begin(), cce.regret.end());
    });
    next = detail::layer_matrix(report.stage_values, h);
  }
  report.max_stage_regret = *std::max_element(regrets.begin(), regrets.end());
  return report;
}

struct CollapseReport {
  ProductPolicy marginal;
  GapReport cce;        // gaps of sigma against independent deviations
  GapReport ne;         // gaps of the marginal product policy
  double factor = 0.0;  // n for switching-control games, 2 for two-player games
  double bound = 0.0;   // factor * cce.max_gap + tol
  bool bound_asserted = false;
  bool bound_holds = false;
};

// Marginalises sigma and certifies both policies. The bound n * eps_cce + tol
// is only asserted on zero-sum polymatrix games with switching control.
inline CollapseReport collapse_cce(const MarkovGame& game, const CorrelatedPolicy& sigma, double tol,
                                   double br_tol = 1e-9) {
  CollapseReport r;
  r.marginal = marginalize(sigma);
  r.cce = gap_report(game, sigma, br_tol);
  r.ne = gap_report(game, r.marginal, br_tol);
  r.factor = static_cast<double>(game.num_players());
  r.bound = r.factor * r.cce.max_gap + tol;
  r.bound_asserted = is_switching_control(game) && validate(game).empty();
  r.bound_holds = r.ne.max_gap <= r.bound;
  return r;
}

// Two-player zero-sum collapse: marginal gap <= 2 * eps_cce + tol, no
// restriction on who controls the transitions.
inline CollapseReport collapse_two_player(const MarkovGame& game, const CorrelatedPolicy& sigma,
                                          double tol, double br_tol = 1e-9) {
  if (game.num_players() != 2) throw DomainError("collapse_two_player needs exactly two players");
  CollapseReport r;
  r.marginal = marginalize(sigma);
  r.cce = gap_report(game, sigma, br_tol);
  r.ne = gap_report(game, r.marginal, br_tol);
  r.factor = 2.0;
  r.bound = 2.0 * r.cce.max_gap + tol;
  r.bound_asserted = validate(game).empty();
  r.bound_holds = r.ne.max_gap <= r.bound;
  return r;
}

}  // namespace pmg
