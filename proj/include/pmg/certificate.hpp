#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "pmg/best_response.hpp"
#include "pmg/errors.hpp"
#include "pmg/game.hpp"
#include "pmg/policy.hpp"
#include "pmg/valuation.hpp"

namespace pmg {

inline constexpr double kFeasibilityTol = 1e-9;

// Where the zero boundary value sits for finite horizons with H layers.
//  kAfterLastStep: rewards at every layer, w_{H+1} = 0 (the library's convention).
//  kAtLastStep:    rewards at layers 1..H-1 and the constraint w_H = 0; the
//                  last layer of the game only carries the boundary.
enum class BoundaryConvention { kAfterLastStep, kAtLastStep };

// Evaluation of the Nash program at a candidate (pi, w).
//
// Constraints: w_{k,h}(s) >= r_{k,h}(s,a,pi_{-k}) + P_h(s,a,pi_{-k}) w_{k,h+1} for
// every (s,h,k,a), the boundary condition and simplex membership of pi.
// Objective: sum_k (rho^T w_{k,1} - V_k^pi(rho)).
struct CertificateReport {
  double objective = 0.0;
  double max_violation = 0.0;
  std::vector<double> residuals;  // per player: rho^T w_{k,1} - V_k(rho)
  std::size_t constraints = 0;
  double threshold = 0.0;
  bool feasible = false;
  bool pass = false;
};

namespace detail {

inline double simplex_violation(const ProductPolicy& pi) {
  double worst = 0.0;
  for (const auto& f : pi.factors()) {
    for (std::size_t h = 0; h < f.num_layers(); ++h) {
      for (StateId s = 0; s < f.num_states(); ++s) {
        const auto& d = f.at(h, s);
        double total = 0.0;
        for (double x : d) {
          worst = std::max(worst, -x);
          total += x;
        }
        worst = std::max(worst, std::abs(total - 1.0));
      }
    }
  }
  return worst;
}

inline void check_shapes(const MarkovGame& game, const ProductPolicy& pi, const ValueTable& w) {
  if (pi.num_players() != game.num_players() || pi.num_states() != game.num_states() ||
      pi.action_counts() != game.action_counts()) {
    throw ShapeError("policy does not match the game");
  }
  if (w.num_players() != game.num_players() || w.num_states() != game.num_states() ||
      w.num_layers() != pi.num_layers()) {
    throw ShapeError("value table does not match the policy");
  }
}

inline MarkovGame leading_layers(const MarkovGame& game, std::size_t count) {
  std::vector<std::vector<StateInteraction>> layers(game.layers().begin(),
                                                    game.layers().begin() + static_cast<std::ptrdiff_t>(count));
  return MarkovGame(game.action_counts(), game.num_states(), HorizonSpec::finite(count), std::move(layers),
                    game.initial_distribution());
}

inline ProductPolicy leading_layers(const ProductPolicy& pi, std::size_t count) {
  std::vector<PolicyFactor> factors;
  for (const auto& f : pi.factors()) {
    PolicyFactor g(f.num_actions(), count, f.num_states());
    for (std::size_t h = 0; h < count; ++h) {
      for (StateId s = 0; s < f.num_states(); ++s) g.at(h, s) = f.at(h, s);
    }
    factors.push_back(std::move(g));
  }
  return ProductPolicy(std::move(factors));
}

inline void finish(CertificateReport& r, double threshold) {
  r.objective = 0.0;
  for (double x : r.residuals) r.objective += x;
  r.threshold = threshold;
  r.feasible = r.max_violation <= kFeasibilityTol;
  r.pass = r.feasible && r.objective <= threshold;
}

}  // namespace detail

inline CertificateReport pne_check_finite(const MarkovGame& game, const ProductPolicy& pi, const ValueTable& w,
                                          double threshold,
                                          BoundaryConvention convention = BoundaryConvention::kAfterLastStep) {
  if (!game.horizon().is_finite()) throw DomainError("pne_check_finite needs a finite horizon");
  detail::check_shapes(game, pi, w);
  const std::size_t H = game.num_layers();
  if (pi.num_layers() != H) throw ShapeError("policy needs one layer per step");
  const std::size_t reward_steps = convention == BoundaryConvention::kAfterLastStep ? H : H - 1;
  if (reward_steps == 0) throw DomainError("boundary convention leaves no reward steps");

  CertificateReport r;
  r.max_violation = detail::simplex_violation(pi);
  const std::size_t S = game.num_states();
  if (convention == BoundaryConvention::kAtLastStep) {
    for (PlayerId k = 0; k < game.num_players(); ++k) {
      for (StateId s = 0; s < S; ++s) {
        r.max_violation = std::max(r.max_violation, std::abs(w.at(k, H - 1, s)));
        ++r.constraints;
      }
    }
  }

  const auto sub_game = reward_steps == H ? game : detail::leading_layers(game, reward_steps);
  const auto sub_pi = reward_steps == H ? pi : detail::leading_layers(pi, reward_steps);
  const auto current = evaluate_at_initial(evaluate_finite(sub_game, sub_pi), game.initial_distribution());
  for (PlayerId k = 0; k < game.num_players(); ++k) {
    const auto mdp = induce_mdp(sub_game, sub_pi, k);
    for (std::size_t h = 0; h < reward_steps; ++h) {
      Eigen::VectorXd next = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(S));
      if (h + 1 < H) next = w.column(k, h + 1);
      for (StateId s = 0; s < S; ++s) {
        const Eigen::VectorXd rhs = mdp.reward(h, s) + mdp.transition(h, s) * next;
        const double slack = rhs.maxCoeff() - w.at(k, h, s);
        r.max_violation = std::max(r.max_violation, slack);
        r.constraints += static_cast<std::size_t>(rhs.size());
      }
    }
    double start = 0.0;
    for (StateId s = 0; s < S; ++s) start += game.initial_distribution()[s] * w.at(k, 0, s);
    r.residuals.push_back(start - current[k]);
  }
  detail::finish(r, threshold);
  return r;
}

// Discounted program. Layer h < L-1 of a nonstationary policy is constrained
// against w_{h+1}; the last (stationary) layer against itself. For a
// single-layer policy this is exactly the stationary program.
inline CertificateReport pne_check_discounted(const MarkovGame& game, const ProductPolicy& pi, const ValueTable& w,
                                              double threshold) {
  if (game.horizon().is_finite()) throw DomainError("pne_check_discounted needs a discounted game");
  detail::check_shapes(game, pi, w);
  const double gamma = game.horizon().gamma();
  const std::size_t L = pi.num_layers();
  const std::size_t S = game.num_states();
  CertificateReport r;
  r.max_violation = detail::simplex_violation(pi);
  const auto current = evaluate_at_initial(evaluate_discounted(game, pi), game.initial_distribution());
  for (PlayerId k = 0; k < game.num_players(); ++k) {
    const auto mdp = induce_mdp(game, pi, k);
    for (std::size_t h = 0; h < L; ++h) {
      const Eigen::VectorXd next = w.column(k, std::min(h + 1, L - 1));
      for (StateId s = 0; s < S; ++s) {
        const Eigen::VectorXd rhs = mdp.reward(h, s) + gamma * (mdp.transition(h, s) * next);
        r.max_violation = std::max(r.max_violation, rhs.maxCoeff() - w.at(k, h, s));
        r.constraints += static_cast<std::size_t>(rhs.size());
      }
    }
    double start = 0.0;
    for (StateId s = 0; s < S; ++s) start += game.initial_distribution()[s] * w.at(k, 0, s);
    r.residuals.push_back(start - current[k]);
  }
  detail::finish(r, threshold);
  return r;
}

inline CertificateReport pne_check(const MarkovGame& game, const ProductPolicy& pi, const ValueTable& w,
                                   double threshold) {
  return game.horizon().is_finite() ? pne_check_finite(game, pi, w, threshold)
                                    : pne_check_discounted(game, pi, w, threshold);
}

// Discounted objective with V^pi obtained by iterating V <- r + gamma P V to a
// fixed point instead of a linear solve.
inline double discounted_objective_by_iteration(const MarkovGame& game, const ProductPolicy& pi, const ValueTable& w) {
  if (game.horizon().is_finite()) throw DomainError("needs a discounted game");
  detail::check_shapes(game, pi, w);
  const double gamma = game.horizon().gamma();
  const std::size_t L = pi.num_layers();
  const Eigen::MatrixXd P = detail::transition_matrix(game, pi, 0, L - 1);
  const Eigen::MatrixXd R = detail::reward_matrix(game, pi, 0, L - 1);
  Eigen::MatrixXd V = Eigen::MatrixXd::Zero(R.rows(), R.cols());
  for (std::size_t iter = 0; iter < 1'000'000; ++iter) {
    Eigen::MatrixXd next = R + gamma * P * V;
    const double change = (next - V).cwiseAbs().maxCoeff();
    V = std::move(next);
    if (change <= 1e-15 * std::max(1.0, V.cwiseAbs().maxCoeff())) break;
  }
  for (std::size_t h = L - 1; h-- > 0;) {
    V = detail::reward_matrix(game, pi, 0, h) + gamma * detail::transition_matrix(game, pi, 0, h) * V;
  }
  double objective = 0.0;
  const auto& rho = game.initial_distribution();
  for (PlayerId k = 0; k < game.num_players(); ++k) {
    for (StateId s = 0; s < game.num_states(); ++s) {
      objective += rho[s] * (w.at(k, 0, s) - V(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(k)));
    }
  }
  return objective;
}

// w_{k,h}(s) = best-response value of player k against pi_{-k}: the smallest
// feasible value table for pi.
inline ValueTable best_response_values(const MarkovGame& game, const ProductPolicy& pi, double tol = 1e-9) {
  ValueTable w(game.num_players(), pi.num_layers(), game.num_states());
  for (PlayerId k = 0; k < game.num_players(); ++k) {
    const auto br = best_response(game, pi, k, tol);
    for (std::size_t h = 0; h < pi.num_layers(); ++h) {
      for (StateId s = 0; s < game.num_states(); ++s) w.at(k, h, s) = br.values[h][static_cast<Eigen::Index>(s)];
    }
  }
  return w;
}

struct OptimalityImpliesNe {
  GapReport gaps;
  double bound = 0.0;  // objective + 1e-6
  bool holds = false;
};

// A feasible point bounds every player's exploitability by the objective.
inline OptimalityImpliesNe optimum_implies_ne(const CertificateReport& report, const MarkovGame& game,
                                              const ProductPolicy& pi, const ValueTable& w) {
  detail::check_shapes(game, pi, w);
  if (!report.feasible || report.max_violation > kFeasibilityTol) {
    throw StructuralError("optimum_implies_ne needs a feasible point (max violation " +
                          std::to_string(report.max_violation) + ")");
  }
  OptimalityImpliesNe out;
  out.gaps = gap_report(game, pi);
  out.bound = report.objective + 1e-6;
  out.holds = std::all_of(out.gaps.players.begin(), out.gaps.players.end(),
                          [&](const PlayerGap& g) { return g.gap <= out.bound; });
  return out;
}

}  // namespace pmg
