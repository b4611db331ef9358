#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "pmg/best_response.hpp"
#include "pmg/game.hpp"
#include "pmg/policy.hpp"
#include "pmg/valuation.hpp"

namespace pmg::counterexamples {

// Three players: player 0 has actions {a1, a2}, player 1 has {b1, b2}, player 2
// has a single action. States s1, s2, s3 are 0, 1, 2. Players 0 and 1 jointly
// control every transition, which breaks switching control.
//
// Transitions: from s1, (a1,b1) leads to s3 and anything else to s2; from s2,
// (a1,b1) leads to s3 and anything else to s1; s3 moves to s1 or s2 uniformly.
// Rewards: a1 (b1) pays 1/20 to player 0 (1) in s1 and s2; in s3 both pay -1/2.
// Player 2 receives the negated sum through its edges.
struct Example {
  MarkovGame game;
  CorrelatedPolicy sigma;  // 1/2 on (a1,b2) and 1/2 on (a2,b1) in every state
};

inline constexpr double kFiniteExampleGap = 13.0 / 160.0;
inline constexpr double kInfiniteExampleGap = 2.0 / 15.0;
inline constexpr double kInfiniteExampleGamma = 2.0 / 3.0;

namespace detail {

inline std::vector<StateInteraction> example_layer() {
  const double bonus = 1.0 / 20.0;
  auto absorb = [](PlayerId k, const Eigen::MatrixXd& paid) {
    // k receives `paid` (2x1) from player 2, who receives its negation.
    return std::vector<EdgeGame>{{k, 2, paid}, {2, k, -paid.transpose()}};
  };
  std::vector<StateInteraction> layer(3);
  for (StateId s : {StateId{0}, StateId{1}}) {
    auto& st = layer[s];
    st.edges.push_back({0, 1, Eigen::MatrixXd::Zero(2, 2)});
    st.edges.push_back({1, 0, Eigen::MatrixXd::Zero(2, 2)});
    for (PlayerId k : {PlayerId{0}, PlayerId{1}}) {
      Eigen::MatrixXd paid(2, 1);
      paid << bonus, 0.0;
      for (auto& e : absorb(k, paid)) st.edges.push_back(std::move(e));
    }
  }
  for (PlayerId k : {PlayerId{0}, PlayerId{1}}) {
    Eigen::MatrixXd paid = Eigen::MatrixXd::Constant(2, 1, -0.5);
    for (auto& e : absorb(k, paid)) layer[2].edges.push_back(std::move(e));
  }
  // Rows: (a1,b1), (a1,b2), (a2,b1), (a2,b2).
  for (auto& st : layer) {
    st.controllers = {0, 1};
    st.transition = Eigen::MatrixXd::Zero(4, 3);
  }
  layer[0].transition.row(0) << 0, 0, 1;
  for (int r = 1; r < 4; ++r) layer[0].transition.row(r) << 0, 1, 0;
  layer[1].transition.row(0) << 0, 0, 1;
  for (int r = 1; r < 4; ++r) layer[1].transition.row(r) << 1, 0, 0;
  for (int r = 0; r < 4; ++r) layer[2].transition.row(r) << 0.5, 0.5, 0;
  return layer;
}

inline CorrelatedPolicy example_sigma(std::size_t layers) {
  CorrelatedPolicy sigma({2, 2, 1}, layers, 3);
  for (std::size_t h = 0; h < layers; ++h) {
    for (StateId s = 0; s < 3; ++s) sigma.at(h, s) = {0.0, 0.5, 0.5, 0.0};
  }
  return sigma;
}

}  // namespace detail

// Finite-horizon example with two reward-bearing steps starting in s1.
inline Example build_finite_example() {
  auto layer = detail::example_layer();
  MarkovGame game({2, 2, 1}, 3, HorizonSpec::finite(2), {layer, layer}, {1.0, 0.0, 0.0});
  return {std::move(game), detail::example_sigma(2)};
}

// Discounted example: gamma = 2/3 and a uniform initial distribution.
inline Example build_infinite_example() {
  MarkovGame game({2, 2, 1}, 3, HorizonSpec::discounted(kInfiniteExampleGamma), {detail::example_layer()},
                  {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0});
  return {std::move(game), detail::example_sigma(1)};
}

// Same rewards, but player 0 alone controls each transition: the row for a is
// the average over player 1's actions of the original rows.
inline MarkovGame single_controller_variant(const MarkovGame& game) {
  auto layers = game.layers();
  for (auto& layer : layers) {
    for (auto& st : layer) {
      if (st.controllers != std::vector<PlayerId>{0, 1}) continue;
      const auto a0 = static_cast<Eigen::Index>(game.num_actions(0));
      const auto a1 = static_cast<Eigen::Index>(game.num_actions(1));
      Eigen::MatrixXd t = Eigen::MatrixXd::Zero(a0, st.transition.cols());
      for (Eigen::Index a = 0; a < a0; ++a) {
        for (Eigen::Index b = 0; b < a1; ++b) t.row(a) += st.transition.row(a * a1 + b) / static_cast<double>(a1);
      }
      st.controllers = {0};
      st.transition = std::move(t);
    }
  }
  return MarkovGame(game.action_counts(), game.num_states(), game.horizon(), std::move(layers),
                    game.initial_distribution());
}

// pi'_k x sigma_{-k} as a correlated policy.
inline CorrelatedPolicy deviate(const CorrelatedPolicy& sigma, PlayerId k, const PolicyFactor& deviation) {
  CorrelatedPolicy out = sigma;
  const auto others = marginal_excluding(sigma, k);
  const auto& space = sigma.space();
  for (std::size_t h = 0; h < sigma.num_layers(); ++h) {
    for (StateId s = 0; s < sigma.num_states(); ++s) {
      const auto& rest = others[h * sigma.num_states() + s];
      auto& joint = out.at(h, s);
      JointAction a(sigma.num_players(), 0);
      for (std::size_t i = 0; i < joint.size(); ++i) {
        std::size_t rest_index = 0;
        for (PlayerId j = 0; j < a.size(); ++j) {
          if (j != k) rest_index = rest_index * space.radices()[j] + a[j];
        }
        joint[i] = deviation.step(h, s)[a[k]] * rest[rest_index];
        space.next(a);
      }
    }
  }
  return out;
}

// Player-0 policy playing a1 with probability p in s1 and q in s2 at every step.
inline PolicyFactor stationary_deviation(const MarkovGame& game, double p, double q) {
  PolicyFactor f(2, game.num_layers(), 3);
  for (std::size_t h = 0; h < game.num_layers(); ++h) {
    f.at(h, 0) = {p, 1.0 - p};
    f.at(h, 1) = {q, 1.0 - q};
    f.at(h, 2) = {1.0, 0.0};
  }
  return f;
}

struct NoCollapseReport {
  std::vector<double> sigma_values;       // V^sigma(rho) per player
  std::vector<double> deviation_values;   // player 0 at (p,q) = (1,1), (0,0), (1,0), (0,1)
  std::vector<double> marginal_values;    // V^{pi^sigma}(rho) per player
  double marginal_best_deviation = 0.0;   // player 0 plays a2 everywhere against pi^sigma_{-0}
  double exhibited_gain = 0.0;            // marginal_best_deviation - marginal_values[0]
  double enumerated_best = 0.0;           // max over all deterministic deviations of player 0
  GapReport cce;
  GapReport ne;
  double expected_gap = 0.0;
  bool pass = false;
  std::string failure;
};

// Certifies that sigma is an exact CCE while its marginal product policy is
// exploitable by at least kFiniteExampleGap (finite) or kInfiniteExampleGap (discounted).
inline NoCollapseReport verify_no_collapse(const Example& ex) {
  const auto& game = ex.game;
  const bool finite = game.horizon().is_finite();
  const auto& rho = game.initial_distribution();
  NoCollapseReport r;
  r.expected_gap = finite ? kFiniteExampleGap : kInfiniteExampleGap;
  auto value0 = [&](const auto& policy) { return evaluate_at_initial(evaluate(game, policy), rho); };

  r.sigma_values = value0(ex.sigma);
  const double grid[4][2] = {{1, 1}, {0, 0}, {1, 0}, {0, 1}};
  for (const auto& pq : grid) {
    r.deviation_values.push_back(value0(deviate(ex.sigma, 0, stationary_deviation(game, pq[0], pq[1])))[0]);
  }
  r.enumerated_best = -std::numeric_limits<double>::infinity();
  for (const auto& f : enumerate_deterministic(game, 0)) {
    r.enumerated_best = std::max(r.enumerated_best, value0(deviate(ex.sigma, 0, f))[0]);
  }

  const auto pi = marginalize(ex.sigma);
  r.marginal_values = value0(pi);
  r.marginal_best_deviation = value0(pi.with_factor(0, stationary_deviation(game, 0, 0)))[0];
  r.exhibited_gain = r.marginal_best_deviation - r.marginal_values[0];
  r.cce = gap_report(game, ex.sigma);
  r.ne = gap_report(game, pi);

  const double tol = 1e-9;
  if (r.cce.max_gap > tol) {
    r.failure = "sigma has CCE gap " + std::to_string(r.cce.max_gap);
  } else if (r.ne.max_gap < r.expected_gap - tol) {
    r.failure = "marginal policy has NE gap " + std::to_string(r.ne.max_gap) + " < " +
                std::to_string(r.expected_gap);
  } else if (std::abs(r.enumerated_best - r.cce.players[0].best_response_value) > tol) {
    r.failure = "enumerated best deviation disagrees with the best-response solver";
  }
  r.pass = r.failure.empty();
  return r;
}

}  // namespace pmg::counterexamples
