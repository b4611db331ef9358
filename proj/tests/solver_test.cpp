#include <gtest/gtest.h>

#include <random>

#include "pmg/pmg.hpp"
#include "test_util.hpp"

namespace pmg {
namespace {

namespace cx = counterexamples;

SolveOptions options(double eps, std::uint64_t seed = 0) {
  SolveOptions opts;
  opts.eps = eps;
  opts.seed = seed;
  return opts;
}

void expect_zero_sum_tables(const SolveReport& r) {
  for (const auto* w : {&r.stage_values, &r.values}) {
    for (std::size_t h = 0; h < w->num_layers(); ++h) {
      for (StateId s = 0; s < w->num_states(); ++s) {
        double total = 0.0;
        for (PlayerId k = 0; k < w->num_players(); ++k) total += w->at(k, h, s);
        EXPECT_NEAR(total, 0.0, 1e-9);
      }
    }
  }
}

TEST(SolveFinite, TwoPlayerMatchesClosedFormMinimax) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto game = testing::two_by_two_game(seed, 2, 2);
    const auto r = solve_finite(game, options(1e-3, seed));
    EXPECT_LE(r.certified_gap, 1e-3);
    const double v = evaluate_at_initial(r.values, game.initial_distribution())[0];
    EXPECT_NEAR(v, testing::shapley_value(game), 1e-3) << seed;
  }
}

TEST(SolveFinite, TwoPlayerExhaustivePureMinimax) {
  // Both stage games have a pure saddle point, so deterministic-policy minimax
  // (max over player-0 policies of min over player-1 policies) is the value.
  std::vector<StateInteraction> layer(2);
  Eigen::MatrixXd m0(2, 2), m1(2, 2);
  m0 << 0.4, 0.6, 0.1, -0.2;
  m1 << -0.3, 0.2, -0.5, -0.1;
  for (StateId s = 0; s < 2; ++s) {
    const auto& m = s == 0 ? m0 : m1;
    layer[s].edges = {{0, 1, m}, {1, 0, -m.transpose()}};
    layer[s].controllers = {s == 0 ? PlayerId{0} : PlayerId{1}};
    layer[s].transition = Eigen::MatrixXd(2, 2);
    layer[s].transition << 0.7, 0.3, 0.2, 0.8;
  }
  const MarkovGame game({2, 2}, 2, HorizonSpec::finite(2), {layer, layer}, {0.5, 0.5});
  double maximin = -1e300;
  for (const auto& f : testing::all_deterministic(game, 0, 2)) {
    double worst = 1e300;
    for (const auto& g : testing::all_deterministic(game, 1, 2)) {
      ProductPolicy pi(std::vector<PolicyFactor>{f, g});
      worst = std::min(worst, testing::forward_value(game, pi)[0]);
    }
    maximin = std::max(maximin, worst);
  }
  const auto r = solve_finite(game, options(1e-4));
  EXPECT_NEAR(maximin, testing::shapley_value(game), 1e-12);
  EXPECT_NEAR(evaluate_at_initial(r.values, game.initial_distribution())[0], maximin, 1e-4);
}

TEST(SolveFinite, DominantProfileIsExact) {
  // r_kj(a,b) = f(a) - f(b) with f = (0.5, -0.5): action 0 strictly dominates.
  Eigen::MatrixXd m(2, 2);
  m << 0.0, 1.0, -1.0, 0.0;
  std::vector<StateInteraction> layer(2);
  for (auto& st : layer) {
    for (PlayerId k = 0; k < 3; ++k) {
      for (PlayerId j = 0; j < 3; ++j) {
        if (j != k) st.edges.push_back({k, j, m});
      }
    }
    st.controllers = {1};
    st.transition = Eigen::MatrixXd(2, 2);
    st.transition << 0.3, 0.7, 0.3, 0.7;
  }
  const MarkovGame game({2, 2, 2}, 2, HorizonSpec::finite(3), {layer, layer, layer}, {1.0, 0.0});
  ASSERT_TRUE(validate(game).empty());
  const auto r = solve_finite(game, options(1e-6));
  EXPECT_EQ(r.certified_gap, 0.0);
  for (PlayerId k = 0; k < 3; ++k) {
    for (std::size_t h = 0; h < 3; ++h) {
      for (StateId s = 0; s < 2; ++s) EXPECT_EQ(r.policy.at(k, h, s), (Distribution{1.0, 0.0}));
    }
  }
}

TEST(SolveFinite, RandomSwitchingControlCertified) {
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const auto game = io::generate(testing::small_config(seed, 3, 3, 3));
    const auto r = solve_finite(game, options(1e-2, seed));
    EXPECT_LE(r.certified_gap, 1e-2) << seed;
    EXPECT_EQ(r.horizon, 3u);
    EXPECT_DOUBLE_EQ(r.stage_tolerance, 1e-2 / 6.0);
    expect_zero_sum_tables(r);
    // The certificate is recomputed independently of the solver's report.
    EXPECT_EQ(gap_report(game, r.policy).max_gap, r.certified_gap);
  }
}

TEST(SolveFinite, HalvingEpsDoesNotIncreaseGap) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto game = io::generate(testing::small_config(seed + 100, 3, 3, 3));
    const auto coarse = solve_finite(game, options(2e-2, seed));
    const auto fine = solve_finite(game, options(1e-2, seed));
    EXPECT_LE(fine.certified_gap, coarse.certified_gap + 1e-12) << seed;
  }
}

TEST(SolveFinite, ParallelMatchesSerial) {
  const auto game = io::generate(testing::small_config(9, 4, 5, 3));
  auto opts = options(1e-2, 3);
  const auto serial = solve_finite(game, opts);
  opts.jobs = 4;
  const auto parallel = solve_finite(game, opts);
  EXPECT_EQ(serial.policy, parallel.policy);
  EXPECT_EQ(serial.certified_gap, parallel.certified_gap);
}

TEST(SolveFinite, RejectsWrongHorizon) {
  EXPECT_THROW(solve_finite(cx::build_infinite_example().game, options(1e-2)), DomainError);
  EXPECT_THROW(solve_finite(io::generate(testing::small_config(1)), options(0.0)), DomainError);
}

TEST(SolveDiscounted, SingleControllerCounterexample) {
  const auto game = cx::single_controller_variant(cx::build_infinite_example().game);
  ASSERT_TRUE(is_switching_control(game));
  const auto r = solve_discounted(game, options(1e-2));
  EXPECT_LE(r.certified_gap, 1e-2);
  EXPECT_EQ(r.horizon, truncation_horizon(game, 1e-2));
  expect_zero_sum_tables(r);
}

TEST(SolveDiscounted, ZeroRewards) {
  auto cfg = testing::discounted_config(2, 0.5);
  cfg.density = 0.0;
  const auto r = solve_discounted(io::generate(cfg), options(1e-2));
  EXPECT_EQ(r.certified_gap, 0.0);
}

TEST(SolveDiscounted, MatchesShapleyOracle) {
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const auto game = testing::two_by_two_game(seed, 2, std::nullopt, 0.8);
    const double eps = 1e-2;
    const auto r = solve_discounted(game, options(eps, seed));
    EXPECT_LE(r.certified_gap, eps);
    EXPECT_NEAR(evaluate_at_initial(r.values, game.initial_distribution())[0], testing::shapley_value(game), eps)
        << seed;
  }
}

TEST(TruncateDiscounted, ScalesRewards) {
  const auto ex = cx::build_infinite_example();
  const auto t = truncate_discounted(ex.game, 3);
  ASSERT_EQ(t.num_layers(), 3u);
  const JointAction a{0, 1, 0};
  EXPECT_NEAR(reward(t, 2, 0, 0, a), reward(ex.game, 0, 0, 0, a) * 4.0 / 9.0, 1e-15);
  EXPECT_THROW(truncate_discounted(ex.game, 0), DomainError);
}

TEST(CollapseCce, LiftedNashCollapsesToItself) {
  const auto game = io::generate(testing::small_config(3));
  const auto r = solve_finite(game, options(1e-3));
  const auto c = collapse_cce(game, lift(r.policy), 1e-6);
  EXPECT_TRUE(c.bound_asserted);
  EXPECT_TRUE(c.bound_holds);
  EXPECT_NEAR(c.ne.max_gap, r.certified_gap, 1e-9);
  EXPECT_NEAR(c.cce.max_gap, r.certified_gap, 1e-9);
  for (PlayerId k = 0; k < 3; ++k) {
    for (std::size_t h = 0; h < 3; ++h) {
      for (StateId s = 0; s < 3; ++s) {
        for (std::size_t a = 0; a < game.num_actions(k); ++a) {
          EXPECT_NEAR(c.marginal.at(k, h, s)[a], r.policy.at(k, h, s)[a], 1e-12);
        }
      }
    }
  }
}

TEST(CollapseCce, NoRegretSigmaSatisfiesBound) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto game = io::generate(testing::small_config(seed + 40, 3, 3, 3));
    const auto cce = solve_cce_finite(game, 500, seed);
    const auto c = collapse_cce(game, cce.sigma, 1e-6);
    EXPECT_TRUE(c.bound_asserted);
    EXPECT_TRUE(c.bound_holds) << seed << ": " << c.ne.max_gap << " > " << c.bound;
    EXPECT_DOUBLE_EQ(c.factor, 3.0);
  }
}

TEST(CollapseCce, CounterexampleBoundNotAsserted) {
  const auto ex = cx::build_finite_example();
  const auto c = collapse_cce(ex.game, ex.sigma, 1e-6);
  EXPECT_FALSE(c.bound_asserted);
  EXPECT_LE(c.cce.max_gap, 1e-12);
  EXPECT_GE(c.ne.max_gap, 13.0 / 160.0);
  EXPECT_FALSE(c.bound_holds);
}

TEST(CollapseTwoPlayer, ExactCceAndPointMass) {
  const auto game = testing::two_by_two_game(4, 2, 2);
  const auto r = solve_finite(game, options(1e-6));
  const auto c = collapse_two_player(game, lift(r.policy), 1e-6);
  EXPECT_LE(c.ne.max_gap, 2.0 * c.cce.max_gap + 1e-6);
  EXPECT_TRUE(c.bound_holds);

  // Pure equilibrium of a dominance-solvable game survives marginalisation.
  Eigen::MatrixXd m(2, 2);
  m << 0.5, 0.8, -0.1, 0.2;
  std::vector<StateInteraction> layer(1);
  layer[0].edges = {{0, 1, m}, {1, 0, -m.transpose()}};
  layer[0].controllers = {0};
  layer[0].transition = Eigen::MatrixXd::Constant(2, 1, 1.0);
  const MarkovGame one({2, 2}, 1, HorizonSpec::finite(1), {layer}, {1.0});
  CorrelatedPolicy sigma({2, 2}, 1, 1);
  sigma.at(0, 0) = {1.0, 0.0, 0.0, 0.0};
  const auto d = collapse_two_player(one, sigma, 1e-9);
  EXPECT_EQ(d.cce.max_gap, 0.0);
  EXPECT_EQ(d.ne.max_gap, 0.0);
  EXPECT_EQ(d.marginal.at(0, 0, 0), (Distribution{1.0, 0.0}));
  EXPECT_THROW(collapse_two_player(io::generate(testing::small_config(1)), CorrelatedPolicy({2, 2, 2}, 3, 3), 0.0),
               DomainError);
}

TEST(CollapseTwoPlayer, TwoControllerNoRegret) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto cfg = testing::small_config(seed, 2, 3, 3);
    cfg.controllers_per_state = 2;
    const auto game = io::generate(cfg);
    const auto cce = solve_cce_finite(game, 500, seed);
    const auto c = collapse_two_player(game, cce.sigma, 1e-6);
    EXPECT_TRUE(c.bound_asserted);
    EXPECT_TRUE(c.bound_holds) << seed;
  }
}

TEST(NodeSeed, DependsOnAllInputs) {
  EXPECT_NE(node_seed(1, 0, 0), node_seed(2, 0, 0));
  EXPECT_NE(node_seed(1, 0, 1), node_seed(1, 1, 0));
  EXPECT_EQ(node_seed(5, 3, 2), node_seed(5, 3, 2));
}

}  // namespace
}  // namespace pmg
