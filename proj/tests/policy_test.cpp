#include <gtest/gtest.h>

#include <random>

#include "pmg/pmg.hpp"
#include "test_util.hpp"

namespace pmg {
namespace {

namespace cx = counterexamples;

TEST(Marginalize, CounterexampleSigmaIsUniform) {
  const auto ex = cx::build_finite_example();
  const auto pi = marginalize(ex.sigma);
  for (std::size_t h = 0; h < 2; ++h) {
    for (StateId s = 0; s < 3; ++s) {
      EXPECT_EQ(pi.at(0, h, s), (Distribution{0.5, 0.5}));
      EXPECT_EQ(pi.at(1, h, s), (Distribution{0.5, 0.5}));
      EXPECT_EQ(pi.at(2, h, s), (Distribution{1.0}));
    }
  }
}

TEST(Marginalize, LiftRoundTrip) {
  std::mt19937_64 rng(3);
  const auto game = io::generate(testing::small_config(5));
  for (int trial = 0; trial < 10; ++trial) {
    const auto pi = testing::random_product_policy(game, 3, rng);
    const auto back = marginalize(lift(pi));
    for (PlayerId k = 0; k < game.num_players(); ++k) {
      for (std::size_t h = 0; h < 3; ++h) {
        for (StateId s = 0; s < game.num_states(); ++s) {
          const auto& a = pi.at(k, h, s);
          const auto& b = back.at(k, h, s);
          for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-14);
        }
      }
    }
  }
}

TEST(Marginalize, PointMass) {
  CorrelatedPolicy sigma({2, 3}, 1, 1);
  sigma.at(0, 0) = Distribution(6, 0.0);
  sigma.at(0, 0)[sigma.space().encode(JointAction{1, 2})] = 1.0;
  const auto pi = marginalize(sigma);
  EXPECT_EQ(pi.at(0, 0, 0), (Distribution{0.0, 1.0}));
  EXPECT_EQ(pi.at(1, 0, 0), (Distribution{0.0, 0.0, 1.0}));
}

TEST(MarginalExcluding, CounterexampleOtherPlayerUniform) {
  const auto ex = cx::build_finite_example();
  const auto rest = marginal_excluding(ex.sigma, 0);
  ASSERT_EQ(rest.size(), 6u);
  for (const auto& d : rest) EXPECT_EQ(d, (Distribution{0.5, 0.5}));
}

TEST(MarginalExcluding, ProductOfOtherFactors) {
  std::mt19937_64 rng(8);
  const auto game = io::generate(testing::small_config(2));
  const auto pi = testing::random_product_policy(game, 3, rng);
  const auto rest = marginal_excluding(pi, 1);
  const auto lifted = marginal_excluding(lift(pi), 1);
  const auto a0 = game.num_actions(0);
  const auto a2 = game.num_actions(2);
  for (std::size_t h = 0; h < 3; ++h) {
    for (StateId s = 0; s < game.num_states(); ++s) {
      const auto& d = rest[h * game.num_states() + s];
      ASSERT_EQ(d.size(), a0 * a2);
      for (std::size_t i = 0; i < a0; ++i) {
        for (std::size_t j = 0; j < a2; ++j) {
          EXPECT_NEAR(d[i * a2 + j], pi.at(0, h, s)[i] * pi.at(2, h, s)[j], 1e-15);
          EXPECT_NEAR(lifted[h * game.num_states() + s][i * a2 + j], d[i * a2 + j], 1e-15);
        }
      }
    }
  }
}

TEST(MarginalExcluding, TwoPlayersMatchesOtherMarginal) {
  std::mt19937_64 rng(9);
  const auto game = testing::two_by_two_game(1, 2, 2);
  const auto sigma = testing::random_correlated_policy(game, 2, rng);
  const auto pi = marginalize(sigma);
  const auto rest = marginal_excluding(sigma, 0);
  for (std::size_t h = 0; h < 2; ++h) {
    for (StateId s = 0; s < 2; ++s) {
      const auto& d = rest[h * 2 + s];
      for (std::size_t b = 0; b < 2; ++b) EXPECT_NEAR(d[b], pi.at(1, h, s)[b], 1e-15);
    }
  }
}

TEST(MarginalExcluding, ConsistentWithMarginals) {
  std::mt19937_64 rng(10);
  const auto game = io::generate(testing::small_config(3));
  const auto sigma = testing::random_correlated_policy(game, 3, rng);
  const auto pi = marginalize(sigma);
  for (PlayerId k = 0; k < game.num_players(); ++k) {
    const auto rest = marginal_excluding(sigma, k);
    for (std::size_t h = 0; h < 3; ++h) {
      for (StateId s = 0; s < game.num_states(); ++s) {
        const auto& d = rest[h * game.num_states() + s];
        EXPECT_TRUE(is_distribution(d, 1e-12));
        // Summing out everyone except one other player j reproduces pi_j.
        for (PlayerId j = 0; j < game.num_players(); ++j) {
          if (j == k) continue;
          std::vector<PlayerId> others;
          for (PlayerId i = 0; i < game.num_players(); ++i) {
            if (i != k) others.push_back(i);
          }
          std::vector<std::size_t> radices;
          for (auto i : others) radices.push_back(game.num_actions(i));
          JointActionSpace space(radices);
          Distribution m(game.num_actions(j), 0.0);
          const auto pos = static_cast<std::size_t>(std::find(others.begin(), others.end(), j) - others.begin());
          for (std::size_t i = 0; i < space.size(); ++i) m[space.decode(i)[pos]] += d[i];
          for (std::size_t a = 0; a < m.size(); ++a) EXPECT_NEAR(m[a], pi.at(j, h, s)[a], 1e-12);
        }
      }
    }
  }
}

TEST(EnumerateDeterministic, CounterexampleHasFourPolicies) {
  const auto ex = cx::build_infinite_example();
  EXPECT_EQ(enumerate_deterministic(ex.game, 0).size(), 4u);
  EXPECT_EQ(enumerate_deterministic(ex.game, 1).size(), 4u);
  EXPECT_EQ(enumerate_deterministic(ex.game, 2).size(), 1u);
}

TEST(EnumerateDeterministic, SingleStateSingleAction) {
  std::vector<StateInteraction> layer(1);
  layer[0].controllers = {0};
  layer[0].transition = Eigen::MatrixXd::Constant(1, 1, 1.0);
  const MarkovGame game({1}, 1, HorizonSpec::finite(1), {layer}, {1.0});
  EXPECT_EQ(enumerate_deterministic(game, 0).size(), 1u);
}

TEST(EnumerateDeterministic, TwoActionsThreeStatesOneStep) {
  auto cfg = testing::small_config(4, 2, 3, 1);
  cfg.actions = {2, 2};
  const auto game = io::generate(cfg);
  const auto all = enumerate_deterministic(game, 0);
  EXPECT_EQ(all.size(), 8u);
  for (const auto& f : all) {
    for (StateId s = 0; s < 3; ++s) EXPECT_TRUE(is_distribution(f.at(0, s)));
  }
}

TEST(EnumerateDeterministic, BudgetExceeded) {
  const auto game = io::generate(testing::small_config(4, 3, 5, 5));
  EXPECT_THROW(enumerate_deterministic(game, 0, 100), CapacityError);
}

TEST(CheckPolicy, RejectsWrongShapes) {
  const auto ex = cx::build_finite_example();
  EXPECT_NO_THROW(check_policy(ex.game, ex.sigma));
  EXPECT_THROW(check_policy(ex.game, CorrelatedPolicy({2, 2, 1}, 3, 3)), ShapeError);
  EXPECT_THROW(check_policy(ex.game, ProductPolicy({2, 2}, 2, 3)), ShapeError);
  auto bad = ex.sigma;
  bad.at(0, 0)[0] = 0.5;
  EXPECT_THROW(check_policy(ex.game, bad), DomainError);
}

TEST(Policy, PolicyFactorStepClampsToLastLayer) {
  PolicyFactor f(2, 2, 1);
  f.set_pure(1, 0, 1);
  EXPECT_EQ(f.step(7, 0), (Distribution{0.0, 1.0}));
  EXPECT_THROW(PolicyFactor(0, 1, 1), ShapeError);
}

}  // namespace
}  // namespace pmg
