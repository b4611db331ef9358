#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <random>

#include "pmg/pmg.hpp"
#include "test_util.hpp"

namespace pmg {
namespace {

namespace cx = counterexamples;
using io::json;

TEST(Rational, ExactLiteral) {
  EXPECT_EQ(io::number_from_json("1/20", "$"), 1.0 / 20.0);
  EXPECT_EQ(io::number_from_json("-13/160", "$"), -13.0 / 160.0);
  EXPECT_EQ(io::number_from_json("0.25", "$"), 0.25);
  EXPECT_EQ(io::number_from_json(json(0.5), "$"), 0.5);
  EXPECT_THROW(io::number_from_json("1/0", "$.x"), ParseError);
  EXPECT_THROW(io::number_from_json("abc", "$.x"), ParseError);
  EXPECT_THROW(io::number_from_json(json::array(), "$.x"), ParseError);
}

TEST(Rational, WritesShortFractions) {
  EXPECT_EQ(io::number_to_json(1.0 / 20.0), json("1/20"));
  EXPECT_EQ(io::number_to_json(-13.0 / 160.0), json("-13/160"));
  EXPECT_EQ(io::number_to_json(2.0 / 3.0), json("2/3"));
  EXPECT_EQ(io::number_to_json(3.0), json(3));
  EXPECT_TRUE(io::number_to_json(std::sqrt(2.0)).is_number_float());
}

TEST(Rational, DecimalsRoundTripBitwise) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 2000; ++i) {
    const double x = u(rng);
    const auto text = io::number_to_json(x).dump();
    const double back = io::number_from_json(json::parse(text), "$");
    EXPECT_EQ(std::memcmp(&x, &back, sizeof x), 0) << text;
  }
}

TEST(GameJson, CounterexampleRoundTrip) {
  for (const auto& ex : {cx::build_finite_example(), cx::build_infinite_example()}) {
    const auto j = io::game_to_json(ex.game);
    EXPECT_TRUE(j["layers"][0][0]["controller"].contains("two_controller"));
    EXPECT_EQ(j["layers"][0][0]["edges"][2]["payoff"][0][0], json("1/20"));
    const auto back = io::game_from_json(json::parse(j.dump()));
    EXPECT_EQ(back, ex.game);
  }
}

TEST(GameJson, RandomGameRoundTrip) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto cfg = testing::small_config(seed);
    cfg.controllers_per_state = 1 + seed % 2;
    const auto game = io::generate(cfg);
    EXPECT_EQ(io::game_from_json(json::parse(io::game_to_json(game).dump())), game);
  }
}

TEST(GameJson, SubStochasticRowNamesThePath) {
  auto j = io::game_to_json(cx::build_finite_example().game);
  j["layers"][0][1]["transition"][2] = {"9/10", 0, 0};
  try {
    io::game_from_json(j);
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.path(), "$.layers[0][1].transition[2]");
    EXPECT_NE(std::string(e.what()).find("0.9"), std::string::npos);
  }
}

TEST(GameJson, SchemaErrors) {
  const auto good = io::game_to_json(cx::build_finite_example().game);
  auto expect_path = [](const json& j, const std::string& path) {
    try {
      io::game_from_json(j);
      ADD_FAILURE() << "expected a parse error at " << path;
    } catch (const ParseError& e) {
      EXPECT_EQ(e.path(), path);
    }
  };
  auto j = good;
  j.erase("rho");
  expect_path(j, "$.rho");
  j = good;
  j["horizon"] = {{"discounted", 1.5}};
  expect_path(j, "$.horizon.discounted");
  j = good;
  j["layers"][1][2]["edges"][0]["to"] = 7;
  expect_path(j, "$.layers[1][2].edges[0].to");
  j = good;
  j["layers"][0][0]["edges"][1]["payoff"][0] = {1, 2, 3};
  expect_path(j, "$.layers[0][0].edges[1].payoff[0]");
  j = good;
  j["actions"] = {2, 2};
  expect_path(j, "$.actions");
}

TEST(PolicyJson, RoundTrip) {
  std::mt19937_64 rng(2);
  const auto game = io::generate(testing::small_config(3));
  const auto pi = testing::random_product_policy(game, 3, rng);
  const auto sigma = cx::build_finite_example().sigma;
  const auto p = io::policy_from_json(json::parse(io::policy_to_json(pi).dump()));
  const auto c = io::policy_from_json(json::parse(io::policy_to_json(sigma).dump()));
  ASSERT_TRUE(std::holds_alternative<ProductPolicy>(p));
  ASSERT_TRUE(std::holds_alternative<CorrelatedPolicy>(c));
  EXPECT_EQ(std::get<ProductPolicy>(p), pi);
  EXPECT_EQ(std::get<CorrelatedPolicy>(c), sigma);
  auto bad = io::policy_to_json(sigma);
  bad["joint"][1][2][0] = 0.5;
  EXPECT_THROW(io::policy_from_json(bad), ParseError);
}

TEST(Files, WriteAndRead) {
  const auto dir = std::filesystem::temp_directory_path() / "pmg_io_test";
  std::filesystem::create_directories(dir);
  const auto path = (dir / "game.json").string();
  io::write_json_file(path, io::game_to_json(cx::build_infinite_example().game));
  EXPECT_EQ(io::game_from_json(io::read_json_file(path)), cx::build_infinite_example().game);
  EXPECT_THROW(io::read_json_file((dir / "missing.json").string()), ParseError);
}

TEST(Generate, DensityZeroHasNoRewards) {
  auto cfg = testing::small_config(4);
  cfg.density = 0.0;
  const auto game = io::generate(cfg);
  for (const auto& layer : game.layers()) {
    for (const auto& st : layer) EXPECT_TRUE(st.edges.empty());
  }
  EXPECT_EQ(gap_report(game, ProductPolicy(game.action_counts(), 3, 3)).max_gap, 0.0);
}

TEST(Generate, DensityOneIsComplete) {
  const auto game = io::generate(testing::small_config(5));
  for (std::size_t h = 0; h < 3; ++h) {
    for (StateId s = 0; s < 3; ++s) {
      for (PlayerId k = 0; k < 3; ++k) EXPECT_EQ(adjacency(game, h, s, k).size(), 2u);
    }
  }
}

TEST(Generate, SeedDeterministicAndValid) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto cfg = testing::small_config(seed, 4, 5, 5);
    cfg.density = 0.6;
    const auto a = io::generate(cfg);
    const auto b = io::generate(cfg);
    EXPECT_EQ(io::game_to_json(a).dump(), io::game_to_json(b).dump());
    EXPECT_TRUE(validate(a).empty());
  }
  EXPECT_NE(io::generate(testing::small_config(1)), io::generate(testing::small_config(2)));
}

TEST(Generate, ConfigErrors) {
  auto cfg = testing::small_config(0);
  cfg.players = 1;
  EXPECT_THROW(io::generate(cfg), DomainError);
  cfg = testing::small_config(0);
  cfg.density = 2.0;
  EXPECT_THROW(io::generate(cfg), DomainError);
  cfg = testing::small_config(0);
  cfg.actions = {2, 2};
  EXPECT_THROW(io::generate(cfg), DomainError);
}

TEST(Report, JsonAndCsv) {
  io::Report r;
  r.command = "gap";
  r.values["x"] = io::number_to_json(0.05);
  r.add_row(-1, "max_gap", 0.25);
  r.add_row(0, "gap", 0.125);
  const auto j = r.to_json();
  for (const char* key : {"command", "inputs", "values", "gaps", "verdict", "runtime_ms"}) EXPECT_TRUE(j.contains(key));
  const auto path = (std::filesystem::temp_directory_path() / "pmg_report.csv").string();
  r.write_csv(path);
  std::ifstream in(path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  EXPECT_EQ(text, "player,quantity,value\nall,max_gap,0.25\n0,gap,0.125\n");
}

}  // namespace
}  // namespace pmg
