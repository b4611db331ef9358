#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "pmg/errors.hpp"
#include "pmg/game.hpp"

namespace pmg::io {

struct GeneratorConfig {
  std::size_t players = 3;
  std::size_t states = 3;
  std::optional<std::size_t> horizon = 3;  // finite when set
  double gamma = 0.9;                      // used when horizon is empty
  // Explicit per-player action counts; otherwise each player draws uniformly
  // from [min_actions, max_actions].
  std::vector<std::size_t> actions;
  std::size_t min_actions = 2;
  std::size_t max_actions = 3;
  double density = 1.0;               // probability that a pair of players interacts at a node
  std::size_t controllers_per_state = 1;  // 2 gives non-switching-control kernels
  bool time_varying = true;           // finite horizons: fresh layer per timestep
  std::uint64_t seed = 0;
};

// Random zero-sum polymatrix game. Every pair of players interacts with
// probability `density`; the pair's payoffs satisfy r_jk = -r_kj^T with entries
// uniform in [-1,1]. Transition rows are normalised uniform positives.
inline MarkovGame generate(const GeneratorConfig& cfg) {
  if (cfg.players < 2) throw DomainError("generator needs at least two players");
  if (cfg.states == 0) throw DomainError("generator needs at least one state");
  if (!(cfg.density >= 0.0 && cfg.density <= 1.0)) throw DomainError("density must lie in [0,1]");
  if (cfg.controllers_per_state < 1 || cfg.controllers_per_state > 2 || cfg.controllers_per_state > cfg.players) {
    throw DomainError("controllers_per_state must be 1 or 2");
  }
  if (cfg.min_actions == 0 || cfg.min_actions > cfg.max_actions) throw DomainError("bad action range");

  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> payoff(-1.0, 1.0);
  std::uniform_real_distribution<double> positive(0.05, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  std::vector<std::size_t> actions = cfg.actions;
  if (actions.empty()) {
    std::uniform_int_distribution<std::size_t> pick(cfg.min_actions, cfg.max_actions);
    for (std::size_t k = 0; k < cfg.players; ++k) actions.push_back(pick(rng));
  }
  if (actions.size() != cfg.players) throw DomainError("action list length must equal player count");

  auto normalised = [&](std::size_t size) {
    std::vector<double> v(size);
    double total = 0.0;
    for (auto& x : v) total += (x = positive(rng));
    for (auto& x : v) x /= total;
    return v;
  };

  auto make_layer = [&] {
    std::vector<StateInteraction> layer(cfg.states);
    for (auto& st : layer) {
      for (PlayerId k = 0; k < cfg.players; ++k) {
        for (PlayerId j = k + 1; j < cfg.players; ++j) {
          if (cfg.density < 1.0 && !(unit(rng) < cfg.density)) continue;
          Eigen::MatrixXd m(static_cast<Eigen::Index>(actions[k]), static_cast<Eigen::Index>(actions[j]));
          for (Eigen::Index r = 0; r < m.rows(); ++r) {
            for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = payoff(rng);
          }
          st.edges.push_back({k, j, m});
          st.edges.push_back({j, k, -m.transpose()});
        }
      }
      std::uniform_int_distribution<PlayerId> who(0, cfg.players - 1);
      st.controllers.push_back(who(rng));
      if (cfg.controllers_per_state == 2) {
        PlayerId second = who(rng);
        while (second == st.controllers.front()) second = who(rng);
        st.controllers.push_back(second);
      }
      std::size_t rows = 1;
      for (auto c : st.controllers) rows *= actions[c];
      st.transition.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cfg.states));
      for (std::size_t r = 0; r < rows; ++r) {
        const auto row = normalised(cfg.states);
        for (std::size_t s = 0; s < cfg.states; ++s) {
          st.transition(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(s)) = row[s];
        }
      }
    }
    return layer;
  };

  std::vector<std::vector<StateInteraction>> layers;
  HorizonSpec horizon = cfg.horizon ? HorizonSpec::finite(*cfg.horizon) : HorizonSpec::discounted(cfg.gamma);
  const std::size_t L = horizon.is_finite() ? horizon.steps() : 1;
  layers.push_back(make_layer());
  for (std::size_t h = 1; h < L; ++h) layers.push_back(cfg.time_varying ? make_layer() : layers.front());
  auto rho = normalised(cfg.states);
  return MarkovGame(std::move(actions), cfg.states, horizon, std::move(layers), std::move(rho));
}

}  // namespace pmg::io
