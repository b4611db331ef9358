#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "pmg/errors.hpp"
#include "pmg/joint_action.hpp"

namespace pmg {

inline constexpr double kStochasticTol = 1e-12;
inline constexpr double kZeroSumTol = 1e-9;

// Pairwise payoff r_{from,to}(a_from, a_to) received by `from`.
struct EdgeGame {
  PlayerId from = 0;
  PlayerId to = 0;
  Eigen::MatrixXd payoff;  // |A_from| x |A_to|

  bool operator==(const EdgeGame& o) const {
    return from == o.from && to == o.to && payoff == o.payoff;
  }
};

// Interaction graph, controller(s) and transition kernel of one state at one timestep.
//
// The transition matrix is indexed by the joint action of `controllers` (first
// controller most significant) and the next state. Under switching control
// there is exactly one controller; the two-controller form only exists so the
// no-collapse counterexamples can be expressed.
struct StateInteraction {
  std::vector<EdgeGame> edges;
  std::vector<PlayerId> controllers;
  Eigen::MatrixXd transition;

  bool operator==(const StateInteraction& o) const {
    return edges == o.edges && controllers == o.controllers && transition == o.transition;
  }
};

class HorizonSpec {
 public:
  enum class Kind { kFinite, kDiscounted };

  static HorizonSpec finite(std::size_t steps) {
    if (steps == 0) throw DomainError("finite horizon must be positive");
    return HorizonSpec(Kind::kFinite, steps, 1.0);
  }

  static HorizonSpec discounted(double gamma) {
    if (!(gamma > 0.0 && gamma < 1.0)) throw DomainError("discount factor must lie in (0,1)");
    return HorizonSpec(Kind::kDiscounted, 1, gamma);
  }

  Kind kind() const noexcept { return kind_; }
  bool is_finite() const noexcept { return kind_ == Kind::kFinite; }
  // Number of reward-bearing steps (finite) or 1 (discounted, one shared layer).
  std::size_t steps() const noexcept { return steps_; }
  double gamma() const noexcept { return gamma_; }

  bool operator==(const HorizonSpec&) const = default;

 private:
  HorizonSpec(Kind kind, std::size_t steps, double gamma)
      : kind_(kind), steps_(steps), gamma_(gamma) {}

  Kind kind_ = Kind::kFinite;
  std::size_t steps_ = 1;
  double gamma_ = 1.0;
};

// Zero-sum polymatrix Markov game. Timesteps are zero-based: a finite game with
// H reward steps has layers 0..H-1 and zero continuation after layer H-1.
// Discounted games hold a single time-homogeneous layer.
class MarkovGame {
 public:
  MarkovGame(std::vector<std::size_t> action_counts, std::size_t num_states, HorizonSpec horizon,
             std::vector<std::vector<StateInteraction>> layers, std::vector<double> initial)
      : action_counts_(std::move(action_counts)),
        num_states_(num_states),
        horizon_(horizon),
        layers_(std::move(layers)),
        initial_(std::move(initial)) {
    check_shapes();
  }

  std::size_t num_players() const noexcept { return action_counts_.size(); }
  std::size_t num_states() const noexcept { return num_states_; }
  std::size_t num_actions(PlayerId k) const { return action_counts_.at(k); }
  const std::vector<std::size_t>& action_counts() const noexcept { return action_counts_; }
  const HorizonSpec& horizon() const noexcept { return horizon_; }
  std::size_t num_layers() const noexcept { return layers_.size(); }
  const std::vector<double>& initial_distribution() const noexcept { return initial_; }
  const std::vector<std::vector<StateInteraction>>& layers() const noexcept { return layers_; }

  // Discounted games ignore `h` and return the shared layer.
  const StateInteraction& interaction(std::size_t h, StateId s) const {
    const std::size_t layer = horizon_.is_finite() ? h : 0;
    if (layer >= layers_.size()) throw DomainError("timestep out of range");
    if (s >= num_states_) throw DomainError("state out of range");
    return layers_[layer][s];
  }

  JointActionSpace joint_space() const { return JointActionSpace(action_counts_); }

  JointActionSpace controller_space(std::size_t h, StateId s) const {
    const auto& ctrl = interaction(h, s).controllers;
    std::vector<std::size_t> radices;
    radices.reserve(ctrl.size());
    for (auto c : ctrl) radices.push_back(action_counts_[c]);
    return JointActionSpace(std::move(radices));
  }

  bool operator==(const MarkovGame&) const = default;

 private:
  void check_shapes() const {
    const std::size_t n = action_counts_.size();
    if (n == 0) throw ShapeError("game needs at least one player");
    for (auto a : action_counts_) {
      if (a == 0) throw ShapeError("every player needs at least one action");
    }
    if (num_states_ == 0) throw ShapeError("game needs at least one state");
    const std::size_t expected_layers = horizon_.is_finite() ? horizon_.steps() : 1;
    if (layers_.size() != expected_layers) {
      throw ShapeError("expected " + std::to_string(expected_layers) + " layers, got " +
                       std::to_string(layers_.size()));
    }
    if (initial_.size() != num_states_) throw ShapeError("initial distribution has wrong length");
    for (std::size_t h = 0; h < layers_.size(); ++h) {
      if (layers_[h].size() != num_states_) {
        throw ShapeError("layer " + std::to_string(h) + " has wrong number of states");
      }
      for (std::size_t s = 0; s < num_states_; ++s) {
        const auto& st = layers_[h][s];
        const std::string where = "layer " + std::to_string(h) + " state " + std::to_string(s);
        if (st.controllers.empty()) throw ShapeError(where + ": no controller");
        if (st.controllers.size() > 2) throw ShapeError(where + ": at most two controllers are supported");
        if (st.controllers.size() == 2 && st.controllers[0] == st.controllers[1]) {
          throw ShapeError(where + ": repeated controller");
        }
        std::size_t rows = 1;
        for (auto c : st.controllers) {
          if (c >= n) throw ShapeError(where + ": controller out of range");
          rows *= action_counts_[c];
        }
        if (static_cast<std::size_t>(st.transition.rows()) != rows ||
            static_cast<std::size_t>(st.transition.cols()) != num_states_) {
          throw ShapeError(where + ": transition matrix has wrong shape");
        }
        for (const auto& e : st.edges) {
          if (e.from >= n || e.to >= n) throw ShapeError(where + ": edge endpoint out of range");
          if (e.from == e.to) throw ShapeError(where + ": self edge");
          if (static_cast<std::size_t>(e.payoff.rows()) != action_counts_[e.from] ||
              static_cast<std::size_t>(e.payoff.cols()) != action_counts_[e.to]) {
            throw ShapeError(where + ": edge payoff has wrong shape");
          }
        }
      }
    }
  }

  std::vector<std::size_t> action_counts_;
  std::size_t num_states_ = 0;
  HorizonSpec horizon_ = HorizonSpec::finite(1);
  std::vector<std::vector<StateInteraction>> layers_;
  std::vector<double> initial_;
};

namespace detail {

inline void check_joint(const MarkovGame& game, std::span<const ActionId> a) {
  if (a.size() != game.num_players()) throw DomainError("joint action has wrong arity");
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (a[k] >= game.num_actions(k)) throw DomainError("action index out of range");
  }
}

}  // namespace detail

// Sum of player k's edge payoffs against its neighbours at (h, s).
inline double reward(const MarkovGame& game, std::size_t h, StateId s, PlayerId k,
                     std::span<const ActionId> a) {
  if (k >= game.num_players()) throw DomainError("player out of range");
  detail::check_joint(game, a);
  double total = 0.0;
  for (const auto& e : game.interaction(h, s).edges) {
    if (e.from == k) total += e.payoff(a[e.from], a[e.to]);
  }
  return total;
}

inline std::vector<PlayerId> adjacency(const MarkovGame& game, std::size_t h, StateId s,
                                       PlayerId k) {
  if (k >= game.num_players()) throw DomainError("player out of range");
  std::vector<PlayerId> out;
  for (const auto& e : game.interaction(h, s).edges) {
    if (e.from == k) out.push_back(e.to);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

// Row of the transition matrix selected by the controllers' part of `a`.
inline std::size_t controller_index(const MarkovGame& game, std::size_t h, StateId s,
                                    std::span<const ActionId> a) {
  detail::check_joint(game, a);
  const auto& st = game.interaction(h, s);
  std::size_t index = 0;
  for (auto c : st.controllers) index = index * game.num_actions(c) + a[c];
  return index;
}

// a_{argctrl(s)}. Only defined for single-controller states.
inline ActionId controller_action(const MarkovGame& game, std::size_t h, StateId s,
                                  std::span<const ActionId> a) {
  detail::check_joint(game, a);
  const auto& st = game.interaction(h, s);
  if (st.controllers.size() != 1) {
    throw StructuralError("state " + std::to_string(s) + " has more than one controller");
  }
  return a[st.controllers.front()];
}

struct Violation {
  enum class Kind { kStochastic, kInitial, kEdgeSymmetry, kPayoffRange, kZeroSum, kSwitching };
  Kind kind;
  std::string message;
};

inline const char* to_string(Violation::Kind kind) {
  switch (kind) {
    case Violation::Kind::kStochastic: return "stochastic";
    case Violation::Kind::kInitial: return "initial_distribution";
    case Violation::Kind::kEdgeSymmetry: return "edge_symmetry";
    case Violation::Kind::kPayoffRange: return "payoff_range";
    case Violation::Kind::kZeroSum: return "zero_sum";
    case Violation::Kind::kSwitching: return "switching_control";
  }
  return "unknown";
}

namespace detail {

inline std::string node_name(std::size_t h, StateId s) {
  return "layer " + std::to_string(h) + " state " + std::to_string(s);
}

inline bool row_is_distribution(const Eigen::Ref<const Eigen::RowVectorXd>& row) {
  if ((row.array() < 0.0).any() || !row.allFinite()) return false;
  return std::abs(row.sum() - 1.0) <= kStochasticTol;
}

inline double total_reward(const StateInteraction& st, std::span<const ActionId> a) {
  double total = 0.0;
  for (const auto& e : st.edges) total += e.payoff(a[e.from], a[e.to]);
  return total;
}

// Zero-sum check for one node. Exhaustive below the joint-action budget,
// otherwise the per-edge constant test plus random sampling.
inline void check_zero_sum(const MarkovGame& game, std::size_t h, StateId s,
                           std::vector<Violation>& out) {
  const auto& st = game.interaction(h, s);
  const auto& counts = game.action_counts();
  std::size_t joint = 1;
  bool small = true;
  for (auto c : counts) {
    if (joint > kMaxJointActions / c) {
      small = false;
      break;
    }
    joint *= c;
  }

  auto report = [&](std::span<const ActionId> a, double total) {
    std::string acts;
    for (auto x : a) acts += (acts.empty() ? "" : ",") + std::to_string(x);
    out.push_back({Violation::Kind::kZeroSum, node_name(h, s) + ": rewards sum to " +
                                                  std::to_string(total) + " at joint action (" +
                                                  acts + ")"});
  };

  if (small) {
    JointActionSpace space(counts);
    JointAction a(counts.size(), 0);
    do {
      const double total = total_reward(st, a);
      if (std::abs(total) > kZeroSumTol) {
        report(a, total);
        return;
      }
    } while (space.next(a));
    return;
  }

  // Sufficient condition: each pair-sum r_kj + r_jk^T is constant and the constants cancel.
  double constants = 0.0;
  bool pairwise_ok = true;
  for (const auto& e : st.edges) {
    if (e.from > e.to) continue;
    Eigen::MatrixXd pair = e.payoff;
    for (const auto& r : st.edges) {
      if (r.from == e.to && r.to == e.from) pair += r.payoff.transpose();
    }
    const double c = pair(0, 0);
    if ((pair.array() - c).abs().maxCoeff() > kZeroSumTol) pairwise_ok = false;
    constants += c;
  }
  if (!pairwise_ok || std::abs(constants) > kZeroSumTol) {
    out.push_back({Violation::Kind::kZeroSum,
                   node_name(h, s) + ": pairwise payoff sums are not constant and cancelling"});
  }
  std::mt19937_64 rng(0x5eed ^ (h * 1'000'003u + s));
  JointAction a(counts.size());
  for (int i = 0; i < 10'000; ++i) {
    for (std::size_t k = 0; k < counts.size(); ++k) {
      a[k] = std::uniform_int_distribution<std::size_t>(0, counts[k] - 1)(rng);
    }
    const double total = total_reward(st, a);
    if (std::abs(total) > kZeroSumTol) {
      report(a, total);
      return;
    }
  }
}

}  // namespace detail

// Checks stochasticity, edge symmetry, payoff range and the zero-sum property.
// Switching control is checked separately by switching_control_violations.
inline std::vector<Violation> validate(const MarkovGame& game) {
  std::vector<Violation> out;
  const auto& rho = game.initial_distribution();
  {
    Eigen::Map<const Eigen::RowVectorXd> row(rho.data(), static_cast<Eigen::Index>(rho.size()));
    if (!detail::row_is_distribution(row)) {
      out.push_back({Violation::Kind::kInitial, "initial distribution is not a probability vector"});
    }
  }
  for (std::size_t h = 0; h < game.num_layers(); ++h) {
    for (StateId s = 0; s < game.num_states(); ++s) {
      const auto& st = game.interaction(h, s);
      const auto where = detail::node_name(h, s);
      for (Eigen::Index r = 0; r < st.transition.rows(); ++r) {
        if (!detail::row_is_distribution(st.transition.row(r))) {
          out.push_back({Violation::Kind::kStochastic,
                         where + ": transition row " + std::to_string(r) + " sums to " +
                             std::to_string(st.transition.row(r).sum())});
        }
      }
      for (const auto& e : st.edges) {
        const auto reverse = std::count_if(st.edges.begin(), st.edges.end(), [&](const auto& r) {
          return r.from == e.to && r.to == e.from;
        });
        const auto same = std::count_if(st.edges.begin(), st.edges.end(), [&](const auto& r) {
          return r.from == e.from && r.to == e.to;
        });
        if (reverse != 1 || same != 1) {
          out.push_back({Violation::Kind::kEdgeSymmetry,
                         where + ": edge (" + std::to_string(e.from) + "," + std::to_string(e.to) +
                             ") must appear once in each direction"});
        }
        if (!e.payoff.allFinite() || e.payoff.cwiseAbs().maxCoeff() > 1.0 + kZeroSumTol) {
          out.push_back({Violation::Kind::kPayoffRange,
                         where + ": edge (" + std::to_string(e.from) + "," + std::to_string(e.to) +
                             ") has payoffs outside [-1,1]"});
        }
      }
      detail::check_zero_sum(game, h, s, out);
    }
  }
  return out;
}

inline std::vector<Violation> switching_control_violations(const MarkovGame& game) {
  std::vector<Violation> out;
  for (std::size_t h = 0; h < game.num_layers(); ++h) {
    for (StateId s = 0; s < game.num_states(); ++s) {
      const auto& st = game.interaction(h, s);
      if (st.controllers.size() != 1) {
        out.push_back({Violation::Kind::kSwitching,
                       detail::node_name(h, s) + ": " + std::to_string(st.controllers.size()) +
                           " players control the transition"});
      }
    }
  }
  return out;
}

inline bool is_switching_control(const MarkovGame& game) {
  return switching_control_violations(game).empty();
}

}  // namespace pmg
