#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "pmg/errors.hpp"
#include "pmg/game.hpp"
#include "pmg/joint_action.hpp"

namespace pmg {

using Distribution = std::vector<double>;

inline constexpr double kSimplexTol = 1e-12;

inline bool is_distribution(std::span<const double> p, double tol = kSimplexTol) {
  double total = 0.0;
  for (double x : p) {
    if (!(x >= -tol) || !std::isfinite(x)) return false;
    total += x;
  }
  return std::abs(total - 1.0) <= tol;
}

// One player's Markov policy: a distribution over its actions per (layer, state).
//
// Policies are looked up with step(): layers past the last one reuse the last
// layer, so a single-layer policy is stationary and a multi-layer policy used in
// a discounted game is nonstationary with a stationary tail.
class PolicyFactor {
 public:
  PolicyFactor() = default;

  PolicyFactor(std::size_t num_actions, std::size_t num_layers, std::size_t num_states)
      : num_actions_(num_actions),
        num_layers_(num_layers),
        num_states_(num_states),
        data_(num_layers * num_states, Distribution(num_actions, 1.0 / num_actions)) {
    if (num_actions == 0 || num_layers == 0 || num_states == 0) {
      throw ShapeError("policy factor needs positive dimensions");
    }
  }

  std::size_t num_actions() const noexcept { return num_actions_; }
  std::size_t num_layers() const noexcept { return num_layers_; }
  std::size_t num_states() const noexcept { return num_states_; }

  Distribution& at(std::size_t h, StateId s) { return data_.at(h * num_states_ + s); }
  const Distribution& at(std::size_t h, StateId s) const { return data_.at(h * num_states_ + s); }
  const Distribution& step(std::size_t h, StateId s) const {
    return at(std::min(h, num_layers_ - 1), s);
  }

  void set_pure(std::size_t h, StateId s, ActionId a) {
    auto& d = at(h, s);
    std::fill(d.begin(), d.end(), 0.0);
    d.at(a) = 1.0;
  }

  bool operator==(const PolicyFactor&) const = default;

 private:
  std::size_t num_actions_ = 0;
  std::size_t num_layers_ = 0;
  std::size_t num_states_ = 0;
  std::vector<Distribution> data_;
};

class ProductPolicy {
 public:
  ProductPolicy() = default;

  // Uniform product policy.
  ProductPolicy(const std::vector<std::size_t>& action_counts, std::size_t num_layers,
                std::size_t num_states) {
    factors_.reserve(action_counts.size());
    for (auto a : action_counts) factors_.emplace_back(a, num_layers, num_states);
  }

  explicit ProductPolicy(std::vector<PolicyFactor> factors) : factors_(std::move(factors)) {
    if (factors_.empty()) throw ShapeError("product policy needs at least one player");
    for (const auto& f : factors_) {
      if (f.num_layers() != factors_.front().num_layers() ||
          f.num_states() != factors_.front().num_states()) {
        throw ShapeError("policy factors disagree on layers or states");
      }
    }
  }

  std::size_t num_players() const noexcept { return factors_.size(); }
  std::size_t num_layers() const { return factors_.at(0).num_layers(); }
  std::size_t num_states() const { return factors_.at(0).num_states(); }
  bool stationary() const { return num_layers() == 1; }

  PolicyFactor& factor(PlayerId k) { return factors_.at(k); }
  const PolicyFactor& factor(PlayerId k) const { return factors_.at(k); }
  const std::vector<PolicyFactor>& factors() const noexcept { return factors_; }

  Distribution& at(PlayerId k, std::size_t h, StateId s) { return factors_.at(k).at(h, s); }
  const Distribution& at(PlayerId k, std::size_t h, StateId s) const {
    return factors_.at(k).at(h, s);
  }

  std::vector<std::size_t> action_counts() const {
    std::vector<std::size_t> out;
    for (const auto& f : factors_) out.push_back(f.num_actions());
    return out;
  }

  // Same policy with player k's factor replaced.
  ProductPolicy with_factor(PlayerId k, PolicyFactor f) const {
    ProductPolicy out = *this;
    out.factors_.at(k) = std::move(f);
    return ProductPolicy(std::move(out.factors_));
  }

  bool operator==(const ProductPolicy&) const = default;

 private:
  std::vector<PolicyFactor> factors_;
};

// Correlated Markov policy: a distribution over joint actions per (layer, state).
// Joint actions are encoded with player 0 as the most significant digit.
class CorrelatedPolicy {
 public:
  CorrelatedPolicy() = default;

  // Uniform joint distribution.
  CorrelatedPolicy(std::vector<std::size_t> action_counts, std::size_t num_layers,
                   std::size_t num_states)
      : space_(std::move(action_counts)), num_layers_(num_layers), num_states_(num_states) {
    if (num_layers == 0 || num_states == 0) throw ShapeError("policy needs positive dimensions");
    data_.assign(num_layers * num_states, Distribution(space_.size(), 1.0 / space_.size()));
  }

  std::size_t num_players() const noexcept { return space_.arity(); }
  std::size_t num_layers() const noexcept { return num_layers_; }
  std::size_t num_states() const noexcept { return num_states_; }
  bool stationary() const noexcept { return num_layers_ == 1; }
  const JointActionSpace& space() const noexcept { return space_; }
  std::vector<std::size_t> action_counts() const {
    return {space_.radices().begin(), space_.radices().end()};
  }

  Distribution& at(std::size_t h, StateId s) { return data_.at(h * num_states_ + s); }
  const Distribution& at(std::size_t h, StateId s) const { return data_.at(h * num_states_ + s); }

  bool operator==(const CorrelatedPolicy& o) const {
    return action_counts() == o.action_counts() && num_layers_ == o.num_layers_ &&
           num_states_ == o.num_states_ && data_ == o.data_;
  }

 private:
  JointActionSpace space_;
  std::size_t num_layers_ = 0;
  std::size_t num_states_ = 0;
  std::vector<Distribution> data_;
};

template <class P>
concept MarkovPolicy = std::same_as<P, ProductPolicy> || std::same_as<P, CorrelatedPolicy>;

// Distribution of the actions of `players` (in the given order, first most
// significant) at (h, s). Layers past the last are clamped.
inline Distribution subset_marginal(const ProductPolicy& pi, std::size_t h, StateId s,
                                    std::span<const PlayerId> players) {
  std::vector<std::size_t> radices;
  for (auto p : players) radices.push_back(pi.factor(p).num_actions());
  JointActionSpace space(radices);
  Distribution out(space.size(), 1.0);
  JointAction a(players.size(), 0);
  for (std::size_t i = 0; i < space.size(); ++i) {
    for (std::size_t j = 0; j < players.size(); ++j) out[i] *= pi.factor(players[j]).step(h, s)[a[j]];
    space.next(a);
  }
  return out;
}

inline Distribution subset_marginal(const CorrelatedPolicy& sigma, std::size_t h, StateId s,
                                    std::span<const PlayerId> players) {
  std::vector<std::size_t> radices;
  const auto counts = sigma.action_counts();
  for (auto p : players) radices.push_back(counts.at(p));
  JointActionSpace sub(radices);
  Distribution out(sub.size(), 0.0);
  const auto& joint = sigma.at(std::min(h, sigma.num_layers() - 1), s);
  JointAction a(counts.size(), 0);
  for (std::size_t i = 0; i < joint.size(); ++i) {
    if (joint[i] != 0.0) {
      std::size_t index = 0;
      for (std::size_t j = 0; j < players.size(); ++j) index = index * radices[j] + a[players[j]];
      out[index] += joint[i];
    }
    sigma.space().next(a);
  }
  return out;
}

template <MarkovPolicy P>
Distribution player_marginal(const P& policy, std::size_t h, StateId s, PlayerId k) {
  if constexpr (std::same_as<P, ProductPolicy>) {
    return policy.factor(k).step(h, s);
  } else {
    const PlayerId players[] = {k};
    return subset_marginal(policy, h, s, players);
  }
}

// The product policy embedded as a (dense) correlated policy.
inline CorrelatedPolicy lift(const ProductPolicy& pi) {
  CorrelatedPolicy sigma(pi.action_counts(), pi.num_layers(), pi.num_states());
  std::vector<PlayerId> all(pi.num_players());
  std::iota(all.begin(), all.end(), PlayerId{0});
  for (std::size_t h = 0; h < pi.num_layers(); ++h) {
    for (StateId s = 0; s < pi.num_states(); ++s) sigma.at(h, s) = subset_marginal(pi, h, s, all);
  }
  return sigma;
}

// pi_k^sigma(a|s,h) = sum over a_{-k} of sigma_h(a, a_{-k}|s).
inline ProductPolicy marginalize(const CorrelatedPolicy& sigma) {
  std::vector<PolicyFactor> factors;
  const auto counts = sigma.action_counts();
  for (PlayerId k = 0; k < counts.size(); ++k) {
    PolicyFactor f(counts[k], sigma.num_layers(), sigma.num_states());
    for (std::size_t h = 0; h < sigma.num_layers(); ++h) {
      for (StateId s = 0; s < sigma.num_states(); ++s) f.at(h, s) = player_marginal(sigma, h, s, k);
    }
    factors.push_back(std::move(f));
  }
  return ProductPolicy(std::move(factors));
}

// sigma_{-k,h}(a_{-k}|s) for every (h, s), over the other players in increasing order.
template <MarkovPolicy P>
std::vector<Distribution> marginal_excluding(const P& policy, PlayerId k) {
  std::vector<PlayerId> others;
  for (PlayerId j = 0; j < policy.num_players(); ++j) {
    if (j != k) others.push_back(j);
  }
  std::vector<Distribution> out;
  for (std::size_t h = 0; h < policy.num_layers(); ++h) {
    for (StateId s = 0; s < policy.num_states(); ++s) {
      out.push_back(subset_marginal(policy, h, s, others));
    }
  }
  return out;
}

// Throws unless `policy` has the game's shape and holds valid distributions.
template <MarkovPolicy P>
void check_policy(const MarkovGame& game, const P& policy) {
  if (policy.num_players() != game.num_players()) throw ShapeError("policy has wrong player count");
  if (policy.num_states() != game.num_states()) throw ShapeError("policy has wrong state count");
  if (policy.action_counts() != game.action_counts()) {
    throw ShapeError("policy has wrong action counts");
  }
  if (game.horizon().is_finite() && policy.num_layers() != game.horizon().steps()) {
    throw ShapeError("policy needs one layer per reward step");
  }
  for (std::size_t h = 0; h < policy.num_layers(); ++h) {
    for (StateId s = 0; s < policy.num_states(); ++s) {
      if constexpr (std::same_as<P, ProductPolicy>) {
        for (PlayerId k = 0; k < policy.num_players(); ++k) {
          if (!is_distribution(policy.at(k, h, s))) {
            throw DomainError("policy of player " + std::to_string(k) + " at layer " +
                              std::to_string(h) + " state " + std::to_string(s) +
                              " is not a distribution");
          }
        }
      } else {
        if (!is_distribution(policy.at(h, s))) {
          throw DomainError("correlated policy at layer " + std::to_string(h) + " state " +
                            std::to_string(s) + " is not a distribution");
        }
      }
    }
  }
}

namespace detail {

// Whether player k's own reward or the transition at (h, s) depends on k's action.
inline bool action_matters(const MarkovGame& game, std::size_t h, StateId s, PlayerId k) {
  if (game.num_actions(k) < 2) return false;
  const auto& st = game.interaction(h, s);
  for (const auto& e : st.edges) {
    if (e.from != k) continue;
    for (Eigen::Index r = 1; r < e.payoff.rows(); ++r) {
      if (e.payoff.row(r) != e.payoff.row(0)) return true;
    }
  }
  const auto it = std::find(st.controllers.begin(), st.controllers.end(), k);
  if (it == st.controllers.end()) return false;
  const auto space = game.controller_space(h, s);
  const std::size_t pos = static_cast<std::size_t>(it - st.controllers.begin());
  JointAction c(st.controllers.size(), 0);
  for (std::size_t i = 0; i < space.size(); ++i) {
    if (c[pos] != 0) {
      JointAction base = c;
      base[pos] = 0;
      if (st.transition.row(static_cast<Eigen::Index>(i)) !=
          st.transition.row(static_cast<Eigen::Index>(space.encode(base)))) {
        return true;
      }
    }
    space.next(c);
  }
  return false;
}

// (layer, state) pairs that can be reached from the support of the initial
// distribution under some joint action. Discounted games use one layer.
inline std::vector<std::vector<bool>> reachable(const MarkovGame& game) {
  const std::size_t S = game.num_states();
  const auto& rho = game.initial_distribution();
  std::vector<bool> start(S);
  for (StateId s = 0; s < S; ++s) start[s] = rho[s] > 0.0;
  auto successors = [&](std::size_t h, const std::vector<bool>& from) {
    std::vector<bool> next(S, false);
    for (StateId s = 0; s < S; ++s) {
      if (!from[s]) continue;
      const auto& t = game.interaction(h, s).transition;
      for (Eigen::Index r = 0; r < t.rows(); ++r) {
        for (StateId s2 = 0; s2 < S; ++s2) {
          if (t(r, static_cast<Eigen::Index>(s2)) > 0.0) next[s2] = true;
        }
      }
    }
    return next;
  };
  if (game.horizon().is_finite()) {
    std::vector<std::vector<bool>> out{start};
    for (std::size_t h = 1; h < game.num_layers(); ++h) out.push_back(successors(h - 1, out.back()));
    return out;
  }
  std::vector<bool> closure = start;
  for (bool grew = true; grew;) {
    grew = false;
    const auto next = successors(0, closure);
    for (StateId s = 0; s < S; ++s) {
      if (next[s] && !closure[s]) closure[s] = grew = true;
    }
  }
  return {closure};
}

}  // namespace detail

// All deterministic Markov policies of player k that differ on decision nodes:
// reachable (layer, state) pairs where k's action affects its own reward or the
// transition. Elsewhere the first action is played. Discounted games enumerate
// stationary policies.
inline std::vector<PolicyFactor> enumerate_deterministic(const MarkovGame& game, PlayerId k,
                                                         std::size_t budget = 1'000'000) {
  if (k >= game.num_players()) throw DomainError("player out of range");
  const std::size_t L = game.num_layers();
  const std::size_t S = game.num_states();
  const std::size_t A = game.num_actions(k);
  const auto reach = detail::reachable(game);
  std::vector<std::pair<std::size_t, StateId>> nodes;
  for (std::size_t h = 0; h < L; ++h) {
    for (StateId s = 0; s < S; ++s) {
      if (reach[h][s] && detail::action_matters(game, h, s, k)) nodes.emplace_back(h, s);
    }
  }
  std::size_t count = 1;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (count > budget / A) {
      throw CapacityError("deterministic policy enumeration exceeds budget of " +
                          std::to_string(budget));
    }
    count *= A;
  }
  PolicyFactor base(A, L, S);
  for (std::size_t h = 0; h < L; ++h) {
    for (StateId s = 0; s < S; ++s) base.set_pure(h, s, 0);
  }
  std::vector<PolicyFactor> out;
  out.reserve(count);
  JointActionSpace space(std::vector<std::size_t>(nodes.size(), A));
  JointAction choice(nodes.size(), 0);
  for (std::size_t i = 0; i < count; ++i) {
    PolicyFactor f = base;
    for (std::size_t j = 0; j < nodes.size(); ++j) f.set_pure(nodes[j].first, nodes[j].second, choice[j]);
    out.push_back(std::move(f));
    space.next(choice);
  }
  return out;
}

}  // namespace pmg
