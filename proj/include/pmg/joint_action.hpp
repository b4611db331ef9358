#pragma once

#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "pmg/errors.hpp"

namespace pmg {

using PlayerId = std::size_t;
using StateId = std::size_t;
using ActionId = std::size_t;
using JointAction = std::vector<ActionId>;

// Maximum number of entries a dense joint-action table may have.
inline constexpr std::size_t kMaxJointActions = 1'000'000;

// Mixed-radix encoding of joint actions over an ordered list of players.
// The first player is the most significant digit.
class JointActionSpace {
 public:
  JointActionSpace() = default;

  explicit JointActionSpace(std::vector<std::size_t> radices) : radices_(std::move(radices)) {
    size_ = 1;
    for (auto r : radices_) {
      if (r == 0) throw DomainError("joint action space: empty action set");
      if (size_ > kMaxJointActions / r) {
        throw CapacityError("joint action space exceeds " + std::to_string(kMaxJointActions) +
                            " entries");
      }
      size_ *= r;
    }
  }

  std::size_t size() const noexcept { return size_; }
  std::size_t arity() const noexcept { return radices_.size(); }
  std::span<const std::size_t> radices() const noexcept { return radices_; }

  std::size_t encode(std::span<const ActionId> actions) const {
    if (actions.size() != radices_.size()) throw ShapeError("joint action has wrong arity");
    std::size_t index = 0;
    for (std::size_t i = 0; i < radices_.size(); ++i) {
      if (actions[i] >= radices_[i]) throw DomainError("action index out of range");
      index = index * radices_[i] + actions[i];
    }
    return index;
  }

  JointAction decode(std::size_t index) const {
    JointAction out(radices_.size());
    decode_into(index, out);
    return out;
  }

  void decode_into(std::size_t index, std::span<ActionId> out) const {
    for (std::size_t i = radices_.size(); i-- > 0;) {
      out[i] = index % radices_[i];
      index /= radices_[i];
    }
  }

  // Advances `actions` to the next joint action; returns false after the last one.
  bool next(std::span<ActionId> actions) const {
    for (std::size_t i = radices_.size(); i-- > 0;) {
      if (++actions[i] < radices_[i]) return true;
      actions[i] = 0;
    }
    return false;
  }

 private:
  std::vector<std::size_t> radices_;
  std::size_t size_ = 1;
};

}  // namespace pmg
