#pragma once

#include <stdexcept>
#include <string>

namespace pmg {

// Index outside the valid range, or a parameter outside its mathematical domain.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Arrays whose dimensions do not agree with the game they are used with.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A dense enumeration would exceed its documented budget.
class CapacityError : public std::length_error {
 public:
  using std::length_error::length_error;
};

// Input violates a structural requirement of the algorithm (for example,
// continuation values that are not zero-sum).
class StructuralError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Malformed game or policy document. The message starts with a JSON path.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& path, const std::string& what)
      : std::runtime_error(path + ": " + what), path_(path) {}

  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

}  // namespace pmg
