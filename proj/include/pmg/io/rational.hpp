#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <optional>
#include <string>

#include "json.hpp"
#include "pmg/errors.hpp"

namespace pmg::io {

struct Fraction {
  std::int64_t num = 0;
  std::int64_t den = 1;
};

// Smallest-denominator fraction p/q (q <= max_den) whose double quotient is
// within rel_tol of x (bitwise equal when rel_tol is 0), found along the
// continued-fraction convergents.
inline std::optional<Fraction> exact_fraction(double x, std::int64_t max_den = 1'000'000, double rel_tol = 0.0) {
  if (!std::isfinite(x)) return std::nullopt;
  const bool negative = x < 0;
  double rest = std::abs(x);
  std::int64_t p0 = 0, q0 = 1, p1 = 1, q1 = 0;
  for (int i = 0; i < 40; ++i) {
    const double whole = std::floor(rest);
    if (whole > 9.0e15) return std::nullopt;
    const auto a = static_cast<std::int64_t>(whole);
    const std::int64_t p2 = a * p1 + p0;
    const std::int64_t q2 = a * q1 + q0;
    if (q2 > max_den) return std::nullopt;
    const double q = static_cast<double>(p2) / static_cast<double>(q2);
    if (q == std::abs(x) || std::abs(q - std::abs(x)) <= rel_tol * std::max(1.0, std::abs(x))) {
      return Fraction{negative ? -p2 : p2, q2};
    }
    p0 = p1;
    q0 = q1;
    p1 = p2;
    q1 = q2;
    const double frac = rest - whole;
    if (frac == 0.0) return std::nullopt;
    rest = 1.0 / frac;
  }
  return std::nullopt;
}

// Integers and short fractions are written exactly ("1/20"); anything else as a
// shortest round-trip decimal.
inline nlohmann::json number_to_json(double x) {
  if (x == 0.0) return 0;
  if (std::isfinite(x) && std::floor(x) == x && std::abs(x) < 9.0e15) return static_cast<std::int64_t>(x);
  if (auto f = exact_fraction(x)) return std::to_string(f->num) + "/" + std::to_string(f->den);
  return x;
}

// Report values: like number_to_json, but computed quantities within 1e-14
// (relative) of a fraction with denominator <= 100000 are shown as that
// fraction. Game and policy files keep the exact writer.
inline nlohmann::json report_number(double x) {
  if (auto exact = number_to_json(x); !exact.is_number_float()) return exact;
  if (std::abs(x) < 1e-14) return 0;
  if (auto f = exact_fraction(x, 100'000, 1e-14)) {
    if (f->den == 1) return f->num;
    return std::to_string(f->num) + "/" + std::to_string(f->den);
  }
  return x;
}

// Accepts JSON numbers, decimal strings and "p/q" strings.
inline double number_from_json(const nlohmann::json& j, const std::string& path) {
  if (j.is_number()) return j.get<double>();
  if (!j.is_string()) throw ParseError(path, "expected a number or a \"p/q\" string");
  const auto& text = j.get_ref<const std::string&>();
  auto parse = [&](const std::string& part) {
    if (part.empty()) throw ParseError(path, "malformed number \"" + text + "\"");
    char* end = nullptr;
    const double v = std::strtod(part.c_str(), &end);
    if (end != part.c_str() + part.size() || !std::isfinite(v)) {
      throw ParseError(path, "malformed number \"" + text + "\"");
    }
    return v;
  };
  const auto slash = text.find('/');
  if (slash == std::string::npos) return parse(text);
  const double num = parse(text.substr(0, slash));
  const double den = parse(text.substr(slash + 1));
  if (den == 0.0) throw ParseError(path, "zero denominator in \"" + text + "\"");
  return num / den;
}

}  // namespace pmg::io
