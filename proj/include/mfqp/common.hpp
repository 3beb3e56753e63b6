#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace mfqp {

enum class Reason {
  truncation_mismatch,
  invalid_distribution,
  invalid_argument,
  edge_not_present,
  missing_bounds,
  instability,
  stiffness,
  equilibrium_not_found,
  infeasible_trajectory,
  endpoint_mismatch,
  undecidable_profile,
  absorbing_state,
  truncation_overflow,
  interacting_model,
  config,
  io,
};

const char* reason_name(Reason r);

// Validation failures map to CLI exit code 2, numeric failures to 3.
bool is_validation_reason(Reason r);

class Error : public std::runtime_error {
 public:
  Error(Reason reason, const std::string& what)
      : std::runtime_error(std::string(reason_name(reason)) + ": " + what), reason_(reason) {}
  Reason reason() const { return reason_; }

 private:
  Reason reason_;
};

// Extended nonnegative real. Infinity is a flag, never an overflowed double.
class ExtReal {
 public:
  constexpr ExtReal() = default;
  constexpr ExtReal(double v) : value_(v) {}  // NOLINT(implicit)

  static constexpr ExtReal infinity() {
    ExtReal r;
    r.infinite_ = true;
    return r;
  }

  constexpr bool is_infinite() const { return infinite_; }
  constexpr bool is_finite() const { return !infinite_; }

  // Throws when infinite so callers cannot silently read a sentinel.
  double value() const {
    if (infinite_) throw Error(Reason::invalid_argument, "value() on infinite ExtReal");
    return value_;
  }
  // Infinity maps to IEEE inf; only for formatting and comparisons.
  double as_double() const { return infinite_ ? std::numeric_limits<double>::infinity() : value_; }

  friend ExtReal operator+(ExtReal a, ExtReal b) {
    if (a.infinite_ || b.infinite_) return infinity();
    return ExtReal(a.value_ + b.value_);
  }
  ExtReal& operator+=(ExtReal o) { return *this = *this + o; }

  friend bool operator<(ExtReal a, ExtReal b) { return a.as_double() < b.as_double(); }
  friend bool operator<=(ExtReal a, ExtReal b) { return a.as_double() <= b.as_double(); }
  friend bool operator>(ExtReal a, ExtReal b) { return b < a; }
  friend bool operator>=(ExtReal a, ExtReal b) { return b <= a; }

 private:
  double value_ = 0.0;
  bool infinite_ = false;
};

std::string ext_to_string(ExtReal v);

// x log x with the 0 log 0 = 0 convention.
inline double xlogx(double x) { return x > 0.0 ? x * std::log(x) : 0.0; }

inline double theta_fn(int z) { return z > 1 ? z * std::log(static_cast<double>(z)) : 0.0; }

// 17 significant digits, '.' separator.
std::string format_real(double v);

}  // namespace mfqp
