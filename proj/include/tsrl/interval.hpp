#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

namespace tsrl {

// Discrete time, counted in environment steps.
using Tick = std::uint32_t;

// Closed interval [lower, upper] over the naturals; a missing upper bound means
// the interval is unbounded to the right.
struct Interval {
  Tick lower = 0;
  std::optional<Tick> upper;

  static Interval closed(Tick lo, Tick hi) {
    if (lo > hi) {
      throw std::invalid_argument("malformed interval: lower bound " + std::to_string(lo) +
                                  " exceeds upper bound " + std::to_string(hi));
    }
    return Interval{lo, hi};
  }
  static Interval from(Tick lo) { return Interval{lo, std::nullopt}; }
  static Interval all() { return Interval{0, std::nullopt}; }

  bool bounded() const { return upper.has_value(); }
  bool contains(std::uint64_t t) const { return t >= lower && (!upper || t <= *upper); }

  std::string str() const {
    return "[" + std::to_string(lower) + "," + (upper ? std::to_string(*upper) + "]" : "inf)");
  }

  friend bool operator==(const Interval&, const Interval&) = default;
};

}  // namespace tsrl
