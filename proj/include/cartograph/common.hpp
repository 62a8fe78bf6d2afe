#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <iostream>
#include <mutex>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>

namespace cartograph {

// All recoverable failures surface as this type (or a subclass).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point2&, const Point2&) = default;
};

inline double squared_distance(const Point2& a, const Point2& b) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  return dx * dx + dy * dy;
}

// Warnings are non-fatal diagnostics (degenerate projection, collinear hull).
// The handler is process-wide so that tests and the CLI can redirect it.
using WarningHandler = std::function<void(std::string_view)>;

namespace detail {
inline std::mutex& warning_mutex() {
  static std::mutex m;
  return m;
}
inline WarningHandler& warning_handler() {
  static WarningHandler handler = [](std::string_view msg) {
    std::cerr << "warning: " << msg << '\n';
  };
  return handler;
}
}  // namespace detail

inline WarningHandler set_warning_handler(WarningHandler handler) {
  std::lock_guard lock(detail::warning_mutex());
  return std::exchange(detail::warning_handler(), std::move(handler));
}

inline void warn(std::string_view message) {
  std::lock_guard lock(detail::warning_mutex());
  if (detail::warning_handler()) detail::warning_handler()(message);
}

// FNV-1a, used wherever a stable (platform independent) string hash is needed.
inline std::uint64_t stable_hash(std::string_view s, std::uint64_t seed = 0) {
  std::uint64_t h = 1469598103934665603ULL ^ (seed * 0x9E3779B97F4A7C15ULL);
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace cartograph
