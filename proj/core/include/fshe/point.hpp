#pragma once

#include <array>
#include <cmath>

namespace fshe {

/// A point of R^d for d <= 3. Components at index >= d must be zero.
using Point = std::array<double, 3>;

inline constexpr int kMaxDim = 3;

inline Point point1(double x) { return {x, 0.0, 0.0}; }

inline double dot(const Point& a, const Point& b) {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}

inline double norm(const Point& a) { return std::sqrt(dot(a, a)); }

inline Point operator-(const Point& a, const Point& b) {
  return {a[0] - b[0], a[1] - b[1], a[2] - b[2]};
}

inline Point operator+(const Point& a, const Point& b) {
  return {a[0] + b[0], a[1] + b[1], a[2] + b[2]};
}

inline Point operator*(double s, const Point& a) { return {s * a[0], s * a[1], s * a[2]}; }

inline bool is_finite(const Point& a) {
  return std::isfinite(a[0]) && std::isfinite(a[1]) && std::isfinite(a[2]);
}

}  // namespace fshe
