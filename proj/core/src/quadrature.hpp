#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace fshe::detail {

struct Quadrature {
  double value = 0.0;
  double error = 0.0;
};

using Kronrod21 = boost::math::quadrature::gauss_kronrod<double, 21>;

/// One Gauss-Kronrod panel on a finite interval; error is |K21 - G10|.
template <class F>
Quadrature kronrod_panel(F& f, double a, double b) {
  double error = 0.0;
  const double value = Kronrod21::integrate(f, a, b, 0, 0.0, &error);
  return {value, error};
}

/// Bisection until each panel's error is below its share of abs_tol; shares
/// never drop below `floor` (the roundoff level of the whole integral).
template <class F>
Quadrature adaptive_panel(F& f, double a, double b, double abs_tol, double floor, int depth) {
  const Quadrature q = kronrod_panel(f, a, b);
  if (q.error <= std::max(abs_tol, floor) || depth <= 0 || !std::isfinite(q.value)) return q;
  const double m = 0.5 * (a + b);
  const Quadrature left = adaptive_panel(f, a, m, 0.5 * abs_tol, floor, depth - 1);
  const Quadrature right = adaptive_panel(f, m, b, 0.5 * abs_tol, floor, depth - 1);
  return {left.value + right.value, left.error + right.error};
}

/// Sum of adaptive integrals over consecutive breakpoints (sorted, de-duplicated,
/// clipped to the finite interval [a, b]). The absolute tolerance is rel_tol
/// times a first-pass estimate of the L1 norm, split over the pieces by length.
template <class F>
Quadrature integrate_pieces(F&& f, double a, double b, std::vector<double> breaks,
                            double rel_tol = 1e-11, int depth = 24) {
  breaks.push_back(a);
  breaks.push_back(b);
  for (double& x : breaks) x = std::clamp(x, a, b);
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
  double l1 = 0.0;
  auto absf = [&f](double x) { return std::abs(f(x)); };
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
    l1 += kronrod_panel(absf, breaks[i], breaks[i + 1]).value;
  }
  const double budget = rel_tol * std::max(l1, std::numeric_limits<double>::min());
  const double floor = 10.0 * std::numeric_limits<double>::epsilon() * l1;
  Quadrature total;
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
    const double share = budget * (breaks[i + 1] - breaks[i]) / (b - a);
    const Quadrature piece = adaptive_panel(f, breaks[i], breaks[i + 1], share, floor, depth);
    total.value += piece.value;
    total.error += piece.error;
  }
  return total;
}

/// Integral over [a, infinity) through x = a + s / (1 - s) on [0, 1).
template <class F>
Quadrature integrate_to_infinity(F&& f, double a, double rel_tol = 1e-11,
                                 std::vector<double> breaks = {}) {
  auto g = [&f, a](double s) {
    const double w = 1.0 - s;
    return f(a + s / w) / (w * w);
  };
  std::vector<double> s_breaks;
  for (double x : breaks) {
    if (x > a) s_breaks.push_back((x - a) / (1.0 + x - a));
  }
  return integrate_pieces(g, 0.0, 1.0, std::move(s_breaks), rel_tol);
}

}  // namespace fshe::detail
