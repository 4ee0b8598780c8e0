#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace fshe::detail {

/// Pairwise (cascade) summation: deterministic and with O(log n) error growth.
inline double pairwise_sum(std::span<const double> values) {
  if (values.size() <= 16) {
    double s = 0.0;
    for (double v : values) s += v;
    return s;
  }
  const std::size_t half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

struct MeanStderr {
  double mean = 0.0;
  double std_error = 0.0;
};

/// Sample mean and its standard error (two-pass, pairwise sums).
inline MeanStderr mean_stderr(std::span<const double> values) {
  const std::size_t n = values.size();
  if (n == 0) return {};
  const double mean = pairwise_sum(values) / static_cast<double>(n);
  if (n < 2) return {mean, 0.0};
  std::vector<double> squares(n);
  for (std::size_t i = 0; i < n; ++i) squares[i] = (values[i] - mean) * (values[i] - mean);
  const double ss = pairwise_sum(squares);
  const double var = ss / static_cast<double>(n - 1);
  return {mean, std::sqrt(var / static_cast<double>(n))};
}

}  // namespace fshe::detail
