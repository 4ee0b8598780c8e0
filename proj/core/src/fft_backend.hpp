#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include <fftw3.h>

namespace fshe::detail {

/// Real-to-complex / complex-to-real plans of one lattice shape. Plans are
/// created with FFTW_ESTIMATE (deterministic) and executed on per-thread buffers
/// through the new-array interface, so one backend can be shared by threads.
class FftBackend {
 public:
  FftBackend(int dim, int n);
  ~FftBackend();
  FftBackend(const FftBackend&) = delete;
  FftBackend& operator=(const FftBackend&) = delete;

  std::size_t real_count() const { return real_count_; }
  std::size_t complex_count() const { return complex_count_; }

  /// values <- IFFT(symbol .* FFT(values)) / N.
  void multiply(std::span<double> values, std::span<const double> symbol) const;
  /// Unnormalised forward transform.
  void forward(std::span<const double> values, std::vector<std::complex<double>>& out) const;

 private:
  std::size_t real_count_;
  std::size_t complex_count_;
  fftw_plan forward_;
  fftw_plan backward_;
};

}  // namespace fshe::detail
