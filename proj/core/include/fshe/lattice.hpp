#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "fshe/point.hpp"

namespace fshe {

namespace detail {
class FftBackend;
}

/// Periodic lattice on [-L, L)^d with n sites per axis (n a power of two).
/// Site i along an axis sits at -L + i*h, so the origin is site n/2.
/// Sites are stored row-major with the last axis fastest.
class Lattice {
 public:
  Lattice(int dim, double half_width, int n);

  int dim() const { return dim_; }
  int n() const { return n_; }
  double half_width() const { return half_width_; }
  double spacing() const { return spacing_; }
  double cell_volume() const { return cell_volume_; }
  std::size_t site_count() const { return site_count_; }

  Point site(std::size_t index) const;
  /// Index of the site at `x`; throws DomainError if `x` is not a lattice site.
  std::size_t index_of(const Point& x) const;
  std::optional<std::size_t> find_site(const Point& x) const;

  /// Number of half-spectrum modes of a real transform of a field.
  std::size_t spectral_count() const;
  /// |xi| for every half-spectrum mode, in transform order.
  const std::vector<double>& frequency_norms() const;
  /// Per-axis periodic lag vector (in length units) for every site, i.e. the
  /// torus distance from site 0 measured along each axis.
  Point periodic_lag(std::size_t index) const;

  /// values <- IFFT(symbol .* FFT(values)); symbol is real and has spectral_count() entries.
  void spectral_multiply(std::span<double> values, std::span<const double> symbol) const;
  /// Unnormalised forward transform of a real field; returns spectral_count() real parts
  /// (imaginary parts discarded). Used for eigenvalues of symmetric circulant matrices.
  std::vector<double> forward_real_part(std::span<const double> values) const;

  bool operator==(const Lattice& other) const {
    return dim_ == other.dim_ && n_ == other.n_ && half_width_ == other.half_width_;
  }

 private:
  int dim_;
  int n_;
  double half_width_;
  double spacing_;
  double cell_volume_;
  std::size_t site_count_;
  std::shared_ptr<const detail::FftBackend> fft_;
  std::shared_ptr<const std::vector<double>> frequency_norms_;
};

/// make_lattice(d, L, n): throws DomainError unless n is a positive power of two.
Lattice make_lattice(int dim, double half_width, int n);

/// One real value per lattice site.
struct ScalarField {
  Lattice lattice;
  std::vector<double> values;

  explicit ScalarField(Lattice lat, double fill = 0.0)
      : lattice(std::move(lat)), values(lattice.site_count(), fill) {}
  ScalarField(Lattice lat, std::vector<double> v);

  double sup_abs() const;
  double min() const;
  bool all_finite() const;
};

}  // namespace fshe
