#include "fshe/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numbers>
#include <string>

#include "fft_backend.hpp"
#include "fshe/errors.hpp"
#include "fshe/version.hpp"

namespace fshe {
namespace detail {

namespace {

std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwDeleter {
  void operator()(void* p) const { fftw_free(p); }
};

// Scratch arrays reused by every transform run on this thread.
struct Workspace {
  std::unique_ptr<double, FftwDeleter> real;
  std::unique_ptr<fftw_complex, FftwDeleter> spectrum;
  std::size_t real_size = 0;
  std::size_t spectrum_size = 0;

  void reserve(std::size_t nr, std::size_t nc) {
    if (nr > real_size) {
      real.reset(static_cast<double*>(fftw_malloc(sizeof(double) * nr)));
      real_size = nr;
    }
    if (nc > spectrum_size) {
      spectrum.reset(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * nc)));
      spectrum_size = nc;
    }
  }
};

Workspace& workspace(std::size_t nr, std::size_t nc) {
  thread_local Workspace ws;
  ws.reserve(nr, nc);
  return ws;
}

}  // namespace

FftBackend::FftBackend(int dim, int n) {
  std::vector<int> shape(static_cast<std::size_t>(dim), n);
  real_count_ = 1;
  for (int k = 0; k < dim; ++k) real_count_ *= static_cast<std::size_t>(n);
  complex_count_ = real_count_ / static_cast<std::size_t>(n) * static_cast<std::size_t>(n / 2 + 1);
  std::lock_guard<std::mutex> lock(planner_mutex());
  auto* r = static_cast<double*>(fftw_malloc(sizeof(double) * real_count_));
  auto* c = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * complex_count_));
  forward_ = fftw_plan_dft_r2c(dim, shape.data(), r, c, FFTW_ESTIMATE);
  backward_ = fftw_plan_dft_c2r(dim, shape.data(), c, r, FFTW_ESTIMATE);
  fftw_free(r);
  fftw_free(c);
  if (forward_ == nullptr || backward_ == nullptr) throw Error("FFTW plan creation failed");
}

FftBackend::~FftBackend() {
  std::lock_guard<std::mutex> lock(planner_mutex());
  fftw_destroy_plan(forward_);
  fftw_destroy_plan(backward_);
}

void FftBackend::multiply(std::span<double> values, std::span<const double> symbol) const {
  Workspace& ws = workspace(real_count_, complex_count_);
  double* r = ws.real.get();
  fftw_complex* c = ws.spectrum.get();
  std::copy(values.begin(), values.end(), r);
  fftw_execute_dft_r2c(forward_, r, c);
  const double scale = 1.0 / static_cast<double>(real_count_);
  for (std::size_t k = 0; k < complex_count_; ++k) {
    const double m = symbol[k] * scale;
    c[k][0] *= m;
    c[k][1] *= m;
  }
  // c2r destroys its input, which is scratch here.
  fftw_execute_dft_c2r(backward_, c, r);
  std::copy(r, r + real_count_, values.begin());
}

void FftBackend::forward(std::span<const double> values,
                         std::vector<std::complex<double>>& out) const {
  Workspace& ws = workspace(real_count_, complex_count_);
  double* r = ws.real.get();
  fftw_complex* c = ws.spectrum.get();
  std::copy(values.begin(), values.end(), r);
  fftw_execute_dft_r2c(forward_, r, c);
  out.resize(complex_count_);
  for (std::size_t k = 0; k < complex_count_; ++k) out[k] = {c[k][0], c[k][1]};
}

}  // namespace detail

namespace {

bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

}  // namespace

Lattice::Lattice(int dim, double half_width, int n)
    : dim_(dim), n_(n), half_width_(half_width) {
  if (dim < 1 || dim > kMaxDim) {
    throw DomainError("lattice dimension must be 1, 2 or 3, got " + std::to_string(dim));
  }
  if (!(half_width > 0.0) || !std::isfinite(half_width)) {
    throw DomainError("lattice half width L must be positive and finite");
  }
  if (!is_power_of_two(n) || n < 2) {
    throw DomainError("lattice size n must be a power of two >= 2, got " + std::to_string(n));
  }
  spacing_ = 2.0 * half_width / n;
  cell_volume_ = std::pow(spacing_, dim);
  site_count_ = 1;
  for (int k = 0; k < dim; ++k) site_count_ *= static_cast<std::size_t>(n);
  fft_ = std::make_shared<const detail::FftBackend>(dim, n);

  const std::size_t half = static_cast<std::size_t>(n / 2 + 1);
  std::vector<double> norms(spectral_count(), 0.0);
  const double unit = std::numbers::pi / half_width;
  for (std::size_t m = 0; m < norms.size(); ++m) {
    std::size_t rest = m;
    double sum = 0.0;
    for (int k = dim - 1; k >= 0; --k) {
      const std::size_t extent = (k == dim - 1) ? half : static_cast<std::size_t>(n);
      const auto i = static_cast<long>(rest % extent);
      rest /= extent;
      const long wrapped = (i <= n / 2) ? i : i - n;
      const double xi = unit * static_cast<double>(wrapped);
      sum += xi * xi;
    }
    norms[m] = std::sqrt(sum);
  }
  frequency_norms_ = std::make_shared<const std::vector<double>>(std::move(norms));
}

Lattice make_lattice(int dim, double half_width, int n) { return Lattice(dim, half_width, n); }

Point Lattice::site(std::size_t index) const {
  Point x{};
  for (int k = dim_ - 1; k >= 0; --k) {
    const auto i = index % static_cast<std::size_t>(n_);
    index /= static_cast<std::size_t>(n_);
    x[static_cast<std::size_t>(k)] = -half_width_ + static_cast<double>(i) * spacing_;
  }
  return x;
}

std::optional<std::size_t> Lattice::find_site(const Point& x) const {
  std::size_t index = 0;
  for (int k = 0; k < kMaxDim; ++k) {
    const double v = x[static_cast<std::size_t>(k)];
    if (k >= dim_) {
      if (v != 0.0) return std::nullopt;
      continue;
    }
    const double u = (v + half_width_) / spacing_;
    const double r = std::round(u);
    if (std::abs(u - r) > 1e-9 || r < 0.0 || r >= n_) return std::nullopt;
    index = index * static_cast<std::size_t>(n_) + static_cast<std::size_t>(r);
  }
  return index;
}

std::size_t Lattice::index_of(const Point& x) const {
  auto idx = find_site(x);
  if (!idx) {
    throw DomainError("point (" + std::to_string(x[0]) + ", " + std::to_string(x[1]) + ", " +
                      std::to_string(x[2]) + ") is not a lattice site");
  }
  return *idx;
}

std::size_t Lattice::spectral_count() const { return fft_->complex_count(); }

const std::vector<double>& Lattice::frequency_norms() const { return *frequency_norms_; }

Point Lattice::periodic_lag(std::size_t index) const {
  Point lag{};
  for (int k = dim_ - 1; k >= 0; --k) {
    const auto i = static_cast<int>(index % static_cast<std::size_t>(n_));
    index /= static_cast<std::size_t>(n_);
    lag[static_cast<std::size_t>(k)] = std::min(i, n_ - i) * spacing_;
  }
  return lag;
}

void Lattice::spectral_multiply(std::span<double> values, std::span<const double> symbol) const {
  if (values.size() != site_count_ || symbol.size() != spectral_count()) {
    throw DomainError("spectral_multiply: size mismatch");
  }
  fft_->multiply(values, symbol);
}

std::vector<double> Lattice::forward_real_part(std::span<const double> values) const {
  if (values.size() != site_count_) throw DomainError("forward_real_part: size mismatch");
  std::vector<std::complex<double>> spectrum;
  fft_->forward(values, spectrum);
  std::vector<double> out(spectrum.size());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = spectrum[k].real();
  return out;
}

ScalarField::ScalarField(Lattice lat, std::vector<double> v)
    : lattice(std::move(lat)), values(std::move(v)) {
  if (values.size() != lattice.site_count()) {
    throw DomainError("field has " + std::to_string(values.size()) + " values, lattice has " +
                      std::to_string(lattice.site_count()) + " sites");
  }
}

double ScalarField::sup_abs() const {
  double m = 0.0;
  for (double v : values) m = std::max(m, std::abs(v));
  return m;
}

double ScalarField::min() const { return *std::min_element(values.begin(), values.end()); }

bool ScalarField::all_finite() const {
  return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace fshe

namespace fshe {

std::string library_version() { return FSHE_VERSION; }

std::string fft_backend_version() { return fftw_version; }

}  // namespace fshe
