#include "fshe/stable_kernel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>

#include <boost/math/distributions/normal.hpp>

#include "fshe/errors.hpp"
#include "parallel.hpp"
#include "quadrature.hpp"
#include "stats.hpp"

namespace fshe {

namespace {

constexpr double kPi = std::numbers::pi;

void require_time(double t, const char* what) {
  if (!(t > 0.0) || !std::isfinite(t)) {
    throw DomainError(std::string(what) + ": time must be positive and finite, got " +
                      std::to_string(t));
  }
}

bool is_closed_form(double alpha) { return alpha == 1.0 || alpha == 2.0; }

// p_t(r) for alpha in {1, 2}.
double closed_form(double alpha, int d, double t, double r) {
  if (alpha == 2.0) {
    return std::pow(4.0 * kPi * t, -0.5 * d) * std::exp(-r * r / (4.0 * t));
  }
  const double c = std::tgamma(0.5 * (d + 1)) / std::pow(kPi, 0.5 * (d + 1));
  return c * t / std::pow(t * t + r * r, 0.5 * (d + 1));
}

double unit_peak(double alpha, int d) {
  return std::tgamma(d / alpha) /
         (alpha * std::pow(2.0, d - 1) * std::pow(kPi, 0.5 * d) * std::tgamma(0.5 * d));
}

// Large-rho expansion of p_1(rho):
//   sum_k (-1)^{k+1}/k! 2^{alpha k} Gamma((alpha k + d)/2) Gamma(alpha k/2 + 1)
//         sin(pi alpha k / 2) / pi^{d/2+1} rho^{-alpha k - d}.
// Convergent for alpha < 1, asymptotic otherwise. Returns a value only when the
// smallest retained term is below 1e-12 of the sum.
std::optional<double> series_unit_density(double alpha, int d, double rho) {
  if (!(rho > 0.0)) return std::nullopt;
  const double log_rho = std::log(rho);
  const double log_const = -(0.5 * d + 1.0) * std::log(kPi) - d * log_rho;
  double sum = 0.0;
  double previous = std::numeric_limits<double>::infinity();
  double last = std::numeric_limits<double>::infinity();
  for (int k = 1; k <= 400; ++k) {
    const double ak = alpha * k;
    const double half = 0.5 * ak;
    if (std::abs(half - std::round(half)) < 1e-12) continue;  // sin(pi alpha k / 2) = 0
    const double s = std::sin(kPi * half);
    const double log_mag = std::lgamma(0.5 * (ak + d)) + std::lgamma(0.5 * ak + 1.0) -
                           std::lgamma(k + 1.0) + ak * std::numbers::ln2 - ak * log_rho +
                           log_const;
    const double mag = std::exp(log_mag) * std::abs(s);
    if (mag > previous && k > 2) break;  // asymptotic series started to diverge
    const double sign = ((k + 1) % 2 == 0 ? 1.0 : -1.0) * (s > 0 ? 1.0 : -1.0);
    sum += sign * mag;
    previous = mag;
    last = mag;
    if (mag < 1e-17 * std::abs(sum)) break;
  }
  if (!(sum > 0.0) || !(last <= 1e-12 * sum)) return std::nullopt;
  return sum;
}

// p_1(rho) by Fourier inversion of exp(-|xi|^alpha).
double quadrature_unit_density(double alpha, int d, double rho) {
  if (d > 3) throw DomainError("Fourier inversion is implemented for d <= 3");
  const double xi_max = std::pow(39.2, 1.0 / alpha);
  auto integrand = [alpha, d, rho](double xi) -> double {
    const double damp = std::exp(-std::pow(xi, alpha));
    switch (d) {
      case 1:
        return std::cos(rho * xi) * damp / kPi;
      case 2:
        return xi * std::cyl_bessel_j(0.0, rho * xi) * damp / (2.0 * kPi);
      default:
        if (rho == 0.0) return xi * xi * damp / (2.0 * kPi * kPi);
        return xi * std::sin(rho * xi) / rho * damp / (2.0 * kPi * kPi);
    }
  };
  std::vector<double> breaks;
  const double first = std::min(1.0, xi_max);
  for (int k = 1; k <= 24; ++k) breaks.push_back(first * std::ldexp(1.0, -k));
  breaks.push_back(first);
  if (rho > 0.0) {
    double panel = kPi / rho;
    const double panels = xi_max / panel;
    if (panels > 4000.0) panel *= std::ceil(panels / 4000.0);
    for (double b = panel; b < xi_max; b += panel) breaks.push_back(b);
  }
  const auto q = detail::integrate_pieces(integrand, 0.0, xi_max, std::move(breaks), 1e-12);
  if (!(q.error <= 1e-6 * std::abs(q.value) + 1e-14)) {
    throw NumericalAccuracyError("Fourier inversion did not reach its tolerance at rho = " +
                                 std::to_string(rho));
  }
  return q.value;
}

double unit_density(double alpha, int d, double rho) {
  if (rho >= 3.0) {
    if (auto s = series_unit_density(alpha, d, rho)) return *s;
  }
  return quadrature_unit_density(alpha, d, rho);
}

// Positive (rho)-stable variate with Laplace transform exp(-lambda^rho), 0 < rho < 1.
double sample_positive_stable(double rho, Rng& rng) {
  std::uniform_real_distribution<double> uniform(0.0, kPi);
  std::exponential_distribution<double> exponential(1.0);
  for (;;) {
    const double u = uniform(rng);
    const double e = exponential(rng);
    const double su = std::sin(u);
    if (!(su > 0.0) || !(e > 0.0)) continue;
    const double a = std::sin(rho * u) / std::pow(su, 1.0 / rho) *
                     std::pow(std::sin((1.0 - rho) * u) / e, (1.0 - rho) / rho);
    if (std::isfinite(a) && a > 0.0) return a;
  }
}

}  // namespace

StableKernelSpec::StableKernelSpec(double alpha, int dim) : alpha_(alpha), dim_(dim) {
  if (!(alpha > 0.0 && alpha <= 2.0)) {
    throw DomainError("alpha must lie in (0, 2], got " + std::to_string(alpha));
  }
  if (dim < 1 || dim > kMaxDim) {
    throw DomainError("dimension must be 1, 2 or 3, got " + std::to_string(dim));
  }
}

double eval_kernel_radial(const StableKernelSpec& spec, double t, double r) {
  require_time(t, "eval_kernel");
  if (!std::isfinite(r)) throw DomainError("eval_kernel: point must be finite");
  r = std::abs(r);
  const double alpha = spec.alpha();
  const int d = spec.dim();
  if (is_closed_form(alpha)) return closed_form(alpha, d, t, r);
  const double scale = std::pow(t, 1.0 / alpha);
  return unit_density(alpha, d, r / scale) / std::pow(scale, d);
}

double eval_kernel(const StableKernelSpec& spec, double t, const Point& x) {
  if (!is_finite(x)) throw DomainError("eval_kernel: point must be finite");
  return eval_kernel_radial(spec, t, norm(x));
}

double fourier_inversion(const StableKernelSpec& spec, double t, double r) {
  require_time(t, "fourier_inversion");
  const double scale = std::pow(t, 1.0 / spec.alpha());
  return quadrature_unit_density(spec.alpha(), spec.dim(), std::abs(r) / scale) /
         std::pow(scale, spec.dim());
}

double peak_density(const StableKernelSpec& spec, double t) {
  require_time(t, "peak_density");
  return unit_peak(spec.alpha(), spec.dim()) * std::pow(t, -spec.dim() / spec.alpha());
}

double time_for_peak(const StableKernelSpec& spec, double level) {
  if (!(level > 0.0)) throw DomainError("time_for_peak: level must be positive");
  return std::pow(unit_peak(spec.alpha(), spec.dim()) / level, spec.alpha() / spec.dim());
}

// ---------------------------------------------------------------------------

StableDensity::StableDensity(const StableKernelSpec& spec)
    : spec_(spec), closed_form_(is_closed_form(spec.alpha())), step_(0.0125), rho_max_(30.0) {
  if (closed_form_) return;
  const auto count = static_cast<std::size_t>(std::lround(rho_max_ / step_)) + 1;
  table_.resize(count);
  detail::parallel_for(count, [&](std::size_t i) {
    table_[i] = unit_density(spec_.alpha(), spec_.dim(), static_cast<double>(i) * step_);
  });
}

double StableDensity::unit_time(double rho) const {
  const auto last = table_.size() - 1;
  const double u = rho / step_;
  const auto i = static_cast<std::size_t>(u);
  if (i + 2 > last) return unit_density(spec_.alpha(), spec_.dim(), rho);
  const double s = u - static_cast<double>(i);
  // Nodes i-1, i, i+1, i+2; the density is even so node -1 mirrors node 1.
  const double f0 = (i == 0) ? table_[1] : table_[i - 1];
  const double f1 = table_[i];
  const double f2 = table_[i + 1];
  const double f3 = table_[i + 2];
  return -s * (s - 1.0) * (s - 2.0) / 6.0 * f0 + (s + 1.0) * (s - 1.0) * (s - 2.0) / 2.0 * f1 -
         (s + 1.0) * s * (s - 2.0) / 2.0 * f2 + (s + 1.0) * s * (s - 1.0) / 6.0 * f3;
}

double StableDensity::operator()(double t, double r) const {
  require_time(t, "StableDensity");
  r = std::abs(r);
  if (closed_form_) return closed_form(spec_.alpha(), spec_.dim(), t, r);
  const double scale = std::pow(t, 1.0 / spec_.alpha());
  return unit_time(r / scale) / std::pow(scale, spec_.dim());
}

// ---------------------------------------------------------------------------

double sample_symmetric_stable(double alpha, Rng& rng) {
  std::uniform_real_distribution<double> uniform(-0.5 * kPi, 0.5 * kPi);
  std::exponential_distribution<double> exponential(1.0);
  for (;;) {
    const double u = uniform(rng);
    const double w = exponential(rng);
    const double cu = std::cos(u);
    if (!(cu > 0.0) || !(w > 0.0)) continue;
    if (alpha == 1.0) return std::tan(u);
    const double x = std::sin(alpha * u) / std::pow(cu, 1.0 / alpha) *
                     std::pow(std::cos((1.0 - alpha) * u) / w, (1.0 - alpha) / alpha);
    if (std::isfinite(x)) return x;
  }
}

Point sample_isotropic_stable(double alpha, int dim, Rng& rng) {
  if (dim == 1) return point1(sample_symmetric_stable(alpha, rng));
  const double a = (alpha == 2.0) ? 1.0 : sample_positive_stable(0.5 * alpha, rng);
  std::normal_distribution<double> normal(0.0, std::numbers::sqrt2);
  Point x{};
  const double s = std::sqrt(a);
  for (int k = 0; k < dim; ++k) x[static_cast<std::size_t>(k)] = s * normal(rng);
  return x;
}

// ---------------------------------------------------------------------------

double check_scaling(const StableKernelSpec& spec, double s, double t, std::span<const Point> xs) {
  if (!(s > 0.0)) throw DomainError("check_scaling: s must be positive");
  require_time(t, "check_scaling");
  if (xs.empty()) throw DomainError("check_scaling: empty point set");
  const double a = spec.alpha();
  const int d = spec.dim();
  double worst = 0.0;
  for (const Point& x : xs) {
    const double lhs = eval_kernel(spec, s * t, x);
    const double rhs = std::pow(s, -d / a) * eval_kernel(spec, t, std::pow(s, -1.0 / a) * x);
    worst = std::max(worst, std::abs(lhs - rhs) / lhs);
  }
  return worst;
}

KernelBoundReport check_product_bound(const StableKernelSpec& spec, double t, double tau,
                                      std::span<const std::pair<Point, Point>> pairs) {
  require_time(t, "check_product_bound");
  if (!(tau >= 2.0)) throw DomainError("check_product_bound: tau must be >= 2");
  if (pairs.empty()) throw DomainError("check_product_bound: empty grid");
  KernelBoundReport report;
  report.hypothesis_met = peak_density(spec, t) <= 1.0;
  report.advisory = !report.hypothesis_met;
  if (!report.hypothesis_met) report.note = "p_t(0) > 1: violations are informational only";
  const StableDensity p(spec);
  report.grid.resize(pairs.size());
  detail::parallel_for(pairs.size(), [&](std::size_t i) {
    const auto& [x, y] = pairs[i];
    GridSample& g = report.grid[i];
    g.t = t;
    g.x = x;
    g.y = y;
    g.value = p(t, norm(x - y) / tau);
    g.reference = p(t, norm(x)) * p(t, norm(y));
    g.ratio = g.value / g.reference;
  });
  report.c1_hat = std::numeric_limits<double>::infinity();
  report.c2_hat = 0.0;
  for (std::size_t i = 0; i < report.grid.size(); ++i) {
    const GridSample& g = report.grid[i];
    report.c1_hat = std::min(report.c1_hat, g.ratio);
    report.c2_hat = std::max(report.c2_hat, g.ratio);
    if (g.value < g.reference) report.violations.push_back(i);
  }
  return report;
}

KernelBoundReport check_two_sided_bound(const StableKernelSpec& spec, double t_min, double t_max,
                                        double x_max, int resolution) {
  require_time(t_min, "check_two_sided_bound");
  if (!(t_max >= t_min) || !std::isfinite(t_max)) {
    throw DomainError("check_two_sided_bound: need t_min <= t_max");
  }
  if (!(x_max > 0.0)) throw DomainError("check_two_sided_bound: x_max must be positive");
  if (resolution < 2) throw DomainError("check_two_sided_bound: resolution must be >= 2");
  const double a = spec.alpha();
  const int d = spec.dim();
  KernelBoundReport report;
  if (a == 2.0) {
    report.advisory = true;
    report.note = "alpha = 2: Gaussian tails admit no polynomial lower envelope";
  }
  const StableDensity p(spec);
  const auto n = static_cast<std::size_t>(resolution);
  report.grid.resize(n * n);
  detail::parallel_for(n, [&](std::size_t i) {
    const double t =
        (t_max == t_min)
            ? t_min
            : t_min * std::pow(t_max / t_min, static_cast<double>(i) / static_cast<double>(n - 1));
    for (std::size_t j = 0; j < n; ++j) {
      const double x = -x_max + 2.0 * x_max * static_cast<double>(j) / static_cast<double>(n - 1);
      const double r = std::abs(x);
      double envelope = std::pow(t, -d / a);
      if (r > 0.0) envelope = std::min(envelope, t / std::pow(r, d + a));
      GridSample& g = report.grid[i * n + j];
      g.t = t;
      g.x = point1(x);
      g.value = p(t, r);
      g.reference = envelope;
      g.ratio = g.value / envelope;
    }
  });
  report.c1_hat = std::numeric_limits<double>::infinity();
  for (const GridSample& g : report.grid) {
    report.c1_hat = std::min(report.c1_hat, g.ratio);
    report.c2_hat = std::max(report.c2_hat, g.ratio);
  }
  return report;
}

// ---------------------------------------------------------------------------

void propagate_in_place(const StableKernelSpec& spec, double t, ScalarField& field) {
  if (!(t >= 0.0)) throw DomainError("semigroup time must be nonnegative");
  if (t == 0.0) return;
  if (field.lattice.dim() != spec.dim()) {
    throw DomainError("field dimension does not match the kernel dimension");
  }
  const auto& xi = field.lattice.frequency_norms();
  std::vector<double> symbol(xi.size());
  for (std::size_t k = 0; k < xi.size(); ++k) symbol[k] = std::exp(-t * std::pow(xi[k], spec.alpha()));
  field.lattice.spectral_multiply(field.values, symbol);
}

SemigroupResult apply_semigroup(const StableKernelSpec& spec, double t, const ScalarField& u0) {
  require_time(t, "apply_semigroup");
  if (!u0.all_finite()) throw DomainError("apply_semigroup: u0 must be finite");
  if (u0.min() < 0.0) throw DomainError("apply_semigroup: u0 must be nonnegative");
  SemigroupResult out{u0, 0.0};
  propagate_in_place(spec, t, out.field);
  double clipped = 0.0;
  for (double& v : out.field.values) {
    if (v < 0.0) {
      clipped -= v;
      v = 0.0;
    }
  }
  out.clip_mass = clipped * u0.lattice.cell_volume();
  return out;
}

double unit_ball_mass(const ScalarField& u0) {
  std::vector<double> inside;
  for (std::size_t i = 0; i < u0.values.size(); ++i) {
    if (norm(u0.lattice.site(i)) <= 1.0 + 1e-12) inside.push_back(u0.values[i]);
  }
  return detail::pairwise_sum(inside) * u0.lattice.cell_volume();
}

DeterministicBoundReport deterministic_lower_bound_check(const StableKernelSpec& spec,
                                                         const ScalarField& u0, double t0,
                                                         std::span<const double> ts) {
  require_time(t0, "deterministic_lower_bound_check");
  if (peak_density(spec, t0) >= 1.0) {
    throw HypothesisNotMet("p_{t0}(0) >= 1; choose a larger t0");
  }
  if (ts.empty()) throw DomainError("deterministic_lower_bound_check: no times");
  for (double t : ts) {
    if (!(t > 0.0 && t <= t0)) throw DomainError("every t must lie in (0, t0]");
  }
  DeterministicBoundReport report;
  report.k_u0 = unit_ball_mass(u0);
  if (!(report.k_u0 > 0.0)) throw DomainError("K_u0 = 0: u0 has no mass on the unit ball");
  const double t_far = t0 + *std::max_element(ts.begin(), ts.end());
  if (u0.lattice.half_width() < 1.0 + 4.0 * std::pow(t_far, 1.0 / spec.alpha())) {
    throw DomainError("lattice too small for the requested times (wrap-around)");
  }
  report.ratio = std::numeric_limits<double>::infinity();
  for (double t : ts) {
    const SemigroupResult g = apply_semigroup(spec, t + t0, u0);
    double m = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < g.field.values.size(); ++i) {
      if (norm(g.field.lattice.site(i)) <= 1.0 + 1e-12) m = std::min(m, g.field.values[i]);
    }
    report.per_time_min.push_back(m / report.k_u0);
    report.ratio = std::min(report.ratio, m / report.k_u0);
  }
  return report;
}

// ---------------------------------------------------------------------------

namespace {

void require_killed_inputs(double radius, double t, std::size_t n_paths,
                           const KilledPathOptions& options) {
  if (!(radius > 0.0)) throw DomainError("ball radius must be positive");
  require_time(t, "killed process");
  if (n_paths < 2) throw DomainError("need at least 2 Monte Carlo paths");
  if (options.n_steps < 1) throw DomainError("need at least one time step");
}

// Runs the killed walk for `steps` steps of length dt; false when killed.
bool walk(const StableKernelSpec& spec, double radius, double dt, int steps, Point& x, Rng& rng) {
  const double scale = std::pow(dt, 1.0 / spec.alpha());
  for (int k = 0; k < steps; ++k) {
    x = x + scale * sample_isotropic_stable(spec.alpha(), spec.dim(), rng);
    if (norm(x) >= radius) return false;
  }
  return true;
}

}  // namespace

MonteCarloEstimate killed_expectation(const StableKernelSpec& spec, double radius, double t,
                                      const Point& x, const std::function<double(const Point&)>& g,
                                      std::size_t n_paths, std::uint64_t seed,
                                      KilledPathOptions options) {
  require_killed_inputs(radius, t, n_paths, options);
  if (!(norm(x) < radius)) throw DomainError("starting point must lie in the open ball");
  const double dt = t / options.n_steps;
  std::vector<double> values(n_paths, 0.0);
  detail::parallel_for(detail::chunk_count(n_paths), [&](std::size_t c) {
    Rng rng = make_stream(seed, c);
    const std::size_t end = std::min(n_paths, (c + 1) * detail::kChunkSize);
    for (std::size_t i = c * detail::kChunkSize; i < end; ++i) {
      Point pos = x;
      values[i] = walk(spec, radius, dt, options.n_steps, pos, rng) ? g(pos) : 0.0;
    }
  });
  const auto ms = detail::mean_stderr(values);
  return {ms.mean, ms.std_error, n_paths};
}

std::vector<KilledKernelEstimate> estimate_killed_kernel_row(const StableKernelSpec& spec,
                                                             double radius, double t,
                                                             const Point& x,
                                                             std::span<const Point> ys,
                                                             std::size_t n_paths,
                                                             std::uint64_t seed,
                                                             KilledPathOptions options) {
  require_killed_inputs(radius, t, n_paths, options);
  if (!(norm(x) < radius)) throw DomainError("x must lie in the open ball");
  for (const Point& y : ys) {
    if (!(norm(y) < radius)) throw DomainError("y must lie in the open ball");
  }
  const double dt = t / options.n_steps;
  const StableDensity p(spec);
  const std::size_t ny = ys.size();
  std::vector<double> contrib(n_paths * ny, 0.0);
  detail::parallel_for(detail::chunk_count(n_paths), [&](std::size_t c) {
    Rng rng = make_stream(seed, c);
    const std::size_t end = std::min(n_paths, (c + 1) * detail::kChunkSize);
    for (std::size_t i = c * detail::kChunkSize; i < end; ++i) {
      Point pos = x;
      if (!walk(spec, radius, dt, options.n_steps - 1, pos, rng)) continue;
      for (std::size_t j = 0; j < ny; ++j) contrib[j * n_paths + i] = p(dt, norm(ys[j] - pos));
    }
  });
  std::vector<KilledKernelEstimate> out(ny);
  for (std::size_t j = 0; j < ny; ++j) {
    const auto ms = detail::mean_stderr(std::span<const double>(contrib).subspan(j * n_paths, n_paths));
    out[j] = {ms.mean, ms.std_error, dt, options.n_steps, n_paths};
  }
  return out;
}

KilledKernelEstimate estimate_killed_kernel(const StableKernelSpec& spec, double radius, double t,
                                            const Point& x, const Point& y, std::size_t n_paths,
                                            std::uint64_t seed, KilledPathOptions options) {
  const Point ys[1] = {y};
  return estimate_killed_kernel_row(spec, radius, t, x, ys, n_paths, seed, options).front();
}

double normal_quantile_two_sided(double confidence) {
  if (!(confidence > 0.0 && confidence < 1.0)) {
    throw DomainError("confidence must lie in (0, 1)");
  }
  return boost::math::quantile(boost::math::normal(), 0.5 + 0.5 * confidence);
}

DirichletComparison check_dirichlet_comparison(const StableKernelSpec& spec, double radius,
                                               double eps, double t, std::span<const Point> xs,
                                               std::span<const Point> ys, std::size_t n_paths,
                                               std::uint64_t seed, double confidence,
                                               KilledPathOptions options) {
  if (!(eps > 0.0)) throw DomainError("eps must be positive");
  if (!(radius > eps)) throw DomainError("radius must exceed eps");
  require_time(t, "check_dirichlet_comparison");
  if (t > std::pow(eps, spec.alpha())) throw HypothesisNotMet("t must not exceed eps^alpha");
  if (xs.empty() || ys.empty()) throw DomainError("empty point grid");
  for (const Point& p : xs) {
    if (!(norm(p) <= radius - eps)) throw DomainError("x outside B(0, R - eps)");
  }
  for (const Point& p : ys) {
    if (!(norm(p) <= radius - eps)) throw DomainError("y outside B(0, R - eps)");
  }
  const double z = normal_quantile_two_sided(confidence);
  DirichletComparison report;
  report.confidence = confidence;
  report.c_hat = std::numeric_limits<double>::infinity();
  report.c_lower = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const auto row = estimate_killed_kernel_row(spec, radius, t, xs[i], ys, n_paths,
                                                derive_seed(seed, i), options);
    for (std::size_t j = 0; j < ys.size(); ++j) {
      DirichletComparisonRow r;
      r.x = xs[i];
      r.y = ys[j];
      r.killed = row[j].estimate;
      r.std_error = row[j].std_error;
      r.free = eval_kernel(spec, t, xs[i] - ys[j]);
      r.ratio = r.killed / r.free;
      r.ratio_lower = (r.killed - z * r.std_error) / r.free;
      report.c_hat = std::min(report.c_hat, r.ratio);
      report.c_lower = std::min(report.c_lower, r.ratio_lower);
      report.rows.push_back(r);
    }
  }
  report.positive = report.c_lower > 0.0;
  return report;
}

}  // namespace fshe
