#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fshe/lattice.hpp"
#include "fshe/point.hpp"
#include "fshe/random.hpp"

namespace fshe {

/// Stability index alpha in (0, 2] and spatial dimension d >= 1 of the
/// symmetric alpha-stable process whose generator has Fourier symbol -|xi|^alpha.
/// alpha = 2 is the Laplacian (heat kernel (4 pi t)^{-d/2} exp(-|x|^2 / 4t)).
class StableKernelSpec {
 public:
  StableKernelSpec(double alpha, int dim);

  double alpha() const { return alpha_; }
  int dim() const { return dim_; }

 private:
  double alpha_;
  int dim_;
};

// ---------------------------------------------------------------------------
// Kernel evaluation

/// p_t(x). Closed forms for alpha in {1, 2}; otherwise Fourier inversion
/// (d = 1 cosine transform, d = 2, 3 radial inversion) or the large-|x|
/// series when it is accurate to better than 1e-12 relative.
/// Throws DomainError for t <= 0 and for d > 3 with alpha not in {1, 2}.
double eval_kernel(const StableKernelSpec& spec, double t, const Point& x);
double eval_kernel_radial(const StableKernelSpec& spec, double t, double r);

/// Numerical Fourier inversion only, for any alpha (no closed form, no series).
/// Exists so closed forms can be cross-checked against an independent route.
double fourier_inversion(const StableKernelSpec& spec, double t, double r);

/// p_t(0) = t^{-d/alpha} Gamma(d/alpha) / (alpha 2^{d-1} pi^{d/2} Gamma(d/2)).
double peak_density(const StableKernelSpec& spec, double t);
/// The t at which p_t(0) equals `level`.
double time_for_peak(const StableKernelSpec& spec, double level);

/// Tabulated p_t(r) for repeated evaluation (Monte Carlo smoothing, quadrature).
/// Stores p_1 on a uniform radial grid with 4-point Lagrange interpolation and
/// falls back to eval_kernel beyond the table. Absolute error below 1e-8 * p_t(0)
/// for alpha >= 1 (about 1e-6 * p_t(0) for alpha near 1/2).
class StableDensity {
 public:
  explicit StableDensity(const StableKernelSpec& spec);

  double operator()(double t, double r) const;
  const StableKernelSpec& spec() const { return spec_; }

 private:
  double unit_time(double rho) const;

  StableKernelSpec spec_;
  bool closed_form_;
  double step_;
  double rho_max_;
  std::vector<double> table_;
};

/// Variates with characteristic function exp(-|xi|^alpha) (Chambers-Mallows-Stuck).
double sample_symmetric_stable(double alpha, Rng& rng);
/// Isotropic d-dimensional variate with characteristic function exp(-|xi|^alpha),
/// built as sqrt(A) G with A positive (alpha/2)-stable and G ~ N(0, 2 I).
Point sample_isotropic_stable(double alpha, int dim, Rng& rng);

// ---------------------------------------------------------------------------
// Kernel estimates

/// max over xs of |p_{st}(x) - s^{-d/alpha} p_t(s^{-1/alpha} x)| / p_{st}(x).
double check_scaling(const StableKernelSpec& spec, double s, double t, std::span<const Point> xs);

struct GridSample {
  double t = 0.0;
  Point x{};
  Point y{};
  double value = 0.0;      ///< the checked quantity (p_t(x), or the left side of an inequality)
  double reference = 0.0;  ///< the comparison quantity (envelope, or right side)
  double ratio = 0.0;      ///< value / reference
};

struct KernelBoundReport {
  double c1_hat = 0.0;  ///< min ratio over the grid
  double c2_hat = 0.0;  ///< max ratio over the grid
  std::vector<GridSample> grid;
  std::vector<std::size_t> violations;  ///< indices into grid
  bool hypothesis_met = true;           ///< false: the result is advisory only
  bool advisory = false;
  std::string note;
};

/// Checks p_t((x - y)/tau) >= p_t(x) p_t(y) on every pair. If p_t(0) > 1 the
/// report is flagged hypothesis_met = false and violations are informational.
KernelBoundReport check_product_bound(const StableKernelSpec& spec, double t, double tau,
                                      std::span<const std::pair<Point, Point>> pairs);

/// Ratios p_t(x) / (t^{-d/alpha} min t |x|^{-(d+alpha)}) on a log-spaced t grid
/// of `resolution` points in [t_min, t_max] times a uniform grid of
/// `resolution` points in [-x_max, x_max] along the first axis.
/// alpha = 2 is reported with advisory = true (no polynomial lower bound).
KernelBoundReport check_two_sided_bound(const StableKernelSpec& spec, double t_min, double t_max,
                                        double x_max, int resolution);

// ---------------------------------------------------------------------------
// Semigroup

struct SemigroupResult {
  ScalarField field;
  double clip_mass = 0.0;  ///< integral of the negative part removed by clipping
};

/// (G u)_t = p_t * u0 on the periodic lattice, computed by multiplying the
/// spectrum by exp(-t |xi|^alpha). Negative ringing is clipped to 0 and its
/// mass reported. Requires u0 finite and nonnegative.
SemigroupResult apply_semigroup(const StableKernelSpec& spec, double t, const ScalarField& u0);

/// The same spectral multiplication without clipping; accepts signed input.
void propagate_in_place(const StableKernelSpec& spec, double t, ScalarField& field);

/// K_{u0}: integral of u0 over the closed unit ball (lattice quadrature).
double unit_ball_mass(const ScalarField& u0);

struct DeterministicBoundReport {
  double ratio = 0.0;  ///< min over x in B(0,1), t in ts of (G u)_{t+t0}(x) / K_{u0}
  double k_u0 = 0.0;
  std::vector<double> per_time_min;
};

/// Lower bound min (G u)_{t+t0}(x) / K_{u0} over x in B(0,1).
/// Throws HypothesisNotMet if p_{t0}(0) >= 1, DomainError if K_{u0} = 0 or
/// some t is outside (0, t0].
DeterministicBoundReport deterministic_lower_bound_check(const StableKernelSpec& spec,
                                                         const ScalarField& u0, double t0,
                                                         std::span<const double> ts);

// ---------------------------------------------------------------------------
// Killed process on B(0, R)

struct KilledPathOptions {
  int n_steps = 100;  ///< Euler steps on [0, t]; killing is checked at step ends
};

struct MonteCarloEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t samples = 0;
};

/// E_x[g(X_t); X alive at every step end] for the stable process started at x
/// and killed on leaving B(0, R).
MonteCarloEstimate killed_expectation(const StableKernelSpec& spec, double radius, double t,
                                      const Point& x, const std::function<double(const Point&)>& g,
                                      std::size_t n_paths, std::uint64_t seed,
                                      KilledPathOptions options = {});

struct KilledKernelEstimate {
  double estimate = 0.0;
  double std_error = 0.0;
  double step = 0.0;  ///< time discretisation step
  int n_steps = 0;
  std::size_t n_paths = 0;
};

/// Monte Carlo estimate of the killed kernel p_{D,t}(x, y). Paths are run to
/// t - step; the terminal density is smoothed with the free kernel of the last
/// step, E[alive * p_step(y - X_{t-step})]. Killing inside the last step and
/// between step ends is not seen, so the estimate is biased upward by the
/// corresponding exit probability.
KilledKernelEstimate estimate_killed_kernel(const StableKernelSpec& spec, double radius, double t,
                                            const Point& x, const Point& y, std::size_t n_paths,
                                            std::uint64_t seed, KilledPathOptions options = {});

/// Same estimator evaluated at many y from a single set of paths started at x.
std::vector<KilledKernelEstimate> estimate_killed_kernel_row(
    const StableKernelSpec& spec, double radius, double t, const Point& x,
    std::span<const Point> ys, std::size_t n_paths, std::uint64_t seed,
    KilledPathOptions options = {});

struct DirichletComparisonRow {
  Point x{};
  Point y{};
  double killed = 0.0;
  double std_error = 0.0;
  double free = 0.0;
  double ratio = 0.0;
  double ratio_lower = 0.0;  ///< (killed - z stderr) / free
};

struct DirichletComparison {
  double c_hat = 0.0;    ///< min ratio
  double c_lower = 0.0;  ///< min lower confidence ratio
  double confidence = 0.99;
  bool positive = false;  ///< c_lower > 0
  std::vector<DirichletComparisonRow> rows;
};

/// min over the (xs x ys) grid of p_{D,t}(x,y) / p_t(x - y). Requires eps > 0,
/// t <= eps^alpha (HypothesisNotMet otherwise) and every point in B(0, R - eps).
DirichletComparison check_dirichlet_comparison(const StableKernelSpec& spec, double radius,
                                               double eps, double t, std::span<const Point> xs,
                                               std::span<const Point> ys, std::size_t n_paths,
                                               std::uint64_t seed, double confidence = 0.99,
                                               KilledPathOptions options = {});

/// Two-sided standard normal quantile for the given confidence level.
double normal_quantile_two_sided(double confidence);

}  // namespace fshe
