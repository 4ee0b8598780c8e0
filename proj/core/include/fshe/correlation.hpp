#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fshe/point.hpp"
#include "fshe/stable_kernel.hpp"

namespace fshe {

/// Spatial correlation f(x, y) of the driving noise.
///
///   Riesz(beta)            |x - y|^{-beta},                  0 < beta < d
///   ExponentialType        exp(-(x . y))                     (not translation invariant)
///   OrnsteinUhlenbeck(a)   exp(-|x - y|^a),                  0 < a <= 2
///   Poisson                (1 / (|x - y|^2 + 1))^{(d+1)/2}
///   Cauchy                 sum_j 1 / (1 + (x_j - y_j)^2)
///
/// WhiteNoise carries no function f and is rejected by eval_correlation.
class CorrelationKernel {
 public:
  enum class Kind { WhiteNoise, Riesz, ExponentialType, OrnsteinUhlenbeck, Poisson, Cauchy };

  static CorrelationKernel white_noise(int dim);
  static CorrelationKernel riesz(double beta, int dim);
  static CorrelationKernel exponential_type(int dim);
  static CorrelationKernel ornstein_uhlenbeck(double exponent, int dim);
  static CorrelationKernel poisson(int dim);
  static CorrelationKernel cauchy(int dim);

  Kind kind() const { return kind_; }
  int dim() const { return dim_; }
  /// beta for Riesz, the exponent for OrnsteinUhlenbeck, 0 otherwise.
  double parameter() const { return parameter_; }
  bool translation_invariant() const;
  std::string name() const;

  /// f as a function of x - y (translation-invariant kinds only).
  double of_difference(const Point& diff) const;

 private:
  CorrelationKernel(Kind kind, int dim, double parameter)
      : kind_(kind), dim_(dim), parameter_(parameter) {}

  Kind kind_;
  int dim_;
  double parameter_;
};

/// f(x, y). Throws UnsupportedVariant for WhiteNoise and SingularityError for
/// Riesz at x = y.
double eval_correlation(const CorrelationKernel& kernel, const Point& x, const Point& y);

/// K_f = inf over x, y in B(0, R) of f(x, y), in closed form for every kind.
double infimum_on_ball(const CorrelationKernel& kernel, double radius);

/// Independent check of infimum_on_ball: minimises f over a grid of point
/// pairs on the sphere |x| = |y| = R and through the centre.
double infimum_on_ball_by_search(const CorrelationKernel& kernel, double radius, int resolution);

// ---------------------------------------------------------------------------
// Dalang-type integrability

/// Result of integrating a radial weight near the origin on r in (0, 1].
struct RadialIntegral {
  bool converged = false;
  bool inconclusive = false;
  double value = 0.0;              ///< extrapolated integral (finite iff converged)
  double tail_ratio = 0.0;         ///< geometric decay ratio of the last shells
  std::vector<double> shells;      ///< contributions of r in [e^{-k-1}, e^{-k}]
};

/// Integrates w(r) dr over (0, 1] on logarithmic shells and decides
/// convergence from the decay of the shell contributions.
RadialIntegral integrate_near_origin(const std::function<double(double)>& w, int max_shells = 60);

struct DalangVerdict {
  bool passes = false;
  bool inconclusive = false;
  std::string condition_used;
  RadialIntegral diagnostic;                 ///< empty for white noise
  std::optional<bool> beta_below_alpha_and_d;  ///< Riesz only: beta < min(alpha, d)
};

/// Dalang-type condition for the noise/operator pair. White noise passes iff
/// d = 1 and 1 < alpha < 2. Colored noise integrates an upper profile
/// f~(r) >= f near 0 with eps = 1: d = 1 local integrability, d = 2 the
/// log(1/|x|) weight, d >= 3 the |x|^{-(d-3)} weight.
DalangVerdict check_dalang(const CorrelationKernel& kernel, const StableKernelSpec& spec);

// ---------------------------------------------------------------------------
// Convolution lower bounds

struct BallConvolutionRow {
  double s = 0.0;
  Point x1{};
  Point x2{};
  double integral = 0.0;
  double ratio = 0.0;  ///< integral / K_f
};

struct BallConvolutionReport {
  double k_f = 0.0;
  double min_ratio = 0.0;
  std::vector<BallConvolutionRow> rows;
};

/// int_{B(0,R)^2} p_{t-s}(x1 - y1) p_{t-s}(x2 - y2) f(y1, y2) dy1 dy2 / K_f for every
/// s and pair. d = 1 uses adaptive tensor quadrature (diagonal singularity of
/// Riesz removed by substitution); d >= 2 uses Monte Carlo with `seed`.
/// Throws HypothesisNotMet if t > (R/2)^alpha, DomainError if some s is
/// outside [0, t] or a point lies outside B(0, R).
BallConvolutionReport ball_convolution_lower_bound(const StableKernelSpec& spec,
                                                   const CorrelationKernel& kernel, double radius,
                                                   double t, std::span<const double> s_values,
                                                   std::span<const std::pair<Point, Point>> pairs,
                                                   std::size_t mc_samples = 200000,
                                                   std::uint64_t seed = 1);

/// int int p_t(x - z) p_t(y - w) |z - w|^{-beta} dz dw over R^d x R^d.
/// Reduced exactly to a single convolution with p_{2t}; quadrature in every d <= 3.
double riesz_double_convolution(const StableDensity& density, double beta, double t,
                                const Point& x, const Point& y);

struct RieszDecayRow {
  double t = 0.0;
  Point x{};
  Point y{};
  double value = 0.0;
  double scaled = 0.0;  ///< value * t^{beta/alpha}
};

struct RieszDecayReport {
  double min_scaled = 0.0;
  double max_scaled = 0.0;
  double spread = 0.0;  ///< max_scaled / min_scaled - 1
  std::vector<RieszDecayRow> rows;
};

/// Evaluates the Riesz double convolution at each t and pair and reports
/// value * t^{beta/alpha}. Requires beta < min(d, alpha) and x, y in
/// B(0, t^{1/alpha}) for each t (HypothesisNotMet otherwise).
RieszDecayReport riesz_time_decay_bound(const StableKernelSpec& spec, double beta,
                                        std::span<const double> t_values,
                                        std::span<const std::pair<Point, Point>> pairs);

}  // namespace fshe
