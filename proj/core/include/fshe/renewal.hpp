#pragma once

#include <optional>
#include <string>
#include <vector>

namespace fshe {

/// Kernel k of the renewal equation g(t) = A + B int g(s)^{1+gamma} k ds.
enum class RenewalKernel {
  SingularDifference,  ///< k = (t - s)^{-1/alpha} on [0, t]
  PowerState,          ///< k = s^{-(1+gamma)/alpha} on [1, t]; time origin is 1
  Constant,            ///< k = T^{-1/alpha} on [0, t]
};

struct RenewalProblem {
  double A = 1.0;
  double B = 1.0;
  double gamma = 1.0;
  double alpha = 2.0;
  double T = 1.0;
  RenewalKernel kernel = RenewalKernel::Constant;

  /// (1 + gamma) / alpha < 1, the hypothesis of the power-state blow-up formula.
  bool power_exponent_subcritical() const { return (1.0 + gamma) / alpha < 1.0; }
  double time_origin() const { return kernel == RenewalKernel::PowerState ? 1.0 : 0.0; }
};

enum class SolutionMethod { Analytic, Numeric };

struct BlowupSolution {
  std::optional<double> t_star;  ///< empty: no blow-up within the horizon
  std::vector<double> times;
  std::vector<double> values;
  SolutionMethod method = SolutionMethod::Numeric;
  std::optional<double> t_star_coarse;        ///< numeric: blow-up time on the coarse mesh
  std::optional<double> t_star_extrapolated;  ///< numeric: 2 t_fine - t_coarse
  double mesh = 0.0;
};

struct SingularBlowup {
  double t_star = 0.0;
  bool certified = false;  ///< t_star <= T; beyond T the bound says nothing
};

/// T^{1/alpha} / (A^gamma B gamma): blow-up time of the comparison equation
/// g = A + (B / T^{1/alpha}) int g^{1+gamma}.
SingularBlowup blowup_time_singular(double A, double B, double gamma, double alpha, double T);

/// (T^{1/alpha} / (B gamma t0))^{1/gamma}; every A above it blows up before t0.
double threshold_A0(double B, double gamma, double alpha, double T, double t0);

/// Blow-up time of h' / h^{1+gamma} = B t^{-p}, h(1) = A, p = (1+gamma)/alpha < 1:
/// (1 + (1 - p) / (gamma B A^gamma))^{1/(1-p)}.
double blowup_time_power(double A, double B, double gamma, double alpha);

struct ExponentReduction {
  double gamma0 = 0.0;
  double b_multiplier = 1.0;  ///< A^{gamma - gamma0}
};

/// Lowers gamma to gamma0 = (alpha - 1)/2 so that (1 + gamma0)/alpha < 1, using
/// g^{1+gamma} >= A^{gamma-gamma0} g^{1+gamma0} for g >= A. Identity if already
/// subcritical; DomainError for alpha <= 1.
ExponentReduction reduce_exponent(double gamma, double A, double alpha);

struct VolterraOptions {
  double mesh = 1e-3;
  double cap = 1e12;
  double horizon = 1.0;           ///< integrate on [origin, origin + horizon]
  double richardson_tol = 0.05;   ///< max relative change of t_star under mesh halving
  bool keep_trajectory = true;
};

/// Product-integration solve of g(t) = A + B int g(s)^{1+gamma} k ds with g
/// piecewise constant (left end point) on mesh cells and exact cell integrals
/// of k. Blow-up is the first mesh time with g > cap; the solve is repeated on
/// mesh/2 and NumericalAccuracyError is thrown if the two disagree.
/// Reported t_star and trajectory are the mesh/2 ones.
/// Accepts A >= 0 and gamma >= 0 (gamma = 0 is the linear equation).
BlowupSolution solve_volterra_numeric(const RenewalProblem& problem, const VolterraOptions& options);

/// One product-integration pass without the mesh-halving check.
BlowupSolution solve_volterra_single(const RenewalProblem& problem, const VolterraOptions& options);

/// Direct adaptive Runge-Kutta integration of h' = B t^{-p} h^{1+gamma},
/// h(1) = A until h > cap. Independent route for blowup_time_power.
std::optional<double> integrate_power_ode(double A, double B, double gamma, double alpha,
                                          double cap = 1e12, double t_max = 1e6);

std::string to_string(RenewalKernel kernel);

}  // namespace fshe
