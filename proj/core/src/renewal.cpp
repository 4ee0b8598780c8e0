#include "fshe/renewal.hpp"

#include <cmath>
#include <string>

#include <boost/numeric/odeint.hpp>

#include "fshe/errors.hpp"

namespace fshe {

namespace {

void require_positive(double v, const char* name) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw DomainError(std::string(name) + " must be positive and finite, got " + std::to_string(v));
  }
}

void require_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha <= 2.0)) throw DomainError("alpha must lie in (0, 2]");
}

// Weights w[m] = int over the m-th cell back from the evaluation time, m >= 1,
// of (t - s)^{-a}: h^{1-a} (m^{1-a} - (m-1)^{1-a}) / (1 - a).
std::vector<double> singular_weights(double a, double h, std::size_t n) {
  std::vector<double> w(n + 1, 0.0);
  const double scale = std::pow(h, 1.0 - a) / (1.0 - a);
  double prev = 0.0;
  for (std::size_t m = 1; m <= n; ++m) {
    const double cur = std::pow(static_cast<double>(m), 1.0 - a);
    w[m] = scale * (cur - prev);
    prev = cur;
  }
  return w;
}

}  // namespace

SingularBlowup blowup_time_singular(double A, double B, double gamma, double alpha, double T) {
  require_positive(A, "A");
  require_positive(B, "B");
  require_positive(gamma, "gamma");
  require_alpha(alpha);
  require_positive(T, "T");
  SingularBlowup out;
  out.t_star = std::pow(T, 1.0 / alpha) / (std::pow(A, gamma) * B * gamma);
  out.certified = out.t_star <= T;
  return out;
}

double threshold_A0(double B, double gamma, double alpha, double T, double t0) {
  require_positive(B, "B");
  require_positive(gamma, "gamma");
  require_alpha(alpha);
  require_positive(T, "T");
  require_positive(t0, "t0");
  if (t0 > T) throw DomainError("t0 must not exceed T");
  return std::pow(std::pow(T, 1.0 / alpha) / (B * gamma * t0), 1.0 / gamma);
}

double blowup_time_power(double A, double B, double gamma, double alpha) {
  require_positive(A, "A");
  require_positive(B, "B");
  require_positive(gamma, "gamma");
  require_alpha(alpha);
  const double p = (1.0 + gamma) / alpha;
  if (!(p < 1.0)) {
    throw DomainError("(1 + gamma) / alpha >= 1: reduce the exponent with reduce_exponent first");
  }
  return std::pow(1.0 + (1.0 - p) / (gamma * B * std::pow(A, gamma)), 1.0 / (1.0 - p));
}

ExponentReduction reduce_exponent(double gamma, double A, double alpha) {
  require_positive(A, "A");
  require_positive(gamma, "gamma");
  require_alpha(alpha);
  if ((1.0 + gamma) / alpha < 1.0) return {gamma, 1.0};
  if (alpha <= 1.0) {
    throw DomainError("alpha <= 1: no gamma0 > 0 satisfies (1 + gamma0) / alpha < 1");
  }
  const double gamma0 = std::min(0.5 * (alpha - 1.0), gamma);
  return {gamma0, std::pow(A, gamma - gamma0)};
}

BlowupSolution solve_volterra_single(const RenewalProblem& problem, const VolterraOptions& options) {
  const double A = problem.A;
  const double B = problem.B;
  const double gamma = problem.gamma;
  if (!(A >= 0.0) || !std::isfinite(A)) throw DomainError("A must be nonnegative");
  if (!(B >= 0.0) || !std::isfinite(B)) throw DomainError("B must be nonnegative");
  if (!(gamma >= 0.0)) throw DomainError("gamma must be nonnegative");
  require_alpha(problem.alpha);
  require_positive(options.mesh, "mesh");
  require_positive(options.horizon, "horizon");
  if (!(options.cap >= 1e12)) throw DomainError("cap must be at least 1e12");
  if (problem.kernel == RenewalKernel::Constant) require_positive(problem.T, "T");
  const double a = 1.0 / problem.alpha;
  if (problem.kernel == RenewalKernel::SingularDifference && !(a < 1.0)) {
    throw DomainError("(t - s)^{-1/alpha} is not integrable for alpha <= 1");
  }
  const double p = (1.0 + gamma) / problem.alpha;

  const double h = options.mesh;
  const auto n = static_cast<std::size_t>(std::ceil(options.horizon / h - 1e-9));
  const double origin = problem.time_origin();

  BlowupSolution out;
  out.method = SolutionMethod::Numeric;
  out.mesh = h;
  std::vector<double> forced;  // g_j^{1+gamma}
  forced.reserve(n + 1);
  std::vector<double> weights;
  if (problem.kernel == RenewalKernel::SingularDifference) weights = singular_weights(a, h, n);
  const double constant_weight = h * std::pow(problem.T, -a);

  double g = A;
  double running = 0.0;  // sum of forced * cell weight for the t-independent kernels
  if (options.keep_trajectory) {
    out.times.push_back(origin);
    out.values.push_back(g);
  }
  for (std::size_t j = 1; j <= n; ++j) {
    const double t_prev = origin + static_cast<double>(j - 1) * h;
    const double t = origin + static_cast<double>(j) * h;
    forced.push_back(std::pow(g, 1.0 + gamma));
    switch (problem.kernel) {
      case RenewalKernel::Constant:
        running += forced.back() * constant_weight;
        g = A + B * running;
        break;
      case RenewalKernel::PowerState: {
        const double cell = (p == 1.0)
                                ? std::log(t / t_prev)
                                : (std::pow(t, 1.0 - p) - std::pow(t_prev, 1.0 - p)) / (1.0 - p);
        running += forced.back() * cell;
        g = A + B * running;
        break;
      }
      case RenewalKernel::SingularDifference: {
        double s = 0.0;
        for (std::size_t i = 0; i < j; ++i) s += forced[i] * weights[j - i];
        g = A + B * s;
        break;
      }
    }
    if (options.keep_trajectory) {
      out.times.push_back(t);
      out.values.push_back(g);
    }
    if (!std::isfinite(g) || g > options.cap) {
      out.t_star = t;
      return out;
    }
  }
  return out;
}

BlowupSolution solve_volterra_numeric(const RenewalProblem& problem, const VolterraOptions& options) {
  VolterraOptions coarse_opts = options;
  coarse_opts.keep_trajectory = false;
  const BlowupSolution coarse = solve_volterra_single(problem, coarse_opts);
  VolterraOptions fine_opts = options;
  fine_opts.mesh = 0.5 * options.mesh;
  BlowupSolution fine = solve_volterra_single(problem, fine_opts);
  fine.t_star_coarse = coarse.t_star;
  if (coarse.t_star.has_value() != fine.t_star.has_value()) {
    // Blow-up right at the horizon on one mesh only: accept if the detection is
    // within one coarse cell of the horizon end.
    const double end = problem.time_origin() + options.horizon;
    const double found = coarse.t_star ? *coarse.t_star : *fine.t_star;
    if (end - found > options.mesh + 1e-12) {
      throw NumericalAccuracyError("blow-up detected on one mesh only (t = " +
                                   std::to_string(found) + ")");
    }
    return fine;
  }
  if (fine.t_star && coarse.t_star) {
    const double tf = *fine.t_star - problem.time_origin();
    const double tc = *coarse.t_star - problem.time_origin();
    if (std::abs(tf - tc) > options.richardson_tol * tf) {
      throw NumericalAccuracyError("blow-up time changed by more than " +
                                   std::to_string(100.0 * options.richardson_tol) +
                                   "% under mesh halving");
    }
    fine.t_star_extrapolated = 2.0 * *fine.t_star - *coarse.t_star;
  }
  return fine;
}

std::optional<double> integrate_power_ode(double A, double B, double gamma, double alpha,
                                          double cap, double t_max) {
  require_positive(A, "A");
  require_positive(B, "B");
  require_positive(gamma, "gamma");
  require_alpha(alpha);
  namespace odeint = boost::numeric::odeint;
  const double p = (1.0 + gamma) / alpha;
  auto rhs = [=](const double& h, double& dhdt, double t) {
    dhdt = B * std::pow(t, -p) * std::pow(h, 1.0 + gamma);
  };
  auto stepper = odeint::make_controlled(1e-12, 1e-12, odeint::runge_kutta_dopri5<double>());
  double t = 1.0;
  double h = A;
  double dt = 1e-4;
  for (long iter = 0; iter < 50'000'000 && t < t_max; ++iter) {
    if (h > cap) return t;
    const double h_prev = h;
    const double t_prev = t;
    if (stepper.try_step(rhs, h, t, dt) != odeint::success) continue;
    if (!std::isfinite(h)) {
      // Overflow inside an accepted step: retry from the last state with a smaller step.
      h = h_prev;
      t = t_prev;
      dt *= 0.25;
      if (dt < 1e-15 * t) return t;
      continue;
    }
    dt = std::min(dt, t_max - t);
  }
  return std::nullopt;
}

std::string to_string(RenewalKernel kernel) {
  switch (kernel) {
    case RenewalKernel::SingularDifference: return "singular";
    case RenewalKernel::PowerState: return "power";
    case RenewalKernel::Constant: return "constant";
  }
  return "unknown";
}

}  // namespace fshe
