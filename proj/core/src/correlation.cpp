#include "fshe/correlation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "fshe/errors.hpp"
#include "parallel.hpp"
#include "quadrature.hpp"
#include "stats.hpp"

namespace fshe {

namespace {

constexpr double kPi = std::numbers::pi;

void require_dim(int dim) {
  if (dim < 1 || dim > kMaxDim) {
    throw DomainError("correlation dimension must be 1, 2 or 3, got " + std::to_string(dim));
  }
}

// Points spread over the closed ball: the centre, and for each radius in
// (0, R] a ring (d = 2) or a Fibonacci sphere (d = 3) of directions.
std::vector<Point> ball_points(int dim, double radius, int resolution) {
  std::vector<Point> pts;
  if (dim == 1) {
    for (int i = 0; i < resolution; ++i) {
      pts.push_back(point1(-radius + 2.0 * radius * i / (resolution - 1)));
    }
    return pts;
  }
  pts.push_back(Point{});
  const int shells = std::max(2, resolution / 4);
  for (int s = 1; s <= shells; ++s) {
    const double r = radius * s / shells;
    if (dim == 2) {
      for (int k = 0; k < resolution; ++k) {
        const double a = 2.0 * kPi * k / resolution;
        pts.push_back({r * std::cos(a), r * std::sin(a), 0.0});
      }
    } else {
      const double golden = kPi * (3.0 - std::sqrt(5.0));
      for (int k = 0; k < resolution; ++k) {
        const double z = 1.0 - 2.0 * (k + 0.5) / resolution;
        const double rho = std::sqrt(1.0 - z * z);
        pts.push_back({r * rho * std::cos(golden * k), r * rho * std::sin(golden * k), r * z});
      }
      // The poles, where x . y is extremal for axis-aligned pairs.
      pts.push_back({0.0, 0.0, r});
      pts.push_back({0.0, 0.0, -r});
    }
  }
  return pts;
}

}  // namespace

CorrelationKernel CorrelationKernel::white_noise(int dim) {
  require_dim(dim);
  return {Kind::WhiteNoise, dim, 0.0};
}

CorrelationKernel CorrelationKernel::riesz(double beta, int dim) {
  require_dim(dim);
  if (!(beta > 0.0 && beta < dim)) {
    throw DomainError("Riesz kernel requires 0 < beta < d (beta = " + std::to_string(beta) +
                      ", d = " + std::to_string(dim) + ")");
  }
  return {Kind::Riesz, dim, beta};
}

CorrelationKernel CorrelationKernel::exponential_type(int dim) {
  require_dim(dim);
  return {Kind::ExponentialType, dim, 0.0};
}

CorrelationKernel CorrelationKernel::ornstein_uhlenbeck(double exponent, int dim) {
  require_dim(dim);
  if (!(exponent > 0.0 && exponent <= 2.0)) {
    throw DomainError("Ornstein-Uhlenbeck exponent must lie in (0, 2]");
  }
  return {Kind::OrnsteinUhlenbeck, dim, exponent};
}

CorrelationKernel CorrelationKernel::poisson(int dim) {
  require_dim(dim);
  return {Kind::Poisson, dim, 0.0};
}

CorrelationKernel CorrelationKernel::cauchy(int dim) {
  require_dim(dim);
  return {Kind::Cauchy, dim, 0.0};
}

bool CorrelationKernel::translation_invariant() const {
  return kind_ != Kind::WhiteNoise && kind_ != Kind::ExponentialType;
}

std::string CorrelationKernel::name() const {
  switch (kind_) {
    case Kind::WhiteNoise: return "white";
    case Kind::Riesz: return "riesz";
    case Kind::ExponentialType: return "expo";
    case Kind::OrnsteinUhlenbeck: return "ou";
    case Kind::Poisson: return "poisson";
    case Kind::Cauchy: return "cauchy";
  }
  return "unknown";
}

double CorrelationKernel::of_difference(const Point& diff) const {
  const double r = norm(diff);
  switch (kind_) {
    case Kind::Riesz:
      if (r == 0.0) throw SingularityError("Riesz kernel is singular at x = y");
      return std::pow(r, -parameter_);
    case Kind::OrnsteinUhlenbeck:
      return std::exp(-std::pow(r, parameter_));
    case Kind::Poisson:
      return std::pow(1.0 / (r * r + 1.0), 0.5 * (dim_ + 1));
    case Kind::Cauchy: {
      double s = 0.0;
      for (int j = 0; j < dim_; ++j) {
        const double c = diff[static_cast<std::size_t>(j)];
        s += 1.0 / (1.0 + c * c);
      }
      return s;
    }
    case Kind::WhiteNoise:
      throw UnsupportedVariant("white noise has no correlation function");
    case Kind::ExponentialType:
      break;
  }
  throw UnsupportedVariant("the exponential-type kernel is not a function of x - y");
}

double eval_correlation(const CorrelationKernel& kernel, const Point& x, const Point& y) {
  if (kernel.kind() == CorrelationKernel::Kind::WhiteNoise) {
    throw UnsupportedVariant("white noise has no correlation function");
  }
  if (kernel.kind() == CorrelationKernel::Kind::ExponentialType) return std::exp(-dot(x, y));
  return kernel.of_difference(x - y);
}

double infimum_on_ball(const CorrelationKernel& kernel, double radius) {
  if (!(radius > 0.0)) throw DomainError("ball radius must be positive");
  const double d = kernel.dim();
  const double diameter = 2.0 * radius;
  switch (kernel.kind()) {
    case CorrelationKernel::Kind::Riesz:
      return std::pow(diameter, -kernel.parameter());
    case CorrelationKernel::Kind::OrnsteinUhlenbeck:
      return std::exp(-std::pow(diameter, kernel.parameter()));
    case CorrelationKernel::Kind::Poisson:
      return std::pow(1.0 / (diameter * diameter + 1.0), 0.5 * (d + 1));
    case CorrelationKernel::Kind::Cauchy:
      // Sum of d convex decreasing terms with sum_j c_j^2 <= 4R^2: the minimum
      // spreads the difference evenly, c_j^2 = 4R^2 / d.
      return d * d / (d + diameter * diameter);
    case CorrelationKernel::Kind::ExponentialType:
      return std::exp(-radius * radius);
    case CorrelationKernel::Kind::WhiteNoise:
      break;
  }
  throw UnsupportedVariant("white noise has no correlation function");
}

double infimum_on_ball_by_search(const CorrelationKernel& kernel, double radius, int resolution) {
  if (!(radius > 0.0)) throw DomainError("ball radius must be positive");
  if (resolution < 3) throw DomainError("resolution must be >= 3");
  if (kernel.kind() == CorrelationKernel::Kind::WhiteNoise) {
    throw UnsupportedVariant("white noise has no correlation function");
  }
  const auto pts = ball_points(kernel.dim(), radius, resolution);
  double best = std::numeric_limits<double>::infinity();
  for (const Point& x : pts) {
    for (const Point& y : pts) {
      if (kernel.kind() == CorrelationKernel::Kind::Riesz && x == y) continue;
      best = std::min(best, eval_correlation(kernel, x, y));
    }
  }
  return best;
}

// ---------------------------------------------------------------------------

RadialIntegral integrate_near_origin(const std::function<double(double)>& w, int max_shells) {
  if (max_shells < 12) throw DomainError("integrate_near_origin needs at least 12 shells");
  RadialIntegral out;
  out.shells.reserve(static_cast<std::size_t>(max_shells));
  // r = e^{-s}: int_{e^{-k-1}}^{e^{-k}} w(r) dr = int_k^{k+1} w(e^{-s}) e^{-s} ds.
  auto g = [&w](double s) {
    const double r = std::exp(-s);
    return w(r) * r;
  };
  for (int k = 0; k < max_shells; ++k) {
    const auto q = detail::integrate_pieces(g, k, k + 1.0, {}, 1e-10);
    out.shells.push_back(q.value);
    if (!std::isfinite(q.value)) {
      out.converged = false;
      out.value = std::numeric_limits<double>::infinity();
      return out;
    }
  }
  const double sum = detail::pairwise_sum(out.shells);
  const std::size_t n = out.shells.size();
  bool all_zero = true;
  double ratio = 0.0;
  for (std::size_t k = n - 6; k + 1 < n; ++k) {
    const double a = out.shells[k];
    const double b = out.shells[k + 1];
    if (a == 0.0 && b == 0.0) continue;
    all_zero = false;
    if (a <= 0.0) {
      ratio = std::numeric_limits<double>::infinity();
      break;
    }
    ratio = std::max(ratio, b / a);
  }
  if (all_zero) {
    out.converged = true;
    out.value = sum;
    return out;
  }
  out.tail_ratio = ratio;
  if (ratio >= 1.0) {
    out.converged = false;
    out.value = std::numeric_limits<double>::infinity();
    return out;
  }
  if (ratio > 0.995) {
    out.inconclusive = true;
    out.value = std::numeric_limits<double>::infinity();
    return out;
  }
  out.converged = true;
  out.value = sum + out.shells.back() * ratio / (1.0 - ratio);
  return out;
}

DalangVerdict check_dalang(const CorrelationKernel& kernel, const StableKernelSpec& spec) {
  if (kernel.dim() != spec.dim()) {
    throw DomainError("kernel and operator dimensions differ");
  }
  DalangVerdict v;
  const int d = spec.dim();
  const double a = spec.alpha();
  if (kernel.kind() == CorrelationKernel::Kind::WhiteNoise) {
    v.condition_used = "white noise: d = 1 and 1 < alpha < 2";
    v.passes = d == 1 && a > 1.0 && a < 2.0;
    return v;
  }
  // Upper profile f~(r) >= f(x, y) for |x - y| = r near 0 (|x|, |y| <= 1 for
  // the exponential-type kernel, where -(x . y) <= |x - y|^2 / 4).
  std::function<double(double)> profile;
  const double p = kernel.parameter();
  switch (kernel.kind()) {
    case CorrelationKernel::Kind::Riesz:
      profile = [p](double r) { return std::pow(r, -p); };
      break;
    case CorrelationKernel::Kind::OrnsteinUhlenbeck:
      profile = [p](double r) { return std::exp(-std::pow(r, p)); };
      break;
    case CorrelationKernel::Kind::Poisson:
      profile = [d](double r) { return std::pow(1.0 / (r * r + 1.0), 0.5 * (d + 1)); };
      break;
    case CorrelationKernel::Kind::Cauchy:
      profile = [d](double) { return static_cast<double>(d); };
      break;
    case CorrelationKernel::Kind::ExponentialType:
      profile = [](double r) { return std::exp(0.25 * r * r); };
      break;
    case CorrelationKernel::Kind::WhiteNoise:
      break;
  }
  std::function<double(double)> weight;
  if (d == 1) {
    v.condition_used = "d = 1: f~ locally integrable near 0";
    weight = [profile](double r) { return 2.0 * profile(r); };
  } else if (d == 2) {
    v.condition_used = "d = 2: int f~(x) log(1/|x|) dx < infinity";
    weight = [profile](double r) { return 2.0 * kPi * r * profile(r) * std::log(1.0 / r); };
  } else {
    v.condition_used = "d >= 3: int f~(x) |x|^{-(d-3)} dx < infinity";
    weight = [profile, d](double r) {
      return 4.0 * kPi * std::pow(r, d - 1) * profile(r) * std::pow(r, -(d - 3));
    };
  }
  if (kernel.kind() == CorrelationKernel::Kind::Riesz) {
    v.beta_below_alpha_and_d = p < std::min(a, static_cast<double>(d));
    v.condition_used += "; Riesz: beta < alpha and d recorded";
  }
  v.diagnostic = integrate_near_origin(weight);
  v.passes = v.diagnostic.converged;
  v.inconclusive = v.diagnostic.inconclusive;
  return v;
}

// ---------------------------------------------------------------------------

namespace {

// int_{-R}^{R} p(x - y) g(y) dy with breakpoints around the kernel peak.
template <class G>
double ball_integral_1d(const StableDensity& p, double tau, double radius, double x, G&& g,
                        std::vector<double> extra, double rel_tol) {
  const double w = std::pow(tau, 1.0 / p.spec().alpha());
  for (double m : {0.0, -1.0, 1.0, -4.0, 4.0}) extra.push_back(x + m * w);
  auto f = [&](double y) { return p(tau, x - y) * g(y); };
  return detail::integrate_pieces(f, -radius, radius, std::move(extra), rel_tol, 20).value;
}

double convolution_1d(const StableDensity& p, const CorrelationKernel& kernel, double radius,
                      double tau, double x1, double x2) {
  const double w = std::pow(tau, 1.0 / p.spec().alpha());
  const bool riesz = kernel.kind() == CorrelationKernel::Kind::Riesz;
  const double beta = kernel.parameter();
  auto inner = [&](double y1) -> double {
    if (!riesz) {
      auto f = [&](double y2) { return eval_correlation(kernel, point1(y1), point1(y2)); };
      return ball_integral_1d(p, tau, radius, x2, f, {y1}, 1e-8);
    }
    // |y1 - y2|^{-beta}: split at y2 = y1 and substitute u = v^{1/(1-beta)}.
    const double e = 1.0 / (1.0 - beta);
    auto side = [&](double sign, double length) {
      if (length <= 0.0) return 0.0;
      auto f = [&](double v) {
        const double u = std::pow(v, e);
        return p(tau, x2 - (y1 + sign * u));
      };
      std::vector<double> breaks;
      const double peak = sign * (x2 - y1);
      for (double m : {0.0, -1.0, 1.0, -4.0, 4.0}) {
        const double u = peak + m * w;
        if (u > 0.0) breaks.push_back(std::pow(u, 1.0 - beta));
      }
      const double vmax = std::pow(length, 1.0 - beta);
      return e * detail::integrate_pieces(f, 0.0, vmax, std::move(breaks), 1e-8, 20).value;
    };
    return side(-1.0, y1 + radius) + side(1.0, radius - y1);
  };
  // The density table is good to ~1e-8 relative, which bounds the inner
  // accuracy; the outer tolerance stays above that noise.
  return ball_integral_1d(p, tau, radius, x1, inner, {x2}, 1e-6);
}

}  // namespace

BallConvolutionReport ball_convolution_lower_bound(const StableKernelSpec& spec,
                                                   const CorrelationKernel& kernel, double radius,
                                                   double t, std::span<const double> s_values,
                                                   std::span<const std::pair<Point, Point>> pairs,
                                                   std::size_t mc_samples, std::uint64_t seed) {
  if (kernel.kind() == CorrelationKernel::Kind::WhiteNoise) {
    throw UnsupportedVariant("white noise has no correlation function");
  }
  if (kernel.dim() != spec.dim()) throw DomainError("kernel and operator dimensions differ");
  if (!(radius > 0.0)) throw DomainError("ball radius must be positive");
  if (!(t > 0.0)) throw DomainError("t must be positive");
  if (t > std::pow(0.5 * radius, spec.alpha())) {
    throw HypothesisNotMet("t must not exceed (R/2)^alpha");
  }
  if (s_values.empty() || pairs.empty()) throw DomainError("empty s or pair list");
  for (double s : s_values) {
    if (!(s >= 0.0 && s <= t)) throw DomainError("every s must lie in [0, t]");
  }
  for (const auto& [x1, x2] : pairs) {
    if (!(norm(x1) < radius) || !(norm(x2) < radius)) {
      throw DomainError("pair point outside B(0, R)");
    }
  }
  if (spec.dim() >= 2 && mc_samples < 2) throw DomainError("need at least 2 Monte Carlo samples");

  BallConvolutionReport report;
  report.k_f = infimum_on_ball(kernel, radius);
  const StableDensity p(spec);
  const std::size_t np = pairs.size();
  report.rows.resize(s_values.size() * np);
  detail::parallel_for(report.rows.size(), [&](std::size_t idx) {
    const double s = s_values[idx / np];
    const auto& [x1, x2] = pairs[idx % np];
    BallConvolutionRow& row = report.rows[idx];
    row.s = s;
    row.x1 = x1;
    row.x2 = x2;
    const double tau = t - s;
    if (tau <= 0.0) {
      row.integral = (kernel.kind() == CorrelationKernel::Kind::Riesz && x1 == x2)
                         ? std::numeric_limits<double>::infinity()
                         : eval_correlation(kernel, x1, x2);
    } else if (spec.dim() == 1) {
      row.integral = convolution_1d(p, kernel, radius, tau, x1[0], x2[0]);
    } else {
      Rng rng = make_stream(seed, idx);
      const double scale = std::pow(tau, 1.0 / spec.alpha());
      std::vector<double> values(mc_samples, 0.0);
      for (double& v : values) {
        const Point y1 = x1 + scale * sample_isotropic_stable(spec.alpha(), spec.dim(), rng);
        const Point y2 = x2 + scale * sample_isotropic_stable(spec.alpha(), spec.dim(), rng);
        if (norm(y1) < radius && norm(y2) < radius && !(y1 == y2)) {
          v = eval_correlation(kernel, y1, y2);
        }
      }
      row.integral = detail::pairwise_sum(values) / static_cast<double>(mc_samples);
    }
    row.ratio = row.integral / report.k_f;
  });
  report.min_ratio = std::numeric_limits<double>::infinity();
  for (const auto& row : report.rows) report.min_ratio = std::min(report.min_ratio, row.ratio);
  return report;
}

double riesz_double_convolution(const StableDensity& density, double beta, double t,
                                const Point& x, const Point& y) {
  const int d = density.spec().dim();
  if (!(beta > 0.0 && beta < d)) throw DomainError("Riesz exponent must lie in (0, d)");
  if (!(t > 0.0)) throw DomainError("t must be positive");
  // Integrating out one variable: int p_t(x - z) p_t(y - w) |z - w|^{-beta}
  // = int p_{2t}(u) |c - u|^{-beta} du with c = x - y.
  const double q = 2.0 * t;
  const double c = norm(x - y);
  const double w = std::pow(q, 1.0 / density.spec().alpha());
  if (d == 1) {
    // V = int_0^inf [p(c + r) + p(c - r)] r^{-beta} dr, r = z^{1/(1-beta)}.
    const double e = 1.0 / (1.0 - beta);
    auto f = [&](double z) {
      const double r = std::pow(z, e);
      return e * (density(q, c + r) + density(q, c - r));
    };
    std::vector<double> breaks;
    for (double m : {0.0, 1.0, 4.0}) {
      breaks.push_back(std::pow(c + m * w, 1.0 - beta));
      if (c - m * w > 0.0) breaks.push_back(std::pow(c - m * w, 1.0 - beta));
    }
    return detail::integrate_to_infinity(f, 0.0, 1e-10, std::move(breaks)).value;
  }
  // V = int_0^inf r^{d-1-beta} A(r) dr with the angular average A, r = z^{1/(d-beta)}.
  const double e = 1.0 / (d - beta);
  auto angular = [&](double r) -> double {
    if (c == 0.0) return (d == 2 ? 2.0 * kPi : 4.0 * kPi) * density(q, r);
    auto g = [&](double phi) {
      const double dist = std::sqrt(std::max(0.0, c * c + r * r - 2.0 * c * r * std::cos(phi)));
      return (d == 2 ? 2.0 : 2.0 * kPi * std::sin(phi)) * density(q, dist);
    };
    return detail::integrate_pieces(g, 0.0, kPi, {0.1, 0.5}, 1e-11, 20).value;
  };
  auto f = [&](double z) { return e * angular(std::pow(z, e)); };
  std::vector<double> breaks;
  for (double m : {0.0, 1.0, 4.0}) {
    breaks.push_back(std::pow(c + m * w, d - beta));
    if (c - m * w > 0.0) breaks.push_back(std::pow(c - m * w, d - beta));
  }
  return detail::integrate_to_infinity(f, 0.0, 1e-8, std::move(breaks)).value;
}

RieszDecayReport riesz_time_decay_bound(const StableKernelSpec& spec, double beta,
                                        std::span<const double> t_values,
                                        std::span<const std::pair<Point, Point>> pairs) {
  const double a = spec.alpha();
  const int d = spec.dim();
  if (!(beta > 0.0 && beta < std::min(a, static_cast<double>(d)))) {
    throw HypothesisNotMet("Riesz decay bound requires 0 < beta < min(alpha, d)");
  }
  if (t_values.empty() || pairs.empty()) throw DomainError("empty t or pair list");
  for (double t : t_values) {
    if (!(t > 0.0)) throw DomainError("every t must be positive");
    const double r = std::pow(t, 1.0 / a);
    for (const auto& [x, y] : pairs) {
      if (norm(x) > r || norm(y) > r) {
        throw HypothesisNotMet("points must lie in B(0, t^{1/alpha}) for every t");
      }
    }
  }
  const StableDensity p(spec);
  RieszDecayReport report;
  report.rows.resize(t_values.size() * pairs.size());
  const std::size_t np = pairs.size();
  detail::parallel_for(report.rows.size(), [&](std::size_t idx) {
    const double t = t_values[idx / np];
    const auto& [x, y] = pairs[idx % np];
    RieszDecayRow& row = report.rows[idx];
    row.t = t;
    row.x = x;
    row.y = y;
    row.value = riesz_double_convolution(p, beta, t, x, y);
    row.scaled = row.value * std::pow(t, beta / a);
  });
  report.min_scaled = std::numeric_limits<double>::infinity();
  report.max_scaled = 0.0;
  for (const auto& row : report.rows) {
    report.min_scaled = std::min(report.min_scaled, row.scaled);
    report.max_scaled = std::max(report.max_scaled, row.scaled);
  }
  report.spread = report.max_scaled / report.min_scaled - 1.0;
  return report;
}

}  // namespace fshe
