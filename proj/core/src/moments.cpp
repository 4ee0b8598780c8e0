#include "fshe/moments.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "fshe/errors.hpp"
#include "fshe/renewal.hpp"
#include "parallel.hpp"
#include "stats.hpp"

namespace fshe {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double clip_signed(double v, double n) {
  if (std::isnan(v)) return n;
  return std::copysign(std::min(std::abs(v), n), v);
}

double clip_abs(double v, double n) {
  if (std::isnan(v)) return n;
  return std::min(std::abs(v), n);
}

bool exceeds(std::span<const double> u, double level) {
  return std::any_of(u.begin(), u.end(),
                     [level](double v) { return !std::isfinite(v) || std::abs(v) > level; });
}

// One path: values at `sites` for every snapshot, and the hit time. With
// `stop_at_hit` the path ends at its hit and the remaining snapshots read +inf.
struct PathTrace {
  std::optional<double> hit;
  std::vector<double> values;  // [snapshot][site]
};

PathTrace trace_path(const SimulationConfig& c, const MildStepper& stepper, std::size_t steps,
                     std::span<const std::size_t> snap_idx, std::span<const std::size_t> sites,
                     std::uint64_t seed, std::uint64_t path_id, bool stop_at_hit) {
  Rng rng = make_stream(seed, path_id);
  PathTrace out;
  out.values.assign(snap_idx.size() * sites.size(), kInf);
  std::vector<double> u = c.u0;
  stepper.apply_domain(u);
  std::size_t next = 0;
  auto record = [&](std::size_t k) {
    while (next < snap_idx.size() && snap_idx[next] <= k) {
      for (std::size_t j = 0; j < sites.size(); ++j) out.values[next * sites.size() + j] = u[sites[j]];
      ++next;
    }
  };
  record(0);
  bool dead = false;  // a non-finite value spreads over the whole lattice at the next transform
  for (std::size_t k = 1; k <= steps; ++k) {
    if (dead) {
      std::fill(u.begin(), u.end(), std::numeric_limits<double>::quiet_NaN());
      record(steps);
      break;
    }
    stepper.advance(u, rng);
    if (!out.hit && exceeds(u, c.trunc_level)) {
      out.hit = static_cast<double>(k) * c.dt;
      if (stop_at_hit) return out;
    }
    if (out.hit) dead = std::any_of(u.begin(), u.end(), [](double v) { return !std::isfinite(v); });
    record(k);
  }
  return out;
}

std::vector<std::size_t> lattice_indices(const Lattice& lattice, std::span<const Point> points) {
  std::vector<std::size_t> idx;
  idx.reserve(points.size());
  for (const Point& p : points) idx.push_back(lattice.index_of(p));
  return idx;
}

// Hit times of every path, stopping each path at its hit.
std::vector<std::optional<double>> hit_times(const SimulationConfig& c, std::size_t paths,
                                             std::uint64_t seed) {
  validate_simulation(c);
  const auto [steps, snap_idx] = step_schedule(c);
  const MildStepper stepper(c.spec, c.sigma, c.noise, c.lattice, c.dt, c.domain);
  std::vector<std::optional<double>> hits(paths);
  detail::parallel_for(paths, [&](std::size_t i) {
    hits[i] = trace_path(c, stepper, steps, {}, {}, seed, i, true).hit;
  });
  return hits;
}

std::vector<double> normalized_shape(const std::vector<double>& u0) {
  double sup = 0.0;
  for (double v : u0) sup = std::max(sup, std::abs(v));
  if (!(sup > 0.0)) throw DomainError("base u0 must not vanish identically");
  std::vector<double> shape(u0.size());
  for (std::size_t i = 0; i < u0.size(); ++i) shape[i] = u0[i] / sup;
  return shape;
}

// The grid the proxy is read on: the snapshot times, or every step time.
std::vector<double> proxy_times(const SimulationConfig& c) {
  const auto [steps, snap_idx] = step_schedule(c);
  std::vector<double> times;
  if (!snap_idx.empty()) {
    for (std::size_t k : snap_idx) times.push_back(static_cast<double>(k) * c.dt);
  } else {
    for (std::size_t k = 0; k <= steps; ++k) times.push_back(static_cast<double>(k) * c.dt);
  }
  return times;
}

double as_time(const std::optional<double>& t) { return t ? *t : kInf; }

bool nonincreasing(std::span<const std::optional<double>> t0) {
  for (std::size_t i = 1; i < t0.size(); ++i) {
    if (as_time(t0[i]) > as_time(t0[i - 1])) return false;
  }
  return true;
}

}  // namespace

MomentSeries estimate_moments(const SimulationConfig& config, std::span<const Point> probes,
                              std::span<const ProbePair> pairs, std::size_t paths,
                              std::uint64_t seed, MomentOptions options) {
  validate_simulation(config);
  if (paths < 100) throw DomainError("moment estimates need at least 100 paths");
  if (config.snapshot_times.empty()) throw DomainError("moment estimates need snapshot times");
  const auto [steps, snap_idx] = step_schedule(config);
  std::vector<std::size_t> sites = lattice_indices(config.lattice, probes);
  for (const ProbePair& pr : pairs) {
    sites.push_back(config.lattice.index_of(pr.x));
    sites.push_back(config.lattice.index_of(pr.y));
  }
  const MildStepper stepper(config.spec, config.sigma, config.noise, config.lattice, config.dt,
                            config.domain);
  std::vector<PathTrace> traces(paths);
  detail::parallel_for(paths, [&](std::size_t i) {
    traces[i] = trace_path(config, stepper, steps, snap_idx, sites, seed, i, !options.continue_after_hit);
  });

  const double n = config.trunc_level;
  const std::size_t ns = snap_idx.size();
  const std::size_t nsite = sites.size();
  const std::size_t np = probes.size();
  MomentSeries s;
  for (std::size_t k : snap_idx) s.times.push_back(static_cast<double>(k) * config.dt);
  s.probes.assign(probes.begin(), probes.end());
  s.pairs.assign(pairs.begin(), pairs.end());
  s.trunc_level = n;
  s.paths = paths;
  s.kappa = *std::min_element(config.u0.begin(), config.u0.end());
  auto table = [&](std::size_t cols) {
    return std::vector<std::vector<double>>(ns, std::vector<double>(cols, 0.0));
  };
  s.second_moment = s.second_stderr = s.mean = s.mean_stderr = table(np);
  s.cross_moment = s.cross_stderr = s.covariance = s.covariance_stderr = table(pairs.size());

  std::vector<double> a(paths), b(paths), w(paths);
  auto value = [&](std::size_t path, std::size_t snap, std::size_t site) {
    return traces[path].values[snap * nsite + site];
  };
  for (std::size_t t = 0; t < ns; ++t) {
    for (std::size_t j = 0; j < np; ++j) {
      for (std::size_t i = 0; i < paths; ++i) {
        const double v = value(i, t, j);
        a[i] = clip_signed(v, n);
        b[i] = clip_abs(v, n) * clip_abs(v, n);
      }
      const auto m1 = detail::mean_stderr(a);
      const auto m2 = detail::mean_stderr(b);
      s.mean[t][j] = m1.mean;
      s.mean_stderr[t][j] = m1.std_error;
      s.second_moment[t][j] = m2.mean;
      s.second_stderr[t][j] = m2.std_error;
    }
    for (std::size_t q = 0; q < pairs.size(); ++q) {
      const std::size_t sx = np + 2 * q;
      for (std::size_t i = 0; i < paths; ++i) {
        const double x = value(i, t, sx);
        const double y = value(i, t, sx + 1);
        const double prod = (std::isnan(x) || std::isnan(y)) ? n * n : std::min(std::abs(x * y), n * n);
        w[i] = std::isnan(prod) ? n * n : prod;
        a[i] = clip_signed(x, n);
        b[i] = clip_signed(y, n);
      }
      const auto cross = detail::mean_stderr(w);
      s.cross_moment[t][q] = cross.mean;
      s.cross_stderr[t][q] = cross.std_error;
      const double ma = detail::pairwise_sum(a) / static_cast<double>(paths);
      const double mb = detail::pairwise_sum(b) / static_cast<double>(paths);
      for (std::size_t i = 0; i < paths; ++i) w[i] = (a[i] - ma) * (b[i] - mb);
      const auto cov = detail::mean_stderr(w);
      const double unbiased = static_cast<double>(paths) / static_cast<double>(paths - 1);
      s.covariance[t][q] = cov.mean * unbiased;
      s.covariance_stderr[t][q] = cov.std_error * unbiased;
    }
  }
  s.hit_times.reserve(paths);
  for (const auto& tr : traces) s.hit_times.push_back(tr.hit);
  for (double t : s.times) {
    std::size_t count = 0;
    for (const auto& h : s.hit_times) count += (h && *h <= t + 1e-12) ? 1 : 0;
    s.hit_fraction.push_back(static_cast<double>(count) / static_cast<double>(paths));
  }
  return s;
}

std::vector<double> linear_moment_oracle(double lambda, const StableKernelSpec& spec, double kappa,
                                         std::span<const double> times, double mesh) {
  if (spec.dim() != 1 || !(spec.alpha() > 1.0 && spec.alpha() <= 2.0)) {
    throw DomainError("the linear moment oracle needs d = 1 and 1 < alpha <= 2");
  }
  if (!std::isfinite(lambda) || !std::isfinite(kappa)) throw DomainError("lambda and kappa must be finite");
  if (!(mesh > 0.0)) throw DomainError("mesh must be positive");
  if (times.empty()) return {};
  double horizon = 0.0;
  for (double t : times) {
    if (!(t >= 0.0) || !std::isfinite(t)) throw DomainError("times must be nonnegative");
    horizon = std::max(horizon, t);
  }
  if (horizon == 0.0) return std::vector<double>(times.size(), kappa * kappa);

  RenewalProblem problem;
  problem.A = kappa * kappa;
  // p_{2r}(0) = p_1(0) (2r)^{-1/alpha}
  problem.B = lambda * lambda * std::pow(2.0, -1.0 / spec.alpha()) * peak_density(spec, 1.0);
  problem.gamma = 0.0;
  problem.alpha = spec.alpha();
  problem.kernel = RenewalKernel::SingularDifference;
  VolterraOptions opts;
  opts.horizon = horizon;
  opts.cap = 1e300;
  auto solve_at = [&](double h) {
    opts.mesh = h;
    const BlowupSolution sol = solve_volterra_single(problem, opts);
    std::vector<double> out;
    out.reserve(times.size());
    for (double t : times) {
      const double pos = t / h;
      const auto i = std::min(static_cast<std::size_t>(pos), sol.values.size() - 2);
      const double frac = pos - static_cast<double>(i);
      out.push_back(sol.values[i] + frac * (sol.values[i + 1] - sol.values[i]));
    }
    return out;
  };
  const std::vector<double> coarse = solve_at(mesh);
  const std::vector<double> fine = solve_at(0.5 * mesh);
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (std::abs(fine[i] - coarse[i]) > 0.005 * std::abs(fine[i])) {
      throw NumericalAccuracyError("linear moment oracle changed by more than 0.5% under mesh halving");
    }
  }
  return fine;
}

BlowupReport detect_blowup_proxy(const MomentSeries& series, double threshold) {
  if (!(threshold > 0.0 && threshold <= 1.0)) throw DomainError("threshold must lie in (0, 1]");
  BlowupReport r;
  r.kappa = series.kappa;
  r.threshold = threshold;
  r.trunc_level = series.trunc_level;
  r.paths = series.paths;
  for (std::size_t i = 0; i < series.times.size(); ++i) {
    if (series.hit_fraction[i] >= threshold) {
      r.t0_hat = series.times[i];
      r.verdict = BlowupReport::Verdict::BlowupProxyDetected;
      break;
    }
  }
  return r;
}

std::optional<double> first_crossing(std::span<const std::optional<double>> hit_times,
                                     std::span<const double> times, double threshold) {
  if (!(threshold > 0.0 && threshold <= 1.0)) throw DomainError("threshold must lie in (0, 1]");
  if (hit_times.empty()) return std::nullopt;
  const auto needed = static_cast<std::size_t>(
      std::ceil(threshold * static_cast<double>(hit_times.size()) - 1e-9));
  std::vector<double> hits;
  hits.reserve(hit_times.size());
  for (const auto& h : hit_times) {
    if (h) hits.push_back(*h);
  }
  if (needed == 0 || hits.size() < needed) return std::nullopt;
  // The crossing is the first grid time at or after the needed-th smallest hit.
  std::nth_element(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(needed - 1), hits.end());
  const double kth = hits[needed - 1];
  for (double t : times) {
    if (t + 1e-12 >= kth) return t;
  }
  return std::nullopt;
}

KappaSweepResult kappa_sweep(const SimulationConfig& base, std::span<const double> kappas,
                             std::size_t paths, std::uint64_t seed, double threshold,
                             std::size_t bootstrap_replicates) {
  if (kappas.size() < 3) throw DomainError("kappa sweep needs at least 3 values");
  for (std::size_t i = 0; i < kappas.size(); ++i) {
    if (!(kappas[i] > 0.0)) throw DomainError("kappa values must be positive");
    if (i > 0 && !(kappas[i] > kappas[i - 1])) throw DomainError("kappa values must be strictly increasing");
  }
  if (paths == 0) throw DomainError("kappa sweep needs at least one path");
  if (!(threshold > 0.0 && threshold <= 1.0)) throw DomainError("threshold must lie in (0, 1]");
  const std::vector<double> shape = normalized_shape(base.u0);
  const std::vector<double> times = proxy_times(base);

  std::vector<std::vector<std::optional<double>>> hits;
  KappaSweepResult result;
  std::vector<std::optional<double>> t0;
  for (double kappa : kappas) {
    SimulationConfig c = base;
    for (std::size_t i = 0; i < shape.size(); ++i) c.u0[i] = kappa * shape[i];
    hits.push_back(hit_times(c, paths, seed));
    KappaSweepRow row;
    row.kappa = kappa;
    row.t0_hat = first_crossing(hits.back(), times, threshold);
    const auto n_hit = std::count_if(hits.back().begin(), hits.back().end(),
                                     [](const auto& h) { return h.has_value(); });
    row.final_hit_fraction = static_cast<double>(n_hit) / static_cast<double>(paths);
    t0.push_back(row.t0_hat);
    result.rows.push_back(row);
    if (!result.smallest_detecting_kappa && row.t0_hat) result.smallest_detecting_kappa = kappa;
  }
  result.nonincreasing = nonincreasing(t0);

  if (bootstrap_replicates > 0) {
    // Joint resampling of path indices keeps the shared-seed coupling across kappa.
    Rng rng = make_stream(seed, 0xb0075u);
    std::uniform_int_distribution<std::size_t> pick(0, paths - 1);
    std::vector<std::optional<double>> resampled(paths);
    std::vector<std::size_t> idx(paths);
    std::size_t ok = 0;
    for (std::size_t r = 0; r < bootstrap_replicates; ++r) {
      for (auto& i : idx) i = pick(rng);
      std::vector<std::optional<double>> t0_boot;
      for (const auto& h : hits) {
        for (std::size_t i = 0; i < paths; ++i) resampled[i] = h[idx[i]];
        t0_boot.push_back(first_crossing(resampled, times, threshold));
      }
      ok += nonincreasing(t0_boot) ? 1 : 0;
    }
    result.bootstrap_confidence = static_cast<double>(ok) / static_cast<double>(bootstrap_replicates);
  }
  return result;
}

HorizonSweepResult horizon_sweep_riesz(const SimulationConfig& base, double kappa,
                                       std::span<const double> horizons,
                                       std::span<const double> diagnostic_times,
                                       std::span<const ProbePair> pairs, std::size_t paths,
                                       std::uint64_t seed) {
  const double a = base.spec.alpha();
  const int d = base.spec.dim();
  if (base.noise.kind() != CorrelationKernel::Kind::Riesz) {
    throw HypothesisNotMet("the horizon sweep needs Riesz noise");
  }
  const double beta = base.noise.parameter();
  if (!(beta < std::min(a, static_cast<double>(d)))) {
    throw HypothesisNotMet("the horizon sweep needs beta < min(alpha, d)");
  }
  if (!(kappa > 0.0)) throw DomainError("kappa must be positive");
  if (horizons.empty()) throw DomainError("at least one horizon is required");
  if (diagnostic_times.size() < 2) throw DomainError("at least two diagnostic times are required");
  if (pairs.empty()) throw DomainError("at least one probe pair is required");
  for (std::size_t i = 0; i < horizons.size(); ++i) {
    if (!(horizons[i] > 0.0) || (i > 0 && !(horizons[i] > horizons[i - 1]))) {
      throw DomainError("horizons must be positive and strictly increasing");
    }
  }
  for (std::size_t i = 0; i < diagnostic_times.size(); ++i) {
    if (!(diagnostic_times[i] > 0.0) || (i > 0 && !(diagnostic_times[i] > diagnostic_times[i - 1]))) {
      throw DomainError("diagnostic times must be positive and strictly increasing");
    }
  }
  const double r_min = std::pow(diagnostic_times.front(), 1.0 / a);
  for (const ProbePair& pr : pairs) {
    if (norm(pr.x) > r_min || norm(pr.y) > r_min) {
      throw HypothesisNotMet("probe pairs must lie in B(0, t^{1/alpha}) at the first diagnostic time");
    }
  }

  SimulationConfig c = base;
  const std::vector<double> shape = normalized_shape(base.u0);
  for (std::size_t i = 0; i < shape.size(); ++i) c.u0[i] = kappa * shape[i];
  std::vector<double> times(horizons.begin(), horizons.end());
  times.insert(times.end(), diagnostic_times.begin(), diagnostic_times.end());
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());
  c.snapshot_times = times;
  c.t_end = times.back();
  const MomentSeries s = estimate_moments(c, {}, pairs, paths, seed);

  auto at = [&](double t) {
    const auto it = std::lower_bound(times.begin(), times.end(), t);
    return static_cast<std::size_t>(it - times.begin());
  };
  HorizonSweepResult r;
  for (double h : horizons) r.rows.push_back({h, s.hit_fraction[at(h)]});
  r.nondecreasing = true;
  for (std::size_t i = 1; i < r.rows.size(); ++i) {
    if (r.rows[i].hit_fraction < r.rows[i - 1].hit_fraction) r.nondecreasing = false;
  }
  r.diagnostic_times.assign(diagnostic_times.begin(), diagnostic_times.end());
  const double np = static_cast<double>(pairs.size());
  bool positive = true;
  for (double t : diagnostic_times) {
    const std::size_t k = at(t);
    double sum = 0.0;
    double var = 0.0;
    for (std::size_t q = 0; q < pairs.size(); ++q) {
      sum += s.covariance[k][q];
      var += s.covariance_stderr[k][q] * s.covariance_stderr[k][q];
    }
    r.diagnostic.push_back(sum / np);
    r.diagnostic_stderr.push_back(std::sqrt(var) / np);
    positive = positive && r.diagnostic.back() > 0.0;
  }
  r.target_slope = (a - beta) / a;
  if (positive) {
    const std::size_t m = diagnostic_times.size();
    double mx = 0.0;
    double my = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      mx += std::log(diagnostic_times[i]);
      my += std::log(r.diagnostic[i]);
    }
    mx /= static_cast<double>(m);
    my /= static_cast<double>(m);
    double sxy = 0.0;
    double sxx = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      const double dx = std::log(diagnostic_times[i]) - mx;
      sxy += dx * (std::log(r.diagnostic[i]) - my);
      sxx += dx * dx;
    }
    r.slope = sxy / sxx;
    r.slope_ok = r.slope >= r.target_slope - 0.15;
  } else {
    r.slope = std::numeric_limits<double>::quiet_NaN();
    r.slope_ok = false;
  }
  return r;
}

DirichletExperimentResult dirichlet_experiment(const SimulationConfig& base, double eps,
                                               std::span<const Point> probes, std::size_t paths,
                                               std::uint64_t seed, double threshold) {
  if (base.domain.kind != Domain::Kind::Ball) throw DomainError("the Dirichlet experiment needs a ball domain");
  const double radius = base.domain.radius;
  if (!(eps > 0.0 && eps < radius)) throw DomainError("eps must lie in (0, R)");
  for (const Point& x : probes) {
    if (norm(x) > radius - eps) throw DomainError("probes must lie in B(0, R - eps)");
  }
  DirichletExperimentResult r;
  r.killed_series = estimate_moments(base, probes, {}, paths, seed);
  SimulationConfig free = base;
  free.domain = Domain::free_space();
  r.free_series = estimate_moments(free, probes, {}, paths, seed);
  r.killed = detect_blowup_proxy(r.killed_series, threshold);
  r.free = detect_blowup_proxy(r.free_series, threshold);
  r.killed_not_earlier = as_time(r.killed.t0_hat) >= as_time(r.free.t0_hat);
  return r;
}

std::string to_string(BlowupReport::Verdict verdict) {
  return verdict == BlowupReport::Verdict::BlowupProxyDetected ? "blowup_proxy_detected"
                                                               : "none_within_horizon";
}

}  // namespace fshe
