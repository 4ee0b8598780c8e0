#include "fshe/field_sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "fshe/errors.hpp"
#include "parallel.hpp"
#include "quadrature.hpp"

namespace fshe {

// ---------------------------------------------------------------------------
// sigma

SigmaSpec SigmaSpec::pure_power(double gamma) {
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw DomainError("gamma must be >= 0");
  SigmaSpec s;
  s.form = Form::PurePower;
  s.gamma = gamma;
  return s;
}

SigmaSpec SigmaSpec::linear(double lambda) {
  if (!std::isfinite(lambda)) throw DomainError("lambda must be finite");
  SigmaSpec s;
  s.form = Form::Linear;
  s.lambda = lambda;
  return s;
}

SigmaSpec SigmaSpec::custom(std::vector<std::pair<double, double>> table, double gamma) {
  if (table.empty()) throw DomainError("custom sigma table is empty");
  if (!(gamma >= 0.0)) throw DomainError("gamma must be >= 0");
  for (std::size_t i = 0; i < table.size(); ++i) {
    if (!std::isfinite(table[i].first) || !std::isfinite(table[i].second)) {
      throw DomainError("custom sigma table entries must be finite");
    }
    if (i > 0 && !(table[i].first > table[i - 1].first)) {
      throw DomainError("custom sigma table must be strictly increasing in u");
    }
  }
  SigmaSpec s;
  s.form = Form::Custom;
  s.gamma = gamma;
  s.growth_compliant = std::all_of(table.begin(), table.end(), [gamma](const auto& e) {
    return e.second >= std::pow(std::abs(e.first), 1.0 + gamma);
  });
  s.table = std::move(table);
  return s;
}

double SigmaSpec::operator()(double u) const {
  switch (form) {
    case Form::PurePower:
      return std::pow(std::abs(u), 1.0 + gamma);
    case Form::Linear:
      return lambda * u;
    case Form::Custom:
      break;
  }
  if (u <= table.front().first) return table.front().second;
  if (u >= table.back().first) return table.back().second;
  const auto it = std::upper_bound(table.begin(), table.end(), u,
                                   [](double v, const auto& e) { return v < e.first; });
  const auto& [u1, s1] = *it;
  const auto& [u0, s0] = *(it - 1);
  return s0 + (s1 - s0) * (u - u0) / (u1 - u0);
}

// ---------------------------------------------------------------------------
// noise

namespace {

// 2^d int_{[0,1]^d} |z|^{-beta} prod_{j in S} z_j dz summed with the signs of
// prod_j (1 - z_j), using the dyadic self-similarity of each monomial:
// M = int over [0,1]^d \ [0,1/2]^d + 2^{-(d - beta + |S|)} M.
double unit_cell_average(double beta, int dim) {
  const auto d = static_cast<std::size_t>(dim);
  double total = 0.0;
  for (unsigned mask = 0; mask < (1u << d); ++mask) {
    const int degree = __builtin_popcount(mask);
    auto f = [&](const double* z) {
      double r2 = 0.0;
      double mono = 1.0;
      for (std::size_t j = 0; j < d; ++j) {
        r2 += z[j] * z[j];
        if (mask & (1u << j)) mono *= z[j];
      }
      return std::pow(r2, -0.5 * beta) * mono;
    };
    // Shell: the 2^d - 1 half-width sub-cubes other than [0,1/2]^d, each split
    // into 2^d pieces, tensor Gauss-Kronrod on each piece.
    double shell = 0.0;
    const int pieces = 2;
    const double side = 0.5 / pieces;
    for (unsigned corner = 1; corner < (1u << d); ++corner) {
      std::size_t cells = 1;
      for (std::size_t j = 0; j < d; ++j) cells *= pieces;
      for (std::size_t c = 0; c < cells; ++c) {
        double lo[3] = {0.0, 0.0, 0.0};
        std::size_t rest = c;
        for (std::size_t j = 0; j < d; ++j) {
          lo[j] = ((corner & (1u << j)) ? 0.5 : 0.0) + static_cast<double>(rest % pieces) * side;
          rest /= pieces;
        }
        double z[3] = {0.0, 0.0, 0.0};
        std::function<double(std::size_t)> nest = [&](std::size_t axis) -> double {
          if (axis == d) return f(z);
          auto g = [&](double v) {
            z[axis] = v;
            return nest(axis + 1);
          };
          return detail::kronrod_panel(g, lo[axis], lo[axis] + side).value;
        };
        shell += nest(0);
      }
    }
    const double monomial = shell / (1.0 - std::pow(2.0, -(dim - beta + degree)));
    total += ((degree % 2 == 0) ? 1.0 : -1.0) * monomial;
  }
  return std::pow(2.0, dim) * total;
}

}  // namespace

double riesz_cell_average(double beta, int dim, double h) {
  if (dim < 1 || dim > kMaxDim) throw DomainError("dimension must be 1, 2 or 3");
  if (!(beta > 0.0 && beta < dim)) throw DomainError("Riesz exponent must lie in (0, d)");
  if (!(h > 0.0)) throw DomainError("cell side must be positive");
  if (dim == 1) return 2.0 * std::pow(h, -beta) / ((1.0 - beta) * (2.0 - beta));
  return std::pow(h, -beta) * unit_cell_average(beta, dim);
}

NoiseSampler::NoiseSampler(const Lattice& lattice, const CorrelationKernel& kernel)
    : lattice_(lattice), kernel_(kernel) {
  if (kernel.dim() != lattice.dim()) throw DomainError("noise and lattice dimensions differ");
  if (kernel.kind() == CorrelationKernel::Kind::WhiteNoise) return;
  if (!kernel.translation_invariant()) {
    throw UnsupportedVariant(kernel.name() + " kernel is not translation invariant; it cannot be sampled");
  }
  const std::size_t n = lattice.site_count();
  lag_cov_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (i == 0 && kernel.kind() == CorrelationKernel::Kind::Riesz) {
      lag_cov_[i] = riesz_cell_average(kernel.parameter(), kernel.dim(), lattice.spacing());
    } else {
      lag_cov_[i] = kernel.of_difference(lattice.periodic_lag(i));
    }
  }
  const std::vector<double> eigen = lattice.forward_real_part(lag_cov_);
  // Modes of the half spectrum stand for themselves and, except on the edges
  // of the last axis, their conjugate partner.
  const auto half = static_cast<std::size_t>(lattice.n() / 2 + 1);
  const auto nyquist = static_cast<std::size_t>(lattice.n() / 2);
  double negative = 0.0;
  double total = 0.0;
  sqrt_eigen_.resize(eigen.size());
  for (std::size_t k = 0; k < eigen.size(); ++k) {
    const std::size_t last = k % half;
    const double weight = (last == 0 || last == nyquist) ? 1.0 : 2.0;
    total += weight * std::abs(eigen[k]);
    if (eigen[k] < 0.0) negative += weight * (-eigen[k]);
    sqrt_eigen_[k] = std::sqrt(std::max(eigen[k], 0.0));
  }
  clip_fraction_ = total > 0.0 ? negative / total : 0.0;
}

double NoiseSampler::lag_covariance(std::size_t site) const {
  if (site >= lattice_.site_count()) throw DomainError("site index out of range");
  if (kernel_.kind() == CorrelationKernel::Kind::WhiteNoise) {
    return site == 0 ? 1.0 / lattice_.cell_volume() : 0.0;
  }
  return lag_cov_[site];
}

void NoiseSampler::sample(double dt, Rng& rng, std::span<double> out) const {
  if (!(dt >= 0.0) || !std::isfinite(dt)) throw DomainError("dt must be nonnegative");
  if (out.size() != lattice_.site_count()) throw DomainError("noise buffer size mismatch");
  if (dt == 0.0) {
    std::fill(out.begin(), out.end(), 0.0);
    return;
  }
  std::normal_distribution<double> normal(0.0, 1.0);
  for (double& v : out) v = normal(rng);
  if (kernel_.kind() == CorrelationKernel::Kind::WhiteNoise) {
    const double s = std::sqrt(dt / lattice_.cell_volume());
    for (double& v : out) v *= s;
    return;
  }
  // Z ~ N(0, I): IFFT(sqrt(lambda) FFT(Z)) has the circulant covariance.
  lattice_.spectral_multiply(out, sqrt_eigen_);
  const double s = std::sqrt(dt);
  for (double& v : out) v *= s;
}

NoiseIncrement NoiseSampler::sample(double dt, Rng& rng) const {
  NoiseIncrement inc{std::vector<double>(lattice_.site_count()), dt, kernel_};
  sample(dt, rng, inc.values);
  return inc;
}

NoiseIncrement sample_noise(const Lattice& lattice, const CorrelationKernel& kind, double dt, Rng& rng) {
  return NoiseSampler(lattice, kind).sample(dt, rng);
}

// ---------------------------------------------------------------------------
// stepping

FieldState make_field_state(ScalarField u0, double trunc_level) {
  if (!(trunc_level > 0.0)) throw DomainError("truncation level N must be positive");
  if (!u0.all_finite()) throw DomainError("initial field must be finite");
  if (u0.sup_abs() > trunc_level) {
    throw DomainError("sup |u0| exceeds the truncation level N");
  }
  return FieldState{std::move(u0), 0.0, trunc_level, true, std::nullopt};
}

MildStepper::MildStepper(const StableKernelSpec& spec, SigmaSpec sigma, const CorrelationKernel& noise,
                         const Lattice& lattice, double dt, Domain domain)
    : spec_(spec),
      sigma_(std::move(sigma)),
      lattice_(lattice),
      dt_(dt),
      domain_(domain),
      sampler_(lattice, noise) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw DomainError("dt must be positive");
  if (spec.dim() != lattice.dim()) throw DomainError("operator and lattice dimensions differ");
  if (domain.kind == Domain::Kind::Ball && !(domain.radius > 0.0)) {
    throw DomainError("ball radius must be positive");
  }
  const auto& xi = lattice.frequency_norms();
  symbol_.resize(xi.size());
  for (std::size_t k = 0; k < xi.size(); ++k) symbol_[k] = std::exp(-dt * std::pow(xi[k], spec.alpha()));
  outside_.assign(lattice.site_count(), 0);
  if (domain.kind == Domain::Kind::Ball) {
    for (std::size_t i = 0; i < outside_.size(); ++i) {
      outside_[i] = domain.contains(lattice.site(i)) ? 0 : 1;
    }
  }
}

void MildStepper::apply_domain(std::span<double> values) const {
  if (domain_.kind == Domain::Kind::Free) return;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (outside_[i]) values[i] = 0.0;
  }
}

void MildStepper::advance(std::span<double> values, Rng& rng) const {
  if (values.size() != lattice_.site_count()) throw DomainError("field size mismatch");
  if (!sigma_.is_zero()) {
    thread_local std::vector<double> noise;
    noise.resize(values.size());
    sampler_.sample(dt_, rng, noise);
    for (std::size_t i = 0; i < values.size(); ++i) values[i] += sigma_(values[i]) * noise[i];
  }
  lattice_.spectral_multiply(values, symbol_);
  apply_domain(values);
}

FieldState MildStepper::step(const FieldState& state, Rng& rng) const {
  if (!state.alive) throw ContractError("cannot step a state that already hit its truncation level");
  FieldState next = state;
  advance(next.field.values, rng);
  next.time = state.time + dt_;
  if (!next.field.all_finite() || next.field.sup_abs() > next.trunc_level) {
    next.alive = false;
    next.hit_time = next.time;
  }
  return next;
}

FieldState step_mild(const FieldState& state, const StableKernelSpec& spec, const SigmaSpec& sigma,
                     const CorrelationKernel& noise, double dt, Rng& rng, Domain domain) {
  return MildStepper(spec, sigma, noise, state.field.lattice, dt, domain).step(state, rng);
}

// ---------------------------------------------------------------------------
// paths

void validate_simulation(const SimulationConfig& c) {
  const int d = c.spec.dim();
  const double a = c.spec.alpha();
  if (c.lattice.dim() != d) throw DomainError("lattice dimension differs from the operator dimension");
  if (c.noise.dim() != d) throw DomainError("noise dimension differs from the operator dimension");
  if (!(c.dt > 0.0) || !std::isfinite(c.dt)) throw DomainError("dt must be positive");
  if (!(c.t_end > 0.0) || !std::isfinite(c.t_end)) throw DomainError("t_end must be positive");
  if (c.noise.kind() == CorrelationKernel::Kind::WhiteNoise && !(d == 1 && a > 1.0 && a <= 2.0)) {
    throw DomainError("white noise requires d=1, 1<alpha<2");
  }
  if (c.noise.kind() != CorrelationKernel::Kind::WhiteNoise && !c.noise.translation_invariant()) {
    throw UnsupportedVariant(c.noise.name() + " kernel cannot be sampled (not translation invariant)");
  }
  if (c.lattice.half_width() < 4.0 * std::pow(c.t_end, 1.0 / a)) {
    throw DomainError("wrap-around budget violated: need L >= 4 t_end^{1/alpha}");
  }
  if (c.u0.size() != c.lattice.site_count()) {
    throw DomainError("u0 has " + std::to_string(c.u0.size()) + " values, lattice has " +
                      std::to_string(c.lattice.site_count()) + " sites");
  }
  if (!(c.trunc_level > 0.0)) throw DomainError("truncation level N must be positive");
  double sup = 0.0;
  for (double v : c.u0) {
    if (!std::isfinite(v)) throw DomainError("u0 must be finite");
    sup = std::max(sup, std::abs(v));
  }
  if (sup > c.trunc_level) throw DomainError("sup |u0| exceeds the truncation level N");
  if (c.domain.kind == Domain::Kind::Ball &&
      !(c.domain.radius > 0.0 && c.domain.radius <= c.lattice.half_width())) {
    throw DomainError("ball radius must lie in (0, L]");
  }
  double prev = 0.0;
  for (double t : c.snapshot_times) {
    if (!(t >= prev && t <= c.t_end * (1.0 + 1e-12))) {
      throw DomainError("snapshot times must be nondecreasing within [0, t_end]");
    }
    prev = t;
  }
}

std::pair<std::size_t, std::vector<std::size_t>> step_schedule(const SimulationConfig& c) {
  const auto steps = static_cast<std::size_t>(std::max(1.0, std::round(c.t_end / c.dt)));
  std::vector<std::size_t> idx;
  idx.reserve(c.snapshot_times.size());
  for (double t : c.snapshot_times) {
    idx.push_back(std::min(steps, static_cast<std::size_t>(std::llround(t / c.dt))));
  }
  return {steps, idx};
}

PathRecord run_path(const SimulationConfig& config, std::uint64_t seed, std::uint64_t path_id) {
  validate_simulation(config);
  const MildStepper stepper(config.spec, config.sigma, config.noise, config.lattice, config.dt,
                            config.domain);
  return run_path(config, stepper, seed, path_id);
}

PathRecord run_path(const SimulationConfig& config, const MildStepper& stepper, std::uint64_t seed,
                    std::uint64_t path_id) {
  const auto [steps, snap_idx] = step_schedule(config);
  Rng rng = make_stream(seed, path_id);
  PathRecord rec;
  rec.path_id = path_id;
  for (std::size_t k : snap_idx) rec.snapshot_times.push_back(static_cast<double>(k) * config.dt);
  rec.snapshots.assign(snap_idx.size(), ScalarField(config.lattice));

  std::vector<double> u = config.u0;
  stepper.apply_domain(u);
  std::size_t next = 0;
  auto record = [&](std::size_t k) {
    while (next < snap_idx.size() && snap_idx[next] <= k) rec.snapshots[next++].values = u;
  };
  record(0);
  for (std::size_t k = 1; k <= steps; ++k) {
    stepper.advance(u, rng);
    bool hit = false;
    for (double v : u) {
      if (!std::isfinite(v) || std::abs(v) > config.trunc_level) {
        hit = true;
        break;
      }
    }
    if (hit) {
      rec.hit_time = static_cast<double>(k) * config.dt;
      // Frozen at the hit snapshot from here on.
      while (next < snap_idx.size()) rec.snapshots[next++].values = u;
      break;
    }
    record(k);
  }
  return rec;
}

// ---------------------------------------------------------------------------

DirichletDeterministicReport dirichlet_deterministic_check(
    const StableKernelSpec& spec, double radius, const std::function<double(const Point&)>& u0,
    double kappa_tilde, std::span<const double> ts, std::span<const Point> xs, std::size_t n_paths,
    std::uint64_t seed, double confidence, KilledPathOptions options) {
  if (!(radius > 0.0)) throw DomainError("ball radius must be positive");
  if (!(kappa_tilde > 0.0)) throw DomainError("kappa_tilde must be positive");
  if (ts.empty() || xs.empty()) throw DomainError("empty time or point list");
  const double t_max = std::pow(0.5 * radius, spec.alpha());
  for (double t : ts) {
    if (!(t > 0.0)) throw DomainError("times must be positive");
    if (t > t_max * (1.0 + 1e-12)) throw HypothesisNotMet("t must not exceed (R/2)^alpha");
  }
  for (const Point& x : xs) {
    if (norm(x) > 0.5 * radius) throw DomainError("x outside B(0, R/2)");
  }
  // Assumption check on a grid of B(0, R/2) along the coordinate axes and diagonals.
  const int d = spec.dim();
  for (int i = 0; i <= 100; ++i) {
    const double r = -0.5 * radius + radius * i / 100.0;
    for (int axis = 0; axis < d; ++axis) {
      Point x{};
      x[static_cast<std::size_t>(axis)] = r;
      if (u0(x) < kappa_tilde) throw DomainError("u0 < kappa_tilde somewhere on B(0, R/2)");
    }
    Point diag{};
    for (int axis = 0; axis < d; ++axis) diag[static_cast<std::size_t>(axis)] = r / std::sqrt(d);
    if (u0(diag) < kappa_tilde) throw DomainError("u0 < kappa_tilde somewhere on B(0, R/2)");
  }
  const double z = normal_quantile_two_sided(confidence);
  DirichletDeterministicReport report;
  report.min_estimate = std::numeric_limits<double>::infinity();
  report.lower_bound = std::numeric_limits<double>::infinity();
  std::uint64_t idx = 0;
  for (double t : ts) {
    for (const Point& x : xs) {
      const auto est = killed_expectation(spec, radius, t, x, u0, n_paths, derive_seed(seed, idx++), options);
      report.rows.push_back({t, x, est.mean, est.std_error});
      report.min_estimate = std::min(report.min_estimate, est.mean);
      report.lower_bound = std::min(report.lower_bound, est.mean - z * est.std_error);
    }
  }
  report.positive = report.lower_bound > 0.0;
  return report;
}

}  // namespace fshe
