#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "fshe/correlation.hpp"
#include "fshe/lattice.hpp"
#include "fshe/random.hpp"
#include "fshe/stable_kernel.hpp"

namespace fshe {

/// Diffusion coefficient sigma(u).
struct SigmaSpec {
  enum class Form { PurePower, Linear, Custom };

  Form form = Form::Linear;
  double gamma = 0.0;   ///< PurePower: sigma(u) = |u|^{1+gamma}
  double lambda = 0.0;  ///< Linear: sigma(u) = lambda u
  /// Custom: piecewise-linear table of (u, sigma(u)), sorted by u, constant
  /// extrapolation outside.
  std::vector<std::pair<double, double>> table;
  /// Custom: sigma(u) >= |u|^{1+gamma} holds at every table node.
  bool growth_compliant = true;

  static SigmaSpec pure_power(double gamma);
  static SigmaSpec linear(double lambda);
  static SigmaSpec zero() { return linear(0.0); }
  static SigmaSpec custom(std::vector<std::pair<double, double>> table, double gamma);

  bool is_zero() const { return form == Form::Linear && lambda == 0.0; }
  double operator()(double u) const;
};

/// Boundary handling of the lattice dynamics.
struct Domain {
  enum class Kind { Free, Ball };
  Kind kind = Kind::Free;
  double radius = 0.0;

  static Domain free_space() { return {}; }
  static Domain ball(double radius) { return {Kind::Ball, radius}; }
  bool contains(const Point& x) const { return kind == Kind::Free || norm(x) < radius; }
};

/// One time increment of the noise on the lattice, as a density: white noise
/// has per-site variance dt / h^d, colored noise covariance dt f(x_i - x_j).
struct NoiseIncrement {
  std::vector<double> values;
  double dt = 0.0;
  CorrelationKernel kind;
};

/// Gaussian noise increments with the covariance of `kernel` on the periodic
/// lattice. Colored noise uses the circulant factorisation: the eigenvalues of
/// the torus covariance are computed by FFT, negative ones are clipped to 0.
/// Riesz covariance at lag 0 is infinite; the lag-0 entry is the cell average
/// of |x - y|^{-beta} over a pair of coincident cells.
class NoiseSampler {
 public:
  NoiseSampler(const Lattice& lattice, const CorrelationKernel& kernel);

  void sample(double dt, Rng& rng, std::span<double> out) const;
  NoiseIncrement sample(double dt, Rng& rng) const;

  const Lattice& lattice() const { return lattice_; }
  const CorrelationKernel& kernel() const { return kernel_; }
  /// Sum of |negative eigenvalues| over sum of |eigenvalues| (0 for white noise).
  double clip_fraction() const { return clip_fraction_; }
  /// The covariance value used at a given lag (index into the lattice sites).
  double lag_covariance(std::size_t site) const;

 private:
  Lattice lattice_;
  CorrelationKernel kernel_;
  std::vector<double> sqrt_eigen_;  // square roots of the clipped circulant eigenvalues
  std::vector<double> lag_cov_;
  double clip_fraction_ = 0.0;
};

/// sample_noise(lattice, kind, dt, stream). ExponentialType and other
/// non-translation-invariant kernels are rejected with UnsupportedVariant.
NoiseIncrement sample_noise(const Lattice& lattice, const CorrelationKernel& kind, double dt, Rng& rng);

/// Cell average of |x - y|^{-beta} over two coincident cubes of side h.
double riesz_cell_average(double beta, int dim, double h);

struct FieldState {
  ScalarField field;
  double time = 0.0;
  double trunc_level = 0.0;
  bool alive = true;
  std::optional<double> hit_time;
};

/// Initial state; DomainError unless field is finite, trunc_level > 0 and sup |u0| <= trunc_level.
FieldState make_field_state(ScalarField u0, double trunc_level);

/// Exponential-Euler stepper for the lattice mild equation
///   u_{t+dt} = P_dt [ u_t + sigma(u_t) dF ]
/// with P_dt the spectral heat semigroup. On a ball domain the sites with
/// |x| >= R are set to 0 after every step.
class MildStepper {
 public:
  MildStepper(const StableKernelSpec& spec, SigmaSpec sigma, const CorrelationKernel& noise,
              const Lattice& lattice, double dt, Domain domain = Domain::free_space());

  /// One step with no truncation check (values may become non-finite).
  void advance(std::span<double> values, Rng& rng) const;
  /// One step followed by the truncation check. ContractError on a dead state.
  FieldState step(const FieldState& state, Rng& rng) const;
  /// Zero the sites outside the domain.
  void apply_domain(std::span<double> values) const;

  double dt() const { return dt_; }
  const Lattice& lattice() const { return lattice_; }
  const NoiseSampler& sampler() const { return sampler_; }
  const Domain& domain() const { return domain_; }

 private:
  StableKernelSpec spec_;
  SigmaSpec sigma_;
  Lattice lattice_;
  double dt_;
  Domain domain_;
  NoiseSampler sampler_;
  std::vector<double> symbol_;
  std::vector<unsigned char> outside_;
};

/// Single step convenience wrapper around MildStepper.
FieldState step_mild(const FieldState& state, const StableKernelSpec& spec, const SigmaSpec& sigma,
                     const CorrelationKernel& noise, double dt, Rng& rng,
                     Domain domain = Domain::free_space());

/// Everything needed to run paths of the lattice equation.
struct SimulationConfig {
  StableKernelSpec spec{1.5, 1};
  SigmaSpec sigma;
  CorrelationKernel noise = CorrelationKernel::white_noise(1);
  Lattice lattice{1, 16.0, 512};
  std::vector<double> u0;  ///< one value per lattice site
  double dt = 1e-3;
  double t_end = 1.0;
  double trunc_level = 10.0;
  Domain domain;
  std::vector<double> snapshot_times;
};

/// Throws DomainError listing the first violated constraint: shapes, dt and
/// t_end positive, white noise only for d = 1 and 1 < alpha <= 2, colored
/// noise translation invariant, wrap-around budget L >= 4 t_end^{1/alpha},
/// sup |u0| <= N, ball radius in (0, L].
void validate_simulation(const SimulationConfig& config);

/// Number of steps and the step index of each snapshot time (rounded to the grid).
std::pair<std::size_t, std::vector<std::size_t>> step_schedule(const SimulationConfig& config);

struct PathRecord {
  std::uint64_t path_id = 0;
  std::optional<double> hit_time;
  std::vector<double> snapshot_times;  ///< on the step grid
  std::vector<ScalarField> snapshots;  ///< frozen at the hit snapshot once dead
};

/// One path driven by stream make_stream(seed, path_id).
PathRecord run_path(const SimulationConfig& config, std::uint64_t seed, std::uint64_t path_id = 0);
/// Same, reusing a stepper built from `config` (no validation).
PathRecord run_path(const SimulationConfig& config, const MildStepper& stepper, std::uint64_t seed,
                    std::uint64_t path_id);

struct DirichletDeterministicRow {
  double t = 0.0;
  Point x{};
  double estimate = 0.0;
  double std_error = 0.0;
};

struct DirichletDeterministicReport {
  double min_estimate = 0.0;
  double lower_bound = 0.0;  ///< min of estimate - z stderr
  bool positive = false;
  std::vector<DirichletDeterministicRow> rows;
};

/// (G_D u)_t(x) = E_x[u0(X_t); t < exit time of B(0,R)] by killed-path Monte
/// Carlo, minimised over ts x xs. Requires t <= (R/2)^alpha (HypothesisNotMet),
/// xs in B(0, R/2) and u0 >= kappa_tilde > 0 on B(0, R/2) (DomainError).
DirichletDeterministicReport dirichlet_deterministic_check(
    const StableKernelSpec& spec, double radius, const std::function<double(const Point&)>& u0,
    double kappa_tilde, std::span<const double> ts, std::span<const Point> xs, std::size_t n_paths,
    std::uint64_t seed, double confidence = 0.99, KilledPathOptions options = {});

}  // namespace fshe
