#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fshe/field_sim.hpp"

namespace fshe {

struct ProbePair {
  Point x{};
  Point y{};
};

/// Monte Carlo moment estimates over snapshot times. Tables are indexed
/// [time][probe] or [time][pair].
struct MomentSeries {
  std::vector<double> times;
  std::vector<Point> probes;
  std::vector<ProbePair> pairs;

  /// E[min(|u_t(x)|, N)^2]
  std::vector<std::vector<double>> second_moment;
  std::vector<std::vector<double>> second_stderr;
  /// E[min(|u_t(x)|, N)]-clipped mean of u_t(x) (sign kept)
  std::vector<std::vector<double>> mean;
  std::vector<std::vector<double>> mean_stderr;
  /// E[min(|u_t(x) u_t(y)|, N^2)]
  std::vector<std::vector<double>> cross_moment;
  std::vector<std::vector<double>> cross_stderr;
  /// Sample covariance of the clipped u_t(x), u_t(y): estimates the
  /// stochastic-integral part E[u_t(x) u_t(y)] - (G u)_t(x) (G u)_t(y).
  std::vector<std::vector<double>> covariance;
  std::vector<std::vector<double>> covariance_stderr;

  std::vector<double> hit_fraction;           ///< fraction of paths with hit_time <= t
  std::vector<std::optional<double>> hit_times;  ///< per path
  double kappa = 0.0;                          ///< inf of u0
  double trunc_level = 0.0;
  std::size_t paths = 0;
};

struct MomentOptions {
  /// Keep integrating a path after it exceeds N so truncated moments use
  /// min(|u_t|, N) of the running solution; non-finite values count as N.
  /// When false a path stops at its hit and contributes N afterwards.
  bool continue_after_hit = true;
};

/// Runs M >= 100 paths (stream i for path i) and aggregates truncated moments
/// with pairwise summation in path order. Probes must be lattice sites.
MomentSeries estimate_moments(const SimulationConfig& config, std::span<const Point> probes,
                              std::span<const ProbePair> pairs, std::size_t paths,
                              std::uint64_t seed, MomentOptions options = {});

/// Second moment of the linear white-noise equation (d = 1, 1 < alpha <= 2,
/// u0 = kappa): m(t) = kappa^2 + lambda^2 int_0^t m(s) p_{2(t-s)}(0) ds, solved
/// with the renewal product-integration solver and checked by mesh halving to 0.5%.
std::vector<double> linear_moment_oracle(double lambda, const StableKernelSpec& spec, double kappa,
                                         std::span<const double> times, double mesh = 2e-4);

struct BlowupReport {
  enum class Verdict { BlowupProxyDetected, NoneWithinHorizon };
  Verdict verdict = Verdict::NoneWithinHorizon;
  std::optional<double> t0_hat;
  double kappa = 0.0;
  double threshold = 0.5;
  double trunc_level = 0.0;
  std::size_t paths = 0;
};

/// t0_hat = first snapshot time with hit_fraction >= threshold, threshold in (0, 1].
BlowupReport detect_blowup_proxy(const MomentSeries& series, double threshold = 0.5);

/// First time at which the fraction of hit_times <= t reaches threshold.
std::optional<double> first_crossing(std::span<const std::optional<double>> hit_times,
                                     std::span<const double> times, double threshold);

struct KappaSweepRow {
  double kappa = 0.0;
  std::optional<double> t0_hat;
  double final_hit_fraction = 0.0;
};

struct KappaSweepResult {
  std::vector<KappaSweepRow> rows;
  bool nonincreasing = false;  ///< t0_hat nonincreasing in kappa, none counted as +inf
  double bootstrap_confidence = 0.0;
  std::optional<double> smallest_detecting_kappa;
};

/// Runs the blow-up proxy for u0 = kappa * (base u0 / sup base u0) per kappa,
/// with the same seeds for every kappa. Bootstrap resamples paths jointly.
KappaSweepResult kappa_sweep(const SimulationConfig& base, std::span<const double> kappas,
                             std::size_t paths, std::uint64_t seed, double threshold = 0.5,
                             std::size_t bootstrap_replicates = 1000);

struct HorizonSweepRow {
  double horizon = 0.0;
  double hit_fraction = 0.0;
};

struct HorizonSweepResult {
  std::vector<HorizonSweepRow> rows;
  bool nondecreasing = false;
  std::vector<double> diagnostic_times;
  std::vector<double> diagnostic;  ///< mean over pairs of the covariance part of E[u(x) u(y)]
  std::vector<double> diagnostic_stderr;
  double slope = 0.0;         ///< least-squares slope of log diagnostic against log t
  double target_slope = 0.0;  ///< (alpha - beta) / alpha
  bool slope_ok = false;      ///< slope >= target - 0.15
};

/// Riesz-noise sweep at fixed small kappa: hit fraction at each horizon, and
/// the growth of the cross-moment stochastic term at pairs inside
/// B(0, t^{1/alpha}) over the diagnostic times.
/// HypothesisNotMet unless the noise is Riesz with beta < min(alpha, d) and every
/// pair lies in B(0, t^{1/alpha}) at the first diagnostic time.
HorizonSweepResult horizon_sweep_riesz(const SimulationConfig& base, double kappa,
                                       std::span<const double> horizons,
                                       std::span<const double> diagnostic_times,
                                       std::span<const ProbePair> pairs, std::size_t paths,
                                       std::uint64_t seed);

struct DirichletExperimentResult {
  BlowupReport killed;
  BlowupReport free;
  bool killed_not_earlier = false;  ///< t0_hat(killed) >= t0_hat(free), none = +inf
  MomentSeries killed_series;
  MomentSeries free_series;
};

/// Blow-up proxy on the killed dynamics of `base` (ball domain) and on the free
/// dynamics with identical seeds. Probes must lie in B(0, R - eps).
DirichletExperimentResult dirichlet_experiment(const SimulationConfig& base, double eps,
                                               std::span<const Point> probes, std::size_t paths,
                                               std::uint64_t seed, double threshold = 0.5);

std::string to_string(BlowupReport::Verdict verdict);

}  // namespace fshe
