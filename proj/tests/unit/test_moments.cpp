#include "doctest.h"

#include <cmath>
#include <limits>
#include <vector>

#include "fshe/errors.hpp"
#include "fshe/moments.hpp"

using namespace fshe;

namespace {

SimulationConfig config(double kappa, SigmaSpec sigma, CorrelationKernel noise = CorrelationKernel::white_noise(1)) {
  SimulationConfig c;
  c.spec = StableKernelSpec(1.5, 1);
  c.lattice = make_lattice(1, 4.0, 128);
  c.sigma = std::move(sigma);
  c.noise = std::move(noise);
  c.u0.assign(c.lattice.site_count(), kappa);
  c.dt = 1e-3;
  c.t_end = 0.1;
  c.trunc_level = 10.0 * kappa;
  for (int k = 1; k <= 10; ++k) c.snapshot_times.push_back(0.01 * k);
  return c;
}

// Second moment of the linear equation for alpha = 2, d = 1: the renewal
// equation m = 1 + int m(s) (8 pi (t - s))^{-1/2} ds has the Mittag-Leffler
// solution E_{1/2}(sqrt(t / 8)) = exp(t / 8) erfc(-sqrt(t / 8)).
double gaussian_linear_moment(double lambda, double kappa, double t) {
  const double z = lambda * lambda * std::sqrt(t / 8.0);
  return kappa * kappa * std::exp(z * z) * std::erfc(-z);
}

MomentSeries fake_series(std::vector<double> hit_fraction) {
  MomentSeries s;
  for (std::size_t i = 0; i < hit_fraction.size(); ++i) s.times.push_back(0.1 * (i + 1));
  s.hit_fraction = std::move(hit_fraction);
  s.paths = 100;
  return s;
}

}  // namespace

TEST_CASE("deterministic field") {
  const auto c = config(1.5, SigmaSpec::zero());
  const std::vector<Point> probes{point1(0.0), point1(1.0)};
  const auto s = estimate_moments(c, probes, {}, 100, 1);
  for (std::size_t t = 0; t < s.times.size(); ++t) {
    for (std::size_t p = 0; p < probes.size(); ++p) {
      CHECK(s.second_moment[t][p] == doctest::Approx(2.25).epsilon(1e-12));
      CHECK(s.second_stderr[t][p] <= 1e-12);
    }
    CHECK(s.hit_fraction[t] == 0.0);
  }
  CHECK(s.kappa == 1.5);
}

TEST_CASE("preconditions") {
  const auto c = config(1.0, SigmaSpec::linear(1.0));
  const std::vector<Point> probes{point1(0.0)};
  CHECK_THROWS_AS(estimate_moments(c, probes, {}, 10, 1), DomainError);
  const std::vector<Point> off{point1(0.01)};
  CHECK_THROWS_AS(estimate_moments(c, off, {}, 100, 1), DomainError);
}

TEST_CASE("truncation and symmetry") {
  const auto c = config(1.0, SigmaSpec::pure_power(1.0));
  const std::vector<Point> probes{point1(0.0)};
  const std::vector<ProbePair> pairs{{point1(0.0), point1(0.5)}, {point1(0.5), point1(0.0)}};
  auto lo = c;
  lo.trunc_level = 3.0;
  const auto a = estimate_moments(lo, probes, pairs, 200, 4);
  const auto b = estimate_moments(c, probes, pairs, 200, 4);
  for (std::size_t t = 0; t < a.times.size(); ++t) {
    CHECK(a.second_moment[t][0] <= 9.0);
    CHECK(b.second_moment[t][0] <= 100.0);
    CHECK(a.cross_moment[t][0] == a.cross_moment[t][1]);
    CHECK(b.cross_moment[t][0] == b.cross_moment[t][1]);
  }
  // Same paths up to the lower level's hit; afterwards |u| is clipped lower.
  const auto cont_lo = estimate_moments(lo, probes, {}, 200, 4, {true});
  auto hi = lo;
  hi.trunc_level = 6.0;
  const auto cont_hi = estimate_moments(hi, probes, {}, 200, 4, {true});
  for (std::size_t t = 0; t < a.times.size(); ++t) {
    CHECK(cont_lo.second_moment[t][0] <= cont_hi.second_moment[t][0] + 1e-12);
  }
}

TEST_CASE("linear moment oracle") {
  const StableKernelSpec gauss(2.0, 1);
  const std::vector<double> times{0.1, 0.25, 0.5};
  const auto m = linear_moment_oracle(1.0, gauss, 1.0, times);
  for (std::size_t i = 0; i < times.size(); ++i) {
    CHECK(m[i] == doctest::Approx(gaussian_linear_moment(1.0, 1.0, times[i])).epsilon(0.005));
  }
  CHECK(m[1] == doctest::Approx(1.2354226091027345).epsilon(0.005));

  const auto zero = linear_moment_oracle(0.0, gauss, 1.7, times);
  for (double v : zero) CHECK(v == doctest::Approx(1.7 * 1.7));

  const auto scaled = linear_moment_oracle(1.0, gauss, 3.0, times);
  for (std::size_t i = 0; i < times.size(); ++i) CHECK(scaled[i] == doctest::Approx(9.0 * m[i]).epsilon(1e-12));

  CHECK_THROWS_AS(linear_moment_oracle(1.0, StableKernelSpec(1.5, 2), 1.0, times), Error);
}

TEST_CASE("blow-up proxy") {
  CHECK(detect_blowup_proxy(fake_series({0, 0, 0, 0})).verdict == BlowupReport::Verdict::NoneWithinHorizon);
  const auto r = detect_blowup_proxy(fake_series({0.1, 0.3, 0.6, 0.9}));
  CHECK(r.verdict == BlowupReport::Verdict::BlowupProxyDetected);
  CHECK(*r.t0_hat == doctest::Approx(0.3));
  CHECK(detect_blowup_proxy(fake_series({0.5, 0.9, 0.99}), 1.0).verdict ==
        BlowupReport::Verdict::NoneWithinHorizon);
  CHECK_THROWS_AS(detect_blowup_proxy(fake_series({0.1}), 0.0), DomainError);
  CHECK(to_string(BlowupReport::Verdict::NoneWithinHorizon) == "none_within_horizon");

  const std::vector<std::optional<double>> hits{0.05, 0.12, std::nullopt, 0.31};
  const std::vector<double> times{0.1, 0.2, 0.3, 0.4};
  CHECK(*first_crossing(hits, times, 0.5) == doctest::Approx(0.2));
  CHECK(*first_crossing(hits, times, 0.75) == doctest::Approx(0.4));
  CHECK_FALSE(first_crossing(hits, times, 1.0).has_value());
}

TEST_CASE("kappa sweep") {
  auto c = config(1.0, SigmaSpec::zero());
  const std::vector<double> kappas{1.0, 2.0, 4.0};
  const auto quiet = kappa_sweep(c, kappas, 100, 1, 0.5, 50);
  for (const auto& row : quiet.rows) CHECK_FALSE(row.t0_hat.has_value());
  CHECK_FALSE(quiet.smallest_detecting_kappa.has_value());

  c.sigma = SigmaSpec::pure_power(1.0);
  c.trunc_level = 40.0;
  const auto loud = kappa_sweep(c, kappas, 200, 2, 0.5, 200);
  CHECK(loud.nonincreasing);
  CHECK(loud.rows.back().t0_hat.has_value());

  const std::vector<double> single{1.0};
  CHECK_THROWS_AS(kappa_sweep(c, single, 100, 1), DomainError);
}

TEST_CASE("horizon sweep") {
  auto c = config(0.5, SigmaSpec::pure_power(1.0), CorrelationKernel::riesz(0.5, 1));
  c.t_end = 0.2;
  const std::vector<double> horizons{0.05, 0.1, 0.2};
  const std::vector<double> diag{0.02, 0.2};
  const std::vector<ProbePair> pairs{{point1(0.0), point1(0.0625)}};
  const auto r = horizon_sweep_riesz(c, 0.5, horizons, diag, pairs, 200, 3);
  CHECK(r.nondecreasing);
  CHECK(r.target_slope == doctest::Approx(2.0 / 3.0));

  SimulationConfig bad;
  bad.spec = StableKernelSpec(1.3, 2);
  bad.lattice = make_lattice(2, 4.0, 16);
  bad.noise = CorrelationKernel::riesz(1.4, 2);
  bad.u0.assign(bad.lattice.site_count(), 1.0);
  bad.t_end = 0.1;
  CHECK_THROWS_AS(horizon_sweep_riesz(bad, 0.5, horizons, diag, pairs, 200, 3), HypothesisNotMet);
  auto white = c;
  white.noise = CorrelationKernel::white_noise(1);
  CHECK_THROWS_AS(horizon_sweep_riesz(white, 0.5, horizons, diag, pairs, 200, 3), HypothesisNotMet);
}

TEST_CASE("dirichlet experiment") {
  auto c = config(4.0, SigmaSpec::pure_power(1.0));
  c.domain = Domain::ball(1.0);
  for (std::size_t i = 0; i < c.u0.size(); ++i) c.u0[i] = norm(c.lattice.site(i)) < 1.0 ? 4.0 : 0.0;
  c.trunc_level = 40.0;
  const std::vector<Point> probes{point1(0.0)};
  const auto r = dirichlet_experiment(c, 0.25, probes, 200, 5);
  CHECK(r.killed.t0_hat.has_value());
  CHECK(r.killed_not_earlier);

  auto quiet = c;
  quiet.sigma = SigmaSpec::zero();
  const auto q = dirichlet_experiment(quiet, 0.25, probes, 100, 5);
  CHECK(q.killed.verdict == BlowupReport::Verdict::NoneWithinHorizon);

  const std::vector<Point> outside{point1(0.875)};
  CHECK_THROWS_AS(dirichlet_experiment(c, 0.25, outside, 100, 5), DomainError);
}
