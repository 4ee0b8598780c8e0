#include "doctest.h"

#include <cmath>
#include <numbers>
#include <vector>

#include "fshe/errors.hpp"
#include "fshe/stable_kernel.hpp"

using namespace fshe;

namespace {

std::vector<Point> line(double a, double b, int n) {
  std::vector<Point> v;
  for (int i = 0; i < n; ++i) v.push_back(point1(a + (b - a) * i / (n - 1)));
  return v;
}

}  // namespace

TEST_CASE("closed forms at the origin") {
  CHECK(eval_kernel(StableKernelSpec(2.0, 1), 1.0, point1(0.0)) ==
        doctest::Approx(1.0 / std::sqrt(4.0 * std::numbers::pi)).epsilon(1e-14));
  CHECK(eval_kernel(StableKernelSpec(1.0, 1), 1.0, point1(0.0)) ==
        doctest::Approx(1.0 / std::numbers::pi).epsilon(1e-14));
  // d = 3 Cauchy: Gamma(2) / pi^2 t^3 (1 + r^2/t^2)^2
  const double r = 0.7;
  CHECK(eval_kernel_radial(StableKernelSpec(1.0, 3), 1.0, r) ==
        doctest::Approx(1.0 / (std::numbers::pi * std::numbers::pi * std::pow(1.0 + r * r, 2.0))));
}

TEST_CASE("general alpha against frozen high-precision values") {
  // p_1(x) for alpha = 1.5, d = 1, by 30-digit oscillatory quadrature.
  CHECK(eval_kernel(StableKernelSpec(1.5, 1), 1.0, point1(5.0)) ==
        doctest::Approx(0.00711173604768584).epsilon(1e-9));
  // p_1(0) = Gamma(1 + 1/alpha) / pi
  CHECK(eval_kernel(StableKernelSpec(1.5, 1), 1.0, point1(0.0)) ==
        doctest::Approx(std::tgamma(1.0 + 1.0 / 1.5) / std::numbers::pi).epsilon(1e-10));
  CHECK(peak_density(StableKernelSpec(1.5, 1), 1.0) ==
        doctest::Approx(std::tgamma(1.0 + 1.0 / 1.5) / std::numbers::pi).epsilon(1e-14));
}

TEST_CASE("closed forms agree with Fourier inversion") {
  for (int d = 1; d <= 3; ++d) {
    for (double alpha : {1.0, 2.0}) {
      const StableKernelSpec spec(alpha, d);
      for (double r : {0.0, 0.5, 1.5, 3.0}) {
        CHECK(fourier_inversion(spec, 1.0, r) ==
              doctest::Approx(eval_kernel_radial(spec, 1.0, r)).epsilon(1e-7));
      }
    }
  }
}

TEST_CASE("scaling identity") {
  const auto xs = line(-5.0, 5.0, 41);
  CHECK(check_scaling(StableKernelSpec(2.0, 1), 4.0, 1.0, xs) <= 1e-10);
  CHECK(check_scaling(StableKernelSpec(1.5, 1), 2.0, 1.0, xs) <= 1e-5);
  CHECK(check_scaling(StableKernelSpec(1.0, 1), 1.0, 3.0, xs) <= 1e-15);
  const double s = std::pow(2.0, -1.0 / 1.5);
  CHECK(eval_kernel(StableKernelSpec(1.5, 1), 2.0, point1(1.3)) ==
        doctest::Approx(s * eval_kernel(StableKernelSpec(1.5, 1), 1.0, point1(s * 1.3))).epsilon(1e-8));
  CHECK_THROWS_AS(check_scaling(StableKernelSpec(1.5, 1), 2.0, 1.0, {}), DomainError);
}

TEST_CASE("domain errors") {
  CHECK_THROWS_AS(eval_kernel(StableKernelSpec(1.5, 1), 0.0, point1(0.0)), DomainError);
  CHECK_THROWS_AS(eval_kernel(StableKernelSpec(1.5, 1), -1.0, point1(0.0)), DomainError);
  CHECK_THROWS_AS(StableKernelSpec(2.5, 1), DomainError);
  CHECK_THROWS_AS(StableKernelSpec(0.0, 1), DomainError);
}

TEST_CASE("radial monotonicity") {
  for (double alpha : {0.8, 1.3, 1.7}) {
    const StableKernelSpec spec(alpha, 2);
    double prev = eval_kernel_radial(spec, 1.0, 0.0);
    for (int i = 1; i <= 40; ++i) {
      const double v = eval_kernel_radial(spec, 1.0, 0.25 * i);
      CHECK(v <= prev * (1.0 + 1e-12));
      prev = v;
    }
  }
}

TEST_CASE("tabulated density tracks direct evaluation") {
  for (double alpha : {1.2, 1.5, 1.8}) {
    const StableKernelSpec spec(alpha, 1);
    const StableDensity table(spec);
    const double p0 = peak_density(spec, 1.0);
    for (double r = 0.013; r < 25.0; r += 0.377) {
      CHECK(std::abs(table(1.0, r) - eval_kernel_radial(spec, 1.0, r)) <= 1e-8 * p0);
    }
    CHECK(table(0.5, 0.2) == doctest::Approx(eval_kernel_radial(spec, 0.5, 0.2)).epsilon(1e-7));
  }
}

TEST_CASE("unit mass on a wide lattice") {
  // Lattice sum over [-200, 200] with h = 0.01 plus the leading-order tail
  // 2 Gamma(1 + alpha) sin(pi alpha / 2) / (pi alpha 200^alpha). Width rule:
  // the neglected next tail term is O(L^{-2 alpha}), below 1e-7 here.
  const double alpha = 1.5;
  const StableKernelSpec spec(alpha, 1);
  const double h = 0.01;
  double mass = 0.0;
  for (int i = -20000; i <= 20000; ++i) mass += eval_kernel(spec, 1.0, point1(i * h)) * h;
  const double tail = 2.0 * std::tgamma(1.0 + alpha) * std::sin(std::numbers::pi * alpha / 2.0) /
                      (std::numbers::pi * alpha * std::pow(200.0, alpha));
  CHECK(std::abs(mass + tail - 1.0) <= 1e-6);
}

TEST_CASE("product bound") {
  std::vector<std::pair<Point, Point>> pairs;
  for (const Point& x : line(-10.0, 10.0, 41)) {
    for (const Point& y : line(-10.0, 10.0, 41)) pairs.emplace_back(x, y);
  }
  const StableKernelSpec gauss(2.0, 1);
  const auto ok = check_product_bound(gauss, time_for_peak(gauss, 0.9), 2.0, pairs);
  CHECK(ok.hypothesis_met);
  CHECK(ok.violations.empty());

  const std::vector<std::pair<Point, Point>> origin{{point1(0.0), point1(0.0)}};
  const auto diag = check_product_bound(gauss, time_for_peak(gauss, 1.0), 2.0, origin);
  CHECK(diag.violations.empty());

  const auto tiny = check_product_bound(gauss, 1e-4, 2.0, pairs);
  CHECK_FALSE(tiny.hypothesis_met);
}

TEST_CASE("two-sided bound") {
  const auto r = check_two_sided_bound(StableKernelSpec(1.5, 1), 0.1, 10.0, 10.0, 32);
  CHECK(r.c1_hat > 0.0);
  CHECK(r.c1_hat <= r.c2_hat);
  CHECK(std::isfinite(r.c2_hat));
  CHECK_FALSE(r.advisory);
  CHECK(check_two_sided_bound(StableKernelSpec(2.0, 1), 0.1, 10.0, 10.0, 16).advisory);

  // alpha = 1 at x = 0: the ratio is p_1(0) = 1/pi for every t.
  const auto cauchy = check_two_sided_bound(StableKernelSpec(1.0, 1), 0.1, 10.0, 10.0, 21);
  for (const GridSample& g : cauchy.grid) {
    if (g.x[0] == 0.0) CHECK(g.ratio == doctest::Approx(1.0 / std::numbers::pi).epsilon(1e-12));
  }
}

TEST_CASE("semigroup") {
  const Lattice lat = make_lattice(1, 16.0, 512);
  const StableKernelSpec spec(1.5, 1);

  SUBCASE("constants are preserved") {
    const auto r = apply_semigroup(spec, 0.7, ScalarField(lat, 2.5));
    for (double v : r.field.values) CHECK(v == doctest::Approx(2.5).epsilon(1e-12));
  }
  SUBCASE("indicator stays in (0, kappa) and symmetric") {
    ScalarField u(lat);
    for (std::size_t i = 0; i < u.values.size(); ++i) u.values[i] = std::abs(lat.site(i)[0]) <= 1.0 ? 3.0 : 0.0;
    const auto r = apply_semigroup(spec, 0.3, u);
    const std::size_t c = lat.n() / 2;
    for (std::size_t k = 1; k < 100; ++k) {
      CHECK(r.field.values[c + k] > 0.0);
      CHECK(r.field.values[c + k] < 3.0);
      CHECK(r.field.values[c + k] == doctest::Approx(r.field.values[c - k]).epsilon(1e-10));
    }
  }
  SUBCASE("linearity, semigroup property and t -> 0") {
    ScalarField u(lat), v(lat);
    for (std::size_t i = 0; i < u.values.size(); ++i) {
      const double x = lat.site(i)[0];
      u.values[i] = std::exp(-x * x);
      v.values[i] = 1.0 / (1.0 + x * x);
    }
    ScalarField w(lat);
    for (std::size_t i = 0; i < w.values.size(); ++i) w.values[i] = 2.0 * u.values[i] + 3.0 * v.values[i];
    const auto gu = apply_semigroup(spec, 0.4, u).field;
    const auto gv = apply_semigroup(spec, 0.4, v).field;
    const auto gw = apply_semigroup(spec, 0.4, w).field;
    const auto g2 = apply_semigroup(spec, 0.3, apply_semigroup(spec, 0.1, u).field).field;
    ScalarField tiny = u;
    propagate_in_place(spec, 1e-14, tiny);
    for (std::size_t i = 0; i < w.values.size(); ++i) {
      CHECK(std::abs(gw.values[i] - (2.0 * gu.values[i] + 3.0 * gv.values[i])) <= 1e-12);
      CHECK(std::abs(g2.values[i] - gu.values[i]) <= 1e-12);
      CHECK(std::abs(tiny.values[i] - u.values[i]) <= 1e-9);
      CHECK(gu.values[i] >= -1e-12);
    }
  }
  CHECK_THROWS_AS(apply_semigroup(spec, 0.0, ScalarField(lat, 1.0)), DomainError);
}

TEST_CASE("deterministic lower bound") {
  const Lattice lat = make_lattice(1, 16.0, 512);
  const StableKernelSpec spec(1.5, 1);
  ScalarField u(lat);
  for (std::size_t i = 0; i < u.values.size(); ++i) u.values[i] = std::abs(lat.site(i)[0]) <= 1.0 ? 1.0 : 0.0;
  const double t0 = 2.0 * time_for_peak(spec, 1.0);
  const std::vector<double> ts{0.25 * t0, 0.5 * t0, t0};
  const auto r = deterministic_lower_bound_check(spec, u, t0, ts);
  CHECK(r.ratio > 0.0);
  CHECK(r.k_u0 == doctest::Approx(2.0).epsilon(0.04));

  ScalarField u2 = u;
  for (double& v : u2.values) v *= 2.0;
  CHECK(deterministic_lower_bound_check(spec, u2, t0, ts).ratio == doctest::Approx(r.ratio).epsilon(1e-12));

  CHECK_THROWS_AS(deterministic_lower_bound_check(spec, ScalarField(lat, 0.0), t0, ts), DomainError);
  CHECK_THROWS_AS(deterministic_lower_bound_check(spec, u, 0.5 * time_for_peak(spec, 1.0), ts),
                  HypothesisNotMet);
}

TEST_CASE("killed kernel") {
  const StableKernelSpec spec(1.5, 1);
  SUBCASE("small t: killing negligible") {
    const auto e = estimate_killed_kernel(spec, 1.0, 0.01, point1(0.0), point1(0.0), 20000, 5);
    const double free = eval_kernel(spec, 0.01, point1(0.0));
    CHECK(std::abs(e.estimate - free) <= 3.0 * e.std_error + 1e-3 * free);
  }
  SUBCASE("large t dies out") {
    const auto e = estimate_killed_kernel(spec, 1.0, 20.0, point1(0.0), point1(0.0), 4000, 6);
    CHECK(e.estimate < 1e-3);
  }
  SUBCASE("near the boundary the killed kernel is below the free one") {
    const auto e = estimate_killed_kernel(spec, 1.0, 0.5, point1(0.9), point1(0.8), 20000, 7);
    const double free = eval_kernel(spec, 0.5, point1(0.1));
    CHECK(e.estimate + 3.0 * e.std_error < free);
  }
  CHECK_THROWS_AS(estimate_killed_kernel(spec, 1.0, 0.1, point1(1.5), point1(0.0), 100, 1), DomainError);
}

TEST_CASE("dirichlet comparison") {
  const StableKernelSpec spec(1.5, 1);
  std::vector<Point> xs{point1(-0.5), point1(0.0), point1(0.5)};
  const auto r = check_dirichlet_comparison(spec, 1.0, 0.25, std::pow(0.25, 1.5), xs, xs, 5000, 3);
  CHECK(r.positive);
  CHECK(r.c_hat <= 1.0 + 0.1);

  const std::vector<Point> origin{point1(0.0)};
  const auto small = check_dirichlet_comparison(spec, 1.0, 0.25, 1e-3, origin, origin, 5000, 4);
  CHECK(small.c_hat == doctest::Approx(1.0).epsilon(0.05));

  CHECK_THROWS_AS(check_dirichlet_comparison(spec, 1.0, 0.25, 0.2, xs, xs, 100, 1), HypothesisNotMet);
  CHECK_THROWS_AS(check_dirichlet_comparison(spec, 1.0, 0.0, 0.0, xs, xs, 100, 1), DomainError);
}

TEST_CASE("stable samplers") {
  Rng rng = make_stream(3, 0);
  // Gaussian case: characteristic function exp(-xi^2) is N(0, 2).
  double s2 = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double x = sample_symmetric_stable(2.0, rng);
    s2 += x * x;
  }
  CHECK(s2 / n == doctest::Approx(2.0).epsilon(0.02));
  // Empirical characteristic function at xi = 1 for alpha = 1.5.
  double c = 0.0;
  for (int i = 0; i < n; ++i) c += std::cos(sample_symmetric_stable(1.5, rng));
  CHECK(c / n == doctest::Approx(std::exp(-1.0)).epsilon(0.01));
  double c3 = 0.0;
  for (int i = 0; i < n; ++i) c3 += std::cos(sample_isotropic_stable(1.5, 3, rng)[0]);
  CHECK(c3 / n == doctest::Approx(std::exp(-1.0)).epsilon(0.01));
}
