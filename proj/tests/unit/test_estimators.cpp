#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "metaimpact/error.hpp"
#include "metaimpact/estimators.hpp"
#include "metaimpact/parallel.hpp"

using namespace metaimpact;

namespace {

std::vector<FitPoint> law(double c, double delta, std::size_t n, double lo = 0.1, double hi = 1000.0) {
  std::vector<FitPoint> pts;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = lo * std::pow(hi / lo, static_cast<double>(i) / static_cast<double>(n - 1));
    pts.push_back({x, c * std::pow(x, delta), 1.0});
  }
  return pts;
}

std::vector<int> random_signs(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<int> s(n);
  for (int& x : s) x = rng() % 2 ? 1 : -1;
  return s;
}

}  // namespace

TEST_SUITE("power law") {
  TEST_CASE("points on y = 2 x^0.5") {
    const PowerLawFit f = fit_power_law(law(2.0, 0.5, 20));
    CHECK(f.exponent == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(f.prefactor == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(f.r_squared == doctest::Approx(1.0));
    CHECK(f.n_points == 20);
  }

  TEST_CASE("constant y gives a flat exponent") {
    const PowerLawFit f = fit_power_law(law(3.0, 0.0, 10));
    CHECK(f.exponent == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
    CHECK(f.prefactor == doctest::Approx(3.0));
  }

  TEST_CASE("noisy square root") {
    std::mt19937_64 rng(17);
    std::normal_distribution<double> noise(0.0, 0.1);
    std::vector<FitPoint> pts = law(0.045, 0.5, 1000);
    for (FitPoint& p : pts) p.y *= 1.0 + noise(rng);
    const PowerLawFit f = fit_power_law(pts);
    CHECK(f.exponent > 0.47);
    CHECK(f.exponent < 0.53);
    CHECK(f.exponent_stderr > 0.0);
    CHECK(f.prefactor_stderr > 0.0);
  }

  TEST_CASE("range restriction and invalid points") {
    std::vector<FitPoint> pts = law(1.0, 1.0, 30);
    pts.push_back({-1.0, 1.0, 1.0});
    pts.push_back({1.0, 0.0, 1.0});
    const PowerLawFit f = fit_power_law(pts, 1.0, 100.0);
    CHECK(f.x_min >= 1.0);
    CHECK(f.x_max <= 100.0);
    CHECK(f.exponent == doctest::Approx(1.0));
  }

  TEST_CASE("errors") {
    CHECK_THROWS_AS(fit_power_law(law(1.0, 1.0, 2)), DataError);
    std::vector<FitPoint> same{{2, 1, 1}, {2, 2, 1}, {2, 3, 1}};
    CHECK_THROWS_AS(fit_power_law(same), DataError);
  }

  TEST_CASE("scaling x and y is exactly equivariant") {
    std::mt19937_64 rng(3);
    std::lognormal_distribution<double> noise(0.0, 0.2);
    std::vector<FitPoint> pts = law(0.7, 0.6, 40);
    for (FitPoint& p : pts) {
      p.y *= noise(rng);
      p.weight = 1.0 + static_cast<double>(rng() % 10);
    }
    const PowerLawFit base = fit_power_law(pts);
    const double a = 7.5, b = 0.01;
    std::vector<FitPoint> scaled = pts;
    for (FitPoint& p : scaled) {
      p.x *= a;
      p.y *= b;
    }
    const PowerLawFit f = fit_power_law(scaled);
    CHECK(f.exponent == doctest::Approx(base.exponent).epsilon(1e-10));
    CHECK(f.prefactor == doctest::Approx(base.prefactor * b / std::pow(a, base.exponent)).epsilon(1e-10));
  }

  TEST_CASE("bivariate recovers both exponents") {
    std::vector<BivariatePoint> pts;
    for (int i = 0; i < 8; ++i) {
      for (int j = 0; j < 5; ++j) {
        const double x1 = std::pow(10.0, i * 0.4), x2 = std::pow(10.0, -j * 0.3);
        pts.push_back({x1, x2, 0.3 * std::pow(x1, 0.5) * std::pow(x2, -0.4), 1.0});
      }
    }
    const BivariatePowerLawFit f = fit_bivariate_power_law(pts);
    CHECK(f.exponent1 == doctest::Approx(0.5));
    CHECK(f.exponent2 == doctest::Approx(-0.4));
    CHECK(f.prefactor == doctest::Approx(0.3));
    std::vector<BivariatePoint> line;
    for (int i = 1; i < 6; ++i) line.push_back({double(i), double(i), 1.0, 1.0});
    CHECK_THROWS_AS(fit_bivariate_power_law(line), DataError);
  }
}

TEST_SUITE("hill") {
  TEST_CASE("samples at twice the threshold") {
    const std::vector<double> x(20, 2.0);
    const TailFit f = hill_tail(x, 1.0);
    CHECK(f.hill_alpha == doctest::Approx(1.0 / std::log(2.0)));
    CHECK(f.k == 20);
  }

  TEST_CASE("too few exceedances") {
    const std::vector<double> x(9, 5.0);
    CHECK_THROWS_AS(hill_tail(x, 1.0), DataError);
  }

  TEST_CASE("invariant under common rescaling") {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> x(5000), y(5000);
    for (std::size_t i = 0; i < x.size(); ++i) {
      x[i] = std::pow(1.0 - u(rng), -1.0 / 1.2);
      y[i] = 3.5 * x[i];
    }
    CHECK(hill_tail(x, 2.0).hill_alpha == doctest::Approx(hill_tail(y, 7.0).hill_alpha).epsilon(1e-10));
  }

  TEST_CASE("Pareto index 1 (pdf exponent -2)") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> x(200000);
    for (double& v : x) v = 10.0 / (1.0 - u(rng));
    CHECK(hill_tail(x, 10.0).hill_alpha == doctest::Approx(1.0).epsilon(0.02));
  }

  TEST_CASE("Pareto 1.5 within 0.05 at 1e5 draws") {
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> x(100000);
    for (double& v : x) v = std::pow(1.0 - u(rng), -1.0 / 1.5);
    CHECK(std::fabs(hill_tail(x, 1.0).hill_alpha - 1.5) < 0.05);
  }
}

TEST_SUITE("sign acf") {
  TEST_CASE("alternating signs") {
    std::vector<int> s(1000);
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = i % 2 ? -1 : 1;
    const AcfFit f = sign_acf(s, 10);
    CHECK(f.correlation[0] == 1.0);
    CHECK(f.correlation[1] == doctest::Approx(-1.0));
    CHECK(f.correlation[2] == doctest::Approx(1.0));
    // Only even lags are positive, and they do not decay.
    REQUIRE(f.gamma.has_value());
    CHECK(*f.gamma == doctest::Approx(0.0).scale(1.0).epsilon(1e-9));
  }

  TEST_CASE("independent signs stay inside the sampling band") {
    const std::size_t n = 100000;
    const AcfFit f = sign_acf(random_signs(n, 8), 50);
    for (std::size_t l = 1; l <= 50; ++l) CHECK(std::fabs(f.correlation[l]) < 3.0 / std::sqrt(double(n)));
  }

  TEST_CASE("equals the direct double sum to 1e-12") {
    const auto s = random_signs(1000, 9);
    const AcfFit f = sign_acf(s, 100);
    const auto ref = reference::sign_acf(s, 100);
    // Textbook definition, written out independently of both.
    double mean = 0.0;
    for (int v : s) mean += v;
    mean /= double(s.size());
    double var = 0.0;
    for (int v : s) var += (v - mean) * (v - mean);
    var /= double(s.size());
    for (std::size_t l = 0; l <= 100; ++l) {
      double c = 0.0;
      for (std::size_t t = 0; t + l < s.size(); ++t) c += (s[t] - mean) * (s[t + l] - mean);
      c /= double(s.size() - l);
      CHECK(std::fabs(f.correlation[l] - c / var) < 1e-12);
      CHECK(std::fabs(f.correlation[l] - ref[l]) < 1e-12);
    }
  }

  TEST_CASE("global sign flip leaves the ACF unchanged") {
    auto s = random_signs(5000, 10);
    const AcfFit a = sign_acf(s, 30);
    for (int& v : s) v = -v;
    const AcfFit b = sign_acf(s, 30);
    for (std::size_t l = 0; l <= 30; ++l) CHECK(a.correlation[l] == doctest::Approx(b.correlation[l]).epsilon(1e-14));
  }

  TEST_CASE("errors") {
    const std::vector<int> constant(100, 1);
    CHECK_THROWS_AS(sign_acf(constant, 10), DataError);
    CHECK_THROWS_AS(sign_acf(random_signs(10, 1), 10), DataError);
  }

  TEST_CASE("worker count does not change the ACF") {
    const auto s = random_signs(20000, 12);
    parallel::set_workers(1);
    const AcfFit a = sign_acf(s, 200);
    parallel::set_workers(8);
    const AcfFit b = sign_acf(s, 200);
    parallel::set_workers(0);
    CHECK(a.correlation == b.correlation);
  }
}

TEST_SUITE("gaussian") {
  TEST_CASE("closed forms") {
    const std::vector<double> zeros{0.0, 0.0};
    const GaussianFit z = fit_gaussian(zeros);
    CHECK(z.mean == 0.0);
    CHECK(z.std == 0.0);
    const std::vector<double> pm{-1.0, 1.0};
    const GaussianFit g = fit_gaussian(pm);
    CHECK(g.mean == 0.0);
    CHECK(g.std == doctest::Approx(std::sqrt(2.0)));
    const std::vector<double> one{1.0};
    CHECK_THROWS_AS(fit_gaussian(one), DataError);
  }

  TEST_CASE("normal cdf") {
    CHECK(normal_cdf(0.9, 0.9, 0.35) == doctest::Approx(0.5));
    CHECK(normal_cdf(1.96, 0.0, 1.0) == doctest::Approx(0.9750021).epsilon(1e-6));
  }

  TEST_CASE("1e4 normal draws") {
    std::mt19937_64 rng(13);
    std::normal_distribution<double> d(0.9, 0.35);
    std::vector<double> x(10000);
    for (double& v : x) v = d(rng);
    const GaussianFit g = fit_gaussian(x);
    CHECK(std::fabs(g.mean - 0.9) < 0.01);
    CHECK(std::fabs(g.std - 0.35) < 0.01);
    CHECK(g.ks < 0.02);
  }

  TEST_CASE("KS flags a non-normal sample") {
    std::mt19937_64 rng(14);
    std::exponential_distribution<double> d(1.0);
    std::vector<double> x(10000);
    for (double& v : x) v = d(rng);
    CHECK(fit_gaussian(x).ks > 0.05);
  }
}
