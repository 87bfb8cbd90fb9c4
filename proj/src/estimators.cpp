#include "metaimpact/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "metaimpact/error.hpp"
#include "metaimpact/parallel.hpp"

namespace metaimpact {

PowerLawFit fit_power_law(std::span<const FitPoint> points, double x_min, double x_max) {
  std::vector<FitPoint> use;
  for (const FitPoint& p : points) {
    if (p.x > 0.0 && p.y > 0.0 && p.weight > 0.0 && p.x >= x_min && p.x <= x_max && std::isfinite(p.y)) {
      use.push_back(p);
    }
  }
  if (use.size() < 3) throw DataError("power-law fit needs at least 3 points with positive x and y");
  double sw = 0.0, mx = 0.0, my = 0.0;
  for (const FitPoint& p : use) {
    sw += p.weight;
    mx += p.weight * std::log(p.x);
    my += p.weight * std::log(p.y);
  }
  mx /= sw;
  my /= sw;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (const FitPoint& p : use) {
    const double dx = std::log(p.x) - mx;
    const double dy = std::log(p.y) - my;
    sxx += p.weight * dx * dx;
    sxy += p.weight * dx * dy;
    syy += p.weight * dy * dy;
  }
  if (!(sxx > 0.0)) throw DataError("power-law fit: no variance in log x");
  PowerLawFit fit;
  fit.exponent = sxy / sxx;
  const double intercept = my - fit.exponent * mx;
  fit.prefactor = std::exp(intercept);
  double ssr = 0.0;
  for (const FitPoint& p : use) {
    const double r = std::log(p.y) - intercept - fit.exponent * std::log(p.x);
    ssr += p.weight * r * r;
  }
  const auto n = static_cast<double>(use.size());
  // Weights are treated as frequency-like: residual variance per unit weight.
  const double s2 = ssr / (n - 2.0) * n / sw;
  fit.exponent_stderr = std::sqrt(s2 / sxx);
  const double intercept_se = std::sqrt(s2 * (1.0 / sw + mx * mx / sxx));
  fit.prefactor_stderr = fit.prefactor * intercept_se;
  fit.r_squared = syy > 0.0 ? 1.0 - ssr / syy : 1.0;
  if (ssr <= 0.0) fit.r_squared = 1.0;
  fit.n_points = use.size();
  fit.x_min = std::numeric_limits<double>::infinity();
  fit.x_max = 0.0;
  for (const FitPoint& p : use) {
    fit.x_min = std::min(fit.x_min, p.x);
    fit.x_max = std::max(fit.x_max, p.x);
  }
  return fit;
}

BivariatePowerLawFit fit_bivariate_power_law(std::span<const BivariatePoint> points) {
  std::vector<BivariatePoint> use;
  for (const BivariatePoint& p : points) {
    if (p.x1 > 0.0 && p.x2 > 0.0 && p.y > 0.0 && p.weight > 0.0) use.push_back(p);
  }
  if (use.size() < 4) throw DataError("bivariate fit needs at least 4 points with positive values");
  double sw = 0.0, m1 = 0.0, m2 = 0.0, my = 0.0;
  for (const auto& p : use) {
    sw += p.weight;
    m1 += p.weight * std::log(p.x1);
    m2 += p.weight * std::log(p.x2);
    my += p.weight * std::log(p.y);
  }
  m1 /= sw;
  m2 /= sw;
  my /= sw;
  double s11 = 0, s22 = 0, s12 = 0, s1y = 0, s2y = 0, syy = 0;
  for (const auto& p : use) {
    const double a = std::log(p.x1) - m1, b = std::log(p.x2) - m2, c = std::log(p.y) - my;
    s11 += p.weight * a * a;
    s22 += p.weight * b * b;
    s12 += p.weight * a * b;
    s1y += p.weight * a * c;
    s2y += p.weight * b * c;
    syy += p.weight * c * c;
  }
  const double det = s11 * s22 - s12 * s12;
  if (!(det > 1e-12 * s11 * s22)) throw DataError("bivariate fit: regressors are collinear");
  BivariatePowerLawFit fit;
  fit.exponent1 = (s22 * s1y - s12 * s2y) / det;
  fit.exponent2 = (s11 * s2y - s12 * s1y) / det;
  fit.prefactor = std::exp(my - fit.exponent1 * m1 - fit.exponent2 * m2);
  double ssr = 0.0;
  for (const auto& p : use) {
    const double r = std::log(p.y) - my - fit.exponent1 * (std::log(p.x1) - m1) - fit.exponent2 * (std::log(p.x2) - m2);
    ssr += p.weight * r * r;
  }
  const auto n = static_cast<double>(use.size());
  const double s2 = n > 3.0 ? ssr / (n - 3.0) * n / sw : 0.0;
  fit.exponent1_stderr = std::sqrt(s2 * s22 / det);
  fit.exponent2_stderr = std::sqrt(s2 * s11 / det);
  fit.r_squared = syy > 0.0 ? 1.0 - ssr / syy : 1.0;
  fit.n_points = use.size();
  return fit;
}

TailFit hill_tail(std::span<const double> samples, double threshold) {
  if (!(threshold > 0.0)) throw ConfigError("Hill threshold must be positive");
  TailFit fit;
  fit.threshold = threshold;
  fit.n = samples.size();
  double sum = 0.0;
  for (double x : samples) {
    if (x > threshold) {
      ++fit.k;
      sum += std::log(x / threshold);
    }
  }
  if (fit.k < 10) throw DataError("Hill estimator needs at least 10 samples above the threshold");
  fit.hill_alpha = static_cast<double>(fit.k) / sum;
  return fit;
}

AcfFit sign_acf(std::span<const int> signs, std::size_t max_lag, std::size_t fit_lag_min, std::size_t fit_lag_max) {
  const std::size_t n = signs.size();
  if (n <= max_lag) throw DataError("sign ACF needs more signs than max_lag");
  if (fit_lag_min == 0 || fit_lag_max < fit_lag_min) throw ConfigError("ACF fit range must satisfy 1 <= min <= max");
  const double mean = parallel::blocked_reduce(
                          n, 0.0, [&](double& a, std::size_t i) { a += signs[i]; },
                          [](double& a, double b) { a += b; }) /
                      static_cast<double>(n);
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = signs[i] - mean;
  double var = 0.0;
  for (double v : x) var += v * v;
  var /= static_cast<double>(n);
  if (!(var > 0.0)) throw DataError("sign ACF undefined for a constant sequence");

  AcfFit fit;
  fit.n = n;
  fit.correlation.assign(max_lag + 1, 0.0);
  fit.correlation[0] = 1.0;
#pragma omp parallel for schedule(dynamic, 4)
  for (std::size_t lag = 1; lag <= max_lag; ++lag) {
    double c = 0.0;
    for (std::size_t t = 0; t + lag < n; ++t) c += x[t] * x[t + lag];
    fit.correlation[lag] = c / static_cast<double>(n - lag) / var;
  }

  fit.fit_lag_min = fit_lag_min;
  fit.fit_lag_max = std::min(fit_lag_max, max_lag);
  std::vector<FitPoint> pts;
  for (std::size_t lag = fit.fit_lag_min; lag <= fit.fit_lag_max; ++lag) {
    if (fit.correlation[lag] > 0.0) pts.push_back({static_cast<double>(lag), fit.correlation[lag], 1.0});
  }
  try {
    const PowerLawFit pl = fit_power_law(pts);
    fit.gamma = -pl.exponent;
    fit.gamma_stderr = pl.exponent_stderr;
    fit.prefactor = pl.prefactor;
  } catch (const DataError& e) {
    fit.fit_note = e.what();
  }
  return fit;
}

double normal_cdf(double x, double mean, double std) {
  if (std <= 0.0) return x < mean ? 0.0 : 1.0;
  return 0.5 * std::erfc(-(x - mean) / (std * std::sqrt(2.0)));
}

GaussianFit fit_gaussian(std::span<const double> samples) {
  const std::size_t n = samples.size();
  if (n < 2) throw DataError("Gaussian fit needs at least 2 samples");
  GaussianFit fit;
  fit.n = n;
  double sum = 0.0;
  for (double v : samples) sum += v;
  fit.mean = sum / static_cast<double>(n);
  double ss = 0.0;
  for (double v : samples) ss += (v - fit.mean) * (v - fit.mean);
  fit.std = std::sqrt(ss / static_cast<double>(n - 1));
  if (fit.std == 0.0) return fit;
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < n; ++i) {
    const double f = normal_cdf(sorted[i], fit.mean, fit.std);
    fit.ks = std::max({fit.ks, std::fabs(f - static_cast<double>(i) / static_cast<double>(n)),
                       std::fabs(static_cast<double>(i + 1) / static_cast<double>(n) - f)});
  }
  return fit;
}

}  // namespace metaimpact
