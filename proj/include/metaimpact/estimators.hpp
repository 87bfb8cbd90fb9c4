#pragma once

#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace metaimpact {

struct FitPoint {
  double x = 0.0;
  double y = 0.0;
  double weight = 1.0;
};

struct PowerLawFit {
  double exponent = 0.0;
  double prefactor = 0.0;
  double exponent_stderr = 0.0;
  double prefactor_stderr = 0.0;
  double r_squared = 0.0;
  double x_min = 0.0;  // fit range actually used
  double x_max = 0.0;
  std::size_t n_points = 0;
};

// Weighted least squares of log y on log x over points with x, y > 0 and
// x in [x_min, x_max]. Throws DataError with fewer than 3 usable points or
// no spread in log x.
PowerLawFit fit_power_law(std::span<const FitPoint> points, double x_min = 0.0,
                          double x_max = std::numeric_limits<double>::infinity());

struct BivariatePoint {
  double x1 = 0.0;
  double x2 = 0.0;
  double y = 0.0;
  double weight = 1.0;
};

// y = c * x1^a1 * x2^a2 by weighted least squares in log space.
struct BivariatePowerLawFit {
  double prefactor = 0.0;
  double exponent1 = 0.0;
  double exponent2 = 0.0;
  double exponent1_stderr = 0.0;
  double exponent2_stderr = 0.0;
  double r_squared = 0.0;
  std::size_t n_points = 0;
};
BivariatePowerLawFit fit_bivariate_power_law(std::span<const BivariatePoint> points);

struct TailFit {
  double hill_alpha = 0.0;  // complementary-CDF tail index
  std::size_t k = 0;        // exceedances used
  std::size_t n = 0;
  double threshold = 0.0;
};

// alpha = k / sum log(x_i / threshold) over the k samples above threshold.
TailFit hill_tail(std::span<const double> samples, double threshold);

struct AcfFit {
  std::vector<double> correlation;  // index = lag, correlation[0] = 1
  std::optional<double> gamma;      // C(l) ~ l^-gamma
  std::optional<double> prefactor;
  std::optional<double> gamma_stderr;
  std::size_t fit_lag_min = 1;
  std::size_t fit_lag_max = 100;
  std::size_t n = 0;
  std::string fit_note;  // why gamma is unset, if it is
};

// C(l) = [(1/(n-l)) sum_t (x_t - m)(x_{t+l} - m)] / [(1/n) sum_t (x_t - m)^2].
// The power law is fitted on lags in the fit range with C(l) > 0.
AcfFit sign_acf(std::span<const int> signs, std::size_t max_lag, std::size_t fit_lag_min = 1,
                std::size_t fit_lag_max = 100);

struct GaussianFit {
  double mean = 0.0;
  double std = 0.0;  // unbiased (n-1)
  double ks = 0.0;   // sup |F_n - Phi|
  std::size_t n = 0;
};
GaussianFit fit_gaussian(std::span<const double> samples);

double normal_cdf(double x, double mean, double std);

namespace reference {
// Direct double sum for every lag.
std::vector<double> sign_acf(std::span<const int> signs, std::size_t max_lag);
}  // namespace reference

}  // namespace metaimpact
