#include "metaimpact/estimators.hpp"

namespace metaimpact::reference {

std::vector<double> sign_acf(std::span<const int> signs, std::size_t max_lag) {
  const std::size_t n = signs.size();
  double mean = 0.0;
  for (int s : signs) mean += s;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (int s : signs) var += (s - mean) * (s - mean);
  var /= static_cast<double>(n);
  std::vector<double> out(max_lag + 1);
  for (std::size_t lag = 0; lag <= max_lag; ++lag) {
    double c = 0.0;
    for (std::size_t i = 0; i + lag < n; ++i) c += (signs[i] - mean) * (signs[i + lag] - mean);
    out[lag] = c / static_cast<double>(n - lag) / var;
  }
  return out;
}

}  // namespace metaimpact::reference
