#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "metaimpact/segmenter.hpp"
#include "metaimpact/tape.hpp"

namespace metaimpact {

// Exact signed volume sum_i v_i*eps_i over trades in the closed window.
std::int64_t market_imbalance(const MarketIndex& index, TimeWindow w);

struct ImpactSample {
  std::uint64_t metaorder_id = 0;
  double r = 0.0;       // executed-volume fraction
  double impact = 0.0;  // s*log(p(r)/p_first)
  double clock = 0.0;   // seconds since t_start
};

// Samples at r_j = j/(n_points-1). The sample at r uses the price of the
// first child whose cumulative volume reaches r*|Q|.
std::vector<ImpactSample> impact_path(const Tape& tape, const MetaOrderSet& set, const MetaOrder& m,
                                      std::size_t n_points = 41);

struct ImpactConfig {
  std::size_t n_points = 41;
  // Permanent impact window [t_end + lo*T, t_end + hi*T].
  double perm_lo_mult = 9.0;
  double perm_hi_mult = 10.0;
  void validate() const;
};

struct ImpactSummary {
  std::uint64_t metaorder_id = 0;
  double peak = 0.0;                // impact at r = 1
  double exec = 0.0;                // trapezoidal integral of the path over r
  std::optional<double> perm;       // unset when T = 0 or the window is not covered by the tape
  std::optional<double> perm_mech;  // peak - perm
};

// Per-metaorder summaries plus the sampled paths (row-major, n_points per
// metaorder, in metaorder id order).
// A single-fill metaorder's path is identically zero, so rows are stored only
// for metaorders with at least two children.
struct ImpactTable {
  static constexpr std::uint32_t kZeroPath = std::numeric_limits<std::uint32_t>::max();

  std::size_t n_points = 41;
  std::vector<ImpactSummary> summaries;
  std::vector<std::uint32_t> path_row;  // row in paths, or kZeroPath
  std::vector<double> paths;
  std::vector<double> zero_path;  // n_points zeros
  std::vector<double> q;  // |Q| in volume units, aligned with summaries

  std::span<const double> path(std::size_t i) const {
    if (path_row[i] == kZeroPath) return zero_path;
    return std::span<const double>(paths).subspan(static_cast<std::size_t>(path_row[i]) * n_points, n_points);
  }
  double r(std::size_t j) const { return static_cast<double>(j) / static_cast<double>(n_points - 1); }
};

ImpactTable compute_impacts(const Tape& tape, const MarketIndex& index, const MetaOrderSet& set,
                            const ImpactConfig& cfg = {});

struct LogBinning {
  double per_decade = 8.0;
  std::size_t n_min = 50;
  // Metaorders with fewer children are left out of the curve.
  std::size_t min_children = 1;
  void validate() const;
};

// Bin index floor(per_decade*log10(x)).
int log_bin(double x, double per_decade);

struct CurvePoint {
  int bin = 0;
  double q_lo = 0.0;
  double q_hi = 0.0;
  double q_center = 0.0;  // geometric bin center
  double q_mean = 0.0;    // geometric mean of member volumes
  double mean = 0.0;
  double stderr_ = 0.0;
  std::size_t n = 0;
};

struct PeakImpactCurve {
  std::vector<CurvePoint> points;  // populated bins only, ascending
  bool include_in_trajectory = false;
  std::size_t n_bins_dropped = 0;

  // Log-log interpolation through (q_mean, mean) of bins with positive mean;
  // unset outside the covered range.
  std::optional<double> evaluate(double q) const;
};

// Peak impact per log-|Q| bin. With include_in_trajectory each path sample
// r > 0 of a T > 0 metaorder also enters at volume r*|Q|. Throws DataError
// when no bin reaches n_min.
PeakImpactCurve peak_impact_curve(const ImpactTable& table, const MetaOrderSet& set, const LogBinning& binning,
                                  bool include_in_trajectory);

// Mean path sample at each r against the mean of curve(r*|Q|) over the same
// metaorders (T > 0, curve defined at r*|Q|).
struct TrajectoryComparison {
  std::vector<double> r;
  std::vector<double> path_mean;
  std::vector<double> curve_mean;
  std::vector<std::size_t> n;
  double r_min = 0.1;
  double max_relative_deviation = 0.0;  // over r >= r_min with n > 0
};
TrajectoryComparison compare_trajectory(const ImpactTable& table, const MetaOrderSet& set, const PeakImpactCurve& curve,
                                        double r_min = 0.1);

struct DailyLiquidity {
  std::int64_t day = 0;
  double y_tilde = 0.0;
  double sigma = 0.0;
  double v_d = 0.0;  // volume units
  std::optional<double> y_ratio;
  std::size_t n_metaorders = 0;
};

// Metaorders with at least two children, assigned to the day they end.
// Y~_day = sum sqrt|Q| * I / sum |Q|; y_ratio = Y~ / (sigma_D / sqrt(V_D)).
std::vector<DailyLiquidity> daily_liquidity_series(const ImpactTable& table, const MetaOrderSet& set,
                                                   std::span<const DailyAggregate> days);

struct SurfaceBinning {
  double q_per_decade = 8.0;
  double muv_per_decade = 4.0;
  std::size_t n_min = 50;
  void validate() const;
};

struct SurfaceCell {
  int q_bin = 0;
  int muv_bin = 0;  // ceil(muv_per_decade*log10(mu_V))
  double q_mean = 0.0;    // geometric means of members
  double muv_mean = 0.0;
  double mean_exec = 0.0;
  double mean_imbalance = 0.0;  // mean s*V_signed over the execution window, volume units
  std::size_t n = 0;
  bool masked = false;
};

struct ImpactSurface {
  SurfaceBinning binning;
  std::vector<SurfaceCell> cells;  // ordered by (q_bin, muv_bin); masked cells have zero means
  std::size_t n_contributing = 0;
};

ImpactSurface impact_surface(const ImpactTable& table, const MetaOrderSet& set, const MarketIndex& index,
                             const SurfaceBinning& binning);

// Per-cell ratio mean_exec / sqrt(mean_imbalance) against the count-weighted
// pooled ratio, over unmasked cells with positive imbalance.
struct SurfaceCollapse {
  double pooled = 0.0;
  double max_relative_deviation = 0.0;
  std::size_t n_cells = 0;
};
std::optional<SurfaceCollapse> surface_collapse(const ImpactSurface& surface);

struct IsolationConfig {
  double threshold = 0.75;
  double horizon_mult = 10.0;
  void validate() const;
};

enum class IsolationLabel : std::uint8_t { Excluded = 0, Isolated = 1, Informed = 2 };
const char* to_string(IsolationLabel label);

struct Isolation {
  std::vector<IsolationLabel> labels;  // aligned with metaorder ids
  std::vector<double> ratio;           // s*Q / (s*V_window); NaN when not positive or excluded
  std::size_t n_isolated = 0;
  std::size_t n_informed = 0;
  std::size_t n_excluded = 0;
};

// Window [t_start, t_start + horizon_mult*T]. Metaorders with T = 0 or whose
// window runs past the last trade are excluded.
Isolation select_isolated(const MetaOrderSet& set, const MarketIndex& index, const IsolationConfig& cfg = {});

namespace reference {
std::int64_t market_imbalance(const Tape& tape, TimeWindow w);
std::vector<ImpactSample> impact_path(const Tape& tape, const MetaOrderSet& set, const MetaOrder& m,
                                      std::size_t n_points = 41);
ImpactTable compute_impacts(const Tape& tape, const MetaOrderSet& set, const ImpactConfig& cfg = {});
}  // namespace reference

}  // namespace metaimpact
