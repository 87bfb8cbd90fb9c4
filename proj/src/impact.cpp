#include "metaimpact/impact.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "metaimpact/decimal.hpp"
#include "metaimpact/error.hpp"

namespace metaimpact {

std::int64_t market_imbalance(const MarketIndex& index, TimeWindow w) { return index.signed_volume(w); }

namespace {

__extension__ typedef __int128 i128;

// Offsets into the child list for grid points j = 0..n-1: the first child
// with cum*(n-1) >= j*Q, evaluated exactly.
void quantile_children(const Tape& tape, std::span<const std::uint32_t> kids, std::int64_t q, std::size_t n_points,
                       std::vector<std::size_t>& out) {
  out.resize(n_points);
  const auto trades = tape.trades();
  std::size_t k = 0;
  i128 cum = trades[kids[0]].volume;
  const auto steps = static_cast<i128>(n_points - 1);
  for (std::size_t j = 0; j < n_points; ++j) {
    const i128 target = static_cast<i128>(j) * q;
    while (cum * steps < target && k + 1 < kids.size()) {
      ++k;
      cum += trades[kids[k]].volume;
    }
    out[j] = k;
  }
}

double signed_log_ratio(int sign, std::int64_t p, std::int64_t p0) {
  return static_cast<double>(sign) * std::log(static_cast<double>(p) / static_cast<double>(p0));
}

}  // namespace

std::vector<ImpactSample> impact_path(const Tape& tape, const MetaOrderSet& set, const MetaOrder& m,
                                      std::size_t n_points) {
  if (n_points < 2) throw ConfigError("impact_path needs at least 2 points");
  const auto kids = set.children(m);
  std::vector<std::size_t> at;
  quantile_children(tape, kids, m.volume, n_points, at);
  const Trade& first = tape[kids[0]];
  std::vector<ImpactSample> out(n_points);
  for (std::size_t j = 0; j < n_points; ++j) {
    const Trade& t = tape[kids[at[j]]];
    out[j].metaorder_id = m.id;
    out[j].r = static_cast<double>(j) / static_cast<double>(n_points - 1);
    out[j].impact = signed_log_ratio(m.sign, t.price, first.price);
    out[j].clock = static_cast<double>(t.timestamp - m.t_start) / static_cast<double>(kNanosPerSecond);
  }
  return out;
}

void ImpactConfig::validate() const {
  if (n_points < 2) throw ConfigError("n_points must be at least 2");
  if (!(perm_lo_mult >= 0.0) || !(perm_hi_mult > perm_lo_mult)) {
    throw ConfigError("permanent window needs 0 <= lo < hi");
  }
}

ImpactTable compute_impacts(const Tape& tape, const MarketIndex& index, const MetaOrderSet& set,
                            const ImpactConfig& cfg) {
  cfg.validate();
  const std::size_t n = set.size();
  const std::size_t np = cfg.n_points;
  ImpactTable table;
  table.n_points = np;
  table.summaries.resize(n);
  table.path_row.assign(n, ImpactTable::kZeroPath);
  std::size_t rows = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (set[i].n_children > 1) table.path_row[i] = static_cast<std::uint32_t>(rows++);
  }
  table.paths.assign(rows * np, 0.0);
  table.zero_path.assign(np, 0.0);
  table.q.resize(n);
  const std::int64_t last_time = index.last_time();

#pragma omp parallel
  {
    std::vector<std::size_t> at;
    std::vector<double> scratch(np);
#pragma omp for schedule(dynamic, 256)
    for (std::size_t i = 0; i < n; ++i) {
      const MetaOrder& m = set[i];
      const auto kids = set.children(m);
      quantile_children(tape, kids, m.volume, np, at);
      const std::int64_t p0 = tape[kids[0]].price;
      double* path = table.path_row[i] == ImpactTable::kZeroPath ? scratch.data()
                                                                  : table.paths.data() + table.path_row[i] * np;
      for (std::size_t j = 0; j < np; ++j) path[j] = signed_log_ratio(m.sign, tape[kids[at[j]]].price, p0);

      ImpactSummary& s = table.summaries[i];
      s.metaorder_id = m.id;
      s.peak = path[np - 1];
      double integral = 0.0;
      for (std::size_t j = 1; j < np; ++j) integral += 0.5 * (path[j - 1] + path[j]);
      s.exec = integral / static_cast<double>(np - 1);
      table.q[i] = set.q(m);

      if (m.has_duration()) {
        const auto dt = static_cast<double>(m.t_end - m.t_start);
        const TimeWindow w{m.t_end + std::llround(cfg.perm_lo_mult * dt), m.t_end + std::llround(cfg.perm_hi_mult * dt)};
        if (w.end <= last_time) {
          const auto [a, b] = index.range(w);
          double level;
          if (a < b) {
            level = index.notional_between(a, b) / tape.to_volume(index.volume_between(a, b));
          } else {
            level = tape.price(*index.last_at_or_before(w.end));
          }
          s.perm = static_cast<double>(m.sign) * std::log(level / tape.to_price(p0));
          s.perm_mech = s.peak - *s.perm;
        }
      }
    }
  }
  return table;
}

void LogBinning::validate() const {
  if (!(per_decade > 0.0)) throw ConfigError("bins per decade must be positive");
  if (n_min == 0) throw ConfigError("n_min must be positive");
}

int log_bin(double x, double per_decade) { return static_cast<int>(std::floor(per_decade * std::log10(x))); }

namespace {

struct BinAcc {
  std::size_t n = 0;
  double mean = 0.0;
  double m2 = 0.0;
  double sum_log_q = 0.0;

  void add(double q, double v) {
    ++n;
    const double d = v - mean;
    mean += d / static_cast<double>(n);
    m2 += d * (v - mean);
    sum_log_q += std::log(q);
  }
};

}  // namespace

PeakImpactCurve peak_impact_curve(const ImpactTable& table, const MetaOrderSet& set, const LogBinning& binning,
                                  bool include_in_trajectory) {
  binning.validate();
  std::map<int, BinAcc> bins;
  for (std::size_t i = 0; i < table.summaries.size(); ++i) {
    if (set[i].n_children < binning.min_children) continue;
    const double q = table.q[i];
    if (include_in_trajectory && set[i].has_duration()) {
      const auto path = table.path(i);
      for (std::size_t j = 1; j < table.n_points; ++j) {
        const double qr = q * table.r(j);
        bins[log_bin(qr, binning.per_decade)].add(qr, path[j]);
      }
    } else {
      bins[log_bin(q, binning.per_decade)].add(q, table.summaries[i].peak);
    }
  }
  PeakImpactCurve curve;
  curve.include_in_trajectory = include_in_trajectory;
  for (const auto& [b, acc] : bins) {
    if (acc.n < binning.n_min) {
      ++curve.n_bins_dropped;
      continue;
    }
    CurvePoint p;
    p.bin = b;
    p.q_lo = std::pow(10.0, b / binning.per_decade);
    p.q_hi = std::pow(10.0, (b + 1) / binning.per_decade);
    p.q_center = std::pow(10.0, (b + 0.5) / binning.per_decade);
    p.q_mean = std::exp(acc.sum_log_q / static_cast<double>(acc.n));
    p.mean = acc.mean;
    p.n = acc.n;
    p.stderr_ = acc.n > 1 ? std::sqrt(acc.m2 / static_cast<double>(acc.n - 1) / static_cast<double>(acc.n)) : 0.0;
    curve.points.push_back(p);
  }
  if (curve.points.empty()) throw DataError("peak impact curve: every bin has fewer than n_min metaorders");
  return curve;
}

std::optional<double> PeakImpactCurve::evaluate(double q) const {
  const CurvePoint* lo = nullptr;
  const CurvePoint* hi = nullptr;
  for (const CurvePoint& p : points) {
    if (!(p.mean > 0.0)) continue;
    if (p.q_mean <= q) lo = &p;
    if (p.q_mean >= q && hi == nullptr) hi = &p;
  }
  if (lo == nullptr || hi == nullptr) return std::nullopt;
  if (lo == hi || lo->q_mean == hi->q_mean) return lo->mean;
  const double w = std::log(q / lo->q_mean) / std::log(hi->q_mean / lo->q_mean);
  return std::exp(std::log(lo->mean) + w * (std::log(hi->mean) - std::log(lo->mean)));
}

TrajectoryComparison compare_trajectory(const ImpactTable& table, const MetaOrderSet& set, const PeakImpactCurve& curve,
                                        double r_min) {
  const std::size_t np = table.n_points;
  TrajectoryComparison out;
  out.r_min = r_min;
  out.r.resize(np);
  out.path_mean.assign(np, 0.0);
  out.curve_mean.assign(np, 0.0);
  out.n.assign(np, 0);
  for (std::size_t j = 0; j < np; ++j) out.r[j] = table.r(j);
  for (std::size_t i = 0; i < set.size(); ++i) {
    if (!set[i].has_duration()) continue;
    const auto path = table.path(i);
    for (std::size_t j = 1; j < np; ++j) {
      const auto c = curve.evaluate(out.r[j] * table.q[i]);
      if (!c) continue;
      out.path_mean[j] += path[j];
      out.curve_mean[j] += *c;
      ++out.n[j];
    }
  }
  for (std::size_t j = 0; j < np; ++j) {
    if (out.n[j] == 0) continue;
    out.path_mean[j] /= static_cast<double>(out.n[j]);
    out.curve_mean[j] /= static_cast<double>(out.n[j]);
    if (out.r[j] + 1e-12 >= r_min && out.curve_mean[j] != 0.0) {
      out.max_relative_deviation =
          std::max(out.max_relative_deviation, std::fabs(out.path_mean[j] / out.curve_mean[j] - 1.0));
    }
  }
  return out;
}

std::vector<DailyLiquidity> daily_liquidity_series(const ImpactTable& table, const MetaOrderSet& set,
                                                   std::span<const DailyAggregate> days) {
  struct Acc {
    double num = 0.0;
    double den = 0.0;
    std::size_t n = 0;
  };
  std::map<std::int64_t, Acc> by_day;
  for (std::size_t i = 0; i < set.size(); ++i) {
    const MetaOrder& m = set[i];
    if (m.n_children < 2) continue;
    const double q = table.q[i];
    Acc& a = by_day[day_of(m.t_end)];
    a.num += std::sqrt(q) * table.summaries[i].peak;
    a.den += q;
    ++a.n;
  }
  std::vector<DailyLiquidity> out;
  for (const DailyAggregate& d : days) {
    const auto it = by_day.find(d.day);
    if (it == by_day.end()) continue;
    DailyLiquidity row;
    row.day = d.day;
    row.y_tilde = it->second.num / it->second.den;
    row.sigma = d.sigma;
    row.v_d = scaled_to_double(d.volume, set.volume_exponent());
    row.n_metaorders = it->second.n;
    if (d.sigma > 0.0) row.y_ratio = row.y_tilde / (d.sigma / std::sqrt(row.v_d));
    out.push_back(row);
  }
  return out;
}

void SurfaceBinning::validate() const {
  if (!(q_per_decade > 0.0) || !(muv_per_decade > 0.0)) throw ConfigError("bins per decade must be positive");
  if (n_min == 0) throw ConfigError("n_min must be positive");
}

ImpactSurface impact_surface(const ImpactTable& table, const MetaOrderSet& set, const MarketIndex& index,
                             const SurfaceBinning& binning) {
  binning.validate();
  struct Acc {
    std::size_t n = 0;
    double exec = 0.0;
    std::int64_t imbalance = 0;
    double log_q = 0.0;
    double log_muv = 0.0;
  };
  std::map<std::pair<int, int>, Acc> cells;
  const double unit = pow10(set.volume_exponent());
  for (std::size_t i = 0; i < set.size(); ++i) {
    const MetaOrder& m = set[i];
    if (!m.has_duration()) continue;
    const double q = table.q[i];
    const int qb = log_bin(q, binning.q_per_decade);
    const int mb = static_cast<int>(std::ceil(binning.muv_per_decade * std::log10(m.mu_v)));
    Acc& a = cells[{qb, mb}];
    ++a.n;
    a.exec += table.summaries[i].exec;
    a.imbalance += m.sign * index.signed_volume({m.t_start, m.t_end});
    a.log_q += std::log(q);
    a.log_muv += std::log(m.mu_v);
  }
  ImpactSurface out;
  out.binning = binning;
  for (const auto& [key, a] : cells) {
    SurfaceCell c;
    c.q_bin = key.first;
    c.muv_bin = key.second;
    c.n = a.n;
    c.masked = a.n < binning.n_min;
    if (!c.masked) {
      const auto n = static_cast<double>(a.n);
      c.q_mean = std::exp(a.log_q / n);
      c.muv_mean = std::exp(a.log_muv / n);
      c.mean_exec = a.exec / n;
      c.mean_imbalance = static_cast<double>(a.imbalance) * unit / n;
    }
    out.n_contributing += a.n;
    out.cells.push_back(c);
  }
  return out;
}

std::optional<SurfaceCollapse> surface_collapse(const ImpactSurface& surface) {
  double num = 0.0;
  double den = 0.0;
  std::vector<std::pair<double, std::size_t>> ratios;
  for (const SurfaceCell& c : surface.cells) {
    if (c.masked || !(c.mean_imbalance > 0.0)) continue;
    const double r = c.mean_exec / std::sqrt(c.mean_imbalance);
    ratios.emplace_back(r, c.n);
    num += r * static_cast<double>(c.n);
    den += static_cast<double>(c.n);
  }
  if (ratios.empty()) return std::nullopt;
  SurfaceCollapse out;
  out.pooled = num / den;
  out.n_cells = ratios.size();
  for (const auto& [r, n] : ratios) {
    out.max_relative_deviation = std::max(out.max_relative_deviation, std::fabs(r / out.pooled - 1.0));
  }
  return out;
}

void IsolationConfig::validate() const {
  if (!(threshold >= 0.0) || !std::isfinite(threshold)) throw ConfigError("isolation threshold must be >= 0");
  if (!(horizon_mult > 0.0)) throw ConfigError("isolation horizon must be positive");
}

const char* to_string(IsolationLabel label) {
  switch (label) {
    case IsolationLabel::Isolated:
      return "isolated";
    case IsolationLabel::Informed:
      return "informed";
    case IsolationLabel::Excluded:
      break;
  }
  return "excluded";
}

Isolation select_isolated(const MetaOrderSet& set, const MarketIndex& index, const IsolationConfig& cfg) {
  cfg.validate();
  const std::size_t n = set.size();
  Isolation out;
  out.labels.assign(n, IsolationLabel::Excluded);
  out.ratio.assign(n, std::numeric_limits<double>::quiet_NaN());
  const std::int64_t last_time = index.last_time();
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < n; ++i) {
    const MetaOrder& m = set[i];
    if (!m.has_duration()) continue;
    const auto dt = static_cast<double>(m.t_end - m.t_start);
    const TimeWindow w{m.t_start, m.t_start + std::llround(cfg.horizon_mult * dt)};
    if (w.end > last_time) continue;
    const std::int64_t sv = m.sign * index.signed_volume(w);
    bool isolated = false;
    if (sv > 0) {
      out.ratio[i] = static_cast<double>(m.volume) / static_cast<double>(sv);
      isolated = out.ratio[i] >= cfg.threshold;
    }
    out.labels[i] = isolated ? IsolationLabel::Isolated : IsolationLabel::Informed;
  }
  for (IsolationLabel l : out.labels) {
    if (l == IsolationLabel::Isolated) ++out.n_isolated;
    else if (l == IsolationLabel::Informed) ++out.n_informed;
    else ++out.n_excluded;
  }
  return out;
}

}  // namespace metaimpact
