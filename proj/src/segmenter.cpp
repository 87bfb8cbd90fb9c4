#include "metaimpact/segmenter.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "metaimpact/decimal.hpp"
#include "metaimpact/error.hpp"
#include "metaimpact/parallel.hpp"

namespace metaimpact {

void SegmentationConfig::validate() const {
  if (!(t_inact_seconds > 0.0) || !std::isfinite(t_inact_seconds)) {
    throw ConfigError("t_inact must be positive");
  }
}

std::int64_t SegmentationConfig::t_inact_ns() const {
  return static_cast<std::int64_t>(std::llround(t_inact_seconds * static_cast<double>(kNanosPerSecond)));
}

double MetaOrderSet::q(const MetaOrder& m) const { return scaled_to_double(m.volume, volume_exponent_); }

namespace {

// A metaorder under construction: a contiguous run [begin, end) of one
// trader's aggressive trades in the per-trader ordering.
struct Draft {
  std::size_t begin = 0;
  std::size_t end = 0;
  int sign = 1;
  std::int64_t volume = 0;
  bool by_reversal = false;
  bool dropped = false;
};

struct TraderScan {
  std::vector<Draft> drafts;
  std::size_t unassigned = 0;
};

TraderScan scan_trader(const Tape& tape, std::span<const std::uint32_t> idx, const SegmentationConfig& cfg,
                       std::int64_t t_inact) {
  TraderScan out;
  const auto trades = tape.trades();
  bool open = false;
  bool suspended = false;
  Draft cur;
  std::int64_t last_ts = 0;

  auto close = [&](std::size_t end) {
    cur.end = end;
    cur.volume = 0;
    for (std::size_t p = cur.begin; p < cur.end; ++p) cur.volume += trades[idx[p]].volume;
    if (cfg.drop_mean_reverting && cur.by_reversal && !out.drafts.empty()) {
      const Draft& prev = out.drafts.back();
      const std::int64_t prev_end = trades[idx[prev.end - 1]].timestamp;
      const std::int64_t this_end = trades[idx[cur.end - 1]].timestamp;
      if (this_end - prev_end < t_inact && cur.volume <= prev.volume) {
        cur.dropped = true;
        out.unassigned += cur.end - cur.begin;
      }
    }
    out.drafts.push_back(cur);
    open = false;
  };
  auto start = [&](std::size_t pos, int sign, bool by_reversal) {
    cur = Draft{};
    cur.begin = pos;
    cur.sign = sign;
    cur.by_reversal = by_reversal;
    open = true;
  };

  for (std::size_t pos = 0; pos < idx.size(); ++pos) {
    const Trade& t = trades[idx[pos]];
    const int sign = t.sign();
    if (pos == 0) {
      start(pos, sign, false);
    } else if (t.timestamp - last_ts >= t_inact) {
      if (open) close(pos);
      suspended = false;
      start(pos, sign, false);
    } else if (suspended) {
      ++out.unassigned;
    } else if (sign != cur.sign) {
      close(pos);
      if (cfg.reversal_starts_new) {
        start(pos, sign, true);
      } else {
        suspended = true;
        ++out.unassigned;
      }
    }
    last_ts = t.timestamp;
  }
  if (open) close(idx.size());
  return out;
}

}  // namespace

Segmentation segment(const Tape& tape, const MarketIndex& index, const SegmentationConfig& cfg) {
  cfg.validate();
  if (tape.size() >= std::numeric_limits<std::uint32_t>::max()) throw DataError("tape too large");
  const std::int64_t t_inact = cfg.t_inact_ns();
  const auto trades = tape.trades();
  const std::size_t n = trades.size();

  // Group trade indices by aggressor, preserving tape order within a trader.
  std::vector<std::uint64_t> keys(n);
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < n; ++i) {
    keys[i] = (static_cast<std::uint64_t>(trades[i].aggressor_id) << 32) | static_cast<std::uint64_t>(i);
  }
  std::sort(keys.begin(), keys.end());
  std::vector<std::uint32_t> order(n);
  std::vector<std::size_t> group_start;
  for (std::size_t i = 0; i < n; ++i) {
    order[i] = static_cast<std::uint32_t>(keys[i] & 0xFFFFFFFFu);
    if (i == 0 || (keys[i] >> 32) != (keys[i - 1] >> 32)) group_start.push_back(i);
  }
  group_start.push_back(n);
  std::vector<std::uint64_t>().swap(keys);

  const std::size_t n_groups = group_start.size() - 1;
  std::vector<TraderScan> scans(n_groups);
#pragma omp parallel for schedule(dynamic, 64)
  for (std::size_t g = 0; g < n_groups; ++g) {
    const auto idx = std::span<const std::uint32_t>(order).subspan(group_start[g], group_start[g + 1] - group_start[g]);
    scans[g] = scan_trader(tape, idx, cfg, t_inact);
  }

  struct Kept {
    std::int64_t t_start;
    std::uint32_t first_trade;
    std::size_t group;
    std::size_t draft;
  };
  std::vector<Kept> kept;
  Segmentation result;
  result.aggressive_trades = n;
  for (std::size_t g = 0; g < n_groups; ++g) {
    result.unassigned_trades += scans[g].unassigned;
    for (std::size_t d = 0; d < scans[g].drafts.size(); ++d) {
      const Draft& dr = scans[g].drafts[d];
      if (dr.dropped) continue;
      const std::uint32_t first = order[group_start[g] + dr.begin];
      kept.push_back({trades[first].timestamp, first, g, d});
    }
  }
  std::sort(kept.begin(), kept.end(), [](const Kept& a, const Kept& b) {
    return a.t_start != b.t_start ? a.t_start < b.t_start : a.first_trade < b.first_trade;
  });

  std::vector<MetaOrder> orders(kept.size());
  std::size_t total_children = 0;
  for (std::size_t k = 0; k < kept.size(); ++k) {
    const Draft& dr = scans[kept[k].group].drafts[kept[k].draft];
    orders[k].first_child = static_cast<std::uint32_t>(total_children);
    orders[k].n_children = static_cast<std::uint32_t>(dr.end - dr.begin);
    total_children += dr.end - dr.begin;
  }
  std::vector<std::uint32_t> children(total_children);
  const double vol_unit = pow10(tape.metadata().volume_exponent);

#pragma omp parallel for schedule(static)
  for (std::size_t k = 0; k < kept.size(); ++k) {
    const Draft& dr = scans[kept[k].group].drafts[kept[k].draft];
    const std::size_t base = group_start[kept[k].group];
    MetaOrder& m = orders[k];
    std::copy(order.begin() + static_cast<std::ptrdiff_t>(base + dr.begin),
              order.begin() + static_cast<std::ptrdiff_t>(base + dr.end), children.begin() + m.first_child);
    const Trade& first = trades[children[m.first_child]];
    const Trade& last = trades[children[m.first_child + m.n_children - 1]];
    m.id = k;
    m.trader_id = first.aggressor_id;
    m.sign = dr.sign;
    m.volume = dr.volume;
    m.t_start = first.timestamp;
    m.t_end = last.timestamp;
    m.duration = static_cast<double>(m.t_end - m.t_start) / static_cast<double>(kNanosPerSecond);
    if (m.duration > 0.0) m.mu = static_cast<double>(m.volume) * vol_unit / m.duration;
    m.market_volume = index.volume({m.t_start, m.t_end});
    m.mu_v = static_cast<double>(m.volume) / static_cast<double>(m.market_volume);
  }
  result.metaorders = MetaOrderSet(std::move(orders), std::move(children), tape.metadata().volume_exponent);
  return result;
}

ChildCountTable child_count_table(const MetaOrderSet& metaorders) {
  if (metaorders.empty()) throw DataError("child_count_table: no metaorders");
  ChildCountTable table;
  for (const MetaOrder& m : metaorders.orders()) {
    const std::size_t bucket = m.n_children == 1 ? 0 : m.n_children <= 4 ? 1 : m.n_children <= 9 ? 2 : 3;
    ++table.counts[bucket];
  }
  for (std::size_t b = 0; b < 4; ++b) {
    table.fractions[b] = static_cast<double>(table.counts[b]) / static_cast<double>(metaorders.size());
  }
  return table;
}

std::vector<ActivePoint> active_metaorder_series(const MetaOrderSet& metaorders, double resolution_seconds,
                                                 std::optional<TimeWindow> window) {
  if (!(resolution_seconds > 0.0)) throw ConfigError("resolution must be positive");
  const auto res = static_cast<std::int64_t>(std::llround(resolution_seconds * static_cast<double>(kNanosPerSecond)));
  if (res <= 0) throw ConfigError("resolution below 1 ns");
  if (metaorders.empty() && !window) return {};
  TimeWindow w;
  if (window) {
    w = *window;
  } else {
    w.begin = metaorders[0].t_start;
    w.end = w.begin;
    for (const MetaOrder& m : metaorders.orders()) w.end = std::max(w.end, m.t_end);
  }
  if (w.end < w.begin) return {};
  const std::size_t n_grid = static_cast<std::size_t>((w.end - w.begin) / res) + 1;

  // Difference arrays over grid indices; exact integer accumulation.
  std::vector<std::int64_t> d_buy(n_grid + 1, 0), d_sell(n_grid + 1, 0), dv_buy(n_grid + 1, 0), dv_sell(n_grid + 1, 0);
  auto floor_div = [](std::int64_t a, std::int64_t b) { return a >= 0 ? a / b : -((-a + b - 1) / b); };
  for (const MetaOrder& m : metaorders.orders()) {
    // First grid index with time >= t_start and last with time <= t_end.
    std::int64_t lo = -floor_div(-(m.t_start - w.begin), res);
    std::int64_t hi = floor_div(m.t_end - w.begin, res);
    lo = std::max<std::int64_t>(lo, 0);
    hi = std::min<std::int64_t>(hi, static_cast<std::int64_t>(n_grid) - 1);
    if (lo > hi) continue;
    auto& dc = m.sign > 0 ? d_buy : d_sell;
    auto& dv = m.sign > 0 ? dv_buy : dv_sell;
    dc[static_cast<std::size_t>(lo)] += 1;
    dc[static_cast<std::size_t>(hi) + 1] -= 1;
    dv[static_cast<std::size_t>(lo)] += m.volume;
    dv[static_cast<std::size_t>(hi) + 1] -= m.volume;
  }
  std::vector<ActivePoint> out(n_grid);
  std::int64_t nb = 0, ns = 0, vb = 0, vs = 0;
  for (std::size_t k = 0; k < n_grid; ++k) {
    nb += d_buy[k];
    ns += d_sell[k];
    vb += dv_buy[k];
    vs += dv_sell[k];
    out[k] = {w.begin + static_cast<std::int64_t>(k) * res, static_cast<std::size_t>(nb), static_cast<std::size_t>(ns),
              vb, vs};
  }
  return out;
}

ExecutionProfile execution_profile(const Tape& tape, const MetaOrderSet& metaorders, std::size_t n_points) {
  if (n_points < 2) throw ConfigError("execution_profile needs at least 2 grid points");
  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < metaorders.size(); ++i) {
    const MetaOrder& m = metaorders[i];
    if (m.has_duration() && m.n_children >= 2) eligible.push_back(i);
  }
  if (eligible.empty()) throw DataError("execution_profile: no metaorder with T > 0 and at least 2 children");

  struct Acc {
    std::vector<double> sum;
  };
  const Acc init{std::vector<double>(n_points, 0.0)};
  const auto trades = tape.trades();
  Acc total = parallel::blocked_reduce(
      eligible.size(), init,
      [&](Acc& acc, std::size_t e) {
        const MetaOrder& m = metaorders[eligible[e]];
        const auto kids = metaorders.children(m);
        const double T = static_cast<double>(m.t_end - m.t_start);
        const std::int64_t first_vol = trades[kids[0]].volume;
        const double rest = static_cast<double>(m.volume - first_vol);
        std::size_t k = 0;  // segment [k, k+1] of the fill points
        std::int64_t cum_k = 0, cum_next = trades[kids[1]].volume;
        for (std::size_t g = 0; g < n_points; ++g) {
          const double u = static_cast<double>(g) / static_cast<double>(n_points - 1);
          while (k + 2 < kids.size() && static_cast<double>(trades[kids[k + 1]].timestamp - m.t_start) / T < u) {
            ++k;
            cum_k = cum_next;
            cum_next += trades[kids[k + 1]].volume;
          }
          const double u0 = static_cast<double>(trades[kids[k]].timestamp - m.t_start) / T;
          const double u1 = static_cast<double>(trades[kids[k + 1]].timestamp - m.t_start) / T;
          const double f0 = static_cast<double>(cum_k) / rest;
          const double f1 = static_cast<double>(cum_next) / rest;
          const double f = u1 > u0 ? f0 + (f1 - f0) * std::clamp((u - u0) / (u1 - u0), 0.0, 1.0) : f1;
          acc.sum[g] += f;
        }
      },
      [](Acc& a, const Acc& b) {
        for (std::size_t g = 0; g < a.sum.size(); ++g) a.sum[g] += b.sum[g];
      });

  ExecutionProfile out;
  out.n_metaorders = eligible.size();
  out.grid.resize(n_points);
  out.mean.resize(n_points);
  for (std::size_t g = 0; g < n_points; ++g) {
    out.grid[g] = static_cast<double>(g) / static_cast<double>(n_points - 1);
    out.mean[g] = total.sum[g] / static_cast<double>(eligible.size());
    out.max_deviation = std::max(out.max_deviation, std::fabs(out.mean[g] - out.grid[g]));
  }
  return out;
}

}  // namespace metaimpact
