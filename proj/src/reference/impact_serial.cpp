#include <cmath>

#include "metaimpact/decimal.hpp"
#include "metaimpact/impact.hpp"

namespace metaimpact::reference {

std::int64_t market_imbalance(const Tape& tape, TimeWindow w) {
  std::int64_t sum = 0;
  for (const Trade& t : tape.trades()) {
    if (t.timestamp >= w.begin && t.timestamp <= w.end) sum += t.sign() * t.volume;
  }
  return sum;
}

std::vector<ImpactSample> impact_path(const Tape& tape, const MetaOrderSet& set, const MetaOrder& m,
                                      std::size_t n_points) {
  __extension__ typedef __int128 i128;
  const auto kids = set.children(m);
  const double p0 = static_cast<double>(tape[kids[0]].price);
  std::vector<ImpactSample> out;
  for (std::size_t j = 0; j < n_points; ++j) {
    // Rescan from the first child for every grid point.
    i128 cum = 0;
    std::size_t k = 0;
    for (; k < kids.size(); ++k) {
      cum += tape[kids[k]].volume;
      if (cum * static_cast<i128>(n_points - 1) >= static_cast<i128>(j) * m.volume) break;
    }
    if (k == kids.size()) k = kids.size() - 1;
    const Trade& t = tape[kids[k]];
    ImpactSample s;
    s.metaorder_id = m.id;
    s.r = static_cast<double>(j) / static_cast<double>(n_points - 1);
    s.impact = m.sign * std::log(static_cast<double>(t.price) / p0);
    s.clock = static_cast<double>(t.timestamp - m.t_start) / static_cast<double>(kNanosPerSecond);
    out.push_back(s);
  }
  return out;
}

ImpactTable compute_impacts(const Tape& tape, const MetaOrderSet& set, const ImpactConfig& cfg) {
  ImpactTable table;
  table.n_points = cfg.n_points;
  table.zero_path.assign(cfg.n_points, 0.0);
  const std::int64_t last_time = tape.empty() ? 0 : tape.trades().back().timestamp;
  for (const MetaOrder& m : set.orders()) {
    const auto path = reference::impact_path(tape, set, m, cfg.n_points);
    ImpactSummary s;
    s.metaorder_id = m.id;
    s.peak = path.back().impact;
    double area = 0.0;
    for (std::size_t j = 1; j < path.size(); ++j) {
      area += (path[j].r - path[j - 1].r) * 0.5 * (path[j].impact + path[j - 1].impact);
    }
    s.exec = area;
    if (m.has_duration()) {
      const auto dt = static_cast<double>(m.t_end - m.t_start);
      const std::int64_t lo = m.t_end + std::llround(cfg.perm_lo_mult * dt);
      const std::int64_t hi = m.t_end + std::llround(cfg.perm_hi_mult * dt);
      if (hi <= last_time) {
        double notional = 0.0;
        std::int64_t volume = 0;
        double last_price = 0.0;
        for (std::size_t i = 0; i < tape.size(); ++i) {
          const Trade& t = tape[i];
          if (t.timestamp > hi) break;
          last_price = tape.price(i);
          if (t.timestamp >= lo) {
            notional += tape.price(i) * tape.volume(i);
            volume += t.volume;
          }
        }
        const double level = volume > 0 ? notional / tape.to_volume(volume) : last_price;
        s.perm = m.sign * std::log(level / tape.to_price(tape[set.children(m)[0]].price));
        s.perm_mech = s.peak - *s.perm;
      }
    }
    table.summaries.push_back(s);
    table.q.push_back(set.q(m));
    if (m.n_children > 1) {
      table.path_row.push_back(static_cast<std::uint32_t>(table.paths.size() / table.n_points));
      for (const ImpactSample& p : path) table.paths.push_back(p.impact);
    } else {
      table.path_row.push_back(ImpactTable::kZeroPath);
    }
  }
  return table;
}

}  // namespace metaimpact::reference
