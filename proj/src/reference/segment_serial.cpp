#include <algorithm>
#include <map>

#include "metaimpact/decimal.hpp"
#include "metaimpact/segmenter.hpp"

namespace metaimpact::reference {

namespace {

struct Run {
  std::vector<std::uint32_t> trades;
  int sign = 1;
  std::int64_t volume = 0;
  bool by_reversal = false;
};

}  // namespace

Segmentation segment(const Tape& tape, const MarketIndex& index, const SegmentationConfig& cfg) {
  cfg.validate();
  const std::int64_t t_inact = cfg.t_inact_ns();
  std::map<TraderId, std::vector<std::uint32_t>> by_trader;
  for (std::size_t i = 0; i < tape.size(); ++i) by_trader[tape[i].aggressor_id].push_back(static_cast<std::uint32_t>(i));

  Segmentation out;
  out.aggressive_trades = tape.size();
  std::vector<Run> kept;
  for (const auto& [trader, idx] : by_trader) {
    std::vector<Run> runs;
    std::vector<bool> dropped;
    Run cur;
    bool in_run = false;
    bool waiting_for_gap = false;
    for (std::size_t p = 0; p < idx.size(); ++p) {
      const Trade& t = tape[idx[p]];
      const bool gap = p > 0 && t.timestamp - tape[idx[p - 1]].timestamp >= t_inact;
      bool begin_new = false;
      bool reversal = false;
      if (p == 0 || gap) {
        waiting_for_gap = false;
        begin_new = true;
      } else if (waiting_for_gap) {
        ++out.unassigned_trades;
        continue;
      } else if (t.sign() != cur.sign) {
        reversal = true;
        begin_new = true;
      }
      if (begin_new) {
        if (in_run) {
          runs.push_back(cur);
          in_run = false;
        }
        if (reversal && !cfg.reversal_starts_new) {
          waiting_for_gap = true;
          ++out.unassigned_trades;
          continue;
        }
        cur = Run{};
        cur.sign = t.sign();
        cur.by_reversal = reversal;
        in_run = true;
      }
      cur.trades.push_back(idx[p]);
      cur.volume += t.volume;
    }
    if (in_run) runs.push_back(cur);

    std::int64_t end_prev = 0;
    std::int64_t volume_prev = 0;
    for (std::size_t r = 0; r < runs.size(); ++r) {
      const std::int64_t end_this = tape[runs[r].trades.back()].timestamp;
      const std::int64_t volume_this = runs[r].volume;
      bool drop = false;
      if (cfg.drop_mean_reverting && runs[r].by_reversal && r > 0) {
        drop = end_this - end_prev < t_inact && volume_this <= volume_prev;
      }
      end_prev = end_this;
      volume_prev = volume_this;
      if (drop) {
        out.unassigned_trades += runs[r].trades.size();
      } else {
        kept.push_back(std::move(runs[r]));
      }
    }
  }

  std::sort(kept.begin(), kept.end(), [&](const Run& a, const Run& b) {
    const std::int64_t ta = tape[a.trades.front()].timestamp;
    const std::int64_t tb = tape[b.trades.front()].timestamp;
    return ta != tb ? ta < tb : a.trades.front() < b.trades.front();
  });

  std::vector<MetaOrder> orders;
  std::vector<std::uint32_t> children;
  const double unit = pow10(tape.metadata().volume_exponent);
  for (std::size_t k = 0; k < kept.size(); ++k) {
    const Run& r = kept[k];
    MetaOrder m;
    m.id = k;
    m.trader_id = tape[r.trades.front()].aggressor_id;
    m.sign = r.sign;
    m.volume = r.volume;
    m.t_start = tape[r.trades.front()].timestamp;
    m.t_end = tape[r.trades.back()].timestamp;
    m.duration = static_cast<double>(m.t_end - m.t_start) / static_cast<double>(kNanosPerSecond);
    if (m.duration > 0.0) m.mu = static_cast<double>(m.volume) * unit / m.duration;
    // Market volume by direct summation over the window.
    const auto trades = tape.trades();
    auto it = std::lower_bound(trades.begin(), trades.end(), m.t_start,
                               [](const Trade& t, std::int64_t ts) { return t.timestamp < ts; });
    std::int64_t vm = 0;
    for (; it != trades.end() && it->timestamp <= m.t_end; ++it) vm += it->volume;
    (void)index;
    m.market_volume = vm;
    m.mu_v = static_cast<double>(m.volume) / static_cast<double>(vm);
    m.first_child = static_cast<std::uint32_t>(children.size());
    m.n_children = static_cast<std::uint32_t>(r.trades.size());
    children.insert(children.end(), r.trades.begin(), r.trades.end());
    orders.push_back(m);
  }
  out.metaorders = MetaOrderSet(std::move(orders), std::move(children), tape.metadata().volume_exponent);
  return out;
}

}  // namespace metaimpact::reference
