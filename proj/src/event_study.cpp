#include "metaimpact/event_study.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "metaimpact/error.hpp"
#include "metaimpact/parallel.hpp"

namespace metaimpact {

void EventStudyConfig::validate() const {
  if (!(pre_mult >= 0.0) || !(post_mult >= 1.0)) throw ConfigError("event study needs pre_mult >= 0 and post_mult >= 1");
  if (n_points < 2) throw ConfigError("event study needs at least 2 points across the execution");
  if (n_min == 0) throw ConfigError("n_min must be positive");
  if (!(q_per_decade > 0.0) || !(mu_per_decade > 0.0)) throw ConfigError("bins per decade must be positive");
}

const std::vector<double>* EventStudyCurve::curve(const std::string& name) const {
  for (const auto& [key, values] : curves) {
    if (key == name) return &values;
  }
  return nullptr;
}

namespace {

constexpr std::size_t kCurves = 7;
enum CurveId { kPrice, kAsk, kBid, kVwap, kTotal, kResidual, kOwn };

struct Grid {
  std::vector<double> tau;
  std::size_t zero = 0;
  std::size_t one = 0;
  std::size_t last_unit_begin = 0;
};

Grid make_grid(const EventStudyConfig& cfg) {
  const auto steps = static_cast<long long>(cfg.n_points - 1);
  const long long lo = -std::llround(cfg.pre_mult * static_cast<double>(steps));
  const long long hi = steps + std::llround(cfg.post_mult * static_cast<double>(steps));
  Grid g;
  for (long long k = lo; k <= hi; ++k) g.tau.push_back(static_cast<double>(k) / static_cast<double>(steps));
  g.zero = static_cast<std::size_t>(-lo);
  g.one = g.zero + static_cast<std::size_t>(steps);
  g.last_unit_begin = g.tau.size() - 1 - static_cast<std::size_t>(steps);
  return g;
}

std::int64_t grid_time(const MetaOrder& m, double tau) {
  return m.t_start + std::llround(tau * static_cast<double>(m.t_end - m.t_start));
}

// Fills out[c * G + g] for one metaorder.
void trace(const Tape& tape, const MarketIndex& index, const MetaOrderSet& set, const MetaOrder& m, const Grid& grid,
           bool quotes, std::vector<double>& out) {
  const std::size_t G = grid.tau.size();
  out.assign(kCurves * G, 0.0);
  const auto kids = set.children(m);
  const std::size_t first = kids[0];
  const auto ts = index.timestamps();
  const double s = m.sign;
  const double lp0 = index.log_price(first);
  const double q = static_cast<double>(m.volume);
  std::int64_t qe0 = 0, qo0 = 0;
  if (quotes) {
    qe0 = m.sign > 0 ? tape[first].best_ask : tape[first].best_bid;
    qo0 = m.sign > 0 ? tape[first].best_bid : tape[first].best_ask;
  }
  std::size_t prev_pos = 0;
  std::size_t k = 0;
  std::int64_t own = 0;
  double vwap = 0.0;
  for (std::size_t g = 0; g < G; ++g) {
    const std::int64_t t = grid_time(m, grid.tau[g]);
    const auto lo_it = ts.begin() + static_cast<std::ptrdiff_t>(prev_pos);
    const auto pos = static_cast<std::size_t>(std::upper_bound(lo_it, ts.end(), t) - ts.begin());
    const std::size_t last = pos - 1;
    if (g == 0) {
      vwap = s * (index.log_price(last) - lp0);
    } else if (pos > prev_pos) {
      const double vol = tape.to_volume(index.volume_between(prev_pos, pos));
      vwap = s * (std::log(index.notional_between(prev_pos, pos) / vol) - lp0);
    }
    out[kVwap * G + g] = vwap;
    prev_pos = pos;
    while (k < kids.size() && tape[kids[k]].timestamp <= t) own += tape[kids[k++]].volume;
    if (g == grid.zero) continue;
    out[kPrice * G + g] = s * (index.log_price(last) - lp0);
    if (quotes) {
      const Trade& tr = tape[last];
      const std::int64_t qe = m.sign > 0 ? tr.best_ask : tr.best_bid;
      const std::int64_t qo = m.sign > 0 ? tr.best_bid : tr.best_ask;
      out[kAsk * G + g] = s * std::log(static_cast<double>(qe) / static_cast<double>(qe0));
      out[kBid * G + g] = s * std::log(static_cast<double>(qo) / static_cast<double>(qo0));
    }
    const double total = s * static_cast<double>(index.signed_volume_between(first, pos)) / q;
    const double own_f = static_cast<double>(own) / q;
    out[kTotal * G + g] = total;
    out[kOwn * G + g] = own_f;
    out[kResidual * G + g] = total - own_f;
  }
  const double v0 = out[kVwap * G + grid.zero];
  for (std::size_t g = 0; g < G; ++g) out[kVwap * G + g] -= v0;
}

bool all_quotes(const Tape& tape) {
  if (tape.empty()) return false;
  for (const Trade& t : tape.trades()) {
    if (!t.has_quotes()) return false;
  }
  return true;
}


}  // namespace

std::vector<EventStudyCurve> event_study(const Tape& tape, const MarketIndex& index, const MetaOrderSet& set,
                                         const EventStudyConfig& cfg, const Isolation* isolation) {
  cfg.validate();
  if (isolation != nullptr && isolation->labels.size() != set.size()) {
    throw ConfigError("isolation labels do not match the metaorder set");
  }
  const Grid grid = make_grid(cfg);
  const std::size_t G = grid.tau.size();
  const bool quotes = all_quotes(tape);
  const std::int64_t first_time = index.first_time();
  const std::int64_t last_time = index.last_time();

  // Eligibility and the pre-window return, per metaorder.
  const std::size_t n = set.size();
  std::vector<signed char> trend(n, 0);
  std::vector<char> eligible(n, 0);
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < n; ++i) {
    const MetaOrder& m = set[i];
    if (!m.has_duration()) continue;
    const std::int64_t t_lo = grid_time(m, grid.tau.front());
    const std::int64_t t_hi = grid_time(m, grid.tau.back());
    if (t_lo < first_time || t_hi > last_time) continue;
    eligible[i] = 1;
    const std::size_t before = *index.last_at_or_before(t_lo);
    const double pre = m.sign * (index.log_price(set.children(m)[0]) - index.log_price(before));
    trend[i] = pre > 0.0 ? 1 : pre < 0.0 ? -1 : 0;
  }

  // Bucket names in output order, then per-metaorder membership.
  std::vector<std::string> names{"all"};
  if (cfg.by_trend) {
    names.emplace_back("trending");
    names.emplace_back("mean_reverting");
  }
  if (isolation != nullptr) {
    names.emplace_back("isolated");
    names.emplace_back("informed");
  }
  auto q_bin = [&](const MetaOrder& m) { return log_bin(set.q(m), cfg.q_per_decade); };
  auto mu_bin = [&](const MetaOrder& m) { return log_bin(*m.mu, cfg.mu_per_decade); };
  std::map<int, std::size_t> q_bins, mu_bins;
  for (std::size_t i = 0; i < n; ++i) {
    if (!eligible[i]) continue;
    if (cfg.by_q) q_bins.emplace(q_bin(set[i]), 0);
    if (cfg.by_mu) mu_bins.emplace(mu_bin(set[i]), 0);
  }
  for (auto& [b, id] : q_bins) {
    id = names.size();
    names.push_back("q:" + std::to_string(b));
  }
  for (auto& [b, id] : mu_bins) {
    id = names.size();
    names.push_back("mu:" + std::to_string(b));
  }
  auto index_of = [&](const char* name) {
    return static_cast<std::uint32_t>(std::find(names.begin(), names.end(), name) - names.begin());
  };

  std::vector<std::size_t> members;
  std::vector<std::uint32_t> offsets{0};
  std::vector<std::uint32_t> ids;
  for (std::size_t i = 0; i < n; ++i) {
    if (!eligible[i]) continue;
    const MetaOrder& m = set[i];
    members.push_back(i);
    ids.push_back(0);
    if (cfg.by_trend && trend[i] != 0) ids.push_back(index_of(trend[i] > 0 ? "trending" : "mean_reverting"));
    if (isolation != nullptr) {
      const IsolationLabel l = isolation->labels[i];
      if (l == IsolationLabel::Isolated) ids.push_back(index_of("isolated"));
      if (l == IsolationLabel::Informed) ids.push_back(index_of("informed"));
    }
    if (cfg.by_q) ids.push_back(static_cast<std::uint32_t>(q_bins.at(q_bin(m))));
    if (cfg.by_mu) ids.push_back(static_cast<std::uint32_t>(mu_bins.at(mu_bin(m))));
    offsets.push_back(static_cast<std::uint32_t>(ids.size()));
  }

  const std::size_t B = names.size();
  struct Acc {
    std::vector<double> sums;
    std::vector<std::size_t> counts;
  };
  const Acc init{std::vector<double>(B * kCurves * G, 0.0), std::vector<std::size_t>(B, 0)};
  Acc total = parallel::blocked_reduce(
      members.size(), init,
      [&](Acc& acc, std::size_t e) {
        thread_local std::vector<double> buf;
        trace(tape, index, set, set[members[e]], grid, quotes, buf);
        for (std::uint32_t o = offsets[e]; o < offsets[e + 1]; ++o) {
          const std::size_t b = ids[o];
          ++acc.counts[b];
          double* dst = acc.sums.data() + b * kCurves * G;
          for (std::size_t x = 0; x < kCurves * G; ++x) dst[x] += buf[x];
        }
      },
      [](Acc& a, const Acc& b) {
        for (std::size_t x = 0; x < a.sums.size(); ++x) a.sums[x] += b.sums[x];
        for (std::size_t x = 0; x < a.counts.size(); ++x) a.counts[x] += b.counts[x];
      });

  std::vector<EventStudyCurve> out;
  for (std::size_t b = 0; b < B; ++b) {
    if (total.counts[b] < cfg.n_min) continue;
    EventStudyCurve c;
    c.bucket = names[b];
    c.grid = grid.tau;
    c.n = total.counts[b];
    for (std::size_t k = 0; k < kCurves; ++k) {
      if (!quotes && (k == kAsk || k == kBid)) continue;
      std::vector<double> v(G);
      const double* src = total.sums.data() + (b * kCurves + k) * G;
      for (std::size_t g = 0; g < G; ++g) v[g] = src[g] / static_cast<double>(c.n);
      c.curves.emplace_back(kEventCurves[k], std::move(v));
    }
    const std::vector<double>& price = c.curves.front().second;
    c.peak = price[grid.one];
    double sum = 0.0;
    for (std::size_t g = grid.last_unit_begin; g < G; ++g) sum += price[g];
    c.permanent = sum / static_cast<double>(G - grid.last_unit_begin);
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace metaimpact
