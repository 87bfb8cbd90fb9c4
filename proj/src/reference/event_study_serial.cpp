#include <cmath>
#include <map>

#include "metaimpact/event_study.hpp"

namespace metaimpact::reference {

namespace {

struct Sums {
  std::size_t n = 0;
  std::vector<std::vector<double>> curves;
};

}  // namespace

std::vector<EventStudyCurve> event_study(const Tape& tape, const MetaOrderSet& set, const EventStudyConfig& cfg,
                                         const Isolation* isolation) {
  cfg.validate();
  const auto steps = static_cast<long long>(cfg.n_points - 1);
  const long long k_lo = -std::llround(cfg.pre_mult * static_cast<double>(steps));
  const long long k_hi = steps + std::llround(cfg.post_mult * static_cast<double>(steps));
  std::vector<double> tau;
  for (long long k = k_lo; k <= k_hi; ++k) tau.push_back(static_cast<double>(k) / static_cast<double>(steps));
  const std::size_t G = tau.size();
  const auto zero = static_cast<std::size_t>(-k_lo);

  bool quotes = !tape.empty();
  for (const Trade& t : tape.trades()) quotes = quotes && t.has_quotes();
  const auto trades = tape.trades();

  // Bucket key -> accumulated curves, keyed so the output order matches.
  std::map<std::pair<int, long long>, std::pair<std::string, Sums>> buckets;
  auto add = [&](int group, long long sub, const std::string& name, const std::vector<std::vector<double>>& c) {
    auto& [label, sums] = buckets[{group, sub}];
    label = name;
    if (sums.curves.empty()) sums.curves.assign(c.size(), std::vector<double>(G, 0.0));
    ++sums.n;
    for (std::size_t k = 0; k < c.size(); ++k) {
      for (std::size_t g = 0; g < G; ++g) sums.curves[k][g] += c[k][g];
    }
  };

  for (const MetaOrder& m : set.orders()) {
    if (!m.has_duration()) continue;
    const auto T = static_cast<double>(m.t_end - m.t_start);
    auto time_at = [&](double x) { return m.t_start + std::llround(x * T); };
    if (time_at(tau.front()) < trades.front().timestamp || time_at(tau.back()) > trades.back().timestamp) continue;
    const auto kids = set.children(m);
    const Trade& f = tape[kids[0]];
    const double s = m.sign;
    const double p0 = tape.price(kids[0]);

    std::vector<std::vector<double>> c(7, std::vector<double>(G, 0.0));
    double vwap_carry = 0.0;
    for (std::size_t g = 0; g < G; ++g) {
      const std::int64_t t = time_at(tau[g]);
      const std::int64_t t_prev = g > 0 ? time_at(tau[g - 1]) : 0;
      std::size_t last = 0;
      double notional = 0.0, cell_volume = 0.0;
      std::int64_t flow = 0;
      for (std::size_t i = 0; i < trades.size() && trades[i].timestamp <= t; ++i) {
        last = i;
        if (g > 0 && trades[i].timestamp > t_prev) {
          notional += tape.price(i) * tape.volume(i);
          cell_volume += tape.volume(i);
        }
      }
      // Signed flow from the first fill (inclusive) up to t, or back to t.
      for (std::size_t i = 0; i < trades.size(); ++i) {
        if (i >= kids[0] && trades[i].timestamp <= t) flow += trades[i].sign() * trades[i].volume;
        if (i < kids[0] && trades[i].timestamp > t) flow -= trades[i].sign() * trades[i].volume;
      }
      std::int64_t own = 0;
      for (std::uint32_t k : kids) {
        if (trades[k].timestamp <= t) own += trades[k].volume;
      }
      if (g == 0) {
        vwap_carry = s * std::log(tape.price(last) / p0);
      } else if (cell_volume > 0.0) {
        vwap_carry = s * std::log(notional / cell_volume / p0);
      }
      c[3][g] = vwap_carry;
      if (g == zero) continue;
      c[0][g] = s * std::log(tape.price(last) / p0);
      if (quotes) {
        const Trade& tr = trades[last];
        c[1][g] = s * std::log(static_cast<double>(s > 0 ? tr.best_ask : tr.best_bid) /
                               static_cast<double>(s > 0 ? f.best_ask : f.best_bid));
        c[2][g] = s * std::log(static_cast<double>(s > 0 ? tr.best_bid : tr.best_ask) /
                               static_cast<double>(s > 0 ? f.best_bid : f.best_ask));
      }
      c[4][g] = s * static_cast<double>(flow) / static_cast<double>(m.volume);
      c[6][g] = static_cast<double>(own) / static_cast<double>(m.volume);
      c[5][g] = c[4][g] - c[6][g];
    }
    const double v0 = c[3][zero];
    for (double& v : c[3]) v -= v0;

    add(0, 0, "all", c);
    // Pre-window return from the last trade at or before the window start.
    std::size_t before = 0;
    for (std::size_t i = 0; i < trades.size() && trades[i].timestamp <= time_at(tau.front()); ++i) before = i;
    const double pre = s * std::log(p0 / tape.price(before));
    if (cfg.by_trend && pre > 0.0) add(1, 0, "trending", c);
    if (cfg.by_trend && pre < 0.0) add(2, 0, "mean_reverting", c);
    if (isolation != nullptr) {
      if (isolation->labels[m.id] == IsolationLabel::Isolated) add(3, 0, "isolated", c);
      if (isolation->labels[m.id] == IsolationLabel::Informed) add(4, 0, "informed", c);
    }
    if (cfg.by_q) {
      const auto b = static_cast<long long>(std::floor(cfg.q_per_decade * std::log10(set.q(m))));
      add(5, b, "q:" + std::to_string(b), c);
    }
    if (cfg.by_mu) {
      const auto b = static_cast<long long>(std::floor(cfg.mu_per_decade * std::log10(*m.mu)));
      add(6, b, "mu:" + std::to_string(b), c);
    }
  }

  std::vector<EventStudyCurve> out;
  for (auto& [key, entry] : buckets) {
    auto& [label, sums] = entry;
    if (sums.n < cfg.n_min) continue;
    EventStudyCurve e;
    e.bucket = label;
    e.grid = tau;
    e.n = sums.n;
    for (std::size_t k = 0; k < 7; ++k) {
      if (!quotes && (k == 1 || k == 2)) continue;
      for (double& v : sums.curves[k]) v /= static_cast<double>(sums.n);
      e.curves.emplace_back(kEventCurves[k], sums.curves[k]);
    }
    const auto& price = e.curves.front().second;
    e.peak = price[zero + static_cast<std::size_t>(steps)];
    double sum = 0.0;
    for (std::size_t g = G - 1 - static_cast<std::size_t>(steps); g < G; ++g) sum += price[g];
    e.permanent = sum / static_cast<double>(steps + 1);
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace metaimpact::reference
