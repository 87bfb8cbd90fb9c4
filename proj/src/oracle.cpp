#include "metaimpact/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "metaimpact/error.hpp"

namespace metaimpact {

namespace {

std::int64_t naive_signed(const Tape& tape, std::int64_t lo, std::int64_t hi) {
  std::int64_t s = 0;
  for (const Trade& t : tape.trades()) {
    if (t.timestamp >= lo && t.timestamp <= hi) s += t.sign() * t.volume;
  }
  return s;
}

}  // namespace

OracleStats brute_force_stats(const Tape& tape, const std::vector<std::uint64_t>& labels, const OracleConfig& cfg) {
  if (tape.size() > kOracleMaxTrades) {
    throw DataError("oracle refuses tapes above 100000 trades; it is deliberately naive");
  }
  if (labels.size() != tape.size()) throw DataError("label count does not match the tape");
  OracleStats out;

  std::map<std::uint64_t, OracleMetaOrder> groups;
  for (std::size_t i = 0; i < tape.size(); ++i) {
    if (labels[i] == kUnassigned) continue;
    OracleMetaOrder& m = groups[labels[i]];
    m.id = labels[i];
    m.children.push_back(i);
  }
  for (auto& [id, m] : groups) {
    const Trade& first = tape[m.children.front()];
    m.sign = first.sign();
    m.t_start = first.timestamp;
    m.t_end = tape[m.children.back()].timestamp;
    for (std::size_t c : m.children) m.volume += tape[c].volume;
    out.metaorders.push_back(m);
  }

  const std::int64_t last_time = tape.empty() ? 0 : tape[tape.size() - 1].timestamp;
  for (const OracleMetaOrder& m : out.metaorders) {
    out.execution_imbalance.push_back(naive_signed(tape, m.t_start, m.t_end));
    const auto dt = static_cast<double>(m.t_end - m.t_start);
    out.isolation_imbalance.push_back(naive_signed(tape, m.t_start, m.t_start + std::llround(cfg.horizon_mult * dt)));

    ImpactSummary s;
    s.metaorder_id = m.id;
    const double p0 = static_cast<double>(tape[m.children.front()].price);
    std::vector<double> path;
    for (std::size_t j = 0; j < cfg.n_points; ++j) {
      // First child whose cumulative volume reaches j/(n-1) of the total.
      std::int64_t cum = 0;
      std::size_t k = 0;
      for (; k < m.children.size(); ++k) {
        cum += tape[m.children[k]].volume;
        if (static_cast<long double>(cum) * static_cast<long double>(cfg.n_points - 1) >=
            static_cast<long double>(j) * static_cast<long double>(m.volume)) {
          break;
        }
      }
      k = std::min(k, m.children.size() - 1);
      path.push_back(m.sign * std::log(static_cast<double>(tape[m.children[k]].price) / p0));
    }
    s.peak = path.back();
    double area = 0.0;
    for (std::size_t j = 1; j < path.size(); ++j) area += 0.5 * (path[j] + path[j - 1]);
    s.exec = area / static_cast<double>(cfg.n_points - 1);
    if (m.t_end > m.t_start) {
      const std::int64_t lo = m.t_end + std::llround(cfg.perm_lo_mult * dt);
      const std::int64_t hi = m.t_end + std::llround(cfg.perm_hi_mult * dt);
      if (hi <= last_time) {
        double notional = 0.0, volume = 0.0, last_price = 0.0;
        for (std::size_t i = 0; i < tape.size(); ++i) {
          if (tape[i].timestamp > hi) break;
          last_price = tape.price(i);
          if (tape[i].timestamp >= lo) {
            notional += tape.price(i) * tape.volume(i);
            volume += tape.volume(i);
          }
        }
        const double level = volume > 0.0 ? notional / volume : last_price;
        s.perm = m.sign * std::log(level / tape.to_price(tape[m.children.front()].price));
        s.perm_mech = s.peak - *s.perm;
      }
    }
    out.summaries.push_back(s);
  }

  if (!out.metaorders.empty()) {
    std::int64_t lo = out.metaorders.front().t_start, hi = lo;
    for (const OracleMetaOrder& m : out.metaorders) {
      lo = std::min(lo, m.t_start);
      hi = std::max(hi, m.t_end);
    }
    const auto res = static_cast<std::int64_t>(std::llround(cfg.active_resolution_seconds * 1e9));
    for (std::int64_t t = lo; t <= hi; t += res) {
      ActivePoint p;
      p.time = t;
      for (const OracleMetaOrder& m : out.metaorders) {
        if (m.t_start <= t && t <= m.t_end) {
          if (m.sign > 0) {
            ++p.n_buy;
            p.volume_buy += m.volume;
          } else {
            ++p.n_sell;
            p.volume_sell += m.volume;
          }
        }
      }
      out.active.push_back(p);
    }
  }

  // Sign ACF by the defining double sum.
  const std::size_t n = out.metaorders.size();
  if (n > cfg.acf_max_lag) {
    std::vector<std::pair<std::int64_t, std::uint64_t>> by_start;
    for (const OracleMetaOrder& m : out.metaorders) by_start.emplace_back(m.t_start, m.id);
    std::vector<int> signs;
    std::sort(by_start.begin(), by_start.end());
    std::map<std::uint64_t, int> sign_of_id;
    for (const OracleMetaOrder& m : out.metaorders) sign_of_id[m.id] = m.sign;
    for (const auto& [t, id] : by_start) signs.push_back(sign_of_id[id]);
    double mean = 0.0;
    for (int s : signs) mean += s;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (int s : signs) var += (s - mean) * (s - mean);
    var /= static_cast<double>(n);
    if (var > 0.0) {
      for (std::size_t lag = 0; lag <= cfg.acf_max_lag; ++lag) {
        double c = 0.0;
        for (std::size_t i = 0; i + lag < n; ++i) c += (signs[i] - mean) * (signs[i + lag] - mean);
        out.sign_acf.push_back(c / static_cast<double>(n - lag) / var);
      }
    }
  }
  return out;
}

}  // namespace metaimpact
