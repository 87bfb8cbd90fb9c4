#include "metaimpact/tape.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include <fmt/format.h>

#include "metaimpact/decimal.hpp"
#include "metaimpact/error.hpp"

namespace metaimpact {

Tape::Tape(TapeMetadata metadata, std::vector<Trade> trades)
    : meta_(std::move(metadata)), trades_(std::move(trades)) {
  for (std::size_t i = 1; i < trades_.size(); ++i) {
    const Trade& a = trades_[i - 1];
    const Trade& b = trades_[i];
    if (b.timestamp < a.timestamp || (b.timestamp == a.timestamp && b.trade_id <= a.trade_id)) {
      throw DataError("tape is not in canonical (timestamp, trade_id) order at index " + std::to_string(i));
    }
  }
  for (const Trade& t : trades_) {
    if (t.price <= 0 || t.volume <= 0) {
      throw DataError("trade " + std::to_string(t.trade_id) + " has non-positive price or volume");
    }
  }
  // Ids may repeat across timestamps; canonical order only rules out equal ids
  // within a timestamp, so check globally when ids are not increasing.
  bool increasing = true;
  for (std::size_t i = 1; i < trades_.size() && increasing; ++i) {
    increasing = trades_[i].trade_id > trades_[i - 1].trade_id;
  }
  if (!increasing) {
    std::vector<std::uint64_t> ids(trades_.size());
    std::transform(trades_.begin(), trades_.end(), ids.begin(), [](const Trade& t) { return t.trade_id; });
    std::sort(ids.begin(), ids.end());
    if (auto it = std::adjacent_find(ids.begin(), ids.end()); it != ids.end()) {
      throw DataError("duplicate trade_id " + std::to_string(*it));
    }
  }
}

double Tape::price(std::size_t i) const { return to_price(trades_[i].price); }
double Tape::volume(std::size_t i) const { return to_volume(trades_[i].volume); }
double Tape::to_volume(std::int64_t scaled) const { return scaled_to_double(scaled, meta_.volume_exponent); }
double Tape::to_price(std::int64_t scaled) const { return scaled_to_double(scaled, meta_.price_exponent); }

std::int64_t Tape::total_volume() const {
  std::int64_t sum = 0;
  for (const Trade& t : trades_) sum += t.volume;
  return sum;
}

bool Tape::has_quotes() const {
  return std::any_of(trades_.begin(), trades_.end(), [](const Trade& t) { return t.has_quotes(); });
}

MarketIndex::MarketIndex(const Tape& tape) {
  const std::size_t n = tape.size();
  timestamps_.resize(n);
  cum_volume_.resize(n + 1);
  cum_signed_.resize(n + 1);
  cum_notional_.resize(n + 1);
  log_price_.resize(n);
  const auto trades = tape.trades();
  const double price_unit = pow10(tape.metadata().price_exponent);
  const double volume_unit = pow10(tape.metadata().volume_exponent);

#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < n; ++i) {
    timestamps_[i] = trades[i].timestamp;
    log_price_[i] = std::log(static_cast<double>(trades[i].price) * price_unit);
  }
  cum_volume_[0] = cum_signed_[0] = 0;
  cum_notional_[0] = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Trade& t = trades[i];
    cum_volume_[i + 1] = cum_volume_[i] + t.volume;
    cum_signed_[i + 1] = cum_signed_[i] + t.sign() * t.volume;
    cum_notional_[i + 1] = cum_notional_[i] + static_cast<double>(t.price) * price_unit *
                                                  static_cast<double>(t.volume) * volume_unit;
  }
}

std::pair<std::size_t, std::size_t> MarketIndex::range(TimeWindow w) const {
  if (w.end < w.begin) return {0, 0};
  const auto first = std::lower_bound(timestamps_.begin(), timestamps_.end(), w.begin);
  const auto last = std::upper_bound(first, timestamps_.end(), w.end);
  return {static_cast<std::size_t>(first - timestamps_.begin()), static_cast<std::size_t>(last - timestamps_.begin())};
}

std::int64_t MarketIndex::volume(TimeWindow w) const {
  const auto [a, b] = range(w);
  return volume_between(a, b);
}

std::int64_t MarketIndex::signed_volume(TimeWindow w) const {
  const auto [a, b] = range(w);
  return signed_volume_between(a, b);
}

std::optional<std::size_t> MarketIndex::last_at_or_before(std::int64_t t) const {
  const auto it = std::upper_bound(timestamps_.begin(), timestamps_.end(), t);
  if (it == timestamps_.begin()) return std::nullopt;
  return static_cast<std::size_t>(it - timestamps_.begin()) - 1;
}

std::string VolEstimator::name() const {
  return "close_to_close_" + std::to_string(bin_seconds) + "s_last_trade";
}

std::int64_t day_of(std::int64_t timestamp_ns) {
  std::int64_t d = timestamp_ns / kNanosPerDay;
  if (timestamp_ns % kNanosPerDay < 0) --d;
  return d;
}

std::string format_day(std::int64_t day) {
  // Civil-from-days (proleptic Gregorian).
  std::int64_t z = day + 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const std::int64_t doe = z - era * 146097;
  const std::int64_t yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  std::int64_t y = yoe + era * 400;
  const std::int64_t doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const std::int64_t mp = (5 * doy + 2) / 153;
  const std::int64_t d = doy - (153 * mp + 2) / 5 + 1;
  const std::int64_t m = mp < 10 ? mp + 3 : mp - 9;
  if (m <= 2) ++y;
  return fmt::format("{:04}-{:02}-{:02}", y, m, d);
}

std::vector<DailyAggregate> daily_aggregates(const Tape& tape, const VolEstimator& estimator) {
  if (estimator.bin_seconds <= 0) throw ConfigError("volatility bin must be positive");
  std::vector<DailyAggregate> out;
  const std::int64_t bin_ns = estimator.bin_seconds * kNanosPerSecond;
  const auto trades = tape.trades();

  std::size_t i = 0;
  while (i < trades.size()) {
    DailyAggregate agg;
    agg.day = day_of(trades[i].timestamp);
    const std::int64_t day_start = agg.day * kNanosPerDay;
    double sum_sq = 0.0;
    double prev_close = 0.0;
    bool have_prev = false;
    while (i < trades.size() && day_of(trades[i].timestamp) == agg.day) {
      const std::int64_t bin = (trades[i].timestamp - day_start) / bin_ns;
      // Advance to the last trade of this bin.
      while (i < trades.size() && day_of(trades[i].timestamp) == agg.day &&
             (trades[i].timestamp - day_start) / bin_ns == bin) {
        agg.volume += trades[i].volume;
        ++agg.n_trades;
        ++i;
      }
      const double close = std::log(static_cast<double>(trades[i - 1].price));
      if (have_prev) {
        const double r = close - prev_close;
        sum_sq += r * r;
      }
      prev_close = close;
      have_prev = true;
    }
    agg.sigma = std::sqrt(sum_sq);
    out.push_back(agg);
  }
  return out;
}

}  // namespace metaimpact
