#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace metaimpact {

using TraderId = std::uint32_t;
inline constexpr TraderId kNoTrader = 0xFFFFFFFFu;
// Absent best bid/ask. Valid quotes are strictly positive.
inline constexpr std::int64_t kNoQuote = -1;

inline constexpr std::int64_t kNanosPerSecond = 1'000'000'000;
inline constexpr std::int64_t kNanosPerDay = 86'400 * kNanosPerSecond;

enum class Side : std::uint8_t { Buy = 0, Sell = 1 };

constexpr int sign_of(Side side) { return side == Side::Buy ? 1 : -1; }
constexpr Side opposite(Side side) { return side == Side::Buy ? Side::Sell : Side::Buy; }

// One tape row. Price and volume are scaled integers; the decimal exponents
// live in the owning Tape's metadata.
struct Trade {
  std::int64_t timestamp = 0;  // ns since epoch
  std::uint64_t trade_id = 0;
  TraderId aggressor_id = kNoTrader;
  TraderId passive_id = kNoTrader;
  Side side = Side::Buy;  // aggressor direction
  std::int64_t price = 0;
  std::int64_t volume = 0;
  std::int64_t best_bid = kNoQuote;  // sampled immediately before the trade
  std::int64_t best_ask = kNoQuote;

  int sign() const { return sign_of(side); }
  bool has_quotes() const { return best_bid != kNoQuote && best_ask != kNoQuote; }

  friend bool operator==(const Trade&, const Trade&) = default;
};

struct TapeMetadata {
  std::string instrument = "BTC/USD";
  int price_exponent = -8;
  int volume_exponent = -8;
  std::int64_t tick = 1000;  // price tick in scaled units
  std::string time_zone = "UTC";
};

// Canonical (timestamp, trade_id)-ordered trade sequence. Immutable once
// built; safe to share across threads.
class Tape {
 public:
  Tape() = default;
  // Requires canonical order and unique trade ids; throws DataError otherwise.
  Tape(TapeMetadata metadata, std::vector<Trade> trades);

  std::span<const Trade> trades() const { return trades_; }
  const Trade& operator[](std::size_t i) const { return trades_[i]; }
  const TapeMetadata& metadata() const { return meta_; }
  std::size_t size() const { return trades_.size(); }
  bool empty() const { return trades_.empty(); }

  double price(std::size_t i) const;
  double volume(std::size_t i) const;
  double to_volume(std::int64_t scaled) const;
  double to_price(std::int64_t scaled) const;
  // Sum of all trade volumes, exact.
  std::int64_t total_volume() const;
  bool has_quotes() const;

  // Same trades and exponents; instrument/tick/time zone are descriptive.
  friend bool operator==(const Tape& a, const Tape& b) {
    return a.meta_.price_exponent == b.meta_.price_exponent &&
           a.meta_.volume_exponent == b.meta_.volume_exponent && a.trades_ == b.trades_;
  }

 private:
  TapeMetadata meta_;
  std::vector<Trade> trades_;
};

// Closed time interval [begin, end] in ns.
struct TimeWindow {
  std::int64_t begin = 0;
  std::int64_t end = 0;
};

// Prefix sums over a tape for O(log n) window queries. All volume sums are
// exact scaled integers.
class MarketIndex {
 public:
  explicit MarketIndex(const Tape& tape);

  std::size_t size() const { return timestamps_.size(); }
  std::span<const std::int64_t> timestamps() const { return timestamps_; }
  double log_price(std::size_t i) const { return log_price_[i]; }

  // Trade index range [first, last) inside the closed window.
  std::pair<std::size_t, std::size_t> range(TimeWindow w) const;
  std::int64_t volume(TimeWindow w) const;
  std::int64_t signed_volume(TimeWindow w) const;
  std::int64_t volume_between(std::size_t first, std::size_t last) const {
    return cum_volume_[last] - cum_volume_[first];
  }
  std::int64_t signed_volume_between(std::size_t first, std::size_t last) const {
    return cum_signed_[last] - cum_signed_[first];
  }
  // Sum of price*volume in real units over [first, last).
  double notional_between(std::size_t first, std::size_t last) const {
    return cum_notional_[last] - cum_notional_[first];
  }
  // Index of the last trade with timestamp <= t, if any.
  std::optional<std::size_t> last_at_or_before(std::int64_t t) const;
  std::int64_t first_time() const { return timestamps_.empty() ? 0 : timestamps_.front(); }
  std::int64_t last_time() const { return timestamps_.empty() ? 0 : timestamps_.back(); }

 private:
  std::vector<std::int64_t> timestamps_;
  std::vector<std::int64_t> cum_volume_;
  std::vector<std::int64_t> cum_signed_;
  std::vector<double> cum_notional_;
  std::vector<double> log_price_;
};

struct DailyAggregate {
  std::int64_t day = 0;  // days since 1970-01-01 (UTC)
  std::int64_t volume = 0;  // V_D, scaled
  double sigma = 0.0;       // realized daily volatility of log price
  std::size_t n_trades = 0;
};

// Realized volatility: close-to-close over fixed bins of the last-trade price.
struct VolEstimator {
  std::int64_t bin_seconds = 300;
  std::string name() const;
};

std::vector<DailyAggregate> daily_aggregates(const Tape& tape, const VolEstimator& estimator = {});

std::int64_t day_of(std::int64_t timestamp_ns);
std::string format_day(std::int64_t day);  // YYYY-MM-DD

}  // namespace metaimpact
