#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "metaimpact/tape.hpp"

namespace metaimpact {

struct SegmentationConfig {
  double t_inact_seconds = 3600.0;
  // Drop a reversal-opened metaorder that only unwinds the previous one
  // within t_inact (its trades become unassigned).
  bool drop_mean_reverting = true;
  // A direction-reversing trade opens the next metaorder. When false, the
  // reversing trade and the trader's trades up to the next inactivity gap
  // stay unassigned.
  bool reversal_starts_new = true;

  void validate() const;
  std::int64_t t_inact_ns() const;
};

struct MetaOrder {
  std::uint64_t id = 0;
  TraderId trader_id = kNoTrader;
  int sign = 1;
  std::int64_t volume = 0;  // |Q|, scaled
  std::int64_t t_start = 0;
  std::int64_t t_end = 0;
  double duration = 0.0;     // T, seconds
  std::optional<double> mu;  // |Q|/T in volume units per second; unset when T = 0
  double mu_v = 0.0;         // |Q| / V_M
  std::int64_t market_volume = 0;  // V_M over [t_start, t_end], scaled
  std::uint32_t first_child = 0;   // offset into MetaOrderSet::children
  std::uint32_t n_children = 0;

  bool has_duration() const { return t_end > t_start; }
};

// Metaorders plus a flat array of child trade indices (into the tape).
class MetaOrderSet {
 public:
  MetaOrderSet() = default;
  MetaOrderSet(std::vector<MetaOrder> orders, std::vector<std::uint32_t> children, int volume_exponent)
      : orders_(std::move(orders)), children_(std::move(children)), volume_exponent_(volume_exponent) {}

  std::span<const MetaOrder> orders() const { return orders_; }
  const MetaOrder& operator[](std::size_t i) const { return orders_[i]; }
  std::size_t size() const { return orders_.size(); }
  bool empty() const { return orders_.empty(); }
  std::span<const std::uint32_t> children(const MetaOrder& m) const {
    return std::span<const std::uint32_t>(children_).subspan(m.first_child, m.n_children);
  }
  int volume_exponent() const { return volume_exponent_; }
  // |Q| in real volume units.
  double q(const MetaOrder& m) const;

 private:
  std::vector<MetaOrder> orders_;
  std::vector<std::uint32_t> children_;
  int volume_exponent_ = -8;
};

struct Segmentation {
  MetaOrderSet metaorders;
  std::size_t aggressive_trades = 0;
  std::size_t unassigned_trades = 0;
};

// Per-trader scan of aggressive trades; parallel over traders. Output is
// ordered by (t_start, first child trade index) with ids 0..n-1 in that order.
Segmentation segment(const Tape& tape, const MarketIndex& index, const SegmentationConfig& cfg);

struct ChildCountTable {
  std::array<std::size_t, 4> counts{};     // {1}, {2..4}, {5..9}, {>=10}
  std::array<double, 4> fractions{};
};
ChildCountTable child_count_table(const MetaOrderSet& metaorders);

struct ActivePoint {
  std::int64_t time = 0;
  std::size_t n_buy = 0;
  std::size_t n_sell = 0;
  std::int64_t volume_buy = 0;  // summed |Q| of active buy metaorders, scaled
  std::int64_t volume_sell = 0;
};

// Active metaorders (t_start <= t <= t_end) on the grid begin + k*resolution.
// Without an explicit window the grid spans [min t_start, max t_end].
std::vector<ActivePoint> active_metaorder_series(const MetaOrderSet& metaorders, double resolution_seconds,
                                                 std::optional<TimeWindow> window = std::nullopt);

struct ExecutionProfile {
  std::vector<double> grid;      // normalized elapsed time in [0, 1]
  std::vector<double> mean;      // mean executed fraction after the opening fill
  double max_deviation = 0.0;    // max |mean - grid|
  std::size_t n_metaorders = 0;
};

// Cumulative volume after the opening fill, (c_k - v_1)/(|Q| - v_1), against
// (t_k - t_start)/T, linearly interpolated. Metaorders with T > 0 and at
// least two children only.
ExecutionProfile execution_profile(const Tape& tape, const MetaOrderSet& metaorders, std::size_t n_points = 41);

namespace reference {
// Straightforward single-threaded segmentation, kept as the test oracle for
// the parallel kernel.
Segmentation segment(const Tape& tape, const MarketIndex& index, const SegmentationConfig& cfg);
}  // namespace reference

}  // namespace metaimpact
