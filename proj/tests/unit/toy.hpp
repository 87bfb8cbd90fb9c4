#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include "metaimpact/decimal.hpp"
#include "metaimpact/tape.hpp"

namespace toy {

using namespace metaimpact;

struct Row {
  double t;  // seconds
  TraderId trader;
  Side side;
  double price;
  double volume;
};

inline Trade make_trade(const Row& r, std::uint64_t id) {
  Trade t;
  t.timestamp = static_cast<std::int64_t>(r.t * 1e9);
  t.trade_id = id;
  t.aggressor_id = r.trader;
  t.passive_id = 999999;
  t.side = r.side;
  t.price = double_to_scaled(r.price, -8);
  t.volume = double_to_scaled(r.volume, -8);
  return t;
}

// Rows may come in any order; ids follow the given order.
inline Tape tape(const std::vector<Row>& rows) {
  std::vector<Trade> trades;
  for (std::size_t i = 0; i < rows.size(); ++i) trades.push_back(make_trade(rows[i], i + 1));
  std::sort(trades.begin(), trades.end(), [](const Trade& a, const Trade& b) {
    return a.timestamp != b.timestamp ? a.timestamp < b.timestamp : a.trade_id < b.trade_id;
  });
  return Tape(TapeMetadata{}, std::move(trades));
}

constexpr Side B = Side::Buy;
constexpr Side S = Side::Sell;

}  // namespace toy
