#include <array>
#include <algorithm>
#include <cstring>
#include <exception>
#include <istream>
#include <iterator>
#include <ostream>
#include <vector>

#include "metaimpact/error.hpp"
#include "metaimpact/tape_io.hpp"

namespace metaimpact {
namespace {

constexpr std::uint64_t kAllOnes = ~std::uint64_t{0};

template <typename T>
void put_le(std::byte* dst, T value) {
  auto u = static_cast<std::make_unsigned_t<T>>(value);
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    dst[i] = static_cast<std::byte>(u & 0xFFu);
    u = static_cast<decltype(u)>(u >> 8);
  }
}

template <typename T>
T get_le(const std::byte* src) {
  std::make_unsigned_t<T> u = 0;
  for (std::size_t i = sizeof(T); i-- > 0;) {
    u = static_cast<decltype(u)>((u << 8) | std::to_integer<std::uint8_t>(src[i]));
  }
  return static_cast<T>(u);
}

// Record layout (offsets in bytes):
//  0 i64 timestamp   8 u64 trade_id   16 u32 aggressor_id   20 u32 passive_id
// 24 u8 side (0 buy, 1 sell) + 7 reserved zero bytes
// 32 i64 price      40 i64 volume    48 i64 best_bid       56 i64 best_ask
void encode(const Trade& t, std::byte* r) {
  std::memset(r, 0, kBinaryRecordSize);
  put_le<std::int64_t>(r + 0, t.timestamp);
  put_le<std::uint64_t>(r + 8, t.trade_id);
  put_le<std::uint32_t>(r + 16, t.aggressor_id);
  put_le<std::uint32_t>(r + 20, t.passive_id);
  r[24] = static_cast<std::byte>(t.side == Side::Buy ? 0 : 1);
  put_le<std::int64_t>(r + 32, t.price);
  put_le<std::int64_t>(r + 40, t.volume);
  put_le<std::uint64_t>(r + 48, t.best_bid == kNoQuote ? kAllOnes : static_cast<std::uint64_t>(t.best_bid));
  put_le<std::uint64_t>(r + 56, t.best_ask == kNoQuote ? kAllOnes : static_cast<std::uint64_t>(t.best_ask));
}

Trade decode(const std::byte* r, std::size_t record) {
  Trade t;
  t.timestamp = get_le<std::int64_t>(r + 0);
  t.trade_id = get_le<std::uint64_t>(r + 8);
  t.aggressor_id = get_le<std::uint32_t>(r + 16);
  t.passive_id = get_le<std::uint32_t>(r + 20);
  const auto side = std::to_integer<std::uint8_t>(r[24]);
  if (side > 1) throw ParseError("record " + std::to_string(record) + ": invalid side byte", 0);
  t.side = side == 0 ? Side::Buy : Side::Sell;
  t.price = get_le<std::int64_t>(r + 32);
  t.volume = get_le<std::int64_t>(r + 40);
  const auto bid = get_le<std::uint64_t>(r + 48);
  const auto ask = get_le<std::uint64_t>(r + 56);
  t.best_bid = bid == kAllOnes ? kNoQuote : static_cast<std::int64_t>(bid);
  t.best_ask = ask == kAllOnes ? kNoQuote : static_cast<std::int64_t>(ask);
  if (t.aggressor_id == kNoTrader) throw ParseError("record " + std::to_string(record) + ": missing aggressor", 0);
  return t;
}

}  // namespace

Tape parse_binary(std::span<const std::byte> bytes) {
  if (bytes.size() < kBinaryHeaderSize) throw ParseError("truncated header", 0);
  if (std::memcmp(bytes.data(), "IMPT", 4) != 0) throw ParseError("bad magic bytes", 0);
  const auto version = get_le<std::uint16_t>(bytes.data() + 4);
  if (version != kBinaryVersion) {
    throw ParseError("unsupported version " + std::to_string(version) + " (expected " +
                         std::to_string(kBinaryVersion) + ")",
                     0);
  }
  TapeMetadata meta;
  meta.price_exponent = static_cast<std::int8_t>(std::to_integer<std::uint8_t>(bytes[6]));
  meta.volume_exponent = static_cast<std::int8_t>(std::to_integer<std::uint8_t>(bytes[7]));
  if (meta.price_exponent > 0 || meta.price_exponent < -18 || meta.volume_exponent > 0 || meta.volume_exponent < -18) {
    throw ParseError("decimal exponent out of range", 0);
  }
  const std::size_t body = bytes.size() - kBinaryHeaderSize;
  if (body % kBinaryRecordSize != 0) {
    throw ParseError("truncated record " + std::to_string(body / kBinaryRecordSize), 0);
  }
  const std::size_t n = body / kBinaryRecordSize;
  std::vector<Trade> trades(n);
  bool failed = false;
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < n; ++i) {
    try {
      trades[i] = decode(bytes.data() + kBinaryHeaderSize + i * kBinaryRecordSize, i);
    } catch (...) {
#pragma omp critical
      {
        failed = true;
      }
    }
  }
  if (failed) {
    // Re-run serially to report the first bad record deterministically.
    for (std::size_t i = 0; i < n; ++i) decode(bytes.data() + kBinaryHeaderSize + i * kBinaryRecordSize, i);
  }
  return Tape(std::move(meta), std::move(trades));
}

Tape parse_binary(std::istream& in) {
  std::vector<char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_binary(std::as_bytes(std::span<const char>(raw)));
}

void write_binary(std::ostream& out, const Tape& tape) {
  std::array<std::byte, kBinaryHeaderSize> header{};
  std::memcpy(header.data(), "IMPT", 4);
  put_le<std::uint16_t>(header.data() + 4, kBinaryVersion);
  header[6] = static_cast<std::byte>(static_cast<std::uint8_t>(static_cast<std::int8_t>(tape.metadata().price_exponent)));
  header[7] = static_cast<std::byte>(static_cast<std::uint8_t>(static_cast<std::int8_t>(tape.metadata().volume_exponent)));
  out.write(reinterpret_cast<const char*>(header.data()), header.size());

  constexpr std::size_t kBatch = 16384;
  std::vector<std::byte> buf(kBatch * kBinaryRecordSize);
  const auto trades = tape.trades();
  for (std::size_t start = 0; start < trades.size(); start += kBatch) {
    const std::size_t count = std::min(kBatch, trades.size() - start);
    for (std::size_t i = 0; i < count; ++i) encode(trades[start + i], buf.data() + i * kBinaryRecordSize);
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(count * kBinaryRecordSize));
  }
}

}  // namespace metaimpact
