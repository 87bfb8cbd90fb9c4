#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>

#include "metaimpact/tape.hpp"

namespace metaimpact {

// Column names and decimal layout for CSV input. Column order in the file is
// free; the header row maps names to positions.
struct CsvSchema {
  int price_exponent = -8;
  int volume_exponent = -8;
  std::int64_t tick = 1000;
  std::string instrument = "BTC/USD";

  std::string timestamp = "timestamp";
  std::string trade_id = "trade_id";
  std::string aggressor_id = "aggressor_id";
  std::string passive_id = "passive_id";
  std::string side = "side";
  std::string price = "price";
  std::string volume = "volume";
  std::string best_bid = "best_bid";
  std::string best_ask = "best_ask";
};

struct ParseReport {
  std::size_t rows = 0;
  // Pairs of rows (i < j) whose (timestamp, trade_id) keys were out of order
  // in the input and were repaired by sorting.
  std::size_t inversions_repaired = 0;
  // Crossed quotes, or trade price outside the quotes by more than one tick.
  std::size_t quote_warnings = 0;
};

struct ParsedTape {
  Tape tape;
  ParseReport report;
};

ParsedTape parse_csv(std::string_view text, const CsvSchema& schema = {});
ParsedTape parse_csv(std::istream& in, const CsvSchema& schema = {});
void write_csv(std::ostream& out, const Tape& tape);

// Binary layout: "IMPT", u16 version, i8 price exponent, i8 volume exponent,
// then 64-byte little-endian records (see docs/formats.md).
inline constexpr std::uint16_t kBinaryVersion = 1;
inline constexpr std::size_t kBinaryHeaderSize = 8;
inline constexpr std::size_t kBinaryRecordSize = 64;

Tape parse_binary(std::span<const std::byte> bytes);
Tape parse_binary(std::istream& in);
void write_binary(std::ostream& out, const Tape& tape);

enum class TapeFormat { Csv, Binary };
TapeFormat detect_format(const std::filesystem::path& path);
ParsedTape load_tape(const std::filesystem::path& path, TapeFormat format, const CsvSchema& schema = {});
void save_tape(const std::filesystem::path& path, const Tape& tape, TapeFormat format);

// Pairwise inversion count of a sequence, O(n log n).
std::size_t count_inversions(std::span<const std::pair<std::int64_t, std::uint64_t>> keys);

}  // namespace metaimpact
