#include <algorithm>
#include <array>
#include <charconv>
#include <exception>
#include <fstream>
#include <istream>
#include <iterator>
#include <numeric>
#include <ostream>
#include <sstream>

#include <fmt/format.h>

#include "metaimpact/decimal.hpp"
#include "metaimpact/error.hpp"
#include "metaimpact/tape_io.hpp"

namespace metaimpact {
namespace {

enum Col : std::size_t { kTs, kId, kAggr, kPass, kSide, kPrice, kVol, kBid, kAsk, kNumCols };
constexpr std::size_t kAbsent = static_cast<std::size_t>(-1);
constexpr std::size_t kChunkBytes = std::size_t{8} << 20;

struct Row {
  Trade trade;
  std::size_t line;
};

std::string_view trim_cr(std::string_view s) {
  if (!s.empty() && s.back() == '\r') s.remove_suffix(1);
  return s;
}

template <typename Int>
Int parse_int(std::string_view field, const char* what, std::size_t line) {
  Int value{};
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc{} || ptr != field.data() + field.size()) {
    throw ParseError(fmt::format("invalid {} '{}'", what, field), line);
  }
  return value;
}

struct Layout {
  std::array<std::size_t, kNumCols> pos{};
  std::size_t n_fields = 0;
};

Layout parse_header(std::string_view header, const CsvSchema& schema) {
  const std::array<const std::string*, kNumCols> names{&schema.timestamp, &schema.trade_id, &schema.aggressor_id,
                                                       &schema.passive_id, &schema.side, &schema.price,
                                                       &schema.volume, &schema.best_bid, &schema.best_ask};
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  header = trim_cr(header);
  if (header.size() >= 3 && static_cast<unsigned char>(header[0]) == 0xEF) header.remove_prefix(3);  // UTF-8 BOM
  while (true) {
    const std::size_t comma = header.find(',', start);
    fields.push_back(header.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  Layout layout;
  layout.n_fields = fields.size();
  layout.pos.fill(kAbsent);
  for (std::size_t c = 0; c < kNumCols; ++c) {
    for (std::size_t f = 0; f < fields.size(); ++f) {
      if (fields[f] == *names[c]) layout.pos[c] = f;
    }
  }
  for (std::size_t c : {kTs, kId, kAggr, kSide, kPrice, kVol}) {
    if (layout.pos[c] == kAbsent) throw ParseError("missing required column '" + *names[c] + "'", 1);
  }
  return layout;
}

Trade parse_row(std::string_view line_text, std::size_t line, const Layout& layout, const CsvSchema& schema) {
  std::array<std::string_view, 32> fields_buf;
  std::vector<std::string_view> fields_heap;
  std::string_view* fields = fields_buf.data();
  if (layout.n_fields > fields_buf.size()) {
    fields_heap.resize(layout.n_fields);
    fields = fields_heap.data();
  }
  std::size_t n = 0;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line_text.find(',', start);
    if (n == layout.n_fields) throw ParseError(fmt::format("expected {} fields, found more", layout.n_fields), line);
    fields[n++] = line_text.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  if (n != layout.n_fields) throw ParseError(fmt::format("expected {} fields, found {}", layout.n_fields, n), line);

  auto field = [&](Col c) -> std::string_view {
    return layout.pos[c] == kAbsent ? std::string_view{} : fields[layout.pos[c]];
  };
  auto decimal = [&](Col c, const char* what, int exponent) -> std::int64_t {
    try {
      return parse_scaled(field(c), exponent);
    } catch (const std::invalid_argument& e) {
      throw ParseError(fmt::format("invalid {}: {}", what, e.what()), line);
    }
  };

  Trade t;
  t.timestamp = parse_int<std::int64_t>(field(kTs), "timestamp", line);
  t.trade_id = parse_int<std::uint64_t>(field(kId), "trade_id", line);
  t.aggressor_id = parse_int<TraderId>(field(kAggr), "aggressor_id", line);
  if (t.aggressor_id == kNoTrader) throw ParseError("aggressor_id out of range", line);
  if (const auto p = field(kPass); !p.empty()) {
    t.passive_id = parse_int<TraderId>(p, "passive_id", line);
    if (t.passive_id == kNoTrader) throw ParseError("passive_id out of range", line);
  }
  const auto side = field(kSide);
  if (side == "B") {
    t.side = Side::Buy;
  } else if (side == "S") {
    t.side = Side::Sell;
  } else {
    throw ParseError(fmt::format("invalid side '{}', expected B or S", side), line);
  }
  t.price = decimal(kPrice, "price", schema.price_exponent);
  t.volume = decimal(kVol, "volume", schema.volume_exponent);
  if (t.price <= 0) throw ParseError("price must be positive", line);
  if (t.volume <= 0) throw ParseError("volume must be positive", line);
  if (!field(kBid).empty()) {
    t.best_bid = decimal(kBid, "best_bid", schema.price_exponent);
    if (t.best_bid <= 0) throw ParseError("best_bid must be positive", line);
  }
  if (!field(kAsk).empty()) {
    t.best_ask = decimal(kAsk, "best_ask", schema.price_exponent);
    if (t.best_ask <= 0) throw ParseError("best_ask must be positive", line);
  }
  return t;
}

bool quote_warning(const Trade& t, std::int64_t tick) {
  if (!t.has_quotes()) return false;
  if (t.best_bid >= t.best_ask) return true;
  if (t.side == Side::Buy) return t.price < t.best_ask - tick;
  return t.price > t.best_bid + tick;
}

struct Chunk {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t first_line = 0;
};

// Splits the body into newline-aligned chunks of about kChunkBytes. The split
// depends only on the bytes, never on the worker count.
std::vector<Chunk> split_chunks(std::string_view body, std::size_t first_line) {
  std::vector<Chunk> chunks;
  std::size_t pos = 0;
  while (pos < body.size()) {
    std::size_t end = std::min(body.size(), pos + kChunkBytes);
    if (end < body.size()) {
      const std::size_t nl = body.find('\n', end);
      end = nl == std::string_view::npos ? body.size() : nl + 1;
    }
    chunks.push_back({pos, end, 0});
    pos = end;
  }
  std::vector<std::size_t> newlines(chunks.size());
#pragma omp parallel for schedule(static)
  for (std::size_t c = 0; c < chunks.size(); ++c) {
    newlines[c] = static_cast<std::size_t>(
        std::count(body.begin() + static_cast<std::ptrdiff_t>(chunks[c].begin),
                   body.begin() + static_cast<std::ptrdiff_t>(chunks[c].end), '\n'));
  }
  std::size_t line = first_line;
  for (std::size_t c = 0; c < chunks.size(); ++c) {
    chunks[c].first_line = line;
    line += newlines[c];
  }
  return chunks;
}

std::size_t merge_count(std::pair<std::int64_t, std::uint64_t>* a, std::pair<std::int64_t, std::uint64_t>* tmp,
                        std::size_t n) {
  if (n < 2) return 0;
  const std::size_t mid = n / 2;
  std::size_t inv = merge_count(a, tmp, mid) + merge_count(a + mid, tmp, n - mid);
  std::size_t i = 0, j = mid, k = 0;
  while (i < mid && j < n) {
    if (a[j] < a[i]) {
      inv += mid - i;
      tmp[k++] = a[j++];
    } else {
      tmp[k++] = a[i++];
    }
  }
  while (i < mid) tmp[k++] = a[i++];
  while (j < n) tmp[k++] = a[j++];
  std::copy(tmp, tmp + n, a);
  return inv;
}

}  // namespace

std::size_t count_inversions(std::span<const std::pair<std::int64_t, std::uint64_t>> keys) {
  std::vector<std::pair<std::int64_t, std::uint64_t>> a(keys.begin(), keys.end());
  std::vector<std::pair<std::int64_t, std::uint64_t>> tmp(a.size());
  return merge_count(a.data(), tmp.data(), a.size());
}

ParsedTape parse_csv(std::string_view text, const CsvSchema& schema) {
  const std::size_t header_end = text.find('\n');
  const std::string_view header = text.substr(0, header_end);
  if (trim_cr(header).empty()) throw ParseError("missing header row", 1);
  const Layout layout = parse_header(header, schema);
  const std::string_view body = header_end == std::string_view::npos ? std::string_view{} : text.substr(header_end + 1);

  const auto chunks = split_chunks(body, 2);
  std::vector<std::vector<Row>> parsed(chunks.size());
  std::vector<std::exception_ptr> errors(chunks.size());

#pragma omp parallel for schedule(dynamic, 1)
  for (std::size_t c = 0; c < chunks.size(); ++c) {
    try {
      std::string_view part = body.substr(chunks[c].begin, chunks[c].end - chunks[c].begin);
      std::size_t line = chunks[c].first_line;
      std::vector<Row>& rows = parsed[c];
      rows.reserve(part.size() / 64 + 1);
      std::size_t start = 0;
      while (start < part.size()) {
        std::size_t nl = part.find('\n', start);
        if (nl == std::string_view::npos) nl = part.size();
        const std::string_view row = trim_cr(part.substr(start, nl - start));
        if (!row.empty()) rows.push_back({parse_row(row, line, layout, schema), line});
        start = nl + 1;
        ++line;
      }
    } catch (...) {
      errors[c] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  std::size_t total = 0;
  for (const auto& p : parsed) total += p.size();
  std::vector<Row> rows;
  rows.reserve(total);
  for (auto& p : parsed) {
    std::move(p.begin(), p.end(), std::back_inserter(rows));
    std::vector<Row>().swap(p);
  }

  ParseReport report;
  report.rows = rows.size();
  auto key = [](const Row& r) { return std::make_pair(r.trade.timestamp, r.trade.trade_id); };
  const bool sorted = std::is_sorted(rows.begin(), rows.end(), [&](const Row& a, const Row& b) { return key(a) < key(b); });
  if (!sorted) {
    std::vector<std::pair<std::int64_t, std::uint64_t>> keys(rows.size());
    std::transform(rows.begin(), rows.end(), keys.begin(), key);
    report.inversions_repaired = count_inversions(keys);
    std::stable_sort(rows.begin(), rows.end(), [&](const Row& a, const Row& b) { return key(a) < key(b); });
  }

  // Duplicate ids: report the later line of the first offending pair.
  bool ids_increasing = true;
  for (std::size_t i = 1; i < rows.size() && ids_increasing; ++i) {
    ids_increasing = rows[i].trade.trade_id > rows[i - 1].trade.trade_id;
  }
  if (!ids_increasing) {
    std::vector<std::pair<std::uint64_t, std::size_t>> ids(rows.size());
    std::transform(rows.begin(), rows.end(), ids.begin(),
                   [](const Row& r) { return std::make_pair(r.trade.trade_id, r.line); });
    std::sort(ids.begin(), ids.end());
    std::size_t bad_line = 0;
    std::uint64_t bad_id = 0;
    for (std::size_t i = 1; i < ids.size(); ++i) {
      if (ids[i].first == ids[i - 1].first && (bad_line == 0 || ids[i].second < bad_line)) {
        bad_line = ids[i].second;
        bad_id = ids[i].first;
      }
    }
    if (bad_line != 0) throw ParseError(fmt::format("duplicate trade_id {}", bad_id), bad_line);
  }

  std::vector<Trade> trades(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    trades[i] = rows[i].trade;
    if (quote_warning(trades[i], schema.tick)) ++report.quote_warnings;
  }
  std::vector<Row>().swap(rows);

  TapeMetadata meta;
  meta.instrument = schema.instrument;
  meta.price_exponent = schema.price_exponent;
  meta.volume_exponent = schema.volume_exponent;
  meta.tick = schema.tick;
  return {Tape(std::move(meta), std::move(trades)), report};
}

ParsedTape parse_csv(std::istream& in, const CsvSchema& schema) {
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_csv(std::string_view(text), schema);
}

void write_csv(std::ostream& out, const Tape& tape) {
  const int pe = tape.metadata().price_exponent;
  const int ve = tape.metadata().volume_exponent;
  out << "timestamp,trade_id,aggressor_id,passive_id,side,price,volume,best_bid,best_ask\n";
  fmt::memory_buffer buf;
  for (const Trade& t : tape.trades()) {
    fmt::format_to(std::back_inserter(buf), "{},{},{},", t.timestamp, t.trade_id, t.aggressor_id);
    if (t.passive_id != kNoTrader) fmt::format_to(std::back_inserter(buf), "{}", t.passive_id);
    fmt::format_to(std::back_inserter(buf), ",{},{},{},", t.side == Side::Buy ? 'B' : 'S', format_scaled(t.price, pe),
                   format_scaled(t.volume, ve));
    if (t.best_bid != kNoQuote) fmt::format_to(std::back_inserter(buf), "{}", format_scaled(t.best_bid, pe));
    buf.push_back(',');
    if (t.best_ask != kNoQuote) fmt::format_to(std::back_inserter(buf), "{}", format_scaled(t.best_ask, pe));
    buf.push_back('\n');
    if (buf.size() > (1u << 20)) {
      out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
      buf.clear();
    }
  }
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

TapeFormat detect_format(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  char magic[4] = {};
  in.read(magic, 4);
  if (in.gcount() == 4 && std::string_view(magic, 4) == "IMPT") return TapeFormat::Binary;
  return TapeFormat::Csv;
}

ParsedTape load_tape(const std::filesystem::path& path, TapeFormat format, const CsvSchema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  if (format == TapeFormat::Binary) {
    Tape tape = parse_binary(in);
    ParseReport report;
    report.rows = tape.size();
    return {std::move(tape), report};
  }
  in.seekg(0, std::ios::end);
  const auto size = static_cast<std::size_t>(in.tellg());
  in.seekg(0);
  std::string text(size, '\0');
  in.read(text.data(), static_cast<std::streamsize>(size));
  return parse_csv(std::string_view(text), schema);
}

void save_tape(const std::filesystem::path& path, const Tape& tape, TapeFormat format) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  if (format == TapeFormat::Binary) {
    write_binary(out, tape);
  } else {
    write_csv(out, tape);
  }
  if (!out) throw DataError("write failed for '" + path.string() + "'");
}

}  // namespace metaimpact
