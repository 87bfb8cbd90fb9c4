#include "metaimpact/decimal.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace metaimpact {
namespace {

void check_exponent(int exponent) {
  if (exponent > 0 || exponent < -18) {
    throw std::invalid_argument("decimal exponent must lie in [-18, 0]");
  }
}

constexpr std::int64_t kPow10[] = {1,
                                   10,
                                   100,
                                   1000,
                                   10000,
                                   100000,
                                   1000000,
                                   10000000,
                                   100000000,
                                   1000000000,
                                   10000000000,
                                   100000000000,
                                   1000000000000,
                                   10000000000000,
                                   100000000000000,
                                   1000000000000000,
                                   10000000000000000,
                                   100000000000000000,
                                   1000000000000000000};

}  // namespace

double pow10(int exponent) {
  if (exponent >= 0 && exponent <= 18) return static_cast<double>(kPow10[exponent]);
  if (exponent < 0 && exponent >= -18) return 1.0 / static_cast<double>(kPow10[-exponent]);
  return std::pow(10.0, exponent);
}

std::int64_t parse_scaled(std::string_view text, int exponent) {
  check_exponent(exponent);
  const int scale = -exponent;
  if (text.empty()) throw std::invalid_argument("empty decimal");

  std::size_t pos = 0;
  bool negative = false;
  if (text[0] == '-' || text[0] == '+') {
    negative = text[0] == '-';
    pos = 1;
  }
  constexpr std::uint64_t kLimit = static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max());
  std::uint64_t acc = 0;
  int frac_digits = 0;
  bool seen_dot = false;
  bool any_digit = false;
  for (; pos < text.size(); ++pos) {
    const char c = text[pos];
    if (c == '.') {
      if (seen_dot) throw std::invalid_argument("malformed decimal '" + std::string(text) + "'");
      seen_dot = true;
      continue;
    }
    if (c < '0' || c > '9') throw std::invalid_argument("malformed decimal '" + std::string(text) + "'");
    any_digit = true;
    const unsigned digit = static_cast<unsigned>(c - '0');
    if (seen_dot) {
      if (frac_digits == scale) {
        if (digit != 0) throw std::invalid_argument("too many decimal places in '" + std::string(text) + "'");
        continue;
      }
      ++frac_digits;
    }
    if (acc > (kLimit - digit) / 10) throw std::invalid_argument("decimal overflow '" + std::string(text) + "'");
    acc = acc * 10 + digit;
  }
  if (!any_digit) throw std::invalid_argument("malformed decimal '" + std::string(text) + "'");
  for (; frac_digits < scale; ++frac_digits) {
    if (acc > kLimit / 10) throw std::invalid_argument("decimal overflow '" + std::string(text) + "'");
    acc *= 10;
  }
  const auto value = static_cast<std::int64_t>(acc);
  return negative ? -value : value;
}

std::string format_scaled(std::int64_t value, int exponent) {
  check_exponent(exponent);
  const int scale = -exponent;
  const bool negative = value < 0;
  // Work in unsigned to survive INT64_MIN.
  std::uint64_t mag = negative ? (~static_cast<std::uint64_t>(value) + 1) : static_cast<std::uint64_t>(value);
  const auto unit = static_cast<std::uint64_t>(kPow10[scale]);
  const std::uint64_t whole = mag / unit;
  std::uint64_t frac = mag % unit;

  std::string out = negative ? "-" : "";
  out += std::to_string(whole);
  if (frac != 0) {
    std::string digits(static_cast<std::size_t>(scale), '0');
    for (int i = scale - 1; i >= 0; --i) {
      digits[static_cast<std::size_t>(i)] = static_cast<char>('0' + frac % 10);
      frac /= 10;
    }
    while (!digits.empty() && digits.back() == '0') digits.pop_back();
    out += '.';
    out += digits;
  }
  return out;
}

double scaled_to_double(std::int64_t value, int exponent) {
  return static_cast<double>(value) * pow10(exponent);
}

std::int64_t double_to_scaled(double value, int exponent) {
  check_exponent(exponent);
  const double scaled = std::nearbyint(value * static_cast<double>(kPow10[-exponent]));
  if (!std::isfinite(scaled) || std::fabs(scaled) >= 9.2e18) {
    throw std::invalid_argument("value out of range for scaled decimal");
  }
  return static_cast<std::int64_t>(scaled);
}

}  // namespace metaimpact
