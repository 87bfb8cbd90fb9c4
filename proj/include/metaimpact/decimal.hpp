#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace metaimpact {

// Fixed-point decimals: a value v with exponent e represents v * 10^e.
// Only non-positive exponents down to -18 are supported.

// Parses a plain decimal ("12", "-0.5", "101.25") into scaled units.
// Throws std::invalid_argument on malformed text, precision loss or overflow.
std::int64_t parse_scaled(std::string_view text, int exponent);

// Exact decimal rendering with trailing fractional zeros removed.
std::string format_scaled(std::int64_t value, int exponent);

double scaled_to_double(std::int64_t value, int exponent);

// Rounds a real value to the nearest scaled unit. Throws on overflow.
std::int64_t double_to_scaled(double value, int exponent);

double pow10(int exponent);

}  // namespace metaimpact
