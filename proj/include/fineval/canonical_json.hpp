#ifndef FINEVAL_CANONICAL_JSON_HPP
#define FINEVAL_CANONICAL_JSON_HPP

#include <string>

#include "json.hpp"

namespace fineval {

// Rounds to `places` decimal digits, ties to even, on the exact binary value.
double round_half_even(double value, int places);

// Fixed-point text of a real rounded half-even to 5 places with trailing zeros
// trimmed (at least one fractional digit): 0.74 -> "0.74", 1 -> "1.0".
std::string format_real(double value);

// Compact JSON with object keys sorted and reals written by format_real, so
// equal inputs produce byte-identical text.
std::string canonical_dump(const nlohmann::json& value);

}  // namespace fineval

#endif  // FINEVAL_CANONICAL_JSON_HPP
