#include "fineval/canonical_json.hpp"

#include <charconv>
#include <cmath>

namespace fineval {

namespace {

constexpr int kReportPlaces = 5;

// Digits of |value| rounded half-even to `places` decimals, as "int.frac".
std::string rounded_digits(double value, int places) {
  char buf[512];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, std::fabs(value),
                                 std::chars_format::fixed, places + 30);
  std::string text(buf, end);
  const auto dot = text.find('.');
  std::string digits = text.substr(0, dot) + text.substr(dot + 1, places);
  const std::string rest = text.substr(dot + 1 + places);

  bool round_up = false;
  if (rest[0] > '5') {
    round_up = true;
  } else if (rest[0] == '5') {
    const bool exact_tie = rest.find_first_not_of('0', 1) == std::string::npos;
    round_up = !exact_tie || ((digits.back() - '0') % 2 == 1);
  }
  if (round_up) {
    int i = static_cast<int>(digits.size()) - 1;
    while (i >= 0 && digits[i] == '9') digits[i--] = '0';
    if (i < 0) {
      digits.insert(digits.begin(), '1');
    } else {
      ++digits[i];
    }
  }
  const std::size_t int_len = digits.size() - static_cast<std::size_t>(places);
  return digits.substr(0, int_len) + "." + digits.substr(int_len);
}

void dump_to(const nlohmann::json& value, std::string& out) {
  using value_t = nlohmann::json::value_t;
  switch (value.type()) {
    case value_t::null:
    case value_t::discarded:
      out += "null";
      return;
    case value_t::boolean:
      out += value.get<bool>() ? "true" : "false";
      return;
    case value_t::number_integer:
      out += std::to_string(value.get<std::int64_t>());
      return;
    case value_t::number_unsigned:
      out += std::to_string(value.get<std::uint64_t>());
      return;
    case value_t::number_float: {
      const double x = value.get<double>();
      out += std::isfinite(x) ? format_real(x) : "null";
      return;
    }
    case value_t::string:
      out += value.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
      return;
    case value_t::array: {
      out += '[';
      bool first = true;
      for (const auto& element : value) {
        if (!first) out += ',';
        first = false;
        dump_to(element, out);
      }
      out += ']';
      return;
    }
    case value_t::object: {
      // nlohmann's default object type is an ordered std::map.
      out += '{';
      bool first = true;
      for (const auto& [key, element] : value.items()) {
        if (!first) out += ',';
        first = false;
        out += nlohmann::json(key).dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
        out += ':';
        dump_to(element, out);
      }
      out += '}';
      return;
    }
    case value_t::binary:
      out += "null";
      return;
  }
}

}  // namespace

double round_half_even(double value, int places) {
  const std::string text = rounded_digits(value, places);
  double out = 0.0;
  std::from_chars(text.data(), text.data() + text.size(), out);
  return value < 0 ? -out : out;
}

std::string format_real(double value) {
  std::string text = rounded_digits(value, kReportPlaces);
  while (text.back() == '0') text.pop_back();
  if (text.back() == '.') text += '0';
  const bool zero = text.find_first_not_of("0.") == std::string::npos;
  if (value < 0 && !zero) text.insert(text.begin(), '-');
  return text;
}

std::string canonical_dump(const nlohmann::json& value) {
  std::string out;
  dump_to(value, out);
  return out;
}

}  // namespace fineval
