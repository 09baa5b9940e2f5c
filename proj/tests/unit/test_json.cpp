#include <cmath>
#include <limits>

#include "doctest.h"
#include "fineval/canonical_json.hpp"

using fineval::canonical_dump;
using fineval::format_real;
using fineval::round_half_even;
using nlohmann::json;

TEST_SUITE("json") {
  TEST_CASE("round_half_even works on the exact binary value") {
    CHECK(round_half_even(0.125, 2) == 0.12);
    CHECK(round_half_even(0.375, 2) == 0.38);
    CHECK(round_half_even(2.5, 0) == 2.0);
    CHECK(round_half_even(3.5, 0) == 4.0);
    CHECK(round_half_even(-2.5, 0) == -2.0);
    // 1/64 = 0.015625 and 3/64 = 0.046875 are exact ties at five places.
    CHECK(round_half_even(0.015625, 5) == 0.01562);
    CHECK(round_half_even(0.046875, 5) == 0.04688);
    // 0.000005 is stored slightly above the tie, 1.000055 slightly below, so
    // both differ from decimal half-even rounding.
    CHECK(round_half_even(0.000005, 5) == 0.00001);
    CHECK(round_half_even(1.000055, 5) == 1.00005);
  }

  TEST_CASE("format_real") {
    CHECK(format_real(1.0) == "1.0");
    CHECK(format_real(0.74) == "0.74");
    CHECK(format_real(4.0 / 7) == "0.57143");
    CHECK(format_real(2.0 / 3) == "0.66667");
    CHECK(format_real(-0.17857142857) == "-0.17857");
    CHECK(format_real(-0.0) == "0.0");
    CHECK(format_real(-1e-9) == "0.0");
    CHECK(format_real(123456.789012) == "123456.78901");
    CHECK(format_real(1e20) == "100000000000000000000.0");
    CHECK(format_real(0.3) == "0.3");
  }

  TEST_CASE("canonical_dump sorts keys and formats reals") {
    json j = {{"b", 1}, {"a", {{"z", 0.5}, {"y", nullptr}}}, {"c", {1.0, "x\"y", true}}};
    CHECK(canonical_dump(j) == R"({"a":{"y":null,"z":0.5},"b":1,"c":[1.0,"x\"y",true]})");
    CHECK(canonical_dump(json(std::nan(""))) == "null");
    CHECK(canonical_dump(json(std::numeric_limits<double>::infinity())) == "null");
    CHECK(canonical_dump(json(-3)) == "-3");
    CHECK(canonical_dump(json("\xC3\xA9")) == "\"\xC3\xA9\"");
    CHECK(canonical_dump(json::object()) == "{}");
    CHECK(canonical_dump(json::array()) == "[]");
  }
}
