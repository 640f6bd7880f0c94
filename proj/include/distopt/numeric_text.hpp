#pragma once

#include <string>
#include <string_view>

namespace distopt {

// Shortest decimal that parses back to the identical double; "inf", "-inf", "nan" otherwise.
std::string FormatDecimal(double v);
// Hexadecimal float text ("0x1.8p+1"); round-trips bit-exactly.
std::string FormatHex(double v);
// Accepts decimal, hex float ("0x..." with optional sign), inf and nan.
double ParseDouble(std::string_view text);

}  // namespace distopt
