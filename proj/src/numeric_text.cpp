#include "distopt/numeric_text.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <limits>

#include "distopt/error.hpp"

namespace distopt {

std::string FormatDecimal(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::array<char, 64> buf{};
  auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

std::string FormatHex(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::array<char, 64> buf{};
  const bool neg = std::signbit(v);
  auto res = std::to_chars(buf.data(), buf.data() + buf.size(), std::abs(v), std::chars_format::hex);
  return std::string(neg ? "-0x" : "0x") + std::string(buf.data(), res.ptr);
}

double ParseDouble(std::string_view text) {
  std::string_view s = text;
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  bool neg = false;
  std::string_view body = s;
  if (!body.empty() && (body.front() == '-' || body.front() == '+')) {
    neg = body.front() == '-';
    body.remove_prefix(1);
  }
  if (body == "inf" || body == "infinity") {
    return neg ? -std::numeric_limits<double>::infinity() : std::numeric_limits<double>::infinity();
  }
  if (body == "nan") return std::numeric_limits<double>::quiet_NaN();

  double v = 0.0;
  std::from_chars_result res{};
  if (body.size() > 2 && body[0] == '0' && (body[1] == 'x' || body[1] == 'X')) {
    body.remove_prefix(2);
    res = std::from_chars(body.data(), body.data() + body.size(), v, std::chars_format::hex);
  } else {
    res = std::from_chars(body.data(), body.data() + body.size(), v);
  }
  if (res.ec != std::errc{} || res.ptr != body.data() + body.size() || body.empty()) {
    throw ConfigError("cannot parse number '" + std::string(text) + "'");
  }
  return neg ? -v : v;
}

}  // namespace distopt
