#pragma once

#include <charconv>
#include <string>

namespace cleartrade {

/// Shortest decimal text that parses back to exactly `value`.
inline std::string format_real(double value) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, ptr);
}

/// Fixed-precision text for human-facing output (SVG coordinates, labels).
inline std::string format_fixed(double value, int precision) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value, std::chars_format::fixed, precision);
  std::string s(buf, ptr);
  if (s == "-0" || s.find_first_not_of("-0.") == std::string::npos) s.erase(0, s[0] == '-' ? 1 : 0);
  return s;
}

}  // namespace cleartrade
