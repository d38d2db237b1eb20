#pragma once

#include <array>
#include <charconv>
#include <string>

namespace fedhpc {

// Shortest round-trip decimal form; identical bytes on every conforming platform.
inline std::string format_double(double x) {
  std::array<char, 64> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), x);
  return ec == std::errc{} ? std::string(buf.data(), end) : std::string("nan");
}

inline std::string format_fixed(double x, int precision) {
  std::array<char, 64> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), x, std::chars_format::fixed, precision);
  return ec == std::errc{} ? std::string(buf.data(), end) : std::string("nan");
}

}  // namespace fedhpc
