#pragma once

#include <charconv>
#include <string>

namespace stkde {

//! Locale-independent decimal rendering with `digits` significant digits.
inline std::string fmt_double(double v, int digits = 17)
{
  char buf[64];
  auto [ptr, ec] =
    std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, digits);
  return std::string(buf, ptr);
}

//! Fixed-point rendering, used for human-readable tables.
inline std::string fmt_fixed(double v, int decimals)
{
  char buf[64];
  auto [ptr, ec] =
    std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::fixed, decimals);
  return std::string(buf, ptr);
}

} // namespace stkde
