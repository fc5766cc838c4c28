#pragma once

#include <charconv>
#include <string>

namespace probcal {

/// 17 significant digits; parses back to the identical double.
inline std::string fmt_double(double x) {
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof(buf), x, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

}  // namespace probcal
