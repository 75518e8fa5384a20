#pragma once

#include <charconv>
#include <string>

namespace pwmsi {

/// %.17g formatting: reads back to the identical double.
inline std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

}  // namespace pwmsi
