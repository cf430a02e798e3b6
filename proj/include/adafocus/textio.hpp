#ifndef ADAFOCUS_TEXTIO_HPP
#define ADAFOCUS_TEXTIO_HPP

#include <cstdio>
#include <span>
#include <string>

namespace adafocus {

// Floats in data files are serialized with 9 significant digits.
inline std::string fmt_g9(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

inline void append_g9_array(std::string& out, std::span<const double> values) {
  out += '[';
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ',';
    out += fmt_g9(values[i]);
  }
  out += ']';
}

}  // namespace adafocus

#endif  // ADAFOCUS_TEXTIO_HPP
