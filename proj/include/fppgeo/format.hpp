#pragma once

#include <charconv>
#include <cmath>
#include <string>

#include "fppgeo/lattice.hpp"

namespace fppgeo {

/// Round-trip exact decimal form (17 significant digits, shortest exponent form).
inline std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

/// Coordinates joined by `sep`, e.g. "1,-2".
inline std::string join_coords(const Vertex& v, char sep = ',') {
  std::string s;
  for (int i = 0; i < v.dim(); ++i) {
    if (i) s += sep;
    s += std::to_string(v[i]);
  }
  return s;
}

}  // namespace fppgeo
