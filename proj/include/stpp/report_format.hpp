#pragma once

#include <cstdio>
#include <string>

namespace stpp {

/// Text that round-trips a double exactly.
inline std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace stpp
