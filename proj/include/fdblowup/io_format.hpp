#pragma once

#include <cmath>
#include <cstdio>
#include <string>

namespace fdblowup {

/// Full-precision scientific notation, round-trippable ("%.17e"). NaN prints as "nan".
inline std::string format_sci(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17e", v);
  return buf;
}

}  // namespace fdblowup
