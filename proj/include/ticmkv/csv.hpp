#pragma once

#include <cstdio>
#include <ostream>
#include <string>

namespace ticmkv::csv {

/// Round-trip decimal representation; identical bytes for identical doubles.
inline std::string num(double value) {
  char buffer[32];
  std::snprintf(buffer, sizeof buffer, "%.17g", value);
  return buffer;
}

/// Writes `values...` separated by commas and terminated by a newline.
template <typename... Ts>
void row(std::ostream& out, const Ts&... values) {
  bool first = true;
  auto emit = [&](const auto& v) {
    if (!first) out << ',';
    first = false;
    if constexpr (std::is_floating_point_v<std::decay_t<decltype(v)>>) {
      out << num(v);
    } else {
      out << v;
    }
  };
  (emit(values), ...);
  out << '\n';
}

}  // namespace ticmkv::csv
