#pragma once

// Locale-independent CSV output of trajectories.

#include <charconv>
#include <cmath>
#include <fstream>
#include <ostream>
#include <string>
#include <system_error>

#include "costas_lab/integrators.hpp"

namespace costas {

/// 17 significant digits, '.' decimal point, independent of the global locale.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

/// Header `t,theta_delta,g,g1,g2,omega2`; g1/g2 cells are empty for kinds
/// without low-pass filter blocks.
inline void write_trajectory_csv(std::ostream& os, const Trajectory& tr) {
  os << "t,theta_delta,g,g1,g2,omega2\n";
  const bool lpf = tr.has_lpf_outputs();
  for (std::size_t i = 0; i < tr.size(); ++i) {
    os << format_double(tr.times[i]) << ',' << format_double(tr.theta_delta[i]) << ','
       << format_double(tr.g[i]) << ',';
    if (lpf) os << format_double(tr.g1[i]);
    os << ',';
    if (lpf) os << format_double(tr.g2[i]);
    os << ',' << format_double(tr.omega2[i]) << '\n';
  }
}

/// `t,x,theta_delta` for the classic model (scalar loop-filter state).
inline void write_portrait_csv(std::ostream& os, const Trajectory& tr) {
  os << "t,x,theta_delta\n";
  for (std::size_t i = 0; i < tr.size(); ++i) {
    os << format_double(tr.times[i]) << ',' << format_double(tr.state(i)[0]) << ','
       << format_double(tr.theta_delta[i]) << '\n';
  }
}

template <class Writer>
void write_file(const std::string& path, Writer&& w) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::system_error(errno, std::generic_category(), "cannot open " + path);
  w(f);
  if (!f) throw std::system_error(errno, std::generic_category(), "write failed: " + path);
}

}  // namespace costas
