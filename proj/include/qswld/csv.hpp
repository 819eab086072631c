#pragma once

#include <complex>
#include <cstdio>
#include <ostream>
#include <string>

#include <Eigen/Dense>

namespace qswld::csv {

// 17 significant digits round-trips every finite double.
inline std::string number(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

// Complex entries are written as "re+imj" so a cell stays a single token.
inline std::string number(std::complex<double> z) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "%.17g%+.17gj", z.real(), z.imag());
  return buf;
}

template <typename Derived>
void write_matrix(std::ostream& os, const Eigen::MatrixBase<Derived>& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c) os << ',';
      os << number(m(r, c));
    }
    os << '\n';
  }
}

}  // namespace qswld::csv
