#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <span>

#include "eprlab/fock.hpp"

namespace eprlab {

/// Normalized harmonic-oscillator eigenfunctions <n|x> for n = 0..out.size()-1,
///   psi_n(x) = exp(-x^2/2) H_n(x) / (pi^{1/4} sqrt(2^n n!)),
/// evaluated with the two-term recurrence on the normalized functions so no
/// factorials or large Hermite values appear.
inline void hermite_functions(double x, std::span<double> out) {
  if (out.empty()) return;
  out[0] = std::exp(-0.5 * x * x) / std::pow(kPi, 0.25);
  if (out.size() == 1) return;
  out[1] = std::sqrt(2.0) * x * out[0];
  for (std::size_t n = 1; n + 1 < out.size(); ++n) {
    const double k = double(n);
    out[n + 1] = std::sqrt(2.0 / (k + 1.0)) * x * out[n] - std::sqrt(k / (k + 1.0)) * out[n - 1];
  }
}

inline RVector hermite_functions(double x, int n_max) {
  RVector v(n_max + 1);
  hermite_functions(x, std::span<double>(v.data(), std::size_t(v.size())));
  return v;
}

/// Column j holds psi_0..psi_{n_max} at xs[j].
template <typename Range>
RMatrix hermite_table(const Range& xs, int n_max) {
  RMatrix t(n_max + 1, Index(std::size(xs)));
  Index j = 0;
  for (double x : xs) {
    hermite_functions(x, std::span<double>(t.col(j).data(), std::size_t(n_max + 1)));
    ++j;
  }
  return t;
}

}  // namespace eprlab
