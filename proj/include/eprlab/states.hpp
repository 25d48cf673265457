#pragma once

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <string>

#include "eprlab/fock.hpp"

namespace eprlab {

/// Spin-dynamics rate of the pair source, rad/s.
inline constexpr double kSpinDynamicsRate = 2.0 * kPi * 5.1;
/// Evolution time that minimizes the EPR parameter in the experiment, s.
inline constexpr double kOptimalSqueezingTime = 26e-3;

struct SqueezingSchedule {
  double omega = kSpinDynamicsRate;  // rad/s
  double t = 0.0;                    // s

  void validate() const {
    if (!(omega >= 0.0) || !(t >= 0.0))
      throw InvalidArgument("SqueezingSchedule: omega and t must be nonnegative");
  }
};

/// xi = Omega t.
inline double squeeze_param(const SqueezingSchedule& s) {
  s.validate();
  return s.omega * s.t;
}

/// Pair-phase noise width of the tomography noise model, rad.
inline constexpr double kTomoPairPhaseNoise = 0.36;
/// Variance added to the quadrature sum in the tomography noise model.
inline constexpr double kTomoSumShift = 0.12;

struct NoiseModel {
  double sigma_phase = 0.0;         // rad, Gaussian local-oscillator phase jitter width
  double rf_rel_noise = 0.0;        // relative per-shot jitter of the transfer fraction s^2
  double sum_variance_shift = 0.0;  // variance added along the quadrature-sum direction
  double detection_noise_atoms = 0.0;  // per-count Gaussian readout noise; off unless set

  void validate() const {
    if (!(sigma_phase >= 0.0) || !(rf_rel_noise >= 0.0) || !(sum_variance_shift >= 0.0) ||
        !(detection_noise_atoms >= 0.0))
      throw InvalidArgument("NoiseModel: all fields must be nonnegative");
  }

  static NoiseModel none() { return {}; }
  /// Squeezing-dynamics parameters: 0.4% rf intensity noise, 0.044 pi phase noise.
  static NoiseModel fig3() { return {0.044 * kPi, 0.004, 0.0, 0.0}; }
  /// Tomography noise model: width 0.36 on the pair phase, +0.12 on the sum variance.
  /// The pair phase is twice the readout phase, so the jitter width here is 0.18.
  static NoiseModel tomo() { return {kTomoPairPhaseNoise / 2.0, 0.0, kTomoSumShift, 0.0}; }

  static NoiseModel by_name(const std::string& name) {
    if (name == "none") return none();
    if (name == "fig3") return fig3();
    if (name == "tomo") return tomo();
    throw InvalidArgument("unknown noise preset '" + name + "' (valid: none, fig3, tomo)");
  }
};

namespace detail {

inline void require_xi(double xi) {
  if (!(xi >= 0.0) || !std::isfinite(xi)) throw InvalidArgument("squeezing parameter must be >= 0");
}

/// Probability mass of the ideal pair distribution beyond the cutoff: lambda^(n_cut+1).
inline double tmsv_tail(double xi, const FockSpace& space) {
  const double lambda = std::pow(std::tanh(xi), 2);
  return std::pow(lambda, space.n_cut() + 1);
}

}  // namespace detail

/// sum_n (-i tanh xi)^n / cosh xi |n,n>, truncated and renormalized.
inline PureState tmsv(double xi, const FockSpace& space) {
  detail::require_xi(xi);
  const double t = std::tanh(xi);
  const double c = std::cosh(xi);
  CVector v = CVector::Zero(space.dim());
  Complex coeff(1.0 / c, 0.0);
  for (int n = 0; n <= space.n_cut(); ++n) {
    v(space.index(n, n)) = coeff;
    coeff *= Complex(0.0, -t);
  }
  return PureState(space, std::move(v), detail::tmsv_tail(xi, space));
}

/// |xi, theta> = sum_n e^{-i n theta} tanh^n xi / cosh xi |n,n>.
/// theta = pi/2 reproduces tmsv(xi).
inline PureState tmsv_rotated(double xi, double theta, const FockSpace& space) {
  detail::require_xi(xi);
  const double t = std::tanh(xi);
  const double c = std::cosh(xi);
  CVector v = CVector::Zero(space.dim());
  for (int n = 0; n <= space.n_cut(); ++n)
    v(space.index(n, n)) = std::polar(std::pow(t, n) / c, -double(n) * theta);
  return PureState(space, std::move(v), detail::tmsv_tail(xi, space));
}

/// P~_sigma(k) = integral over [-pi, pi] of the Gaussian P_sigma(theta) e^{i k theta}.
/// The Gaussian is even, so the result is real.
inline double phase_noise_kernel(int k, double sigma) {
  if (!(sigma >= 0.0)) throw InvalidArgument("phase noise width must be >= 0");
  if (sigma == 0.0) return 1.0;
  const double norm = 1.0 / std::sqrt(2.0 * kPi * sigma * sigma);
  auto f = [&](double th) { return norm * std::exp(-th * th / (2.0 * sigma * sigma)) * std::cos(k * th); };
  using Quad = boost::math::quadrature::gauss_kronrod<double, 61>;
  // Integrate [0, pi] twice; split so a narrow peak at zero cannot slip between nodes.
  const double split = std::min(kPi, 8.0 * sigma);
  double half = Quad::integrate(f, 0.0, split, 15, 1e-14);
  if (split < kPi) half += Quad::integrate(f, split, kPi, 15, 1e-14);
  return 2.0 * half;
}

/// rho_pn(sigma) = sum_{n,m} P~_sigma(n-m) tanh^{n+m} xi / cosh^2 xi |n,n><m,m|,
/// trace renormalized (absorbs both the cutoff tail and the Gaussian mass outside +-pi).
inline DensityMatrix phase_noisy_state(double xi, double sigma, const FockSpace& space) {
  detail::require_xi(xi);
  if (!(sigma >= 0.0)) throw InvalidArgument("phase noise width must be >= 0");
  const int L = space.levels();
  std::vector<double> kernel(static_cast<std::size_t>(L));
  for (int k = 0; k < L; ++k) kernel[std::size_t(k)] = phase_noise_kernel(k, sigma);
  const double t = std::tanh(xi);
  const double c2 = std::pow(std::cosh(xi), 2);
  CMatrix m = CMatrix::Zero(space.dim(), space.dim());
  for (int n = 0; n < L; ++n)
    for (int k = 0; k < L; ++k)
      m(space.index(n, n), space.index(k, k)) =
          kernel[std::size_t(std::abs(n - k))] * std::pow(t, n + k) / c2;
  return DensityMatrix::from_matrix(space, std::move(m));
}

struct AnalyticVariances {
  double squeezed;       // e^{-2 xi}
  double antisqueezed;   // e^{+2 xi}
};

inline AnalyticVariances analytic_variances(double xi) {
  detail::require_xi(xi);
  return {std::exp(-2.0 * xi), std::exp(2.0 * xi)};
}

}  // namespace eprlab
