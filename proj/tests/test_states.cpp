#include <gtest/gtest.h>

#include <cmath>

#include "eprlab/fock.hpp"
#include "eprlab/states.hpp"

using namespace eprlab;

TEST(SqueezeParam, Examples) {
  EXPECT_EQ(squeeze_param({kSpinDynamicsRate, 0.0}), 0.0);
  EXPECT_NEAR(squeeze_param({kSpinDynamicsRate, 26e-3}), 0.833, 5e-4);
  const double t_threshold = 0.5 * std::log(2.0) / kSpinDynamicsRate;
  EXPECT_NEAR(t_threshold, 10.8e-3, 0.05e-3);
  EXPECT_LT(t_threshold, 11e-3);
  EXPECT_THROW(squeeze_param({-1.0, 0.1}), InvalidArgument);
  EXPECT_THROW(squeeze_param({1.0, -0.1}), InvalidArgument);
}

TEST(Tmsv, ZeroSqueezingIsVacuum) {
  const PureState psi = tmsv(0.0, FockSpace(4));
  EXPECT_NEAR(std::abs(psi.amplitude(0, 0)), 1.0, 1e-15);
  EXPECT_NEAR(psi.amplitudes().norm(), 1.0, 1e-15);
}

TEST(Tmsv, CoefficientRatioAndPhase) {
  const double xi = 0.63;
  const PureState psi = tmsv(xi, FockSpace(10));
  const Complex c0 = psi.amplitude(0, 0), c1 = psi.amplitude(1, 1);
  EXPECT_NEAR(std::norm(c1) / std::norm(c0), std::pow(std::tanh(xi), 2), 1e-14);
  EXPECT_NEAR(std::arg(c1 / c0), -kPi / 2.0, 1e-14);
  EXPECT_NEAR(psi.amplitudes().norm(), 1.0, 1e-12);
  for (int a = 0; a <= 10; ++a)
    for (int b = 0; b <= 10; ++b)
      if (a != b) EXPECT_EQ(psi.amplitude(a, b), Complex(0.0));
}

TEST(Tmsv, DiagonalIsGeometric) {
  const double xi = 0.9;
  const FockSpace s(10);
  const PureState psi = tmsv(xi, s);
  const double lambda = std::pow(std::tanh(xi), 2);
  const double renorm = 1.0 - std::pow(lambda, 11);
  for (int n = 0; n <= 10; ++n)
    EXPECT_NEAR(std::norm(psi.amplitude(n, n)), (1.0 - lambda) * std::pow(lambda, n) / renorm, 1e-14);
}

TEST(Tmsv, TruncationTailDiagnostic) {
  const PureState small = tmsv(0.63, FockSpace(10));
  EXPECT_NEAR(small.truncation_tail(), std::pow(std::tanh(0.63), 22), 1e-15);
  EXPECT_FALSE(small.tail_warning());
  const PureState big = tmsv(1.5, FockSpace(10));
  EXPECT_TRUE(big.tail_warning());
  EXPECT_THROW(tmsv(-0.1, FockSpace(3)), InvalidArgument);
}

TEST(TmsvRotated, Examples) {
  EXPECT_NEAR(std::abs(tmsv_rotated(0.0, 0.0, FockSpace(3)).amplitude(0, 0)), 1.0, 1e-15);
  const double xi = 0.5;
  const FockSpace s(8);
  const PureState r = tmsv_rotated(xi, kPi / 2.0, s);
  const double t = std::tanh(xi), c = std::cosh(xi);
  const double renorm = std::sqrt(1.0 - std::pow(t, 18));
  Complex minus_i_pow(1.0, 0.0);
  for (int n = 0; n <= 8; ++n) {
    const Complex want = minus_i_pow * std::pow(t, n) / c / renorm;
    EXPECT_LT(std::abs(r.amplitude(n, n) - want), 1e-14) << n;
    minus_i_pow *= Complex(0.0, -1.0);
  }
  // pi/2 reproduces the (-i tanh)^n convention.
  EXPECT_LT((r.amplitudes() - tmsv(xi, s).amplitudes()).norm(), 1e-14);
}

TEST(TmsvRotated, NumberDistributionsIndependentOfPhase) {
  const FockSpace s(6);
  const auto ref = number_distributions(DensityMatrix::pure(tmsv_rotated(0.7, 0.0, s)));
  for (double th : {0.4, 1.9, 3.3, 5.8}) {
    const auto d = number_distributions(DensityMatrix::pure(tmsv_rotated(0.7, th, s)));
    for (std::size_t k = 0; k < d.total.size(); ++k) {
      EXPECT_NEAR(d.total[k], ref.total[k], 1e-15);
      EXPECT_NEAR(d.difference[k], ref.difference[k], 1e-15);
    }
  }
}

TEST(PhaseNoiseKernel, OracleValues) {
  // Gaussian of width 0.36 integrated against cos(k theta) over [-pi, pi].
  EXPECT_NEAR(phase_noise_kernel(0, 0.36), 1.0, 1e-12);
  EXPECT_NEAR(phase_noise_kernel(1, 0.36), 0.937254895612678, 1e-12);
  EXPECT_NEAR(phase_noise_kernel(2, 0.36), 0.771668673874526, 1e-12);
  EXPECT_NEAR(phase_noise_kernel(3, 0.36), 0.558109555416683, 1e-12);
  EXPECT_EQ(phase_noise_kernel(4, 0.0), 1.0);
  EXPECT_NEAR(phase_noise_kernel(0, 50.0), 0.0500995991109788, 1e-12);
  EXPECT_NEAR(phase_noise_kernel(1, 50.0), 2.0037e-05, 1e-8);
}

TEST(PhaseNoisyState, ZeroWidthIsPureProjector) {
  const FockSpace s(10);
  for (double xi : {0.2, 0.63, 0.9}) {
    const DensityMatrix rho = phase_noisy_state(xi, 0.0, s);
    const DensityMatrix pure = DensityMatrix::pure(tmsv_rotated(xi, 0.0, s));
    EXPECT_LT((rho.matrix() - pure.matrix()).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(PhaseNoisyState, WideNoiseLeavesGeometricDiagonal) {
  const FockSpace s(10);
  const double xi = 0.63;
  const DensityMatrix rho = phase_noisy_state(xi, 50.0, s);
  const double lambda = std::pow(std::tanh(xi), 2);
  const double renorm = 1.0 - std::pow(lambda, 11);
  for (int n = 0; n <= 10; ++n) {
    EXPECT_NEAR(rho.element(n, n, n, n).real(),
                (1.0 - lambda) * std::pow(lambda, n) / renorm, 1e-12);
    for (int m = 0; m <= 10; ++m)
      if (m != n) EXPECT_LT(std::abs(rho.element(n, n, m, m)), 1e-3 * std::sqrt(lambda));
  }
}

TEST(PhaseNoisyState, PurityOracle) {
  // Direct matrix computation with an independently integrated kernel.
  const DensityMatrix rho = phase_noisy_state(0.63, 0.36, FockSpace(10));
  EXPECT_NEAR(rho.purity(), 0.88424378213591, 1e-9);
  EXPECT_GT(rho.purity(), 0.525064594018527);
  EXPECT_LT(rho.purity(), 1.0);
}

TEST(PhaseNoisyState, InvariantsAndTwinSupport) {
  const FockSpace s(8);
  for (double xi : {0.0, 0.3, 0.8})
    for (double sigma : {0.0, 0.1, 0.36, 2.0}) {
      const DensityMatrix rho = phase_noisy_state(xi, sigma, s);
      const InvariantReport r = check_density_invariants(rho.matrix());
      EXPECT_FALSE(r.violated.has_value()) << xi << " " << sigma;
      for (Index i = 0; i < s.dim(); ++i)
        for (Index j = 0; j < s.dim(); ++j) {
          const auto [ia, ib] = s.occupations(i);
          const auto [ja, jb] = s.occupations(j);
          if (ia != ib || ja != jb) EXPECT_EQ(rho(i, j), Complex(0.0));
        }
    }
  EXPECT_THROW(phase_noisy_state(0.5, -0.1, s), InvalidArgument);
}

TEST(AnalyticVariances, Examples) {
  const auto v0 = analytic_variances(0.0);
  EXPECT_EQ(v0.squeezed, 1.0);
  EXPECT_EQ(v0.antisqueezed, 1.0);
  const auto vt = analytic_variances(0.5 * std::log(2.0));
  EXPECT_NEAR(vt.squeezed * vt.squeezed, 0.25, 1e-15);
  const auto v = analytic_variances(0.63);
  EXPECT_NEAR(v.squeezed, 0.284, 5e-4);
  EXPECT_NEAR(v.squeezed * v.squeezed, 0.0804596, 1e-6);
  for (double xi : {0.1, 0.63, 1.7}) {
    const auto w = analytic_variances(xi);
    EXPECT_NEAR(w.squeezed * w.antisqueezed, 1.0, 1e-15);
  }
}

TEST(NoiseModel, PresetsAndValidation) {
  const NoiseModel f = NoiseModel::fig3();
  EXPECT_NEAR(f.sigma_phase, 0.044 * kPi, 1e-15);
  EXPECT_EQ(f.rf_rel_noise, 0.004);
  const NoiseModel t = NoiseModel::tomo();
  EXPECT_EQ(2.0 * t.sigma_phase, 0.36);
  EXPECT_EQ(t.sum_variance_shift, 0.12);
  EXPECT_EQ(NoiseModel::by_name("none").sigma_phase, 0.0);
  EXPECT_THROW(NoiseModel::by_name("bogus"), InvalidArgument);
  NoiseModel bad;
  bad.rf_rel_noise = -0.1;
  EXPECT_THROW(bad.validate(), InvalidArgument);
}
