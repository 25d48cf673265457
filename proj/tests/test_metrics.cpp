#include <gtest/gtest.h>

#include <cmath>

#include "eprlab/metrics.hpp"

using namespace eprlab;

namespace {

struct PairOracle {
  double xi, log_negativity, qfi, n_bar;
};

// Truncated, renormalized pair states at n_cut = 10 (independent dense computation).
constexpr PairOracle kOracles[] = {
    {0.3, 0.865613324916929, 0.405327783221461, 0.1854652182061},
    {0.63, 1.81307916152876, 2.62650546782134, 0.904478971428228},
    {0.9, 2.52334406793749, 8.45491774465837, 2.09319196561745},
};

}  // namespace

TEST(LogNegativity, PairStateOracles) {
  for (const auto& o : kOracles) {
    const DensityMatrix rho = DensityMatrix::pure(tmsv(o.xi, FockSpace(10)));
    EXPECT_NEAR(log_negativity(rho), o.log_negativity, 1e-9) << o.xi;
  }
}

TEST(LogNegativity, ConvergesToClosedForm) {
  for (double xi : {0.3, 0.63, 0.9}) {
    const DensityMatrix rho = DensityMatrix::pure(tmsv(xi, FockSpace(30)));
    EXPECT_NEAR(log_negativity(rho), 2.0 * xi / std::log(2.0), 1e-3) << xi;
  }
}

TEST(LogNegativity, SeparableStatesAreZero) {
  EXPECT_NEAR(log_negativity(DensityMatrix::pure(PureState::basis(FockSpace(3), 0, 0))), 0.0, 1e-12);
  EXPECT_NEAR(log_negativity(DensityMatrix::pure(PureState::basis(FockSpace(3), 2, 1))), 0.0, 1e-12);
  EXPECT_NEAR(log_negativity(DensityMatrix::maximally_mixed(FockSpace(3))), 0.0, 1e-12);
}

TEST(LogNegativity, PhaseNoisyOracle) {
  EXPECT_NEAR(log_negativity(phase_noisy_state(0.63, 0.36, FockSpace(10))), 1.49487700081716, 1e-9);
}

TEST(Qfi, PairStateOracles) {
  for (const auto& o : kOracles) {
    const QfiResult q = qfi_fixed_n(DensityMatrix::pure(tmsv(o.xi, FockSpace(10))));
    EXPECT_NEAR(q.qfi, o.qfi, 1e-8) << o.xi;
    EXPECT_NEAR(q.n_bar, o.n_bar, 1e-12) << o.xi;
    EXPECT_TRUE(q.per_particle_defined);
    EXPECT_NEAR(q.per_particle, o.qfi / o.n_bar, 1e-8);
  }
}

TEST(Qfi, ConvergesToClosedForm) {
  for (double xi : {0.3, 0.63, 0.9}) {
    const QfiResult q = qfi_fixed_n(DensityMatrix::pure(tmsv(xi, FockSpace(30))));
    EXPECT_NEAR(q.qfi, std::pow(std::sinh(2.0 * xi), 2), 1e-3 * std::pow(std::sinh(2.0 * xi), 2));
  }
}

TEST(Qfi, VacuumAndTwinFock) {
  const QfiResult v = qfi_fixed_n(DensityMatrix::pure(PureState::basis(FockSpace(3), 0, 0)));
  EXPECT_EQ(v.qfi, 0.0);
  EXPECT_EQ(v.n_bar, 0.0);
  EXPECT_FALSE(v.per_particle_defined);
  EXPECT_EQ(v.per_particle, 0.0);
  // |n,n> has QFI N(N+2)/2 for rotations about a transverse axis.
  const QfiResult t = qfi_fixed_n(DensityMatrix::pure(PureState::basis(FockSpace(4), 2, 2)));
  EXPECT_NEAR(t.qfi, 4.0 * 6.0 / 2.0, 1e-10);
  EXPECT_NEAR(t.n_bar, 4.0, 1e-12);
  EXPECT_NEAR(std::abs(t.direction(2)), 0.0, 1e-10);
}

TEST(Qfi, MixtureOfSectorsIsWeighted) {
  const FockSpace s(3);
  CMatrix m = CMatrix::Zero(s.dim(), s.dim());
  m(s.index(1, 1), s.index(1, 1)) = 0.5;
  m(s.index(0, 0), s.index(0, 0)) = 0.5;
  const QfiResult q = qfi_fixed_n(DensityMatrix::from_matrix(s, m));
  EXPECT_NEAR(q.qfi, 0.5 * 2.0 * 4.0 / 2.0, 1e-10);
}

TEST(Fidelity, PureAndMixedAgree) {
  const FockSpace s(6);
  const PureState psi = tmsv_rotated(0.4, 0.3, s);
  const DensityMatrix rho = phase_noisy_state(0.4, 0.5, s);
  EXPECT_NEAR(fidelity_pure(DensityMatrix::pure(psi), psi), 1.0, 1e-12);
  EXPECT_NEAR(fidelity_mixed(rho, DensityMatrix::pure(psi)), fidelity_pure(rho, psi), 1e-6);
  EXPECT_NEAR(fidelity_mixed(rho, DensityMatrix::pure(psi)),
              fidelity_mixed(DensityMatrix::pure(psi), rho), 1e-6);
  EXPECT_NEAR(fidelity_mixed(rho, rho), 1.0, 1e-6);
  EXPECT_NEAR(fidelity_pure(DensityMatrix::pure(PureState::basis(s, 1, 1)), PureState::basis(s, 0, 0)),
              0.0, 1e-15);
  EXPECT_THROW(fidelity_pure(rho, PureState::basis(FockSpace(2), 0, 0)), DimensionMismatch);
}

TEST(FitSqueezing, RecoversParameters) {
  const DensityMatrix rho = DensityMatrix::pure(tmsv_rotated(0.55, 1.2, FockSpace(12)));
  const SqueezingFit f = fit_squeezing(rho);
  EXPECT_NEAR(f.xi, 0.55, 1e-3);
  EXPECT_NEAR(std::remainder(f.phase - 1.2, 2.0 * kPi), 0.0, 1e-3);
  EXPECT_NEAR(f.fidelity, 1.0, 1e-6);
  double ph = 0.0;
  EXPECT_NEAR(fidelity_to_pair_state(rho, 0.55, &ph), 1.0, 1e-6);
  EXPECT_NEAR(std::remainder(ph - 1.2, 2.0 * kPi), 0.0, 1e-3);
}

TEST(MetricsReport, VacuumIsAllZero) {
  const MetricsReport r = metrics_report(DensityMatrix::pure(PureState::basis(FockSpace(4), 0, 0)), 0.0);
  EXPECT_NEAR(r.log_negativity, 0.0, 1e-12);
  EXPECT_EQ(r.qfi.qfi, 0.0);
  EXPECT_FALSE(r.qfi.per_particle_defined);
  EXPECT_NEAR(r.fit.xi, 0.0, 1e-3);
  ASSERT_TRUE(r.fidelity_to_target.has_value());
  EXPECT_NEAR(*r.fidelity_to_target, 1.0, 1e-12);
  EXPECT_EQ(r.non_twin_population, 0.0);
  EXPECT_NEAR(r.purity, 1.0, 1e-12);
}

TEST(MetricsReport, NonTwinPopulation) {
  const FockSpace s(2);
  CMatrix m = CMatrix::Zero(s.dim(), s.dim());
  m(s.index(0, 0), s.index(0, 0)) = 0.7;
  m(s.index(1, 0), s.index(1, 0)) = 0.3;
  const MetricsReport r = metrics_report(DensityMatrix::from_matrix(s, m));
  EXPECT_NEAR(r.non_twin_population, 0.3, 1e-15);
  EXPECT_FALSE(r.target_xi.has_value());
  EXPECT_NEAR(r.purity, 0.58, 1e-15);
}
