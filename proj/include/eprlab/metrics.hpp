#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <vector>

#include "eprlab/fock.hpp"
#include "eprlab/states.hpp"

namespace eprlab {

/// sqrt(<psi|rho|psi>), clamped to [0, 1].
inline double fidelity_pure(const DensityMatrix& rho, const PureState& psi) {
  require_same_space(rho.space(), psi.space(), "fidelity_pure");
  const CVector& v = psi.amplitudes();
  const double overlap = v.dot(rho.matrix() * v).real();
  return std::clamp(std::sqrt(std::max(overlap, 0.0)), 0.0, 1.0);
}

namespace detail {

/// Hermitian square root; eigenvalues below -kPsdTol are rejected, the rest clipped at 0.
inline CMatrix psd_sqrt(const CMatrix& m, const char* what) {
  Eigen::SelfAdjointEigenSolver<CMatrix> es(0.5 * (m + m.adjoint()));
  const RVector& w = es.eigenvalues();
  if (w.minCoeff() < -kPsdTol)
    throw InvariantViolation("positivity", std::string(what) + ": min eigenvalue " +
                                               std::to_string(w.minCoeff()));
  const RVector s = w.cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * s.asDiagonal() * es.eigenvectors().adjoint();
}

}  // namespace detail

/// Uhlmann fidelity Tr sqrt(sqrt(rho1) rho2 sqrt(rho1)), clamped to [0, 1].
inline double fidelity_mixed(const DensityMatrix& rho1, const DensityMatrix& rho2) {
  require_same_space(rho1.space(), rho2.space(), "fidelity_mixed");
  const CMatrix s1 = detail::psd_sqrt(rho1.matrix(), "fidelity_mixed");
  (void)detail::psd_sqrt(rho2.matrix(), "fidelity_mixed");
  const CMatrix m = s1 * rho2.matrix() * s1;
  Eigen::SelfAdjointEigenSolver<CMatrix> es(0.5 * (m + m.adjoint()), Eigen::EigenvaluesOnly);
  const double f = es.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
  return std::clamp(f, 0.0, 1.0);
}

/// log2 of the trace norm of the partial transpose.
inline double log_negativity(const DensityMatrix& rho) {
  const CMatrix pt = partial_transpose(rho);
  const RVector w = hermitian_eigenvalues(0.5 * (pt + pt.adjoint()));
  return std::log2(w.cwiseAbs().sum());
}

struct QfiResult {
  double qfi = 0.0;
  double per_particle = 0.0;  // qfi / n_bar; 0 when n_bar = 0
  bool per_particle_defined = true;
  double n_bar = 0.0;
  Eigen::Vector3d direction = Eigen::Vector3d::UnitX();  // optimal r
};

inline constexpr double kQfiPairFloor = 1e-12;
inline constexpr double kSectorWeightFloor = 1e-15;

/// Basis indices of the fixed-N sector, ordered by n_A.
inline std::vector<Index> sector_indices(const FockSpace& space, int n) {
  std::vector<Index> idx;
  for (int na = std::max(0, n - space.n_cut()); na <= std::min(n, space.n_cut()); ++na)
    idx.push_back(space.index(na, n - na));
  return idx;
}

/// Collective spin components J_x, J_y, J_z on the full N-particle multiplet,
/// basis |k, N - k> for k = 0..N. Levels above the cutoff are kept so that the
/// generators act on the truncated state without losing weight.
inline std::array<CMatrix, 3> sector_spin_ops(int n) {
  const Index m = Index(n) + 1;
  CMatrix jp = CMatrix::Zero(m, m);  // a_A^dagger a_B
  CMatrix jz = CMatrix::Zero(m, m);
  for (Index k = 0; k < m; ++k) {
    jz(k, k) = 0.5 * double(2 * k - n);
    if (k + 1 < m) jp(k + 1, k) = std::sqrt(double(k + 1) * double(n - k));
  }
  const CMatrix jx = 0.5 * (jp + jp.adjoint());
  const CMatrix jy = Complex(0.0, -0.5) * (jp - jp.adjoint());
  return {jx, jy, jz};
}

/// Fixed-N quantum Fisher information maximized over the rotation axis: the
/// largest eigenvalue of sum_N Q_N F^(N), where F^(N)_ab is the QFI matrix of
/// the normalized sector state for generators J_a, J_b.
inline QfiResult qfi_fixed_n(const DensityMatrix& rho) {
  const FockSpace& space = rho.space();
  const int nc = space.n_cut();
  Eigen::Matrix3d total = Eigen::Matrix3d::Zero();
  for (int n = 0; n <= 2 * nc; ++n) {
    const Index m = Index(n) + 1;
    CMatrix block = CMatrix::Zero(m, m);
    for (int i = std::max(0, n - nc); i <= std::min(n, nc); ++i)
      for (int j = std::max(0, n - nc); j <= std::min(n, nc); ++j)
        block(i, j) = rho(space.index(i, n - i), space.index(j, n - j));
    const double q = block.trace().real();
    if (!(q > kSectorWeightFloor)) continue;
    Eigen::SelfAdjointEigenSolver<CMatrix> es(0.5 * (block + block.adjoint()) / q);
    const RVector& p = es.eigenvalues();
    const CMatrix& v = es.eigenvectors();
    const auto ops = sector_spin_ops(n);
    std::array<CMatrix, 3> je;
    for (int a = 0; a < 3; ++a) je[std::size_t(a)] = v.adjoint() * ops[std::size_t(a)] * v;
    Eigen::Matrix3d f = Eigen::Matrix3d::Zero();
    for (Index k = 0; k < m; ++k)
      for (Index l = 0; l < m; ++l) {
        const double s = p(k) + p(l);
        if (s <= kQfiPairFloor) continue;
        const double c = 2.0 * (p(k) - p(l)) * (p(k) - p(l)) / s;
        if (c == 0.0) continue;
        for (int a = 0; a < 3; ++a)
          for (int b = 0; b < 3; ++b)
            f(a, b) += c * (je[std::size_t(a)](k, l) * je[std::size_t(b)](l, k)).real();
      }
    total += q * f;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(0.5 * (total + total.transpose()));
  QfiResult r;
  r.qfi = std::max(es.eigenvalues()(2), 0.0);
  r.direction = es.eigenvectors().col(2);
  r.n_bar = expectation(rho, total_number_op(space)).real();
  if (r.n_bar > 0.0) {
    r.per_particle = r.qfi / r.n_bar;
  } else {
    r.per_particle = 0.0;
    r.per_particle_defined = false;
  }
  return r;
}

struct SqueezingFit {
  double xi = 0.0;
  double phase = 0.0;  // theta of tmsv_rotated(xi, theta) at the optimum
  double fidelity = 0.0;
};

inline constexpr double kFitXiMax = 2.0;
inline constexpr double kFitTol = 1e-4;
inline constexpr int kPhaseScan = 720;

namespace detail {

/// Twin-diagonal block T(n, m) = <n,n|rho|m,m>; pair-state overlaps only see it.
inline CMatrix twin_block(const DensityMatrix& rho) {
  const FockSpace& s = rho.space();
  const int L = s.levels();
  CMatrix t(L, L);
  for (int n = 0; n < L; ++n)
    for (int m = 0; m < L; ++m) t(n, m) = rho(s.index(n, n), s.index(m, m));
  return t;
}

/// <xi,theta|rho|xi,theta> with the cutoff-renormalized pair amplitudes.
inline double pair_overlap(const CMatrix& twin, double xi, double theta) {
  const Index L = twin.rows();
  const double t = std::tanh(xi);
  CVector c(L);
  double norm = 0.0;
  for (Index n = 0; n < L; ++n) {
    const double a = std::pow(t, double(n));
    c(n) = std::polar(a, -double(n) * theta);
    norm += a * a;
  }
  return c.dot(twin * c).real() / norm;
}

inline double golden_max(double lo, double hi, double tol, const auto& f, double* arg) {
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double x1 = b - g * (b - a), x2 = a + g * (b - a);
  double f1 = f(x1), f2 = f(x2);
  while (b - a > tol) {
    if (f1 < f2) {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + g * (b - a);
      f2 = f(x2);
    } else {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - g * (b - a);
      f1 = f(x1);
    }
  }
  *arg = 0.5 * (a + b);
  return f(*arg);
}

/// Best overlap over the pair phase: coarse scan, then golden refinement.
inline double best_phase_overlap(const CMatrix& twin, double xi, double* phase) {
  double best = -1.0, arg = 0.0;
  for (int k = 0; k < kPhaseScan; ++k) {
    const double th = 2.0 * kPi * double(k) / double(kPhaseScan);
    const double v = pair_overlap(twin, xi, th);
    if (v > best) {
      best = v;
      arg = th;
    }
  }
  const double step = 2.0 * kPi / double(kPhaseScan);
  double refined = arg;
  const double v = golden_max(arg - step, arg + step, 1e-10,
                              [&](double th) { return pair_overlap(twin, xi, th); }, &refined);
  if (v >= best) {
    best = v;
    arg = refined;
  }
  *phase = std::fmod(std::fmod(arg, 2.0 * kPi) + 2.0 * kPi, 2.0 * kPi);
  return best;
}

}  // namespace detail

/// Maximizes fidelity_pure(rho, tmsv_rotated(xi, theta)) over xi in [0, 2]
/// (golden section to 1e-4) and the pair phase theta.
inline SqueezingFit fit_squeezing(const DensityMatrix& rho) {
  const CMatrix twin = detail::twin_block(rho);
  double phase = 0.0;
  auto objective = [&](double xi) { return detail::best_phase_overlap(twin, xi, &phase); };
  SqueezingFit fit;
  const double best = detail::golden_max(0.0, kFitXiMax, kFitTol, objective, &fit.xi);
  detail::best_phase_overlap(twin, fit.xi, &fit.phase);
  fit.fidelity = std::clamp(std::sqrt(std::max(best, 0.0)), 0.0, 1.0);
  return fit;
}

/// Fidelity to the pair state of squeezing xi at its best-matching phase.
inline double fidelity_to_pair_state(const DensityMatrix& rho, double xi, double* phase = nullptr) {
  double ph = 0.0;
  const double v = detail::best_phase_overlap(detail::twin_block(rho), xi, &ph);
  if (phase) *phase = ph;
  return std::clamp(std::sqrt(std::max(v, 0.0)), 0.0, 1.0);
}

struct MetricsReport {
  std::optional<double> target_xi;
  std::optional<double> fidelity_to_target;
  double log_negativity = 0.0;
  QfiResult qfi;
  SqueezingFit fit;
  double non_twin_population = 0.0;
  double purity = 0.0;
};

inline MetricsReport metrics_report(const DensityMatrix& rho,
                                    std::optional<double> target_xi = std::nullopt) {
  MetricsReport r;
  r.log_negativity = log_negativity(rho);
  r.qfi = qfi_fixed_n(rho);
  r.fit = fit_squeezing(rho);
  r.non_twin_population = non_twin_population(rho);
  r.purity = rho.purity();
  if (target_xi) {
    r.target_xi = target_xi;
    r.fidelity_to_target = fidelity_to_pair_state(rho, *target_xi);
  }
  return r;
}

}  // namespace eprlab
