#pragma once

// Truncated two-mode Fock space: basis |n_A, n_B> with 0 <= n_A, n_B <= n_cut,
// stored row-major in (n_A, n_B). Every matrix in the library uses this layout.

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <complex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "eprlab/errors.hpp"

namespace eprlab {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RMatrix = Eigen::MatrixXd;
using RVector = Eigen::VectorXd;
using Index = Eigen::Index;

inline constexpr double kPi = 3.14159265358979323846;

inline constexpr double kHermitianTol = 1e-10;
inline constexpr double kTraceTol = 1e-10;
inline constexpr double kPsdTol = 1e-8;
inline constexpr double kTailWarning = 1e-3;

enum class Mode { A, B };
enum class Ladder { annihilate, create };

class FockSpace {
 public:
  explicit FockSpace(int n_cut) : n_cut_(n_cut) {
    if (n_cut < 0) throw InvalidArgument("FockSpace: n_cut must be nonnegative");
  }

  int n_cut() const noexcept { return n_cut_; }
  int levels() const noexcept { return n_cut_ + 1; }
  Index dim() const noexcept { return Index(levels()) * levels(); }

  Index index(int n_a, int n_b) const {
    if (n_a < 0 || n_b < 0 || n_a > n_cut_ || n_b > n_cut_)
      throw InvalidArgument("FockSpace::index: occupation outside cutoff");
    return Index(n_a) * levels() + n_b;
  }
  std::pair<int, int> occupations(Index i) const {
    return {static_cast<int>(i / levels()), static_cast<int>(i % levels())};
  }
  int total(Index i) const {
    auto [a, b] = occupations(i);
    return a + b;
  }

  friend bool operator==(const FockSpace&, const FockSpace&) = default;

 private:
  int n_cut_;
};

inline void require_same_space(const FockSpace& a, const FockSpace& b, const char* what) {
  if (!(a == b))
    throw DimensionMismatch(std::string(what) + ": n_cut " + std::to_string(a.n_cut()) +
                            " vs " + std::to_string(b.n_cut()));
}

/// Normalized state vector. The amplitudes are renormalized on construction; the
/// probability mass lost to the cutoff is kept as a diagnostic.
class PureState {
 public:
  PureState(FockSpace space, CVector amplitudes, double truncation_tail = 0.0)
      : space_(space), amp_(std::move(amplitudes)), tail_(truncation_tail) {
    if (amp_.size() != space_.dim())
      throw DimensionMismatch("PureState: amplitude length does not match space");
    const double norm = amp_.norm();
    if (!(norm > 0.0)) throw InvalidArgument("PureState: zero vector");
    amp_ /= norm;
  }

  static PureState basis(FockSpace space, int n_a, int n_b) {
    CVector v = CVector::Zero(space.dim());
    v(space.index(n_a, n_b)) = 1.0;
    return PureState(space, std::move(v));
  }

  const FockSpace& space() const noexcept { return space_; }
  const CVector& amplitudes() const noexcept { return amp_; }
  Complex amplitude(int n_a, int n_b) const { return amp_(space_.index(n_a, n_b)); }
  double truncation_tail() const noexcept { return tail_; }
  bool tail_warning() const noexcept { return tail_ > kTailWarning; }

 private:
  FockSpace space_;
  CVector amp_;
  double tail_;
};

/// Outcome of checking a square matrix against the density-matrix invariants.
struct InvariantReport {
  double hermiticity_error = 0.0;  // max |rho - rho^dagger|
  double trace_error = 0.0;        // |Tr rho - 1|
  double min_eigenvalue = 0.0;
  std::optional<std::string> violated;
};

inline double hermiticity_error(const CMatrix& m) {
  return (m - m.adjoint()).cwiseAbs().maxCoeff();
}

inline RVector hermitian_eigenvalues(const CMatrix& m) {
  Eigen::SelfAdjointEigenSolver<CMatrix> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

inline InvariantReport check_density_invariants(const CMatrix& m) {
  InvariantReport r;
  if (m.rows() != m.cols() || m.rows() == 0) {
    r.violated = "shape";
    return r;
  }
  r.hermiticity_error = hermiticity_error(m);
  r.trace_error = std::abs(m.trace() - Complex(1.0, 0.0));
  r.min_eigenvalue = hermitian_eigenvalues(0.5 * (m + m.adjoint())).minCoeff();
  if (r.hermiticity_error > kHermitianTol)
    r.violated = "hermiticity";
  else if (r.trace_error > kTraceTol)
    r.violated = "unit-trace";
  else if (r.min_eigenvalue < -kPsdTol)
    r.violated = "positivity";
  return r;
}

class DensityMatrix {
 public:
  /// Builds from a Hermitian PSD matrix, renormalizing the trace.
  static DensityMatrix from_matrix(FockSpace space, CMatrix m) {
    check_shape(space, m);
    if (hermiticity_error(m) > kHermitianTol)
      throw InvariantViolation("hermiticity", "matrix is not Hermitian");
    const double tr = m.trace().real();
    if (!(tr > 0.0)) throw InvariantViolation("unit-trace", "trace is not positive");
    m = (0.5 * (m + m.adjoint()) / tr).eval();
    const double lmin = hermitian_eigenvalues(m).minCoeff();
    if (lmin < -kPsdTol)
      throw InvariantViolation("positivity", "min eigenvalue " + std::to_string(lmin));
    return DensityMatrix(space, std::move(m));
  }

  /// Builds without touching the matrix; every invariant must already hold.
  static DensityMatrix from_matrix_strict(FockSpace space, CMatrix m) {
    check_shape(space, m);
    const InvariantReport r = check_density_invariants(m);
    if (r.violated) {
      std::string detail = "hermiticity error " + std::to_string(r.hermiticity_error) +
                           ", trace error " + std::to_string(r.trace_error) +
                           ", min eigenvalue " + std::to_string(r.min_eigenvalue);
      throw InvariantViolation(*r.violated, detail);
    }
    return DensityMatrix(space, std::move(m));
  }

  /// Trusted construction for iterates whose invariants hold by construction.
  static DensityMatrix unchecked(FockSpace space, CMatrix m) {
    check_shape(space, m);
    return DensityMatrix(space, std::move(m));
  }

  static DensityMatrix pure(const PureState& psi) {
    const CVector& v = psi.amplitudes();
    return DensityMatrix(psi.space(), v * v.adjoint());
  }

  static DensityMatrix maximally_mixed(FockSpace space) {
    const Index d = space.dim();
    return DensityMatrix(space, CMatrix::Identity(d, d) / double(d));
  }

  const FockSpace& space() const noexcept { return space_; }
  const CMatrix& matrix() const noexcept { return rho_; }
  Index dim() const noexcept { return rho_.rows(); }
  Complex operator()(Index i, Index j) const { return rho_(i, j); }
  Complex element(int na, int nb, int ma, int mb) const {
    return rho_(space_.index(na, nb), space_.index(ma, mb));
  }

  double min_eigenvalue() const { return hermitian_eigenvalues(rho_).minCoeff(); }
  double purity() const { return (rho_ * rho_).trace().real(); }

 private:
  DensityMatrix(FockSpace space, CMatrix m) : space_(space), rho_(std::move(m)) {}

  static void check_shape(const FockSpace& space, const CMatrix& m) {
    if (m.rows() != space.dim() || m.cols() != space.dim())
      throw DimensionMismatch("DensityMatrix: matrix shape does not match space");
  }

  FockSpace space_;
  CMatrix rho_;
};

class OperatorMatrix {
 public:
  OperatorMatrix(FockSpace space, CMatrix m, bool hermitian)
      : space_(space), m_(std::move(m)), hermitian_(hermitian) {
    if (m_.rows() != space_.dim() || m_.cols() != space_.dim())
      throw DimensionMismatch("OperatorMatrix: matrix shape does not match space");
    if (hermitian_ && hermiticity_error(m_) > kHermitianTol)
      throw InvariantViolation("hermiticity", "operator flagged Hermitian is not");
  }

  const FockSpace& space() const noexcept { return space_; }
  const CMatrix& matrix() const noexcept { return m_; }
  bool hermitian() const noexcept { return hermitian_; }

  OperatorMatrix adjoint() const { return {space_, m_.adjoint(), hermitian_}; }

  friend OperatorMatrix operator*(const OperatorMatrix& a, const OperatorMatrix& b) {
    require_same_space(a.space_, b.space_, "operator product");
    return {a.space_, a.m_ * b.m_, false};
  }
  friend OperatorMatrix operator+(const OperatorMatrix& a, const OperatorMatrix& b) {
    require_same_space(a.space_, b.space_, "operator sum");
    return {a.space_, a.m_ + b.m_, a.hermitian_ && b.hermitian_};
  }

 private:
  FockSpace space_;
  CMatrix m_;
  bool hermitian_;
};

inline OperatorMatrix identity_op(const FockSpace& space) {
  return {space, CMatrix::Identity(space.dim(), space.dim()), true};
}

/// a or a^dagger on one mode. The cutoff is hard: a^dagger|n_cut> is dropped.
inline OperatorMatrix ladder_op(const FockSpace& space, Mode mode, Ladder kind) {
  const Index d = space.dim();
  CMatrix a = CMatrix::Zero(d, d);
  for (Index col = 0; col < d; ++col) {
    auto [na, nb] = space.occupations(col);
    const int n = mode == Mode::A ? na : nb;
    if (n == 0) continue;
    const Index row = mode == Mode::A ? space.index(na - 1, nb) : space.index(na, nb - 1);
    a(row, col) = std::sqrt(double(n));
  }
  if (kind == Ladder::create) a.adjointInPlace();
  return {space, std::move(a), false};
}

inline OperatorMatrix number_op(const FockSpace& space, Mode mode) {
  const Index d = space.dim();
  CMatrix n = CMatrix::Zero(d, d);
  for (Index i = 0; i < d; ++i) {
    auto [na, nb] = space.occupations(i);
    n(i, i) = mode == Mode::A ? na : nb;
  }
  return {space, std::move(n), true};
}

inline OperatorMatrix total_number_op(const FockSpace& space) {
  return number_op(space, Mode::A) + number_op(space, Mode::B);
}

struct QuadraturePair {
  OperatorMatrix x;
  OperatorMatrix p;
};

/// x = (a^dagger + a)/sqrt2, p = i(a^dagger - a)/sqrt2.
inline QuadraturePair quadrature_ops(const FockSpace& space, Mode mode) {
  const CMatrix a = ladder_op(space, mode, Ladder::annihilate).matrix();
  const CMatrix ad = a.adjoint();
  const double r = 1.0 / std::sqrt(2.0);
  CMatrix x = r * (ad + a);
  CMatrix p = Complex(0.0, r) * (ad - a);
  return {OperatorMatrix(space, std::move(x), true), OperatorMatrix(space, std::move(p), true)};
}

/// U_theta = exp(-i theta (n_A + n_B)), diagonal.
inline OperatorMatrix phase_rotation(const FockSpace& space, double theta) {
  const Index d = space.dim();
  CMatrix u = CMatrix::Zero(d, d);
  for (Index i = 0; i < d; ++i) u(i, i) = std::polar(1.0, -theta * space.total(i));
  return {space, std::move(u), false};
}

/// Transposes the mode-B indices: ((nA,nB),(mA,mB)) -> ((nA,mB),(mA,nB)).
inline CMatrix partial_transpose(const FockSpace& space, const CMatrix& m) {
  const Index d = space.dim();
  if (m.rows() != d || m.cols() != d)
    throw DimensionMismatch("partial_transpose: matrix shape does not match space");
  const int L = space.levels();
  CMatrix out(d, d);
  for (int na = 0; na < L; ++na)
    for (int nb = 0; nb < L; ++nb)
      for (int ma = 0; ma < L; ++ma)
        for (int mb = 0; mb < L; ++mb)
          out(Index(na) * L + mb, Index(ma) * L + nb) = m(Index(na) * L + nb, Index(ma) * L + mb);
  return out;
}

inline CMatrix partial_transpose(const DensityMatrix& rho) {
  return partial_transpose(rho.space(), rho.matrix());
}

/// Tr[rho op].
inline Complex expectation(const DensityMatrix& rho, const OperatorMatrix& op) {
  require_same_space(rho.space(), op.space(), "expectation");
  // Tr[AB] = sum_ij A_ij B_ji
  return rho.matrix().cwiseProduct(op.matrix().transpose()).sum();
}

struct NumberDistributions {
  std::vector<double> total;       // index N = n_A + n_B, 0..2 n_cut
  std::vector<double> difference;  // index D + n_cut for D = n_A - n_B
  int difference_offset = 0;

  double p_difference(int d) const {
    const int k = d + difference_offset;
    return (k < 0 || k >= int(difference.size())) ? 0.0 : difference[std::size_t(k)];
  }
};

inline NumberDistributions number_distributions(const DensityMatrix& rho) {
  const FockSpace& s = rho.space();
  NumberDistributions out;
  out.total.assign(std::size_t(2 * s.n_cut() + 1), 0.0);
  out.difference.assign(std::size_t(2 * s.n_cut() + 1), 0.0);
  out.difference_offset = s.n_cut();
  for (Index i = 0; i < s.dim(); ++i) {
    auto [na, nb] = s.occupations(i);
    const double p = rho(i, i).real();
    out.total[std::size_t(na + nb)] += p;
    out.difference[std::size_t(na - nb + s.n_cut())] += p;
  }
  return out;
}

/// Population outside the twin-Fock diagonal |n,n><n,n|.
inline double non_twin_population(const DensityMatrix& rho) {
  const FockSpace& s = rho.space();
  double w = 0.0;
  for (Index i = 0; i < s.dim(); ++i) {
    auto [na, nb] = s.occupations(i);
    if (na != nb) w += rho(i, i).real();
  }
  return w;
}

}  // namespace eprlab
