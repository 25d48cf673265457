#pragma once

// Three-mode unbalanced homodyne readout.
//
// Phase convention: at local-oscillator phase theta both modes are read out
// along X(theta) = x cos(theta - pi/4) + p sin(theta - pi/4). The eigenket of
// X(theta) with eigenvalue x is U_phi |x> with phi = pi/4 - theta, so
//   P(x_A, x_B | theta) = <x| U_phi^dagger rho U_phi |x>.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "eprlab/fock.hpp"
#include "eprlab/hermite.hpp"
#include "eprlab/random.hpp"
#include "eprlab/states.hpp"

namespace eprlab {

inline double wrap_phase(double theta) {
  double t = std::fmod(theta, 2.0 * kPi);
  if (t < 0.0) t += 2.0 * kPi;
  if (t >= 2.0 * kPi) t = 0.0;
  return t;
}

/// Fock-space rotation angle whose conjugated x quadrature is X(theta).
inline double lo_rotation_angle(double theta) { return kPi / 4.0 - theta; }

struct HomodyneConfig {
  double omega_p1 = 0.0;  // Rabi frequency (1,0) <-> (1,+1), rad/s
  double omega_m1 = 0.0;  // Rabi frequency (1,0) <-> (1,-1), rad/s
  double tau = 0.0;       // rf pulse duration, s
  double n0 = 0.0;        // mean local-oscillator atom number
  std::optional<double> transfer_fraction;  // measured s^2; derived from the pulse when unset

  void validate() const {
    if (!(omega_p1 > 0.0) || !(omega_m1 > 0.0) || !(tau > 0.0) || !(n0 > 0.0))
      throw InvalidArgument("HomodyneConfig: Rabi frequencies, tau and n0 must be positive");
    if (transfer_fraction && !(*transfer_fraction >= 0.0 && *transfer_fraction <= 1.0))
      throw InvalidArgument("HomodyneConfig: transfer fraction must lie in [0, 1]");
  }

  double omega() const { return std::sqrt(0.5 * (omega_p1 * omega_p1 + omega_m1 * omega_m1)); }
  double tilde_p1() const { return omega_p1 / omega(); }
  double tilde_m1() const { return omega_m1 / omega(); }
  double c() const { return std::cos(omega() * tau / 2.0); }
  double s() const { return std::sin(omega() * tau / 2.0); }
  double s2() const { return transfer_fraction ? *transfer_fraction : s() * s(); }
  double c2() const { return 1.0 - s2(); }
  /// Omega~_{+1}^2 - Omega~_{-1}^2.
  double asymmetry() const { return tilde_p1() * tilde_p1() - tilde_m1() * tilde_m1(); }
  std::int64_t n_tot() const { return std::llround(n0); }

  /// Pulse that transfers `s2` of the local oscillator in `tau`, with Rabi
  /// frequencies in the ratio `ratio` = Omega_{+1}/Omega_{-1}.
  static HomodyneConfig from_transfer(double s2, double tau, double ratio, double n0) {
    if (!(s2 > 0.0 && s2 < 1.0)) throw InvalidArgument("from_transfer: s2 must lie in (0, 1)");
    const double omega = 2.0 * std::asin(std::sqrt(s2)) / tau;
    const double m1 = omega * std::sqrt(2.0 / (1.0 + ratio * ratio));
    HomodyneConfig cfg{ratio * m1, m1, tau, n0, std::nullopt};
    cfg.validate();
    return cfg;
  }

  /// 15% transfer in a 30 us pulse, Rabi frequencies 1.7% apart, 2e4 atoms.
  static HomodyneConfig experiment() { return from_transfer(0.15, 30e-6, 1.017, 20000.0); }
};

/// Output mode operators (a_A, a_B, a_0)_out = U (a_A, a_B, a_0)_in.
inline Eigen::Matrix3cd mode_transform(const HomodyneConfig& cfg) {
  cfg.validate();
  const double p = cfg.tilde_p1(), m = cfg.tilde_m1(), c = cfg.c(), s = cfg.s();
  const Complex inv_i_sqrt2 = Complex(0.0, -1.0) / std::sqrt(2.0);  // 1/(i sqrt2)
  Eigen::Matrix3cd u;
  u(0, 0) = (p * p * c + m * m) / 2.0;
  u(0, 1) = p * m * (c - 1.0) / 2.0;
  u(0, 2) = p * s * inv_i_sqrt2;
  u(1, 0) = p * m * (c - 1.0) / 2.0;
  u(1, 1) = (m * m * c + p * p) / 2.0;
  u(1, 2) = m * s * inv_i_sqrt2;
  u(2, 0) = p * s * inv_i_sqrt2;
  u(2, 1) = m * s * inv_i_sqrt2;
  u(2, 2) = c;
  return u;
}

struct ShotRecord {
  std::int64_t n_a = 0;
  std::int64_t n_b = 0;
  std::int64_t n_tot = 0;

  void validate() const {
    if (n_a < 0 || n_b < 0 || n_tot <= 0 || n_a + n_b > n_tot)
      throw InvalidArgument("ShotRecord: counts must satisfy 0 <= n_a + n_b <= n_tot");
  }
};

struct QuadratureSample {
  double theta = 0.0;  // rad, in [0, 2 pi)
  double x_a = 0.0;
  double x_b = 0.0;
};

enum class QuadratureBasis { p_like, x_like };

struct QuadratureEstimate {
  double difference;  // q_A - q_B
  double sum;         // q_A + q_B
};

/// Number-to-quadrature estimators. The x-like basis uses identical arithmetic;
/// the label only records which quadrature the upstream pi/2 phase selected.
inline QuadratureEstimate estimate_quadratures(const ShotRecord& shot, const HomodyneConfig& cfg,
                                               QuadratureBasis /*basis*/ = QuadratureBasis::p_like) {
  shot.validate();
  const double s2 = cfg.s2(), c2 = cfg.c2();
  if (!(s2 > 0.0)) throw UndefinedEstimator("estimate_quadratures: s = 0");
  if (!(c2 > 0.0)) throw UndefinedEstimator("estimate_quadratures: c = 0");
  const double nt = double(shot.n_tot);
  const double na = double(shot.n_a), nb = double(shot.n_b);
  const double diff = (na - nb - s2 * cfg.asymmetry() * nt / 2.0) / std::sqrt(s2 * nt);
  const double sum = (na + nb - s2 * nt) / std::sqrt(s2 * c2 * nt);
  return {diff, sum};
}

struct TransferCalibration {
  double s2 = 0.0;
  double c2 = 1.0;
  double asymmetry = 0.0;         // Omega~_{+1}^2 - Omega~_{-1}^2
  bool asymmetry_defined = true;  // false when nothing was transferred
};

/// Inverts <(N_A+N_B)/N_tot> = s^2 and <(N_A-N_B)/N_tot> = s^2 (Omega~+^2 - Omega~-^2)/2.
inline TransferCalibration calibrate_transfer(std::span<const ShotRecord> shots) {
  if (shots.empty()) throw InvalidArgument("calibrate_transfer: no shots");
  std::vector<double> sum_frac, diff_frac;
  sum_frac.reserve(shots.size());
  diff_frac.reserve(shots.size());
  for (const auto& s : shots) {
    s.validate();
    sum_frac.push_back(double(s.n_a + s.n_b) / double(s.n_tot));
    diff_frac.push_back(double(s.n_a - s.n_b) / double(s.n_tot));
  }
  const double n = double(shots.size());
  TransferCalibration cal;
  cal.s2 = pairwise_sum(sum_frac) / n;
  cal.c2 = 1.0 - cal.s2;
  if (cal.s2 > 0.0) {
    cal.asymmetry = 2.0 * (pairwise_sum(diff_frac) / n) / cal.s2;
  } else {
    cal.asymmetry = 0.0;
    cal.asymmetry_defined = false;
  }
  return cal;
}

// ---------------------------------------------------------------------------
// Exact quadrature distributions

namespace detail {

/// S_ij = Re(rho_ij e^{i phi (N_i - N_j)}), the real part of U_phi^dagger rho U_phi.
/// Quadratic forms of rho with real vectors only see this part.
inline RMatrix rotated_real(const DensityMatrix& rho, double phi) {
  const FockSpace& s = rho.space();
  const Index d = s.dim();
  RMatrix out(d, d);
  for (Index j = 0; j < d; ++j)
    for (Index i = 0; i < d; ++i)
      out(i, j) = (rho(i, j) * std::polar(1.0, phi * double(s.total(i) - s.total(j)))).real();
  return out;
}

/// Regroups S[(nA,nB),(mA,mB)] into S'[(nA,mA),(nB,mB)].
inline RMatrix regroup_modes(const RMatrix& m, int L) {
  RMatrix out(m.rows(), m.cols());
  for (int na = 0; na < L; ++na)
    for (int nb = 0; nb < L; ++nb)
      for (int ma = 0; ma < L; ++ma)
        for (int mb = 0; mb < L; ++mb)
          out(Index(na) * L + ma, Index(nb) * L + mb) = m(Index(na) * L + nb, Index(ma) * L + mb);
  return out;
}

/// Q[(n,m), j] = psi_n(x_j) psi_m(x_j).
inline RMatrix pair_products(const RMatrix& psi) {
  const Index L = psi.rows();
  RMatrix q(L * L, psi.cols());
  for (Index j = 0; j < psi.cols(); ++j)
    for (Index n = 0; n < L; ++n)
      for (Index m = 0; m < L; ++m) q(n * L + m, j) = psi(n, j) * psi(m, j);
  return q;
}

/// Density on the product grid: P(i, j) = sum S[(nA,nB),(mA,mB)] psiA psiB psiA psiB.
inline RMatrix grid_density(const RMatrix& regrouped, const RMatrix& qa, const RMatrix& qb) {
  return qa.transpose() * (regrouped * qb);
}

}  // namespace detail

/// Uniform rectangular grid of nodes x0 + i dx.
struct Grid2D {
  double xa0 = 0.0, dxa = 0.0;
  int na = 0;
  double xb0 = 0.0, dxb = 0.0;
  int nb = 0;

  double xa(int i) const { return xa0 + i * dxa; }
  double xb(int j) const { return xb0 + j * dxb; }
  std::vector<double> xa_nodes() const {
    std::vector<double> v(static_cast<std::size_t>(na));
    for (int i = 0; i < na; ++i) v[std::size_t(i)] = xa(i);
    return v;
  }
  std::vector<double> xb_nodes() const {
    std::vector<double> v(static_cast<std::size_t>(nb));
    for (int j = 0; j < nb; ++j) v[std::size_t(j)] = xb(j);
    return v;
  }

  static Grid2D symmetric(double half_width, int points) {
    const double h = 2.0 * half_width / double(points - 1);
    return {-half_width, h, points, -half_width, h, points};
  }
};

inline constexpr int kDefaultGridPoints = 512;
inline constexpr double kGridSigmas = 6.0;
inline constexpr double kMinGridMass = 0.99;

/// Upper bound on the single-mode quadrature width at any phase:
/// Var(x) <= <n> + 1/2 + sqrt(<n>(<n>+1)); equals e^{2 xi}/2 for the pair state.
inline double quadrature_sigma_max(const DensityMatrix& rho) {
  const double na = expectation(rho, number_op(rho.space(), Mode::A)).real();
  const double nb = expectation(rho, number_op(rho.space(), Mode::B)).real();
  const double n = std::max({na, nb, 0.0});
  return std::sqrt(0.5 + n + std::sqrt(n * (n + 1.0)));
}

inline Grid2D default_grid(const DensityMatrix& rho, int points = kDefaultGridPoints) {
  return Grid2D::symmetric(kGridSigmas * quadrature_sigma_max(rho), points);
}

struct QuadPdf {
  RMatrix density;  // density(i, j) at (xa(i), xb(j))
  double mass = 0.0;
};

/// Joint density of (X_A(theta), X_B(theta)) on the grid.
inline QuadPdf quad_pdf(const DensityMatrix& rho, double theta, const Grid2D& grid) {
  if (grid.na < 2 || grid.nb < 2 || !(grid.dxa > 0.0) || !(grid.dxb > 0.0))
    throw InvalidArgument("quad_pdf: grid needs at least 2x2 nodes with positive spacing");
  const int L = rho.space().levels();
  const RMatrix s = detail::rotated_real(rho, lo_rotation_angle(theta));
  const RMatrix qa = detail::pair_products(hermite_table(grid.xa_nodes(), L - 1));
  const RMatrix qb = detail::pair_products(hermite_table(grid.xb_nodes(), L - 1));
  QuadPdf out;
  out.density = detail::grid_density(detail::regroup_modes(s, L), qa, qb);
  out.mass = out.density.sum() * grid.dxa * grid.dxb;
  if (out.mass < kMinGridMass)
    throw InsufficientSupport("quad_pdf: grid holds only " + std::to_string(out.mass) +
                              " of the probability mass");
  return out;
}

// ---------------------------------------------------------------------------
// Monte-Carlo sampling

namespace detail {

/// Cumulative sums of the clipped weights.
inline RVector cumulative(const RVector& weights) {
  RVector cdf(weights.size());
  double acc = 0.0;
  for (Index i = 0; i < weights.size(); ++i) {
    acc += std::max(weights(i), 0.0);
    cdf(i) = acc;
  }
  return cdf;
}

/// Picks a cell of a piecewise-constant density on uniform nodes (node i is
/// the center of its cell) and returns a uniform point inside it.
inline double draw_from_cdf(const RVector& cdf, double x0, double h, Rng& rng) {
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const double u = uni(rng) * cdf(cdf.size() - 1);
  const double* first = cdf.data();
  const double* last = cdf.data() + cdf.size();
  Index i = Index(std::upper_bound(first, last, u) - first);
  if (i >= cdf.size()) i = cdf.size() - 1;
  return x0 + (double(i) + uni(rng) - 0.5) * h;
}

inline constexpr double kComponentFloor = 1e-13;

/// Samples rho as the mixture of its eigenvectors: each shot picks a component
/// with its eigenvalue as probability, then draws from that pure state. For a
/// pure component with amplitudes C[nA, nB] the rotated amplitudes are
/// D C D with D = diag(e^{i phi n}), so
///   p(x_A)       = sum_nB |(psi(x_A)^T D C)_nB|^2,
///   p(x_B | x_A) ~ |psi(x_B)^T D C^T D psi(x_A)|^2.
class QuadratureSampler {
 public:
  struct Tables {
    std::vector<RVector> marginal_cdf;  // one per component
  };

  QuadratureSampler(const DensityMatrix& rho, int points) : L_(rho.space().levels()) {
    init_grid(quadrature_sigma_max(rho), points);
    Eigen::SelfAdjointEigenSolver<CMatrix> es(rho.matrix());
    const RVector& w = es.eigenvalues();
    for (Index k = w.size() - 1; k >= 0; --k) {
      if (!(w(k) > kComponentFloor)) continue;
      add_component(es.eigenvectors().col(k), w(k));
    }
    finish_weights();
  }

  QuadratureSampler(const PureState& psi, int points) : L_(psi.space().levels()) {
    init_grid(quadrature_sigma_max(DensityMatrix::pure(psi)), points);
    add_component(psi.amplitudes(), 1.0);
    finish_weights();
  }

  Tables tables(double theta) const {
    const CVector d = phases(theta);
    Tables t;
    t.marginal_cdf.reserve(comps_.size());
    for (const CMatrix& c : comps_) t.marginal_cdf.push_back(marginal_cdf(c, d));
    return t;
  }

  /// Draws x_A from the marginal, then x_B from the conditional at that x_A.
  /// `cached` must come from tables(theta) when given.
  std::pair<double, double> draw(double theta, const Tables* cached, Rng& rng) const {
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    const double u = uni(rng) * weight_cdf_.back();
    std::size_t k = std::size_t(std::upper_bound(weight_cdf_.begin(), weight_cdf_.end(), u) -
                                weight_cdf_.begin());
    if (k >= comps_.size()) k = comps_.size() - 1;
    const CMatrix& c = comps_[k];
    const CVector d = phases(theta);
    const double xa = cached ? draw_from_cdf(cached->marginal_cdf[k], x0_, h_, rng)
                             : draw_from_cdf(marginal_cdf(c, d), x0_, h_, rng);
    const RVector ha = hermite_functions(xa, L_ - 1);
    const CVector v = d.cwiseProduct(c.transpose() * d.cwiseProduct(ha.cast<Complex>()));
    const RVector cond = (psi_t_ * v).cwiseAbs2();
    const double xb = draw_from_cdf(cumulative(cond), x0_, h_, rng);
    return {xa, xb};
  }

 private:
  void init_grid(double sigma_max, int points) {
    if (points < 2) throw InvalidArgument("sampler grid needs at least 2 points");
    const double half = kGridSigmas * sigma_max;
    h_ = 2.0 * half / double(points - 1);
    x0_ = -half;
    std::vector<double> nodes(static_cast<std::size_t>(points));
    for (int i = 0; i < points; ++i) nodes[std::size_t(i)] = x0_ + i * h_;
    psi_t_ = hermite_table(nodes, L_ - 1).transpose().cast<Complex>();
  }

  void add_component(const CVector& amps, double weight) {
    CMatrix c(L_, L_);
    for (int na = 0; na < L_; ++na)
      for (int nb = 0; nb < L_; ++nb) c(na, nb) = amps(Index(na) * L_ + nb);
    comps_.push_back(std::move(c));
    weight_cdf_.push_back((weight_cdf_.empty() ? 0.0 : weight_cdf_.back()) + weight);
  }

  void finish_weights() {
    if (comps_.empty()) throw InvalidArgument("sampler: state has no positive component");
  }

  CVector phases(double theta) const {
    const double phi = lo_rotation_angle(theta);
    CVector d(L_);
    for (int n = 0; n < L_; ++n) d(n) = std::polar(1.0, phi * n);
    return d;
  }

  RVector marginal_cdf(const CMatrix& c, const CVector& d) const {
    const RVector marg = ((psi_t_ * d.asDiagonal()) * c).rowwise().squaredNorm();
    const double mass = marg.sum() * h_;
    if (mass < kMinGridMass)
      throw InsufficientSupport("sample_quadratures: marginal grid mass " + std::to_string(mass));
    return cumulative(marg);
  }

  int L_;
  double x0_ = 0.0, h_ = 0.0;
  CMatrix psi_t_;  // (grid point, n)
  std::vector<CMatrix> comps_;
  std::vector<double> weight_cdf_;
};

/// Tables for every nominal phase when the phase is not jittered.
inline std::vector<QuadratureSampler::Tables> fixed_tables(const QuadratureSampler& sampler,
                                                           std::span<const double> thetas,
                                                           const NoiseModel& noise) {
  std::vector<QuadratureSampler::Tables> out;
  if (noise.sigma_phase > 0.0) return out;
  out.reserve(thetas.size());
  for (double th : thetas) out.push_back(sampler.tables(th));
  return out;
}

/// One latent (x_A, x_B) draw at nominal phase index t, with phase jitter and sum shift.
inline std::pair<double, double> draw_latent(const QuadratureSampler& sampler,
                                             const std::vector<QuadratureSampler::Tables>& fixed,
                                             std::span<const double> thetas, std::size_t t,
                                             const NoiseModel& noise, Rng& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::pair<double, double> x;
  if (!fixed.empty()) {
    x = sampler.draw(thetas[t], &fixed[t], rng);
  } else {
    const double jitter = noise.sigma_phase * gauss(rng);
    x = sampler.draw(thetas[t] + jitter, nullptr, rng);
  }
  if (noise.sum_variance_shift > 0.0) {
    const double g = std::sqrt(noise.sum_variance_shift) * gauss(rng);
    x.first += g / 2.0;
    x.second += g / 2.0;
  }
  return x;
}

}  // namespace detail

struct SamplingOptions {
  int grid_points = kDefaultGridPoints;
  int workers = 1;
};

/// p_per_theta shots per nominal phase. Shot k of phase index t uses stream
/// (seed, t * p_per_theta + k), so results do not depend on the worker count.
/// State is a DensityMatrix or a PureState.
template <typename State>
std::vector<QuadratureSample> sample_quadratures(const State& rho,
                                                        std::span<const double> thetas,
                                                        int p_per_theta, const NoiseModel& noise,
                                                        std::uint64_t seed,
                                                        const SamplingOptions& opt = {}) {
  if (p_per_theta < 1) throw InvalidArgument("sample_quadratures: p_per_theta must be >= 1");
  noise.validate();
  const detail::QuadratureSampler sampler(rho, opt.grid_points);
  const auto fixed = detail::fixed_tables(sampler, thetas, noise);
  const std::size_t per = std::size_t(p_per_theta);
  std::vector<QuadratureSample> out(thetas.size() * per);
  parallel_for(out.size(), opt.workers, [&](std::size_t idx) {
    Rng rng = stream(seed, idx);
    const std::size_t t = idx / per;
    const auto [xa, xb] = detail::draw_latent(sampler, fixed, thetas, t, noise, rng);
    out[idx] = {wrap_phase(thetas[t]), xa, xb};
  });
  return out;
}

struct SimulatedShots {
  std::vector<QuadratureSample> quadratures;  // latent values the counts encode
  std::vector<ShotRecord> shots;
};

inline constexpr int kShotRetries = 100;

/// Inverts the estimators at transfer fraction s2 and rounds to counts; nullopt
/// when the counts fall outside [0, n_tot].
inline std::optional<ShotRecord> encode_counts(double xa, double xb, double s2,
                                               const HomodyneConfig& cfg, double noise_a = 0.0,
                                               double noise_b = 0.0) {
  const std::int64_t n_tot = cfg.n_tot();
  const double nt = double(n_tot);
  const double c2 = 1.0 - s2;
  if (!(s2 > 0.0 && c2 > 0.0)) return std::nullopt;
  const double diff = (xa - xb) * std::sqrt(s2 * nt) + s2 * cfg.asymmetry() * nt / 2.0;
  const double sum = (xa + xb) * std::sqrt(s2 * c2 * nt) + s2 * nt;
  const std::int64_t ia = std::llround((sum + diff) / 2.0 + noise_a);
  const std::int64_t ib = std::llround((sum - diff) / 2.0 + noise_b);
  if (ia < 0 || ib < 0 || ia + ib > n_tot) return std::nullopt;
  return ShotRecord{ia, ib, n_tot};
}

/// Synthesizes atom counts by inverting the estimators, with per-shot rf jitter
/// of s^2 and optional Gaussian detection noise on each count.
template <typename State>
SimulatedShots simulate_shots(const State& rho, const HomodyneConfig& cfg,
                                     const NoiseModel& noise, std::span<const double> thetas,
                                     int p_per_theta, std::uint64_t seed,
                                     const SamplingOptions& opt = {}) {
  cfg.validate();
  noise.validate();
  if (p_per_theta < 1) throw InvalidArgument("simulate_shots: p_per_theta must be >= 1");
  const detail::QuadratureSampler sampler(rho, opt.grid_points);
  const auto fixed = detail::fixed_tables(sampler, thetas, noise);
  const std::size_t per = std::size_t(p_per_theta);
  SimulatedShots out;
  out.quadratures.resize(thetas.size() * per);
  out.shots.resize(thetas.size() * per);
  parallel_for(out.shots.size(), opt.workers, [&](std::size_t idx) {
    Rng rng = stream(seed, idx);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const std::size_t t = idx / per;
    const double theta = thetas[t];
    for (int attempt = 0; attempt < kShotRetries; ++attempt) {
      const auto [xa, xb] = detail::draw_latent(sampler, fixed, thetas, t, noise, rng);
      double s2 = cfg.s2();
      if (noise.rf_rel_noise > 0.0) s2 *= 1.0 + noise.rf_rel_noise * gauss(rng);
      double noise_a = 0.0, noise_b = 0.0;
      if (noise.detection_noise_atoms > 0.0) {
        noise_a = noise.detection_noise_atoms * gauss(rng);
        noise_b = noise.detection_noise_atoms * gauss(rng);
      }
      const auto shot = encode_counts(xa, xb, s2, cfg, noise_a, noise_b);
      if (!shot) continue;
      out.quadratures[idx] = {wrap_phase(theta), xa, xb};
      out.shots[idx] = *shot;
      return;
    }
    throw Error("simulate_shots: counts outside [0, n_tot] after " + std::to_string(kShotRetries) +
                " redraws");
  });
  return out;
}

/// Converts recorded counts back to quadrature samples at the given nominal phases.
inline std::vector<QuadratureSample> shots_to_quadratures(std::span<const ShotRecord> shots,
                                                          std::span<const double> shot_thetas,
                                                          const HomodyneConfig& cfg) {
  if (shots.size() != shot_thetas.size())
    throw DimensionMismatch("shots_to_quadratures: one phase per shot required");
  std::vector<QuadratureSample> out(shots.size());
  for (std::size_t i = 0; i < shots.size(); ++i) {
    const QuadratureEstimate q = estimate_quadratures(shots[i], cfg);
    out[i] = {wrap_phase(shot_thetas[i]), (q.sum + q.difference) / 2.0,
              (q.sum - q.difference) / 2.0};
  }
  return out;
}

// ---------------------------------------------------------------------------
// Exact two-mode variances

struct LadderMoments {
  Complex a, b;        // <a>, <b>
  Complex aa, bb, ab;  // <a^2>, <b^2>, <ab>
  Complex ad_b;        // <a^dagger b>
  double na = 0.0, nb = 0.0;
};

/// Low-order moments computed from exact ladder actions on rho's support, so the
/// cutoff does not distort x^2 the way a truncated matrix product would.
inline LadderMoments ladder_moments(const DensityMatrix& rho) {
  const FockSpace& s = rho.space();
  const int L = s.levels();
  LadderMoments mo{};
  // Tr[rho O] = sum_m c_m rho(m', m) where O|m> = c_m |m'>.
  auto add = [&](Complex& acc, int na, int nb, int ma2, int mb2, double c) {
    if (ma2 < 0 || mb2 < 0 || ma2 >= L || mb2 >= L) return;
    acc += c * rho(s.index(ma2, mb2), s.index(na, nb));
  };
  for (int na = 0; na < L; ++na)
    for (int nb = 0; nb < L; ++nb) {
      add(mo.a, na, nb, na - 1, nb, std::sqrt(double(na)));
      add(mo.b, na, nb, na, nb - 1, std::sqrt(double(nb)));
      add(mo.aa, na, nb, na - 2, nb, std::sqrt(double(na) * (na - 1)));
      add(mo.bb, na, nb, na, nb - 2, std::sqrt(double(nb) * (nb - 1)));
      add(mo.ab, na, nb, na - 1, nb - 1, std::sqrt(double(na) * nb));
      add(mo.ad_b, na, nb, na + 1, nb - 1, std::sqrt(double(na + 1) * nb));
      const double p = rho(s.index(na, nb), s.index(na, nb)).real();
      mo.na += na * p;
      mo.nb += nb * p;
    }
  return mo;
}

struct TwoModeVariances {
  double plus;   // Var(X_A + X_B)
  double minus;  // Var(X_A - X_B)
};

/// Exact Var(X_A(theta) +- X_B(theta)), averaged over Gaussian phase jitter of
/// width sigma_phase.
inline TwoModeVariances model_variances(const DensityMatrix& rho, double theta,
                                        double sigma_phase = 0.0) {
  const LadderMoments mo = ladder_moments(rho);
  const double phi = theta - kPi / 4.0;
  const Complex e1 = std::polar(std::exp(-sigma_phase * sigma_phase / 2.0), -phi);
  const Complex e2 = std::polar(std::exp(-2.0 * sigma_phase * sigma_phase), -2.0 * phi);
  const double mean_a = std::sqrt(2.0) * (mo.a * e1).real();
  const double mean_b = std::sqrt(2.0) * (mo.b * e1).real();
  const double xa2 = (mo.aa * e2).real() + mo.na + 0.5;
  const double xb2 = (mo.bb * e2).real() + mo.nb + 0.5;
  const double xab = (mo.ab * e2).real() + mo.ad_b.real();
  return {xa2 + xb2 + 2.0 * xab - std::pow(mean_a + mean_b, 2),
          xa2 + xb2 - 2.0 * xab - std::pow(mean_a - mean_b, 2)};
}

/// Expected readout variances including rf jitter of s^2 and the constant sum shift.
inline TwoModeVariances model_readout_variances(const DensityMatrix& rho, double theta,
                                                const NoiseModel& noise,
                                                const HomodyneConfig& cfg) {
  TwoModeVariances v = model_variances(rho, theta, noise.sigma_phase);
  const double rf2 = noise.rf_rel_noise * noise.rf_rel_noise;
  const double s2 = cfg.s2(), c2 = cfg.c2(), nt = double(cfg.n_tot());
  // Sum estimate: gain sqrt((1+e)(1-s^2(1+e))/c^2) plus offset e s sqrt(N)/c.
  v.plus = v.plus * (1.0 - s2 * rf2 / c2) + rf2 * s2 * nt / c2 + noise.sum_variance_shift;
  // Difference estimate: gain sqrt(1+e) plus offset e asym s sqrt(N)/2.
  v.minus = v.minus + rf2 * std::pow(cfg.asymmetry(), 2) * s2 * nt / 4.0;
  const double det = 2.0 * noise.detection_noise_atoms * noise.detection_noise_atoms;
  v.plus += det / (s2 * c2 * nt);
  v.minus += det / (s2 * nt);
  return v;
}

// ---------------------------------------------------------------------------

inline constexpr double kThetaGroupTol = 1e-9;

struct ThetaGroup {
  double theta = 0.0;
  std::vector<QuadratureSample> samples;
};

/// Groups samples by phase (within kThetaGroupTol), ordered by increasing
/// phase; sample order inside a group is preserved.
inline std::vector<ThetaGroup> group_by_theta(std::span<const QuadratureSample> samples) {
  std::vector<std::size_t> order(samples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return samples[a].theta < samples[b].theta; });
  std::vector<ThetaGroup> groups;
  for (std::size_t i : order) {
    const QuadratureSample& s = samples[i];
    if (groups.empty() || s.theta - groups.back().theta > kThetaGroupTol)
      groups.push_back({s.theta, {}});
    groups.back().samples.push_back(s);
  }
  return groups;
}

}  // namespace eprlab
