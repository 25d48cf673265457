#pragma once

// Maximum-likelihood reconstruction from binned homodyne data by the
// iteration rho <- N[R rho R].

#include <boost/math/quadrature/gauss.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "eprlab/fock.hpp"
#include "eprlab/hermite.hpp"
#include "eprlab/homodyne.hpp"
#include "eprlab/random.hpp"

namespace eprlab {

using CountMatrix = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>;

/// Counts on half-open bins [origin + i dx, origin + (i+1) dx) per axis.
struct Histogram2D {
  double theta = 0.0;
  double dx = 0.0;
  double origin_a = 0.0, origin_b = 0.0;
  CountMatrix counts;  // counts(i, j): x_A bin i, x_B bin j

  std::int64_t total() const { return counts.sum(); }
  double xa_mid(Index i) const { return origin_a + (double(i) + 0.5) * dx; }
  double xb_mid(Index j) const { return origin_b + (double(j) + 0.5) * dx; }

  void validate() const {
    if (!(dx > 0.0)) throw InvalidArgument("Histogram2D: dx must be positive");
    if (counts.size() == 0) throw InvalidArgument("Histogram2D: empty count array");
    if ((counts.array() < 0).any()) throw InvalidArgument("Histogram2D: negative count");
  }
};

/// One histogram per distinct phase (within kThetaGroupTol); origins are
/// integer multiples of dx and each array spans the occupied bins.
inline std::vector<Histogram2D> bin_samples(std::span<const QuadratureSample> samples, double dx) {
  if (!(dx > 0.0)) throw InvalidArgument("bin_samples: dx must be positive");
  std::vector<Histogram2D> out;
  for (const ThetaGroup& g : group_by_theta(samples)) {
    std::vector<std::int64_t> ia(g.samples.size()), ib(g.samples.size());
    for (std::size_t k = 0; k < g.samples.size(); ++k) {
      ia[k] = std::int64_t(std::floor(g.samples[k].x_a / dx));
      ib[k] = std::int64_t(std::floor(g.samples[k].x_b / dx));
    }
    const auto [amin, amax] = std::minmax_element(ia.begin(), ia.end());
    const auto [bmin, bmax] = std::minmax_element(ib.begin(), ib.end());
    Histogram2D h;
    h.theta = g.theta;
    h.dx = dx;
    h.origin_a = double(*amin) * dx;
    h.origin_b = double(*bmin) * dx;
    h.counts = CountMatrix::Zero(*amax - *amin + 1, *bmax - *bmin + 1);
    for (std::size_t k = 0; k < ia.size(); ++k) h.counts(ia[k] - *amin, ib[k] - *bmin) += 1;
    out.push_back(std::move(h));
  }
  return out;
}

struct TomographyConfig {
  double dx = 0.25;
  int n_cut = 10;
  int max_iter = 2000;
  double tol = 1e-8;
  double min_bin_prob = 1e-12;
  bool track_min_eigenvalue = false;  // eigendecomposes every iterate
  int workers = 1;

  void validate() const {
    if (!(dx > 0.0) || n_cut < 0 || max_iter < 1 || !(tol > 0.0) || !(min_bin_prob > 0.0))
      throw InvalidArgument("TomographyConfig: dx, max_iter, tol and min_bin_prob must be positive");
    if (min_bin_prob > 1e-8) throw InvalidArgument("TomographyConfig: min_bin_prob must be <= 1e-8");
  }
};

/// Midpoint density times dx^2, floored at min_bin_prob.
inline double bin_probability(const DensityMatrix& rho, const Histogram2D& hist, Index i, Index j,
                              double min_bin_prob = 1e-12) {
  hist.validate();
  if (i < 0 || j < 0 || i >= hist.counts.rows() || j >= hist.counts.cols())
    throw InvalidArgument("bin_probability: bin index outside histogram");
  const int L = rho.space().levels();
  const RVector ha = hermite_functions(hist.xa_mid(i), L - 1);
  const RVector hb = hermite_functions(hist.xb_mid(j), L - 1);
  RVector ket(Index(L) * L);
  for (int a = 0; a < L; ++a)
    for (int b = 0; b < L; ++b) ket(Index(a) * L + b) = ha(a) * hb(b);
  const RMatrix s = detail::rotated_real(rho, lo_rotation_angle(hist.theta));
  const double p = ket.dot(s * ket) * hist.dx * hist.dx;
  return std::max(p, min_bin_prob);
}

namespace detail {

/// Phase factors e^{i phi (N_i - N_j)} for one readout phase.
inline CMatrix rotation_factors(const FockSpace& space, double phi) {
  const Index d = space.dim();
  CVector w(d);
  for (Index i = 0; i < d; ++i) w(i) = std::polar(1.0, phi * double(space.total(i)));
  return w * w.adjoint();
}

/// Inverse of regroup_modes: K'[(nA,mA),(nB,mB)] -> K[(nA,nB),(mA,mB)].
inline RMatrix ungroup_modes(const RMatrix& m, int L) {
  RMatrix out(m.rows(), m.cols());
  for (int na = 0; na < L; ++na)
    for (int nb = 0; nb < L; ++nb)
      for (int ma = 0; ma < L; ++ma)
        for (int mb = 0; mb < L; ++mb)
          out(Index(na) * L + nb, Index(ma) * L + mb) = m(Index(na) * L + ma, Index(nb) * L + mb);
  return out;
}

/// Precomputed per-histogram data for repeated likelihood evaluations.
struct BinnedPhase {
  double theta = 0.0;
  CMatrix factors;  // e^{i phi (N_i - N_j)}
  RMatrix qa, qb;   // pair products of Hermite functions at bin midpoints
  RMatrix counts;
  double dx2 = 0.0;
};

struct Evaluation {
  double loglik = 0.0;
  CMatrix r;
  std::size_t floored_bins = 0;
};

/// Likelihood and R operator for a list of binned phases sharing one space.
class LikelihoodModel {
 public:
  LikelihoodModel(const FockSpace& space, std::span<const Histogram2D> hists, double min_bin_prob,
                  int workers)
      : space_(space), min_prob_(min_bin_prob), workers_(workers) {
    if (hists.empty()) throw InvalidArgument("ml_reconstruct: no histograms");
    // Canonical order so the reduction tree does not depend on input order.
    std::vector<std::size_t> order(hists.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      const Histogram2D& x = hists[a];
      const Histogram2D& y = hists[b];
      auto key = [](const Histogram2D& h) {
        return std::make_tuple(h.theta, h.dx, h.origin_a, h.origin_b, h.counts.rows(), h.counts.cols());
      };
      if (key(x) != key(y)) return key(x) < key(y);
      return std::lexicographical_compare(x.counts.data(), x.counts.data() + x.counts.size(),
                                          y.counts.data(), y.counts.data() + y.counts.size());
    });
    const int L = space.levels();
    double total = 0.0;
    for (std::size_t k : order) {
      const Histogram2D& h = hists[k];
      h.validate();
      BinnedPhase b;
      b.theta = h.theta;
      b.factors = rotation_factors(space, lo_rotation_angle(h.theta));
      std::vector<double> xa(static_cast<std::size_t>(h.counts.rows()));
      std::vector<double> xb(static_cast<std::size_t>(h.counts.cols()));
      for (Index i = 0; i < h.counts.rows(); ++i) xa[std::size_t(i)] = h.xa_mid(i);
      for (Index j = 0; j < h.counts.cols(); ++j) xb[std::size_t(j)] = h.xb_mid(j);
      b.qa = pair_products(hermite_table(xa, L - 1));
      b.qb = pair_products(hermite_table(xb, L - 1));
      b.counts = h.counts.cast<double>();
      b.dx2 = h.dx * h.dx;
      total += b.counts.sum();
      phases_.push_back(std::move(b));
    }
    if (!(total >= 1.0)) throw InvalidArgument("ml_reconstruct: histograms hold no counts");
    total_ = total;
  }

  double total_counts() const { return total_; }

  Evaluation evaluate(const CMatrix& rho, bool with_r = true) const {
    const int L = space_.levels();
    std::vector<double> ll(phases_.size());
    std::vector<std::size_t> floored(phases_.size());
    std::vector<CMatrix> parts(with_r ? phases_.size() : 0);
    parallel_for(phases_.size(), workers_, [&](std::size_t k) {
      const BinnedPhase& b = phases_[k];
      const RMatrix s = regroup_modes(rho.cwiseProduct(b.factors).real(), L);
      RMatrix p = grid_density(s, b.qa, b.qb) * b.dx2;
      RMatrix w = RMatrix::Zero(p.rows(), p.cols());
      double acc = 0.0;
      std::size_t nf = 0;
      for (Index j = 0; j < p.cols(); ++j)
        for (Index i = 0; i < p.rows(); ++i) {
          const double n = b.counts(i, j);
          if (n <= 0.0) continue;
          double pij = p(i, j);
          if (!(pij >= min_prob_)) {
            if (std::isnan(pij))
              throw IllConditionedData("model probability is NaN at theta " +
                                       std::to_string(b.theta) + ", bin (" + std::to_string(i) +
                                       ", " + std::to_string(j) + ")");
            pij = min_prob_;
            ++nf;
          }
          acc += n * std::log(pij);
          w(i, j) = n / (total_ * pij) * b.dx2;
          if (!std::isfinite(w(i, j)))
            throw IllConditionedData("R weight overflow at theta " + std::to_string(b.theta) +
                                     ", bin (" + std::to_string(i) + ", " + std::to_string(j) + ")");
        }
      ll[k] = acc;
      floored[k] = nf;
      if (with_r) {
        const RMatrix k_grouped = b.qa * w * b.qb.transpose();
        parts[k] = ungroup_modes(k_grouped, L).cast<Complex>().cwiseProduct(b.factors.conjugate());
      }
    });
    Evaluation e;
    e.loglik = pairwise_sum(ll);
    for (std::size_t f : floored) e.floored_bins += f;
    if (with_r)
      e.r = pairwise_sum<CMatrix>(0, parts.size(), [&](std::size_t k) { return parts[k]; });
    return e;
  }

  /// Model bin probabilities for phase k (midpoint rule, unfloored).
  RMatrix probabilities(const CMatrix& rho, std::size_t k) const {
    const BinnedPhase& b = phases_[k];
    return grid_density(regroup_modes(rho.cwiseProduct(b.factors).real(), space_.levels()), b.qa,
                        b.qb) *
           b.dx2;
  }

 private:
  FockSpace space_;
  double min_prob_;
  int workers_;
  double total_ = 0.0;
  std::vector<BinnedPhase> phases_;
};

inline CMatrix sandwich_normalized(const CMatrix& a, const CMatrix& rho) {
  CMatrix next = a * rho * a.adjoint();
  next = (0.5 * (next + next.adjoint())).eval();
  return next / next.trace().real();
}

}  // namespace detail

/// R = (1/N) sum_bins (n / P) U |x><x| U^dagger dx^2, Hermitian and PSD.
inline OperatorMatrix r_operator(const DensityMatrix& rho, std::span<const Histogram2D> hists,
                                 double min_bin_prob = 1e-12) {
  const detail::LikelihoodModel model(rho.space(), hists, min_bin_prob, 1);
  CMatrix r = model.evaluate(rho.matrix()).r;
  r = (0.5 * (r + r.adjoint())).eval();
  return OperatorMatrix(rho.space(), std::move(r), true);
}

/// Log-likelihood sum n log P (multinomial constant dropped).
inline double log_likelihood(const DensityMatrix& rho, std::span<const Histogram2D> hists,
                             double min_bin_prob = 1e-12) {
  const detail::LikelihoodModel model(rho.space(), hists, min_bin_prob, 1);
  return model.evaluate(rho.matrix(), false).loglik;
}

struct MLResult {
  DensityMatrix rho;
  std::vector<double> loglik_trace;  // one entry per accepted iterate, starting at N[1]
  std::vector<double> min_eigenvalues;  // per iterate, when tracked
  int iterations = 0;
  double fixed_point_residual = 0.0;  // max |R rho R - rho| at the returned rho
  double trace_r_rho = 0.0;           // Tr[R rho] at the returned rho
  bool converged = false;
  int diluted_steps = 0;  // steps that fell back to (1 + eps R) to keep the likelihood monotone
  std::size_t floored_bins = 0;
};

inline constexpr double kLoglikSlack = 1e-9;
inline constexpr int kMaxDilutionHalvings = 40;

/// Starts from the normalized identity and iterates rho <- N[R rho R] until
/// max |R rho R - rho| <= tol. A step that would lower the likelihood is
/// replaced by rho <- N[(1 + eps R) rho (1 + eps R)] with eps halved until the
/// likelihood does not drop.
inline MLResult ml_reconstruct(std::span<const Histogram2D> hists, const TomographyConfig& cfg) {
  cfg.validate();
  const FockSpace space(cfg.n_cut);
  const detail::LikelihoodModel model(space, hists, cfg.min_bin_prob, cfg.workers);
  const Index d = space.dim();
  const CMatrix identity = CMatrix::Identity(d, d);

  CMatrix rho = identity / double(d);
  detail::Evaluation cur = model.evaluate(rho);
  MLResult res{DensityMatrix::maximally_mixed(space), {}, {}, 0, 0.0, 0.0, false, 0, 0};
  res.loglik_trace.push_back(cur.loglik);
  if (cfg.track_min_eigenvalue) res.min_eigenvalues.push_back(hermitian_eigenvalues(rho).minCoeff());

  // R rho R serves both as the residual and as the unnormalized next iterate.
  CMatrix rrr = cur.r * rho * cur.r;
  double resid = (rrr - rho).cwiseAbs().maxCoeff();
  while (resid > cfg.tol && res.iterations < cfg.max_iter) {
    CMatrix next = 0.5 * (rrr + rrr.adjoint());
    next /= next.trace().real();
    detail::Evaluation ev = model.evaluate(next);
    if (ev.loglik < cur.loglik - kLoglikSlack) {
      bool accepted = false;
      double eps = 1.0;
      for (int h = 0; h < kMaxDilutionHalvings; ++h, eps *= 0.5) {
        next = detail::sandwich_normalized(identity + eps * cur.r, rho);
        ev = model.evaluate(next);
        if (ev.loglik >= cur.loglik - kLoglikSlack) {
          accepted = true;
          break;
        }
      }
      if (!accepted) break;
      ++res.diluted_steps;
    }
    rho = std::move(next);
    cur = std::move(ev);
    ++res.iterations;
    res.loglik_trace.push_back(cur.loglik);
    if (cfg.track_min_eigenvalue)
      res.min_eigenvalues.push_back(hermitian_eigenvalues(rho).minCoeff());
    rrr = cur.r * rho * cur.r;
    resid = (rrr - rho).cwiseAbs().maxCoeff();
  }
  res.fixed_point_residual = resid;
  res.converged = resid <= cfg.tol;
  res.trace_r_rho = (cur.r * rho).trace().real();
  res.floored_bins = cur.floored_bins;
  res.rho = DensityMatrix::unchecked(space, std::move(rho));
  return res;
}

struct ExpectedHistogramOptions {
  int gauss_points = 6;  // per bin and axis
  double sigmas = kGridSigmas;
};

/// Histograms whose counts are round(total_per_theta * exact bin probability),
/// the bin integrals evaluated by Gauss-Legendre quadrature. With a large
/// total this is the infinite-data limit of bin_samples.
inline std::vector<Histogram2D> expected_histograms(const DensityMatrix& rho,
                                                    std::span<const double> thetas, double dx,
                                                    double total_per_theta,
                                                    const ExpectedHistogramOptions& opt = {}) {
  if (!(dx > 0.0) || !(total_per_theta > 0.0))
    throw InvalidArgument("expected_histograms: dx and total must be positive");
  using Gauss = boost::math::quadrature::gauss<double, 6>;
  if (opt.gauss_points != 6) throw InvalidArgument("expected_histograms: 6-point rule only");
  const auto& abscissa = Gauss::abscissa();  // nonnegative half of the symmetric rule
  const auto& weights = Gauss::weights();
  std::vector<double> nodes01, w01;  // rule mapped to [0, 1]
  for (std::size_t k = 0; k < abscissa.size(); ++k) {
    const double a = abscissa[k];
    const double w = weights[k];
    if (a == 0.0) {
      nodes01.push_back(0.5);
      w01.push_back(w / 2.0);
    } else {
      nodes01.push_back(0.5 - a / 2.0);
      w01.push_back(w / 2.0);
      nodes01.push_back(0.5 + a / 2.0);
      w01.push_back(w / 2.0);
    }
  }
  const std::size_t g = nodes01.size();
  const double half = opt.sigmas * quadrature_sigma_max(rho);
  const std::int64_t lo = std::int64_t(std::floor(-half / dx));
  const std::int64_t hi = std::int64_t(std::ceil(half / dx));
  const Index nbins = Index(hi - lo);
  std::vector<double> xs;
  xs.reserve(std::size_t(nbins) * g);
  for (Index b = 0; b < nbins; ++b)
    for (std::size_t k = 0; k < g; ++k) xs.push_back((double(lo + b) + nodes01[k]) * dx);
  const int L = rho.space().levels();
  const RMatrix q = detail::pair_products(hermite_table(xs, L - 1));
  // Aggregation matrix: bin b collects its nodes with weight w01 * dx.
  RMatrix agg = RMatrix::Zero(nbins, Index(xs.size()));
  for (Index b = 0; b < nbins; ++b)
    for (std::size_t k = 0; k < g; ++k) agg(b, b * Index(g) + Index(k)) = w01[k] * dx;

  std::vector<Histogram2D> out;
  for (double theta : thetas) {
    const RMatrix s = detail::regroup_modes(detail::rotated_real(rho, lo_rotation_angle(theta)), L);
    const RMatrix dens = detail::grid_density(s, q, q);
    const RMatrix pbin = agg * dens * agg.transpose();
    Histogram2D h;
    h.theta = wrap_phase(theta);
    h.dx = dx;
    h.origin_a = double(lo) * dx;
    h.origin_b = double(lo) * dx;
    h.counts = (pbin.array() * total_per_theta).round().cwiseMax(0.0).cast<std::int64_t>();
    out.push_back(std::move(h));
  }
  return out;
}

/// Drops empty border rows and columns, keeping the origin aligned.
inline Histogram2D trim(const Histogram2D& h) {
  Index r0 = 0, r1 = h.counts.rows() - 1, c0 = 0, c1 = h.counts.cols() - 1;
  while (r0 < r1 && h.counts.row(r0).sum() == 0) ++r0;
  while (r1 > r0 && h.counts.row(r1).sum() == 0) --r1;
  while (c0 < c1 && h.counts.col(c0).sum() == 0) ++c0;
  while (c1 > c0 && h.counts.col(c1).sum() == 0) --c1;
  Histogram2D out = h;
  out.origin_a = h.origin_a + double(r0) * h.dx;
  out.origin_b = h.origin_b + double(c0) * h.dx;
  out.counts = h.counts.block(r0, c0, r1 - r0 + 1, c1 - c0 + 1);
  return out;
}

/// Equally spaced phases k pi / n_theta, k = 0..n_theta-1.
inline std::vector<double> uniform_thetas(int n_theta) {
  if (n_theta < 1) throw InvalidArgument("uniform_thetas: n_theta must be >= 1");
  std::vector<double> t(static_cast<std::size_t>(n_theta));
  for (int k = 0; k < n_theta; ++k) t[std::size_t(k)] = kPi * double(k) / double(n_theta);
  return t;
}

}  // namespace eprlab
