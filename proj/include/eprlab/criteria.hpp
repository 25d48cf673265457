#pragma once

// Two-mode variance statistics, the EPR (Reid) product and the inseparability sum.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "eprlab/homodyne.hpp"
#include "eprlab/states.hpp"
#include "eprlab/stats.hpp"

namespace eprlab {

struct VarianceEntry {
  double theta = 0.0;
  double v_plus = 0.0;   // Var(X_A + X_B)
  double v_minus = 0.0;  // Var(X_A - X_B)
  double se_plus = 0.0;
  double se_minus = 0.0;
  std::size_t count = 0;
};

struct SkippedGroup {
  double theta;
  std::size_t count;
};

struct VarianceSweep {
  std::vector<VarianceEntry> entries;
  std::vector<SkippedGroup> skipped;  // groups with fewer than 2 samples
};

namespace detail {

inline std::vector<double> combined(std::span<const QuadratureSample> s, double sign) {
  std::vector<double> v(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) v[i] = s[i].x_a + sign * s[i].x_b;
  return v;
}

}  // namespace detail

inline double v_plus(std::span<const QuadratureSample> s) {
  return sample_variance(detail::combined(s, +1.0));
}
inline double v_minus(std::span<const QuadratureSample> s) {
  return sample_variance(detail::combined(s, -1.0));
}

inline VarianceSweep variance_sweep(std::span<const QuadratureSample> samples) {
  VarianceSweep sweep;
  for (const ThetaGroup& g : group_by_theta(samples)) {
    const std::size_t n = g.samples.size();
    if (n < 2) {
      sweep.skipped.push_back({g.theta, n});
      continue;
    }
    VarianceEntry e;
    e.theta = g.theta;
    e.count = n;
    e.v_plus = v_plus(g.samples);
    e.v_minus = v_minus(g.samples);
    e.se_plus = variance_standard_error(e.v_plus, n);
    e.se_minus = variance_standard_error(e.v_minus, n);
    sweep.entries.push_back(e);
  }
  return sweep;
}

struct Occupations {
  double n_a = 0.0;
  double n_b = 0.0;
  double n0 = 1.0;
};

inline constexpr double kContinuousLimit = 1e-3;
inline constexpr double kConjugatePhaseTol = 0.02;

/// Which conjugate pairing gave the smaller product.
enum class Pairing { x_minus_p_plus, x_plus_p_minus };

inline const char* pairing_name(Pairing p) {
  return p == Pairing::x_minus_p_plus ? "V_x_minus*V_p_plus" : "V_x_plus*V_p_minus";
}

struct EprErrors {
  double v_x_plus, v_x_minus, v_p_plus, v_p_minus;
  double epr_product, insep_sum;
  double inferred_dx, inferred_dp;
};

struct EprReport {
  double theta_x = 0.0, theta_p = 0.0;
  std::size_t n_x = 0, n_p = 0;
  double v_x_plus = 0.0, v_x_minus = 0.0, v_p_plus = 0.0, v_p_minus = 0.0;
  Pairing pairing = Pairing::x_minus_p_plus;
  double epr_product = 0.0;        // min over the two conjugate pairings
  double other_product = 0.0;      // the pairing that did not fire
  double insep_sum = 0.0;          // variances of the firing pairing
  double epr_threshold = 0.25;     // (1 - n_B/n0)^2 / 4
  double insep_threshold = 2.0;    // 2 - (n_A + n_B)/n0
  bool continuous_limit = true;
  bool epr_satisfied = false;
  bool insep_satisfied = false;
  double inferred_dx = 0.0;        // Delta x_B^inf
  double inferred_dp = 0.0;        // Delta p_B^inf
  std::optional<EprErrors> errors;
  int bootstrap_resamples = 0;
};

struct FourVariances {
  double x_plus, x_minus, p_plus, p_minus;
};

inline FourVariances four_variances(std::span<const QuadratureSample> xs,
                                    std::span<const QuadratureSample> ps) {
  return {v_plus(xs), v_minus(xs), v_plus(ps), v_minus(ps)};
}

struct InferredUncertainties {
  double dx = 0.0;  // Delta x_B^inf
  double dp = 0.0;  // Delta p_B^inf
  Pairing pairing = Pairing::x_minus_p_plus;
};

/// Inferred deviations of B from A with linear estimators. For the
/// V_x^- V_p^+ pairing x_ext = x_A - (mean x_A - mean x_B) and
/// p_ext = -p_A + (mean p_A + mean p_B); the other pairing swaps the signs.
/// The squared deviations use the unbiased (n-1) normalization, so their
/// product equals the pairing's variance product exactly.
inline InferredUncertainties inferred_uncertainties(std::span<const QuadratureSample> xs,
                                                    std::span<const QuadratureSample> ps,
                                                    std::optional<Pairing> forced = std::nullopt) {
  if (xs.size() < 2 || ps.size() < 2)
    throw InvalidArgument("inferred_uncertainties: each group needs at least 2 samples");
  const FourVariances v = four_variances(xs, ps);
  const Pairing p = forced ? *forced
                           : (v.x_minus * v.p_plus <= v.x_plus * v.p_minus ? Pairing::x_minus_p_plus
                                                                           : Pairing::x_plus_p_minus);
  const double sx = p == Pairing::x_minus_p_plus ? -1.0 : 1.0;
  // x_B - x_ext = x_B - x_A + const for the first pairing, x_B + x_A + const otherwise
  std::vector<double> rx(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) rx[i] = xs[i].x_b + sx * xs[i].x_a;
  const double dx2 = sample_variance(rx);
  std::vector<double> rp(ps.size());
  for (std::size_t i = 0; i < ps.size(); ++i) rp[i] = ps[i].x_b - sx * ps[i].x_a;
  const double dp2 = sample_variance(rp);
  return {std::sqrt(dx2), std::sqrt(dp2), p};
}

struct EprOptions {
  int bootstrap = 200;  // 0 disables error estimation
  std::uint64_t seed = 0;
  int workers = 1;
  double phase_tol = kConjugatePhaseTol;
};

namespace detail {

inline double single_theta(std::span<const QuadratureSample> s, const char* what) {
  if (s.empty()) throw InvalidArgument(std::string("epr_report: empty ") + what + " group");
  const double th = s.front().theta;
  for (const auto& q : s)
    if (std::abs(q.theta - th) > kThetaGroupTol)
      throw InvalidArgument(std::string("epr_report: ") + what + " group mixes phases");
  return th;
}

/// |(dtheta mod pi) - pi/2|.
inline double conjugate_mismatch(double theta_x, double theta_p) {
  const double d = std::fmod(std::abs(theta_x - theta_p), kPi);
  return std::abs(d - kPi / 2.0);
}

}  // namespace detail

inline EprReport epr_report(std::span<const QuadratureSample> xs,
                            std::span<const QuadratureSample> ps, const Occupations& occ,
                            const EprOptions& opt = {}) {
  EprReport r;
  r.theta_x = detail::single_theta(xs, "x");
  r.theta_p = detail::single_theta(ps, "p");
  const double mismatch = detail::conjugate_mismatch(r.theta_x, r.theta_p);
  if (mismatch > opt.phase_tol)
    throw InvalidArgument("epr_report: phases differ from pi/2 (mod pi) by " +
                          std::to_string(mismatch) + " rad");
  if (xs.size() < 2 || ps.size() < 2)
    throw InvalidArgument("epr_report: each group needs at least 2 samples");
  if (!(occ.n0 > 0.0) || occ.n_a < 0.0 || occ.n_b < 0.0)
    throw InvalidArgument("epr_report: occupations must be nonnegative with n0 > 0");
  r.n_x = xs.size();
  r.n_p = ps.size();

  const FourVariances v = four_variances(xs, ps);
  r.v_x_plus = v.x_plus;
  r.v_x_minus = v.x_minus;
  r.v_p_plus = v.p_plus;
  r.v_p_minus = v.p_minus;
  const double a = v.x_minus * v.p_plus, b = v.x_plus * v.p_minus;
  r.pairing = a <= b ? Pairing::x_minus_p_plus : Pairing::x_plus_p_minus;
  r.epr_product = std::min(a, b);
  r.other_product = std::max(a, b);
  r.insep_sum = r.pairing == Pairing::x_minus_p_plus ? v.x_minus + v.p_plus : v.x_plus + v.p_minus;

  r.continuous_limit = occ.n_b / occ.n0 <= kContinuousLimit;
  if (r.continuous_limit) {
    r.epr_threshold = 0.25;
    r.insep_threshold = 2.0;
  } else {
    r.epr_threshold = 0.25 * std::pow(1.0 - occ.n_b / occ.n0, 2);
    r.insep_threshold = 2.0 - (occ.n_a + occ.n_b) / occ.n0;
  }
  r.epr_satisfied = r.epr_product < r.epr_threshold;
  r.insep_satisfied = r.insep_sum < r.insep_threshold;

  const InferredUncertainties inf = inferred_uncertainties(xs, ps, r.pairing);
  r.inferred_dx = inf.dx;
  r.inferred_dp = inf.dp;

  if (opt.bootstrap > 0) {
    const Pairing fired = r.pairing;
    const std::vector<std::vector<QuadratureSample>> groups{{xs.begin(), xs.end()},
                                                            {ps.begin(), ps.end()}};
    auto stat = [fired](const std::vector<std::vector<QuadratureSample>>& g) {
      const FourVariances w = four_variances(g[0], g[1]);
      const bool first = fired == Pairing::x_minus_p_plus;
      const double prod = first ? w.x_minus * w.p_plus : w.x_plus * w.p_minus;
      const double sum = first ? w.x_minus + w.p_plus : w.x_plus + w.p_minus;
      const double dx = std::sqrt(first ? w.x_minus : w.x_plus);
      const double dp = std::sqrt(first ? w.p_plus : w.p_minus);
      return std::vector<double>{w.x_plus, w.x_minus, w.p_plus, w.p_minus, prod, sum, dx, dp};
    };
    const auto bs = bootstrap_multi(groups, opt.bootstrap, stat, opt.seed, opt.workers);
    r.errors = EprErrors{bs[0].standard_error, bs[1].standard_error, bs[2].standard_error,
                         bs[3].standard_error, bs[4].standard_error, bs[5].standard_error,
                         bs[6].standard_error, bs[7].standard_error};
    r.bootstrap_resamples = opt.bootstrap;
  }
  return r;
}

/// Splits a sample set into the conjugate pair of phase groups (the first two
/// distinct phases whose difference is pi/2 mod pi) and reports on it.
inline EprReport epr_report_from_samples(std::span<const QuadratureSample> samples,
                                         const Occupations& occ, const EprOptions& opt = {}) {
  const auto groups = group_by_theta(samples);
  for (std::size_t i = 0; i < groups.size(); ++i)
    for (std::size_t j = i + 1; j < groups.size(); ++j)
      if (detail::conjugate_mismatch(groups[i].theta, groups[j].theta) <= opt.phase_tol)
        return epr_report(groups[i].samples, groups[j].samples, occ, opt);
  throw InvalidArgument("epr_report: no pair of phases separated by pi/2 (mod pi)");
}

// ---------------------------------------------------------------------------
// Squeezing dynamics

struct TimeSweepOptions {
  double omega = kSpinDynamicsRate;
  double theta_x = 5.0 * kPi / 4.0;  // reads out -x for the real-amplitude pair state
  double theta_p = 3.0 * kPi / 4.0;  // reads out p
  int n_cut = -1;                    // < 0: smallest cutoff with tail below tail_target
  double tail_target = 1e-5;
  int n_cut_min = 10;
  int n_cut_max = 40;
  HomodyneConfig homodyne = HomodyneConfig::experiment();
  int workers = 1;
};

struct TimeSweepRow {
  double t = 0.0, xi = 0.0;
  int n_cut = 0;
  double v_x_plus = 0.0, v_x_minus = 0.0, v_p_plus = 0.0, v_p_minus = 0.0;
  double v_sq = 0.0;    // mean of the two variances in the firing pairing
  double v_anti = 0.0;  // mean of the other two
  double epr_product = 0.0;
  double insep_sum = 0.0;
  double analytic_sq = 1.0, analytic_anti = 1.0, analytic_product = 1.0;  // noise-free
  double model_product = 1.0, model_insep_sum = 2.0;  // exact noise-model expectation
  std::string pairing;
};

inline int cutoff_for(double xi, const TimeSweepOptions& opt) {
  if (opt.n_cut >= 0) return opt.n_cut;
  const double lambda = std::pow(std::tanh(xi), 2);
  int n = opt.n_cut_min;
  while (n < opt.n_cut_max && std::pow(lambda, n + 1) > opt.tail_target) ++n;
  return n;
}

/// Expected readout product and sum for the noise model, minimized over pairings.
inline std::pair<double, double> model_epr(const DensityMatrix& rho, const NoiseModel& noise,
                                           const TimeSweepOptions& opt) {
  const TwoModeVariances vx = model_readout_variances(rho, opt.theta_x, noise, opt.homodyne);
  const TwoModeVariances vp = model_readout_variances(rho, opt.theta_p, noise, opt.homodyne);
  const double a = vx.minus * vp.plus, b = vx.plus * vp.minus;
  return a <= b ? std::pair{a, vx.minus + vp.plus} : std::pair{b, vx.plus + vp.minus};
}

/// Samples counts at the two conjugate phases for each t and reports the
/// variances, EPR product and inseparability sum, with the analytic and model curves.
inline std::vector<TimeSweepRow> time_sweep(std::span<const double> times, const NoiseModel& noise,
                                            int p_per_point, std::uint64_t seed,
                                            const TimeSweepOptions& opt = {}) {
  if (p_per_point < 2) throw InvalidArgument("time_sweep: p_per_point must be >= 2");
  std::vector<TimeSweepRow> rows;
  rows.reserve(times.size());
  for (std::size_t i = 0; i < times.size(); ++i) {
    TimeSweepRow row;
    row.t = times[i];
    row.xi = squeeze_param({opt.omega, row.t});
    row.n_cut = cutoff_for(row.xi, opt);
    const FockSpace space(row.n_cut);
    const PureState psi = tmsv_rotated(row.xi, 0.0, space);
    const std::vector<double> thetas{opt.theta_x, opt.theta_p};
    const SimulatedShots sim = simulate_shots(psi, opt.homodyne, noise, thetas, p_per_point,
                                              child_seed(seed, i), {kDefaultGridPoints, opt.workers});
    std::vector<double> shot_thetas(sim.shots.size());
    for (std::size_t k = 0; k < shot_thetas.size(); ++k)
      shot_thetas[k] = thetas[k / std::size_t(p_per_point)];
    const auto q = shots_to_quadratures(sim.shots, shot_thetas, opt.homodyne);
    const std::span<const QuadratureSample> all(q);
    const auto xs = all.subspan(0, std::size_t(p_per_point));
    const auto ps = all.subspan(std::size_t(p_per_point));
    const EprReport rep = epr_report(xs, ps, {}, {0, 0, 1, kConjugatePhaseTol});
    row.v_x_plus = rep.v_x_plus;
    row.v_x_minus = rep.v_x_minus;
    row.v_p_plus = rep.v_p_plus;
    row.v_p_minus = rep.v_p_minus;
    row.epr_product = rep.epr_product;
    row.insep_sum = rep.insep_sum;
    row.pairing = pairing_name(rep.pairing);
    if (rep.pairing == Pairing::x_minus_p_plus) {
      row.v_sq = 0.5 * (rep.v_x_minus + rep.v_p_plus);
      row.v_anti = 0.5 * (rep.v_x_plus + rep.v_p_minus);
    } else {
      row.v_sq = 0.5 * (rep.v_x_plus + rep.v_p_minus);
      row.v_anti = 0.5 * (rep.v_x_minus + rep.v_p_plus);
    }
    const AnalyticVariances av = analytic_variances(row.xi);
    row.analytic_sq = av.squeezed;
    row.analytic_anti = av.antisqueezed;
    row.analytic_product = av.squeezed * av.squeezed;
    const auto [mp, ms] = model_epr(DensityMatrix::pure(psi), noise, opt);
    row.model_product = mp;
    row.model_insep_sum = ms;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace eprlab
