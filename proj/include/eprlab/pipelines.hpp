#pragma once

// End-to-end recipes: presets, the Fig S2 convergence study, the Fig S3 noisy
// reconstruction and the Fig 3 time sweep. Every stochastic step draws from
// (seed, index) streams, so tables are identical for any worker count.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "eprlab/criteria.hpp"
#include "eprlab/homodyne.hpp"
#include "eprlab/io.hpp"
#include "eprlab/metrics.hpp"
#include "eprlab/states.hpp"
#include "eprlab/stats.hpp"
#include "eprlab/tomography.hpp"

namespace eprlab {

struct ExperimentPreset {
  std::string name;
  double xi = 0.0;
  std::optional<SqueezingSchedule> schedule;  // when set, xi = Omega t
  double state_phase_noise = 0.0;             // pair-phase width of the prepared state
  NoiseModel noise;                           // applied at readout
  std::vector<double> thetas;
  int p_per_theta = 100;
  double dx = 0.25;
  int n_cut = 10;
  std::uint64_t seed = 1;
  int max_iter = 5000;

  double resolved_xi() const { return schedule ? squeeze_param(*schedule) : xi; }

  void validate() const {
    if (name.empty()) throw InvalidArgument("preset: empty name");
    detail::require_xi(resolved_xi());
    if (!(state_phase_noise >= 0.0)) throw InvalidArgument("preset: state_phase_noise must be >= 0");
    noise.validate();
    if (thetas.empty()) throw InvalidArgument("preset: no phases");
    for (double t : thetas)
      if (!std::isfinite(t)) throw InvalidArgument("preset: non-finite phase");
    if (p_per_theta < 1) throw InvalidArgument("preset: p_per_theta must be >= 1");
    if (!(dx > 0.0)) throw InvalidArgument("preset: dx must be positive");
    if (n_cut < 0) throw InvalidArgument("preset: n_cut must be >= 0");
    if (max_iter < 1) throw InvalidArgument("preset: max_iter must be >= 1");
  }

  FockSpace space() const { return FockSpace(n_cut); }

  /// The prepared state: the pair state, dephased when state_phase_noise > 0.
  DensityMatrix truth() const {
    const FockSpace s = space();
    if (state_phase_noise > 0.0) return phase_noisy_state(resolved_xi(), state_phase_noise, s);
    return DensityMatrix::pure(tmsv(resolved_xi(), s));
  }

  TomographyConfig tomography(int workers = 1) const {
    TomographyConfig cfg;
    cfg.dx = dx;
    cfg.n_cut = n_cut;
    cfg.max_iter = max_iter;
    cfg.workers = workers;
    return cfg;
  }
};

inline const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names{"vacuum", "fig_s2", "fig_s3", "fig3"};
  return names;
}

inline std::string joined_preset_names() {
  std::string s;
  for (const auto& n : preset_names()) s += (s.empty() ? "" : ", ") + n;
  return s;
}

inline ExperimentPreset preset_vacuum() {
  ExperimentPreset p;
  p.name = "vacuum";
  p.thetas = uniform_thetas(8);
  p.p_per_theta = 10000;
  p.dx = 0.1;
  p.n_cut = 3;
  return p;
}

/// Ideal pair state at xi = 0.8 on 29 equally spaced phases.
inline ExperimentPreset preset_fig_s2() {
  ExperimentPreset p;
  p.name = "fig_s2";
  p.xi = 0.8;
  p.thetas = uniform_thetas(29);
  return p;
}

/// Dephased pair state (pair-phase width 0.36) with a 0.12 sum-variance shift.
inline ExperimentPreset preset_fig_s3() {
  ExperimentPreset p;
  p.name = "fig_s3";
  p.xi = 0.63;
  p.state_phase_noise = kTomoPairPhaseNoise;
  p.noise = {0.0, 0.0, kTomoSumShift, 0.0};
  p.thetas = uniform_thetas(29);
  return p;
}

/// Conjugate-phase readout at the optimal squeezing time with the dynamics noise,
/// at pi and pi/2 where tmsv(xi) is squeezed. n_cut 12 moves the expected EPR product by under 0.5%, well inside the shot
/// noise at 2000 shots. Two phases leave most of the state unobserved, so the
/// likelihood iteration needs a larger cap to reach its fixed point.
inline ExperimentPreset preset_fig3() {
  ExperimentPreset p;
  p.name = "fig3";
  p.schedule = SqueezingSchedule{kSpinDynamicsRate, kOptimalSqueezingTime};
  p.noise = NoiseModel::fig3();
  p.thetas = {kPi, kPi / 2.0};
  p.p_per_theta = 2000;
  p.n_cut = 12;
  p.max_iter = 20000;
  return p;
}

inline ExperimentPreset preset_by_name(const std::string& name) {
  if (name == "vacuum") return preset_vacuum();
  if (name == "fig_s2") return preset_fig_s2();
  if (name == "fig_s3") return preset_fig_s3();
  if (name == "fig3") return preset_fig3();
  throw UsageError("unknown preset '" + name + "' (valid: " + joined_preset_names() + ")");
}

inline Json preset_to_json(const ExperimentPreset& p) {
  Json j;
  j["name"] = p.name;
  j["xi"] = p.resolved_xi();
  if (p.schedule)
    j["schedule"] = {{"omega_rad_per_s", p.schedule->omega}, {"t_s", p.schedule->t}};
  j["state_phase_noise"] = p.state_phase_noise;
  j["noise"] = noise_to_json(p.noise);
  j["thetas_rad"] = p.thetas;
  j["p_per_theta"] = p.p_per_theta;
  j["dx"] = p.dx;
  j["n_cut"] = p.n_cut;
  j["seed"] = p.seed;
  j["max_iter"] = p.max_iter;
  return j;
}

/// Readout through atom counts. Shot order is phase-major; shot k carries phase
/// thetas[k / p_per_theta].
struct PresetSimulation {
  SimulatedShots sim;
  std::vector<double> shot_thetas;
  std::vector<QuadratureSample> estimated;  // quadratures recovered from the counts
};

inline PresetSimulation simulate_preset(const ExperimentPreset& p, const HomodyneConfig& cfg,
                                        int workers = 1) {
  p.validate();
  const SamplingOptions opt{kDefaultGridPoints, workers};
  PresetSimulation out;
  if (p.state_phase_noise > 0.0)
    out.sim = simulate_shots(p.truth(), cfg, p.noise, p.thetas, p.p_per_theta, p.seed, opt);
  else
    out.sim = simulate_shots(tmsv(p.resolved_xi(), p.space()), cfg, p.noise, p.thetas,
                             p.p_per_theta, p.seed, opt);
  out.shot_thetas.resize(out.sim.shots.size());
  for (std::size_t k = 0; k < out.shot_thetas.size(); ++k)
    out.shot_thetas[k] = p.thetas[k / std::size_t(p.p_per_theta)];
  out.estimated = shots_to_quadratures(out.sim.shots, out.shot_thetas, cfg);
  return out;
}

/// Ideal-detector samples of the preset state.
inline std::vector<QuadratureSample> sample_preset(const ExperimentPreset& p, std::uint64_t seed,
                                                   int workers = 1) {
  p.validate();
  const SamplingOptions opt{kDefaultGridPoints, workers};
  if (p.state_phase_noise > 0.0)
    return sample_quadratures(p.truth(), p.thetas, p.p_per_theta, p.noise, seed, opt);
  return sample_quadratures(tmsv(p.resolved_xi(), p.space()), p.thetas, p.p_per_theta, p.noise,
                            seed, opt);
}

/// Module versions recorded in every manifest.
inline Json module_versions() {
  Json j;
  for (const char* m :
       {"fock-core", "states", "homodyne", "criteria", "tomography", "metrics", "pipelines", "cli-io"})
    j[m] = kLibraryVersion;
  return j;
}

inline Json make_manifest(const std::string& command, const ExperimentPreset& preset,
                          std::uint64_t seed, const std::vector<std::string>& files,
                          Json extra = Json::object()) {
  Json j;
  j["tool"] = "eprlab";
  j["version"] = kLibraryVersion;
  j["command"] = command;
  j["preset"] = preset_to_json(preset);
  j["seed"] = seed;
  j["modules"] = module_versions();
  j["files"] = files;
  if (!extra.empty()) j["parameters"] = std::move(extra);
  return j;
}

// ---------------------------------------------------------------------------
// Fig S2: fidelity of the reconstruction versus the number of shots per phase

struct FigS2Options {
  std::vector<int> p_values{25, 50, 100, 200, 400};
  std::vector<double> dx_values{0.25};
  int seeds = 5;
  std::vector<double> asymptote_dx{0.25, 0.1};
  double asymptote_total = 1e8;  // shots per phase in the expected-count limit
  int asymptote_max_iter = 5000;
  int bootstrap = 0;             // resamples per grid point; 0 disables
  int workers = 1;

  void validate() const {
    if (p_values.empty() || dx_values.empty()) throw InvalidArgument("fig_s2: empty grid");
    for (int p : p_values)
      if (p < 1) throw InvalidArgument("fig_s2: p must be >= 1");
    for (double d : dx_values)
      if (!(d > 0.0)) throw InvalidArgument("fig_s2: dx must be positive");
    for (double d : asymptote_dx)
      if (!(d > 0.0)) throw InvalidArgument("fig_s2: asymptote dx must be positive");
    if (seeds < 1) throw InvalidArgument("fig_s2: seeds must be >= 1");
    if (bootstrap != 0 && bootstrap < kMinBootstrap)
      throw InvalidArgument("fig_s2: bootstrap must be 0 or >= " + std::to_string(kMinBootstrap));
  }
};

struct FigS2Row {
  int p = 0;
  double dx = 0.0;
  int seed_index = 0;
  std::uint64_t seed = 0;
  double fidelity = 0.0;
  double bootstrap_se = 0.0;  // 0 when bootstrap is off
  int iterations = 0;
  double residual = 0.0;
  bool converged = false;
};

struct FigS2Summary {
  int p = 0;
  double dx = 0.0;
  double median = 0.0, mean = 0.0, sd = 0.0;
  double bootstrap_se = 0.0;  // mean over seeds; 0 when bootstrap is off
  int seeds = 0;
};

struct FigS2Asymptote {
  double dx = 0.0;
  double fidelity = 0.0;
  int iterations = 0;
  double residual = 0.0;
  bool converged = false;
};

struct FigS2Result {
  std::vector<FigS2Row> rows;
  std::vector<FigS2Summary> summary;
  std::vector<FigS2Asymptote> asymptotes;
  bool median_nondecreasing = true;  // per dx, along increasing p
};

inline double median_of(std::vector<double> v) {
  if (v.empty()) throw InvalidArgument("median: empty input");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline FigS2Result run_fig_s2(const ExperimentPreset& preset, const FigS2Options& opt = {}) {
  preset.validate();
  opt.validate();
  const PureState psi = tmsv(preset.resolved_xi(), preset.space());
  struct Point {
    int p;
    double dx;
    int s;
  };
  std::vector<Point> points;
  for (double dx : opt.dx_values)
    for (int p : opt.p_values)
      for (int s = 0; s < opt.seeds; ++s) points.push_back({p, dx, s});

  FigS2Result res;
  res.rows.resize(points.size());
  // Grid points run concurrently; each reconstruction is single-threaded.
  parallel_for(points.size(), opt.workers, [&](std::size_t i) {
    const Point& pt = points[i];
    FigS2Row& row = res.rows[i];
    row.p = pt.p;
    row.dx = pt.dx;
    row.seed_index = pt.s;
    row.seed = child_seed(preset.seed, i);
    ExperimentPreset local = preset;
    local.p_per_theta = pt.p;
    const auto samples = sample_quadratures(psi, local.thetas, pt.p, local.noise, row.seed);
    TomographyConfig cfg = local.tomography(1);
    cfg.dx = pt.dx;
    const auto hists = bin_samples(samples, pt.dx);
    const MLResult ml = ml_reconstruct(hists, cfg);
    row.fidelity = fidelity_pure(ml.rho, psi);
    row.iterations = ml.iterations;
    row.residual = ml.fixed_point_residual;
    row.converged = ml.converged;
    if (opt.bootstrap > 0) {
      std::vector<std::vector<QuadratureSample>> groups;
      for (const ThetaGroup& g : group_by_theta(samples)) groups.push_back(g.samples);
      auto stat = [&](const std::vector<std::vector<QuadratureSample>>& gs) {
        std::vector<QuadratureSample> flat;
        for (const auto& g : gs) flat.insert(flat.end(), g.begin(), g.end());
        return fidelity_pure(ml_reconstruct(bin_samples(flat, pt.dx), cfg).rho, psi);
      };
      row.bootstrap_se = bootstrap(groups, opt.bootstrap, stat, child_seed(row.seed, 1)).standard_error;
    }
  });

  for (double dx : opt.dx_values) {
    double prev = -1.0;
    for (int p : opt.p_values) {
      std::vector<double> f;
      double se = 0.0;
      for (const auto& r : res.rows)
        if (r.p == p && r.dx == dx) {
          f.push_back(r.fidelity);
          se += r.bootstrap_se;
        }
      FigS2Summary s;
      s.p = p;
      s.dx = dx;
      s.seeds = int(f.size());
      s.median = median_of(f);
      s.mean = mean(f);
      s.sd = f.size() > 1 ? std::sqrt(sample_variance(f)) : 0.0;
      s.bootstrap_se = se / double(f.size());
      if (s.median < prev) res.median_nondecreasing = false;
      prev = s.median;
      res.summary.push_back(s);
    }
  }

  const DensityMatrix truth = DensityMatrix::pure(psi);
  res.asymptotes.resize(opt.asymptote_dx.size());
  parallel_for(opt.asymptote_dx.size(), opt.workers, [&](std::size_t i) {
    const double dx = opt.asymptote_dx[i];
    std::vector<Histogram2D> hists;
    for (const auto& h : expected_histograms(truth, preset.thetas, dx, opt.asymptote_total))
      hists.push_back(trim(h));
    TomographyConfig cfg = preset.tomography(1);
    cfg.dx = dx;
    cfg.max_iter = opt.asymptote_max_iter;
    const MLResult ml = ml_reconstruct(hists, cfg);
    res.asymptotes[i] = {dx, fidelity_pure(ml.rho, psi), ml.iterations, ml.fixed_point_residual,
                         ml.converged};
  });
  return res;
}

// ---------------------------------------------------------------------------
// Fig S3: reconstruction of the dephased, sum-shifted pair state

struct SectorDominance {
  int n = 0;              // total particle number, even
  double twin = 0.0;      // <n/2, n/2|rho|n/2, n/2>
  double max_other = 0.0; // largest other diagonal entry in the sector
  bool dominant = false;
};

/// Twin-Fock dominance in every even sector up to n_max; odd sectors hold no twin state.
inline std::vector<SectorDominance> sector_dominance(const DensityMatrix& rho, int n_max) {
  const FockSpace& s = rho.space();
  std::vector<SectorDominance> out;
  for (int n = 0; n <= std::min(n_max, 2 * s.n_cut()); n += 2) {
    SectorDominance d;
    d.n = n;
    for (Index i : sector_indices(s, n)) {
      const auto [na, nb] = s.occupations(i);
      const double v = rho(i, i).real();
      if (na == nb) d.twin = v;
      else d.max_other = std::max(d.max_other, v);
    }
    d.dominant = d.twin > d.max_other;
    out.push_back(d);
  }
  return out;
}

/// Frobenius norm of the entries with at least one non-twin index.
inline double off_twin_norm(const DensityMatrix& rho) {
  const FockSpace& s = rho.space();
  double acc = 0.0;
  for (Index i = 0; i < s.dim(); ++i) {
    const auto [ia, ib] = s.occupations(i);
    for (Index j = 0; j < s.dim(); ++j) {
      const auto [ja, jb] = s.occupations(j);
      if (ia != ib || ja != jb) acc += std::norm(rho(i, j));
    }
  }
  return std::sqrt(acc);
}

inline constexpr int kDominanceMaxN = 6;

struct FigS3Options {
  bool noise_free_reference = true;
  int workers = 1;
};

struct FigS3Result {
  DensityMatrix truth;
  MLResult ml;
  MetricsReport metrics;         // of the reconstruction
  MetricsReport truth_metrics;
  double fidelity = 0.0;         // fidelity_mixed(reconstruction, truth)
  std::vector<SectorDominance> dominance;
  bool dominance_all = false;
  double non_twin_population = 0.0;
  double off_twin = 0.0;
  std::optional<double> reference_non_twin_population;  // noise-free run, same seed and p
  std::optional<double> reference_off_twin;
  std::optional<double> reference_fidelity;              // to the pure pair state
};

inline FigS3Result run_fig_s3(const ExperimentPreset& preset, const FigS3Options& opt = {}) {
  preset.validate();
  const DensityMatrix truth = preset.truth();
  const auto samples = sample_preset(preset, preset.seed, opt.workers);
  MLResult ml = ml_reconstruct(bin_samples(samples, preset.dx), preset.tomography(opt.workers));
  FigS3Result r{truth, ml, {}, {}, 0.0, {}, true, 0.0, 0.0, {}, {}, {}};
  r.metrics = metrics_report(ml.rho, preset.resolved_xi());
  r.truth_metrics = metrics_report(truth, preset.resolved_xi());
  r.fidelity = fidelity_mixed(ml.rho, truth);
  r.dominance = sector_dominance(ml.rho, kDominanceMaxN);
  for (const auto& d : r.dominance) r.dominance_all = r.dominance_all && d.dominant;
  r.non_twin_population = non_twin_population(ml.rho);
  r.off_twin = off_twin_norm(ml.rho);
  if (opt.noise_free_reference) {
    ExperimentPreset clean = preset;
    clean.state_phase_noise = 0.0;
    clean.noise = NoiseModel::none();
    const auto ref_samples = sample_preset(clean, preset.seed, opt.workers);
    const MLResult ref = ml_reconstruct(bin_samples(ref_samples, clean.dx), clean.tomography(opt.workers));
    r.reference_non_twin_population = non_twin_population(ref.rho);
    r.reference_off_twin = off_twin_norm(ref.rho);
    r.reference_fidelity = fidelity_pure(ref.rho, tmsv(clean.resolved_xi(), clean.space()));
  }
  return r;
}

// ---------------------------------------------------------------------------
// Fig 3: squeezing dynamics

struct Fig3Options {
  double t_max = 40e-3;
  double t_step = 2e-3;
  double model_step = 0.25e-3;  // resolution of the noise-model curve
  TimeSweepOptions sweep;
};

struct Fig3ModelPoint {
  double t = 0.0, xi = 0.0;
  double analytic_product = 1.0;
  double model_product = 1.0, model_insep_sum = 2.0;
};

struct Fig3Result {
  std::vector<TimeSweepRow> rows;
  std::vector<Fig3ModelPoint> model;
  double sampled_min_t = 0.0, sampled_min_product = 0.0;
  double model_min_t = 0.0, model_min_product = 0.0;
};

inline std::vector<double> time_grid(double t_max, double step) {
  if (!(t_max >= 0.0) || !(t_max <= 40e-3 + 1e-12) || !(step > 0.0))
    throw InvalidArgument("time grid must lie in [0, 40 ms] with a positive step");
  std::vector<double> t;
  const int n = int(std::floor(t_max / step + 1e-9));
  for (int k = 0; k <= n; ++k) t.push_back(double(k) * step);
  return t;
}

inline Fig3Result run_fig3(const ExperimentPreset& preset, const Fig3Options& opt = {}) {
  preset.validate();
  TimeSweepOptions sw = opt.sweep;
  if (preset.schedule) sw.omega = preset.schedule->omega;
  const std::vector<double> times = time_grid(opt.t_max, opt.t_step);
  Fig3Result r;
  r.rows = time_sweep(times, preset.noise, preset.p_per_theta, preset.seed, sw);
  r.sampled_min_product = r.rows.front().epr_product;
  r.sampled_min_t = r.rows.front().t;
  for (const auto& row : r.rows)
    if (row.epr_product < r.sampled_min_product) {
      r.sampled_min_product = row.epr_product;
      r.sampled_min_t = row.t;
    }
  const std::vector<double> fine = time_grid(opt.t_max, opt.model_step);
  r.model.resize(fine.size());
  parallel_for(fine.size(), sw.workers, [&](std::size_t i) {
    Fig3ModelPoint m;
    m.t = fine[i];
    m.xi = squeeze_param({sw.omega, m.t});
    const FockSpace space(cutoff_for(m.xi, sw));
    const auto [mp, ms] = model_epr(DensityMatrix::pure(tmsv_rotated(m.xi, 0.0, space)), preset.noise, sw);
    m.analytic_product = std::exp(-4.0 * m.xi);
    m.model_product = mp;
    m.model_insep_sum = ms;
    r.model[i] = m;
  });
  r.model_min_product = r.model.front().model_product;
  r.model_min_t = r.model.front().t;
  for (const auto& m : r.model)
    if (m.model_product < r.model_min_product) {
      r.model_min_product = m.model_product;
      r.model_min_t = m.t;
    }
  return r;
}

}  // namespace eprlab
