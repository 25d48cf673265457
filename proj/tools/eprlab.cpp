// eprlab command-line front end.
//
// Exit codes: 0 success, 1 runtime error, 2 reconstruction did not converge
// (outputs still written), 64 usage error.

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "eprlab/criteria.hpp"
#include "eprlab/homodyne.hpp"
#include "eprlab/io.hpp"
#include "eprlab/metrics.hpp"
#include "eprlab/pipelines.hpp"
#include "eprlab/runtime.hpp"
#include "eprlab/tomography.hpp"
#include "json_config.hpp"

namespace fs = std::filesystem;
using namespace eprlab;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitNotConverged = 2;
constexpr int kExitUsage = 64;

struct Common {
  std::optional<std::uint64_t> seed;
  int workers = 1;
  std::string preset;
  std::string config;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--seed", c.seed, "Random seed (default: the preset's)");
  sub->add_option("--workers", c.workers, "Worker threads; 1 gives bit-exact reruns")
      ->check(CLI::PositiveNumber);
  sub->add_option("--preset", c.preset, "Preset: " + joined_preset_names());
  sub->add_option("--config", c.config, "JSON object of option values; command-line flags win");
}

std::optional<ExperimentPreset> named_preset(const Common& c) {
  if (c.preset.empty()) return std::nullopt;
  return preset_by_name(c.preset);
}

std::string seed_dir_name(const std::string& name, std::uint64_t seed) {
  return name + "_seed" + std::to_string(seed);
}

fs::path parent_or_cwd(const fs::path& p) {
  return p.has_parent_path() ? p.parent_path() : fs::path(".");
}

void require_file(const std::string& path) {
  if (!fs::is_regular_file(path)) throw UsageError("input file not found: " + path);
}

void require_output_dir(const fs::path& dir) {
  if (fs::exists(dir) && !fs::is_directory(dir))
    throw UsageError("output path exists and is not a directory: " + dir.string());
}

std::string name_only(const fs::path& p) { return p.filename().string(); }

std::vector<std::string> file_names(const std::vector<fs::path>& paths) {
  std::vector<std::string> out;
  for (const auto& p : paths) out.push_back(name_only(p));
  return out;
}

std::string csv_bool(bool b) { return b ? "true" : "false"; }

// ---------------------------------------------------------------------------
// simulate

struct SimulateArgs {
  Common common;
  std::optional<double> xi;
  std::optional<int> p;
  std::vector<double> thetas;
  std::optional<int> n_theta;
  std::optional<int> n_cut;
  std::optional<std::string> noise;
  std::optional<double> sigma_phase, rf_noise, sum_shift, detection_noise, state_phase_noise;
  std::string out = "runs";
};

void register_simulate(CLI::App& app, SimulateArgs& a) {
  CLI::App* sub = app.add_subcommand("simulate", "Sample homodyne shots and quadratures");
  add_common(sub, a.common);
  sub->add_option("--xi", a.xi, "Squeezing parameter (replaces the preset's)");
  sub->add_option("--p", a.p, "Shots per phase");
  sub->add_option("--thetas", a.thetas, "Local-oscillator phases, rad")->delimiter(',');
  sub->add_option("--n-theta", a.n_theta, "Use n equally spaced phases k pi / n");
  sub->add_option("--n-cut", a.n_cut, "Fock cutoff per mode");
  sub->add_option("--noise", a.noise, "Readout noise preset: none, fig3, tomo");
  sub->add_option("--sigma-phase", a.sigma_phase, "Local-oscillator phase jitter, rad");
  sub->add_option("--rf-noise", a.rf_noise, "Relative jitter of the transfer fraction");
  sub->add_option("--sum-shift", a.sum_shift, "Variance added along the quadrature sum");
  sub->add_option("--detection-noise", a.detection_noise, "Gaussian readout noise, atoms");
  sub->add_option("--state-phase-noise", a.state_phase_noise, "Pair-phase dephasing width, rad");
  sub->add_option("--out", a.out, "Root directory for run directories");
}

ExperimentPreset resolve_simulation(const SimulateArgs& a) {
  ExperimentPreset p;
  if (auto named = named_preset(a.common)) {
    p = *named;
  } else if (a.xi) {
    p.name = "custom";
    p.thetas = {0.0};
  } else {
    throw UsageError("simulate: give --preset or --xi");
  }
  if (a.xi) {
    p.xi = *a.xi;
    p.schedule.reset();
  }
  if (a.p) p.p_per_theta = *a.p;
  if (a.n_theta && !a.thetas.empty()) throw UsageError("simulate: --thetas and --n-theta conflict");
  if (a.n_theta) p.thetas = uniform_thetas(*a.n_theta);
  if (!a.thetas.empty()) p.thetas = a.thetas;
  if (a.n_cut) p.n_cut = *a.n_cut;
  if (a.noise) p.noise = NoiseModel::by_name(*a.noise);
  if (a.sigma_phase) p.noise.sigma_phase = *a.sigma_phase;
  if (a.rf_noise) p.noise.rf_rel_noise = *a.rf_noise;
  if (a.sum_shift) p.noise.sum_variance_shift = *a.sum_shift;
  if (a.detection_noise) p.noise.detection_noise_atoms = *a.detection_noise;
  if (a.state_phase_noise) p.state_phase_noise = *a.state_phase_noise;
  if (a.common.seed) p.seed = *a.common.seed;
  p.validate();
  return p;
}

int cmd_simulate(const SimulateArgs& a) {
  const ExperimentPreset p = resolve_simulation(a);
  const fs::path dir = fs::path(a.out) / seed_dir_name(p.name, p.seed);
  require_output_dir(dir);
  const HomodyneConfig cfg = HomodyneConfig::experiment();
  const PresetSimulation sim = simulate_preset(p, cfg, a.common.workers);
  OutputSet out;
  out.add(dir / "samples.csv", samples_to_csv(sim.estimated));
  out.add(dir / "shots.csv", shots_to_csv(sim.sim.shots));
  Json params;
  params["homodyne"] = {{"s2", cfg.s2()}, {"n_tot", cfg.n_tot()}, {"asymmetry", cfg.asymmetry()}};
  params["rows"] = sim.estimated.size();
  const fs::path manifest = dir / "manifest.json";
  std::vector<std::string> files = file_names(out.paths());
  files.push_back(name_only(manifest));
  out.add_json(manifest, make_manifest("simulate", p, p.seed, files, params));
  out.commit();
  std::cout << dir.string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// tomo

struct TomoArgs {
  Common common;
  std::string samples;
  std::optional<double> dx, tol;
  std::optional<int> n_cut, max_iter;
  bool track_min_eig = false;
  std::optional<std::string> out;
};

void register_tomo(CLI::App& app, TomoArgs& a) {
  CLI::App* sub = app.add_subcommand("tomo", "Maximum-likelihood reconstruction from samples");
  add_common(sub, a.common);
  sub->add_option("samples", a.samples, "Sample CSV (theta_rad,x_a,x_b)")->required();
  sub->add_option("--dx", a.dx, "Histogram bin width");
  sub->add_option("--n-cut", a.n_cut, "Fock cutoff per mode");
  sub->add_option("--max-iter", a.max_iter, "Iteration limit");
  sub->add_option("--tol", a.tol, "Fixed-point residual target");
  sub->add_flag("--track-min-eig", a.track_min_eig, "Record the minimum eigenvalue per iterate");
  sub->add_option("--out", a.out, "Output directory (default: next to the samples)");
}

int cmd_tomo(const TomoArgs& a) {
  require_file(a.samples);
  TomographyConfig cfg;
  if (auto p = named_preset(a.common)) cfg = p->tomography();
  if (a.dx) cfg.dx = *a.dx;
  if (a.n_cut) cfg.n_cut = *a.n_cut;
  if (a.max_iter) cfg.max_iter = *a.max_iter;
  if (a.tol) cfg.tol = *a.tol;
  cfg.track_min_eigenvalue = a.track_min_eig;
  cfg.workers = a.common.workers;
  cfg.validate();
  const fs::path dir = a.out ? fs::path(*a.out) : parent_or_cwd(a.samples);
  require_output_dir(dir);

  const auto samples = samples_from_csv(read_text(a.samples), a.samples);
  const auto hists = bin_samples(samples, cfg.dx);
  const MLResult ml = ml_reconstruct(hists, cfg);

  Json diag = ml_diagnostics_to_json(ml);
  diag["config"] = {{"dx", cfg.dx}, {"n_cut", cfg.n_cut}, {"max_iter", cfg.max_iter},
                    {"tol", cfg.tol}, {"min_bin_prob", cfg.min_bin_prob}};
  diag["histograms"] = hists.size();
  diag["samples"] = samples.size();
  OutputSet out;
  out.add_json(dir / "density.json", density_to_json(ml.rho));
  out.add_json(dir / "diagnostics.json", diag);
  out.add_json(dir / "histograms.json", histograms_to_json(hists));
  out.commit();
  std::cout << (dir / "density.json").string() << "\n";
  if (!ml.converged) {
    std::cerr << "tomo: not converged after " << ml.iterations << " iterations (residual "
              << ml.fixed_point_residual << ")\n";
    return kExitNotConverged;
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// criteria

struct CriteriaArgs {
  Common common;
  std::string samples;
  double n_a = 0.0, n_b = 0.0, n0 = 1.0;
  int bootstrap = 200;
  std::optional<double> theta_x, theta_p;
  double phase_tol = kConjugatePhaseTol;
  std::optional<std::string> out;
};

void register_criteria(CLI::App& app, CriteriaArgs& a) {
  CLI::App* sub = app.add_subcommand("criteria", "EPR and inseparability report from samples");
  add_common(sub, a.common);
  sub->add_option("samples", a.samples, "Sample CSV (theta_rad,x_a,x_b)")->required();
  sub->add_option("--n-a", a.n_a, "Mean occupation of mode A");
  sub->add_option("--n-b", a.n_b, "Mean occupation of mode B");
  sub->add_option("--n0", a.n0, "Local-oscillator occupation");
  sub->add_option("--bootstrap", a.bootstrap, "Bootstrap resamples (0 disables)");
  sub->add_option("--theta-x", a.theta_x, "Phase of the x-like group, rad");
  sub->add_option("--theta-p", a.theta_p, "Phase of the p-like group, rad");
  sub->add_option("--phase-tol", a.phase_tol, "Allowed deviation from conjugate phases, rad");
  sub->add_option("--out", a.out, "Output directory (default: next to the samples)");
}

const ThetaGroup& find_group(const std::vector<ThetaGroup>& groups, double theta,
                             const char* which) {
  const double t = wrap_phase(theta);
  for (const auto& g : groups)
    if (std::abs(g.theta - t) <= 1e-6) return g;
  throw InvalidArgument(std::string("criteria: no samples at ") + which + " = " +
                        format_double(theta));
}

int cmd_criteria(const CriteriaArgs& a) {
  require_file(a.samples);
  if (a.theta_x.has_value() != a.theta_p.has_value())
    throw UsageError("criteria: give both --theta-x and --theta-p or neither");
  const fs::path dir = a.out ? fs::path(*a.out) : parent_or_cwd(a.samples);
  require_output_dir(dir);
  const auto samples = samples_from_csv(read_text(a.samples), a.samples);
  std::uint64_t seed = 1;
  if (auto p = named_preset(a.common)) seed = p->seed;
  if (a.common.seed) seed = *a.common.seed;
  const EprOptions opt{a.bootstrap, seed, a.common.workers, a.phase_tol};
  const Occupations occ{a.n_a, a.n_b, a.n0};
  EprReport rep;
  if (a.theta_x) {
    const auto groups = group_by_theta(samples);
    rep = epr_report(find_group(groups, *a.theta_x, "theta_x").samples,
                     find_group(groups, *a.theta_p, "theta_p").samples, occ, opt);
  } else {
    rep = epr_report_from_samples(samples, occ, opt);
  }
  Json j = epr_report_to_json(rep);
  j["occupations"] = {{"n_a", occ.n_a}, {"n_b", occ.n_b}, {"n0", occ.n0}};
  j["seed"] = seed;
  OutputSet out;
  out.add_json(dir / "epr_report.json", j);
  out.add(dir / "variance_sweep.csv", sweep_to_csv(variance_sweep(samples)));
  out.commit();
  std::cout << (dir / "epr_report.json").string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// metrics

struct MetricsArgs {
  Common common;
  std::string density;
  std::optional<double> target_xi;
  std::optional<std::string> out;
};

void register_metrics(CLI::App& app, MetricsArgs& a) {
  CLI::App* sub = app.add_subcommand("metrics", "Entanglement metrics of a density matrix");
  add_common(sub, a.common);
  sub->add_option("density", a.density, "Density-matrix JSON")->required();
  sub->add_option("--target-xi", a.target_xi, "Pair-state squeezing to compare against");
  sub->add_option("--out", a.out, "Output directory (default: next to the matrix)");
}

int cmd_metrics(const MetricsArgs& a) {
  require_file(a.density);
  std::optional<double> target = a.target_xi;
  if (!target)
    if (auto p = named_preset(a.common)) target = p->resolved_xi();
  const fs::path dir = a.out ? fs::path(*a.out) : parent_or_cwd(a.density);
  require_output_dir(dir);
  const DensityMatrix rho = read_density(a.density);
  Json j = metrics_to_json(metrics_report(rho, target));
  j["n_cut"] = rho.space().n_cut();
  OutputSet out;
  out.add_json(dir / "metrics.json", j);
  out.commit();
  std::cout << (dir / "metrics.json").string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// reproduce

struct ReproduceArgs {
  Common common;
  std::string figure;
  std::string out = "runs";
  std::optional<int> p, n_theta;
  std::vector<int> p_values;
  std::optional<int> seeds, bootstrap, asymptote_max_iter;
  std::vector<double> asymptote_dx;
  std::optional<double> asymptote_total;
  bool no_asymptote = false;
  bool no_reference = false;
  std::optional<double> t_max, t_step, model_step;
};

void register_reproduce(CLI::App& app, ReproduceArgs& a) {
  CLI::App* sub = app.add_subcommand("reproduce", "Regenerate a figure's data tables");
  add_common(sub, a.common);
  sub->add_option("figure", a.figure, "fig3, fig_s2 or fig_s3")->required();
  sub->add_option("--out", a.out, "Root directory for run directories");
  sub->add_option("--p", a.p, "Shots per phase (fig3, fig_s3)");
  sub->add_option("--n-theta", a.n_theta, "Number of equally spaced phases (fig_s2, fig_s3)");
  sub->add_option("--p-values", a.p_values, "Shots-per-phase grid (fig_s2)")->delimiter(',');
  sub->add_option("--seeds", a.seeds, "Seeds per grid point (fig_s2)");
  sub->add_option("--bootstrap", a.bootstrap, "Bootstrap resamples per grid point (fig_s2)");
  sub->add_option("--asymptote-dx", a.asymptote_dx, "Bin widths of the asymptote runs (fig_s2)")
      ->delimiter(',');
  sub->add_option("--asymptote-total", a.asymptote_total, "Expected shots per phase (fig_s2)");
  sub->add_option("--asymptote-max-iter", a.asymptote_max_iter, "Iteration limit (fig_s2)");
  sub->add_flag("--no-asymptote", a.no_asymptote, "Skip the expected-count runs (fig_s2)");
  sub->add_flag("--no-reference", a.no_reference, "Skip the noise-free comparison (fig_s3)");
  sub->add_option("--t-max", a.t_max, "Last time point, s (fig3)");
  sub->add_option("--t-step", a.t_step, "Time step, s (fig3)");
  sub->add_option("--model-step", a.model_step, "Noise-model curve resolution, s (fig3)");
}

std::string fmt(double v) { return format_double(v); }

int reproduce_fig_s2(const ReproduceArgs& a, ExperimentPreset p, const fs::path& dir) {
  FigS2Options opt;
  if (!a.p_values.empty()) opt.p_values = a.p_values;
  if (a.seeds) opt.seeds = *a.seeds;
  if (a.bootstrap) opt.bootstrap = *a.bootstrap;
  if (!a.asymptote_dx.empty()) opt.asymptote_dx = a.asymptote_dx;
  if (a.asymptote_total) opt.asymptote_total = *a.asymptote_total;
  if (a.asymptote_max_iter) opt.asymptote_max_iter = *a.asymptote_max_iter;
  if (a.no_asymptote) opt.asymptote_dx.clear();
  opt.dx_values = {p.dx};
  opt.workers = a.common.workers;
  opt.validate();
  const FigS2Result r = run_fig_s2(p, opt);

  std::vector<std::vector<std::string>> rows, summary, asym;
  bool converged = true;
  for (const auto& x : r.rows) {
    rows.push_back({std::to_string(x.p), fmt(x.dx), std::to_string(x.seed_index),
                    std::to_string(x.seed), fmt(x.fidelity), fmt(x.bootstrap_se),
                    std::to_string(x.iterations), fmt(x.residual), csv_bool(x.converged)});
    converged = converged && x.converged;
  }
  for (const auto& s : r.summary)
    summary.push_back({std::to_string(s.p), fmt(s.dx), fmt(s.median), fmt(s.mean), fmt(s.sd),
                       fmt(s.bootstrap_se), std::to_string(s.seeds)});
  for (const auto& s : r.asymptotes) {
    asym.push_back({fmt(s.dx), fmt(s.fidelity), std::to_string(s.iterations), fmt(s.residual),
                    csv_bool(s.converged)});
    converged = converged && s.converged;
  }
  Json sj;
  sj["median_nondecreasing"] = r.median_nondecreasing;
  if (r.asymptotes.size() >= 2) {
    Json order = Json::array();
    for (const auto& s : r.asymptotes) order.push_back({{"dx", s.dx}, {"fidelity", s.fidelity}});
    sj["asymptotes"] = order;
  }
  sj["all_converged"] = converged;
  sj["error_bars"] = opt.bootstrap > 0 ? "bootstrap" : "seed standard deviation";

  OutputSet out;
  out.add(dir / "fidelity.csv",
          table_to_csv({"p", "dx", "seed_index", "seed", "fidelity", "bootstrap_se", "iterations",
                        "residual", "converged"},
                       rows));
  out.add(dir / "fidelity_summary.csv",
          table_to_csv({"p", "dx", "median", "mean", "sd", "bootstrap_se", "seeds"}, summary));
  if (!asym.empty())
    out.add(dir / "asymptotes.csv",
            table_to_csv({"dx", "fidelity", "iterations", "residual", "converged"}, asym));
  out.add_json(dir / "summary.json", sj);
  Json params;
  params["p_values"] = opt.p_values;
  params["seeds"] = opt.seeds;
  params["bootstrap"] = opt.bootstrap;
  params["asymptote_dx"] = opt.asymptote_dx;
  params["asymptote_total"] = opt.asymptote_total;
  params["asymptote_max_iter"] = opt.asymptote_max_iter;
  const fs::path manifest = dir / "manifest.json";
  auto files = file_names(out.paths());
  files.push_back(name_only(manifest));
  out.add_json(manifest, make_manifest("reproduce fig_s2", p, p.seed, files, params));
  out.commit();
  return converged ? kExitOk : kExitNotConverged;
}


int reproduce_fig_s3(const ReproduceArgs& a, ExperimentPreset p, const fs::path& dir) {
  FigS3Options opt;
  opt.noise_free_reference = !a.no_reference;
  opt.workers = a.common.workers;
  const FigS3Result r = run_fig_s3(p, opt);

  Json j;
  j["fidelity_to_truth"] = r.fidelity;
  j["twin_dominance_all_even_sectors"] = r.dominance_all;
  j["non_twin_population"] = r.non_twin_population;
  j["off_twin_norm"] = r.off_twin;
  if (r.reference_off_twin) {
    j["reference"] = {{"non_twin_population", *r.reference_non_twin_population},
                      {"off_twin_norm", *r.reference_off_twin},
                      {"fidelity_to_pair_state", *r.reference_fidelity}};
  }
  j["reconstruction"] = metrics_to_json(r.metrics);
  j["truth"] = metrics_to_json(r.truth_metrics);

  std::vector<std::vector<std::string>> dom;
  for (const auto& d : r.dominance)
    dom.push_back({std::to_string(d.n), fmt(d.twin), fmt(d.max_other), csv_bool(d.dominant)});

  OutputSet out;
  out.add_json(dir / "density.json", density_to_json(r.ml.rho));
  out.add_json(dir / "truth_density.json", density_to_json(r.truth));
  out.add_json(dir / "diagnostics.json", ml_diagnostics_to_json(r.ml));
  out.add_json(dir / "metrics.json", j);
  out.add(dir / "sector_dominance.csv", table_to_csv({"n_total", "twin", "max_other", "dominant"}, dom));
  const fs::path manifest = dir / "manifest.json";
  auto files = file_names(out.paths());
  files.push_back(name_only(manifest));
  out.add_json(manifest, make_manifest("reproduce fig_s3", p, p.seed, files));
  out.commit();
  return r.ml.converged ? kExitOk : kExitNotConverged;
}

int reproduce_fig3(const ReproduceArgs& a, ExperimentPreset p, const fs::path& dir) {
  Fig3Options opt;
  if (a.t_max) opt.t_max = *a.t_max;
  if (a.t_step) opt.t_step = *a.t_step;
  if (a.model_step) opt.model_step = *a.model_step;
  opt.sweep.workers = a.common.workers;
  const Fig3Result r = run_fig3(p, opt);

  std::vector<std::vector<std::string>> rows, model;
  for (const auto& x : r.rows)
    rows.push_back({fmt(x.t), fmt(x.xi), std::to_string(x.n_cut), fmt(x.v_x_plus),
                    fmt(x.v_x_minus), fmt(x.v_p_plus), fmt(x.v_p_minus), fmt(x.v_sq),
                    fmt(x.v_anti), fmt(x.epr_product), fmt(x.insep_sum), fmt(x.analytic_sq),
                    fmt(x.analytic_anti), fmt(x.analytic_product), fmt(x.model_product),
                    fmt(x.model_insep_sum), x.pairing});
  for (const auto& m : r.model)
    model.push_back({fmt(m.t), fmt(m.xi), fmt(m.analytic_product), fmt(m.model_product),
                     fmt(m.model_insep_sum)});
  Json sj;
  sj["sampled_minimum"] = {{"t_s", r.sampled_min_t}, {"epr_product", r.sampled_min_product}};
  sj["model_minimum"] = {{"t_s", r.model_min_t}, {"epr_product", r.model_min_product}};

  OutputSet out;
  out.add(dir / "time_sweep.csv",
          table_to_csv({"t_s", "xi", "n_cut", "V_x_plus", "V_x_minus", "V_p_plus", "V_p_minus",
                        "v_sq", "v_anti", "epr_product", "insep_sum", "analytic_sq",
                        "analytic_anti", "analytic_product", "model_product", "model_insep_sum",
                        "pairing"},
                       rows));
  out.add(dir / "model_curve.csv",
          table_to_csv({"t_s", "xi", "analytic_product", "model_product", "model_insep_sum"}, model));
  out.add_json(dir / "summary.json", sj);
  Json params{{"t_max_s", opt.t_max}, {"t_step_s", opt.t_step}, {"model_step_s", opt.model_step}};
  const fs::path manifest = dir / "manifest.json";
  auto files = file_names(out.paths());
  files.push_back(name_only(manifest));
  out.add_json(manifest, make_manifest("reproduce fig3", p, p.seed, files, params));
  out.commit();
  return kExitOk;
}

int cmd_reproduce(const ReproduceArgs& a) {
  static const std::vector<std::string> figures{"fig3", "fig_s2", "fig_s3"};
  if (std::find(figures.begin(), figures.end(), a.figure) == figures.end())
    throw UsageError("unknown figure '" + a.figure + "' (valid: fig3, fig_s2, fig_s3)");
  if (!a.common.preset.empty() && a.common.preset != a.figure)
    throw UsageError("reproduce: --preset must match the figure id");
  ExperimentPreset p = preset_by_name(a.figure);
  if (a.common.seed) p.seed = *a.common.seed;
  if (a.p) p.p_per_theta = *a.p;
  if (a.n_theta) p.thetas = uniform_thetas(*a.n_theta);
  p.validate();
  const fs::path dir = fs::path(a.out) / seed_dir_name(p.name, p.seed);
  require_output_dir(dir);
  int rc = kExitOk;
  if (a.figure == "fig_s2") rc = reproduce_fig_s2(a, p, dir);
  else if (a.figure == "fig_s3") rc = reproduce_fig_s3(a, p, dir);
  else rc = reproduce_fig3(a, p, dir);
  std::cout << dir.string() << "\n";
  return rc;
}

}  // namespace

int main(int argc, char** argv) {
  tune_allocator();
  CLI::App app{"eprlab: two-mode squeezed vacuum simulation, criteria and tomography"};
  app.require_subcommand(1);
  SimulateArgs sim;
  TomoArgs tomo;
  CriteriaArgs crit;
  MetricsArgs met;
  ReproduceArgs rep;
  register_simulate(app, sim);
  register_tomo(app, tomo);
  register_criteria(app, crit);
  register_metrics(app, met);
  register_reproduce(app, rep);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    for (CLI::App* sub : app.get_subcommands()) {
      const std::string file = sub->get_option("--config")->as<std::string>();
      if (!file.empty()) cli::apply_json_config(sub, file);
    }
    if (app.got_subcommand("simulate")) return cmd_simulate(sim);
    if (app.got_subcommand("tomo")) return cmd_tomo(tomo);
    if (app.got_subcommand("criteria")) return cmd_criteria(crit);
    if (app.got_subcommand("metrics")) return cmd_metrics(met);
    if (app.got_subcommand("reproduce")) return cmd_reproduce(rep);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const InvalidArgument& e) {
    std::cerr << "invalid argument: " << e.what() << "\n";
    return kExitUsage;
  } catch (const InvariantViolation& e) {
    std::cerr << "rejected: invariant '" << e.invariant() << "' violated: " << e.what() << "\n";
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}
