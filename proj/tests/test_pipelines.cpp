#include <gtest/gtest.h>

#include <cmath>

#include "eprlab/io.hpp"
#include "eprlab/pipelines.hpp"

using namespace eprlab;

TEST(Presets, AllValidate) {
  for (const auto& name : preset_names()) {
    const ExperimentPreset p = preset_by_name(name);
    EXPECT_EQ(p.name, name);
    EXPECT_NO_THROW(p.validate()) << name;
  }
  EXPECT_THROW(preset_by_name("fig9"), UsageError);
}

TEST(Presets, Parameters) {
  EXPECT_EQ(preset_fig_s2().xi, 0.8);
  EXPECT_EQ(preset_fig_s2().thetas.size(), 29u);
  EXPECT_EQ(preset_fig_s3().xi, 0.63);
  EXPECT_EQ(preset_fig_s3().state_phase_noise, 0.36);
  EXPECT_EQ(preset_fig_s3().noise.sum_variance_shift, 0.12);
  EXPECT_NEAR(preset_fig3().resolved_xi(), 0.8331, 1e-4);
  EXPECT_EQ(preset_fig3().noise.rf_rel_noise, 0.004);
}

TEST(Presets, Fig3CutoffBiasBelowShotNoise) {
  const ExperimentPreset p = preset_fig3();
  auto product = [&](int n_cut) {
    const DensityMatrix rho = DensityMatrix::pure(tmsv(p.resolved_xi(), FockSpace(n_cut)));
    const auto x = model_variances(rho, p.thetas[0], p.noise.sigma_phase);
    const auto q = model_variances(rho, p.thetas[1], p.noise.sigma_phase);
    return std::min(x.minus * q.plus, x.plus * q.minus);
  };
  const double exact = product(30);
  EXPECT_LT(std::abs(product(p.n_cut) / exact - 1.0), 5e-3);
}

TEST(Presets, Fig3ReadsSqueezedQuadratures) {
  const ExperimentPreset p = preset_fig3();
  const PresetSimulation sim = simulate_preset(p, HomodyneConfig::experiment());
  const EprReport r = epr_report_from_samples(sim.estimated, {}, {0});
  const auto [model, sum] =
      model_epr(DensityMatrix::pure(tmsv_rotated(p.resolved_xi(), 0.0, FockSpace(20))), p.noise, {});
  EXPECT_NEAR(r.epr_product, model, 0.2 * model);
  EXPECT_NEAR(r.insep_sum, sum, 0.1 * sum);
}

TEST(Presets, RejectZeroShots) {
  ExperimentPreset p = preset_fig_s2();
  p.p_per_theta = 0;
  EXPECT_THROW(p.validate(), InvalidArgument);
  p = preset_fig_s2();
  p.thetas.clear();
  EXPECT_THROW(p.validate(), InvalidArgument);
}

TEST(Presets, TruthState) {
  EXPECT_NEAR(preset_fig_s3().truth().purity(), 0.88424378213591, 1e-9);
  EXPECT_NEAR(preset_fig_s2().truth().purity(), 1.0, 1e-12);
}

TEST(Manifest, DeterministicContent) {
  const Json a = make_manifest("simulate", preset_vacuum(), 3, {"samples.csv"}, {{"k", 1}});
  const Json b = make_manifest("simulate", preset_vacuum(), 3, {"samples.csv"}, {{"k", 1}});
  EXPECT_EQ(a.dump(), b.dump());
  EXPECT_EQ(a["modules"].size(), 8u);
  EXPECT_FALSE(a.contains("timestamp"));
  EXPECT_EQ(a["preset"]["name"], "vacuum");
}

TEST(SimulatePreset, ShotThetasArePhaseMajor) {
  ExperimentPreset p = preset_fig_s2();
  p.thetas = {0.0, 1.0};
  p.p_per_theta = 3;
  p.n_cut = 6;
  const PresetSimulation s = simulate_preset(p, HomodyneConfig::experiment());
  ASSERT_EQ(s.shot_thetas.size(), 6u);
  EXPECT_EQ(s.shot_thetas[2], 0.0);
  EXPECT_EQ(s.shot_thetas[3], 1.0);
  EXPECT_EQ(s.estimated.size(), 6u);
}

TEST(SectorDominance, PairAndNonTwinStates) {
  const DensityMatrix pair = DensityMatrix::pure(tmsv(0.6, FockSpace(5)));
  const auto d = sector_dominance(pair, kDominanceMaxN);
  ASSERT_EQ(d.size(), 4u);
  for (const auto& s : d) EXPECT_TRUE(s.dominant) << s.n;
  EXPECT_EQ(off_twin_norm(pair), 0.0);

  const FockSpace s(2);
  CMatrix m = CMatrix::Zero(s.dim(), s.dim());
  m(s.index(2, 0), s.index(2, 0)) = 0.6;
  m(s.index(1, 1), s.index(1, 1)) = 0.4;
  const DensityMatrix skew = DensityMatrix::from_matrix(s, m);
  const auto e = sector_dominance(skew, kDominanceMaxN);
  EXPECT_FALSE(e[1].dominant);
  EXPECT_NEAR(off_twin_norm(skew), 0.6, 1e-15);
}

TEST(FigS2, SmallGrid) {
  ExperimentPreset p = preset_fig_s2();
  p.xi = 0.4;
  p.n_cut = 5;
  p.thetas = uniform_thetas(10);
  FigS2Options opt;
  opt.p_values = {20, 400};
  opt.seeds = 3;
  opt.asymptote_dx = {0.25};
  opt.asymptote_total = 1e7;
  const FigS2Result r = run_fig_s2(p, opt);
  EXPECT_EQ(r.rows.size(), 6u);
  ASSERT_EQ(r.summary.size(), 2u);
  EXPECT_EQ(r.summary[0].seeds, 3);
  EXPECT_LT(r.summary[0].median, r.summary[1].median);
  EXPECT_TRUE(r.median_nondecreasing);
  ASSERT_EQ(r.asymptotes.size(), 1u);
  EXPECT_GT(r.asymptotes[0].fidelity, 0.99);
  EXPECT_GE(r.asymptotes[0].fidelity, r.summary[1].median - 0.01);
  opt.bootstrap = 10;
  EXPECT_THROW(run_fig_s2(p, opt), InvalidArgument);
}

TEST(FigS3, NoiseZeroedRunRecoversPairState) {
  ExperimentPreset p = preset_fig_s3();
  p.state_phase_noise = 0.0;
  p.noise = NoiseModel::none();
  p.seed = 7;
  const FigS3Result r = run_fig_s3(p, {false, 1});
  EXPECT_TRUE(r.ml.converged);
  EXPECT_GT(r.fidelity, 0.9);
  EXPECT_TRUE(r.dominance_all);
  EXPECT_FALSE(r.reference_fidelity.has_value());
  EXPECT_NEAR(r.truth_metrics.log_negativity, 1.81307916152876, 1e-9);
}

TEST(Fig3, TimeGrid) {
  const auto t = time_grid(40e-3, 2e-3);
  ASSERT_EQ(t.size(), 21u);
  EXPECT_EQ(t.front(), 0.0);
  EXPECT_NEAR(t.back(), 40e-3, 1e-15);
  EXPECT_THROW(time_grid(50e-3, 2e-3), InvalidArgument);
  EXPECT_THROW(time_grid(40e-3, 0.0), InvalidArgument);
}

TEST(Fig3, CurveShape) {
  const ExperimentPreset p = preset_fig3();
  Fig3Options opt;
  opt.t_step = 4e-3;
  const Fig3Result r = run_fig3(p, opt);
  ASSERT_EQ(r.rows.size(), 11u);
  EXPECT_EQ(r.rows[0].analytic_product, 1.0);
  EXPECT_NEAR(r.model.front().analytic_product, 1.0, 1e-15);
  // The rf jitter inflates the sum readout even at t = 0.
  EXPECT_NEAR(r.model.front().model_product, 1.0565, 2e-3);
  EXPECT_NEAR(r.model_min_t, 26e-3, 6e-3);
  EXPECT_NEAR(r.sampled_min_t, 26e-3, 8e-3);
  EXPECT_LT(r.model_min_product, 0.25);
  EXPECT_GT(r.model_min_product, std::exp(-4.0 * squeeze_param({kSpinDynamicsRate, r.model_min_t})));
  // Noise-free reference at the optimum.
  const TimeSweepRow& opt_row = r.rows[6];  // 24 ms
  EXPECT_NEAR(opt_row.t, 24e-3, 1e-12);
  EXPECT_NEAR(opt_row.analytic_product, std::exp(-4.0 * kSpinDynamicsRate * 24e-3), 1e-12);
}
