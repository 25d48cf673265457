#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "eprlab/io.hpp"

namespace fs = std::filesystem;
using eprlab::Json;

namespace {

const fs::path& root() {
  static const fs::path dir = [] {
    const fs::path p = fs::temp_directory_path() / "eprlab_cli_tests";
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
  }();
  return dir;
}

int run(const std::string& args) {
  const std::string cmd = std::string("\"") + EPRLAB_CLI_PATH + "\" " + args + " >>\"" +
                          (root() / "log.txt").string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

Json load(const fs::path& p) { return eprlab::parse_json_text(eprlab::read_text(p), p.string()); }

void expect_same_tree(const fs::path& a, const fs::path& b) {
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(a))
    if (e.is_regular_file()) files.push_back(fs::relative(e.path(), a));
  ASSERT_FALSE(files.empty());
  for (const auto& f : files) {
    ASSERT_TRUE(fs::exists(b / f)) << f;
    EXPECT_EQ(eprlab::read_text(a / f), eprlab::read_text(b / f)) << f;
  }
}

}  // namespace

TEST(Cli, UsageErrorsExit64) {
  EXPECT_EQ(run(""), 64);
  EXPECT_EQ(run("bogus"), 64);
  EXPECT_EQ(run("simulate --out " + q(root() / "u")), 64);
  EXPECT_EQ(run("simulate --preset nope"), 64);
  EXPECT_EQ(run("reproduce fig9 --out " + q(root() / "u")), 64);
  EXPECT_EQ(run("reproduce fig3 --preset fig_s2 --out " + q(root() / "u")), 64);
  EXPECT_EQ(run("tomo " + q(root() / "missing.csv")), 64);
  EXPECT_EQ(run("simulate --preset vacuum --p 0 --out " + q(root() / "u")), 64);
  EXPECT_EQ(run("--help"), 0);
}

TEST(Cli, MalformedInputIsRuntimeError) {
  const fs::path bad = root() / "bad" / "samples.csv";
  fs::create_directories(bad.parent_path());
  std::ofstream(bad) << "theta_rad,x_a,x_b\n0,1,oops\n";
  EXPECT_EQ(run("tomo " + q(bad)), 1);
  const fs::path rho = root() / "bad" / "density.json";
  std::ofstream(rho) << R"json({"n_cut":0,"ordering":"row-major-(nA,nB)","re":[[0.9]],"im":[[0]]})json";
  EXPECT_EQ(run("metrics " + q(rho)), 1);
}

TEST(Cli, VacuumRoundTrip) {
  const fs::path out = root() / "vac";
  ASSERT_EQ(run("simulate --preset vacuum --p 2000 --seed 3 --out " + q(out)), 0);
  const fs::path dir = out / "vacuum_seed3";
  for (const char* f : {"samples.csv", "shots.csv", "manifest.json"})
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  EXPECT_EQ(load(dir / "manifest.json")["files"].size(), 3u);
  ASSERT_EQ(run("tomo --preset vacuum " + q(dir / "samples.csv")), 0);
  const Json diag = load(dir / "diagnostics.json");
  EXPECT_TRUE(diag["converged"].get<bool>());
  ASSERT_EQ(run("metrics --target-xi 0 " + q(dir / "density.json")), 0);
  const Json m = load(dir / "metrics.json");
  EXPECT_GT(m["fidelity_to_target"].get<double>(), 0.98);
  EXPECT_LT(m["log_negativity"].get<double>(), 0.1);
  ASSERT_EQ(run("criteria --bootstrap 0 " + q(dir / "samples.csv")), 0);
  const Json r = load(dir / "epr_report.json");
  EXPECT_NEAR(r["epr_product"].get<double>(), 1.0, 0.15);
  EXPECT_FALSE(r["epr_satisfied"].get<bool>());
  EXPECT_TRUE(r["errors"].is_null());
}

TEST(Cli, TmsvCriteriaProduct) {
  const fs::path out = root() / "tmsv";
  ASSERT_EQ(run("simulate --xi 0.63 --n-cut 14 --p 20000 --seed 5 "
                "--thetas 3.141592653589793,1.5707963267948966 --out " + q(out)),
            0);
  const fs::path samples = out / "custom_seed5" / "samples.csv";
  ASSERT_EQ(run("criteria --bootstrap 100 --seed 2 " + q(samples)), 0);
  const Json r = load(out / "custom_seed5" / "epr_report.json");
  EXPECT_NEAR(r["epr_product"].get<double>(), std::exp(-4.0 * 0.63), 0.005);
  EXPECT_TRUE(r["epr_satisfied"].get<bool>());
  EXPECT_TRUE(r["insep_satisfied"].get<bool>());
  EXPECT_EQ(r["errors"]["resamples"], 100);
  EXPECT_EQ(run("criteria --theta-x 3.141592653589793 " + q(samples)), 64);
}

TEST(Cli, NonConvergenceExit2WithOutputs) {
  const fs::path out = root() / "nc";
  ASSERT_EQ(run("simulate --xi 0.3 --n-theta 4 --p 200 --out " + q(out)), 0);
  const fs::path dir = out / "custom_seed1";
  const fs::path dest = root() / "nc_tomo";
  EXPECT_EQ(run("tomo --n-cut 4 --max-iter 1 --out " + q(dest) + " " + q(dir / "samples.csv")), 2);
  const Json diag = load(dest / "diagnostics.json");
  EXPECT_FALSE(diag["converged"].get<bool>());
  EXPECT_EQ(diag["iterations"], 1);
  EXPECT_TRUE(fs::exists(dest / "density.json"));
}

TEST(Cli, ConfigFile) {
  const fs::path cfg = root() / "cfg.json";
  std::ofstream(cfg) << R"({"preset": "vacuum", "p": 50, "n-theta": 4, "seed": 9})";
  const fs::path out = root() / "cfg_run";
  ASSERT_EQ(run("simulate --config " + q(cfg) + " --p 30 --out " + q(out)), 0);
  const auto rows = eprlab::samples_from_csv(eprlab::read_text(out / "vacuum_seed9" / "samples.csv"));
  EXPECT_EQ(rows.size(), 4u * 30u);  // command line wins over the file

  const fs::path bad = root() / "cfg_bad.json";
  std::ofstream(bad) << R"({"preset": "vacuum", "no-such-option": 1})";
  EXPECT_EQ(run("simulate --config " + q(bad) + " --out " + q(out)), 64);
  const fs::path nested = root() / "cfg_nested.json";
  std::ofstream(nested) << R"({"preset": {"name": "vacuum"}})";
  EXPECT_EQ(run("simulate --config " + q(nested) + " --out " + q(out)), 64);
}

TEST(Cli, RerunsAreByteIdentical) {
  const fs::path a = root() / "det_a", b = root() / "det_b";
  for (const fs::path& d : {a, b}) {
    ASSERT_EQ(run("simulate --preset fig_s3 --p 30 --n-theta 6 --n-cut 6 --out " + q(d)), 0);
    const fs::path run_dir = d / "fig_s3_seed1";
    ASSERT_EQ(run("tomo --n-cut 6 --max-iter 300 " + q(run_dir / "samples.csv")) % 2, 0);
    ASSERT_EQ(run("metrics --target-xi 0.63 " + q(run_dir / "density.json")), 0);
    ASSERT_EQ(run("simulate --preset fig3 --p 300 --out " + q(d)), 0);
    ASSERT_EQ(run("criteria --bootstrap 100 " + q(d / "fig3_seed1" / "samples.csv")), 0);
    ASSERT_EQ(run("reproduce fig3 --p 100 --t-step 0.01 --model-step 0.005 --out " + q(d / "rep")), 0);
    ASSERT_EQ(run("reproduce fig_s2 --p-values 10,20 --seeds 1 --n-theta 5 --asymptote-dx 0.5 "
                  "--asymptote-total 1e5 --asymptote-max-iter 200 --out " + q(d / "rep")) % 2,
              0);
    ASSERT_EQ(run("reproduce fig_s3 --p 20 --n-theta 5 --no-reference --out " + q(d / "rep")) % 2, 0);
  }
  expect_same_tree(a, b);
}
