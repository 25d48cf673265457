#include <gtest/gtest.h>

#include <filesystem>
#include <limits>
#include <string>

#include "eprlab/io.hpp"

using namespace eprlab;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("eprlab_io_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

template <typename F>
std::string error_of(F&& f) {
  try {
    f();
  } catch (const std::exception& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST(Numbers, ShortestRoundTrip) {
  for (double v : {0.0, -0.0, 0.1, 1.0 / 3.0, 1e-300, -2.5e17, std::numeric_limits<double>::max()})
    EXPECT_EQ(parse_double(format_double(v), "x"), v);
  EXPECT_EQ(format_double(0.1), "0.1");
  EXPECT_THROW(parse_double("1.5x", "x"), FormatError);
  EXPECT_THROW(parse_double("", "x"), FormatError);
  EXPECT_EQ(parse_int("-42", "x"), -42);
  EXPECT_THROW(parse_int("4.2", "x"), FormatError);
}

TEST(DensityJson, ExactRoundTrip) {
  const DensityMatrix rho = phase_noisy_state(0.63, 0.36, FockSpace(4));
  const Json j = density_to_json(rho);
  EXPECT_EQ(j["ordering"], kDensityOrdering);
  EXPECT_EQ(j["n_cut"], 4);
  const DensityMatrix back = density_from_json(parse_json_text(j.dump(2), "mem"));
  EXPECT_EQ(back.space().n_cut(), 4);
  EXPECT_TRUE((back.matrix().array() == rho.matrix().array()).all());
}

TEST(DensityJson, OrderingIsRowMajorNaNb) {
  const FockSpace s(1);
  const DensityMatrix rho = DensityMatrix::pure(PureState::basis(s, 1, 0));
  const Json j = density_to_json(rho);
  // (n_A, n_B) = (1, 0) sits at flat index 1 * (n_cut + 1) + 0 = 2.
  EXPECT_EQ(j["re"][2][2].get<double>(), 1.0);
}

TEST(DensityJson, Rejections) {
  Json j = density_to_json(DensityMatrix::maximally_mixed(FockSpace(1)));
  Json bad = j;
  bad["ordering"] = "column-major";
  EXPECT_THROW(density_from_json(bad), FormatError);
  bad = j;
  bad["extra"] = 1;
  EXPECT_THROW(density_from_json(bad), FormatError);
  bad = j;
  bad["re"][1].erase(0);
  EXPECT_THROW(density_from_json(bad), FormatError);
  bad = j;
  bad.erase("im");
  EXPECT_THROW(density_from_json(bad), FormatError);
  bad = j;
  for (int i = 0; i < 4; ++i) bad["re"][i][i] = 0.225;  // trace 0.9
  try {
    density_from_json(bad);
    FAIL() << "trace 0.9 accepted";
  } catch (const InvariantViolation& e) {
    EXPECT_EQ(e.invariant(), "unit-trace");
  }
  bad = j;
  bad["im"][0][1] = 0.1;  // not Hermitian
  EXPECT_THROW(density_from_json(bad), InvariantViolation);
}

TEST(HistogramJson, RoundTrip) {
  Histogram2D h;
  h.theta = 0.75;
  h.dx = 0.25;
  h.origin_a = -1.0;
  h.origin_b = -0.5;
  h.counts = CountMatrix::Zero(2, 3);
  h.counts(1, 2) = 7;
  h.counts(0, 0) = 3;
  const std::vector<Histogram2D> hs{h, h};
  const auto back = histograms_from_json(parse_json_text(histograms_to_json(hs).dump(), "mem"));
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[1].counts, h.counts);
  EXPECT_EQ(back[0].origin_b, -0.5);
  EXPECT_EQ(histograms_from_json(histogram_to_json(h)).size(), 1u);
  Json bad = histogram_to_json(h);
  bad["counts"][0][1] = -1;
  EXPECT_THROW(histogram_from_json(bad), InvalidArgument);
  bad = histogram_to_json(h);
  bad["counts"][1].erase(0);
  EXPECT_THROW(histogram_from_json(bad), FormatError);
}

TEST(SamplesCsv, RoundTripIsExact) {
  const std::vector<QuadratureSample> s{{0.0, 0.1, -0.2}, {3.0, 1.0 / 3.0, 1e-7}};
  const auto back = samples_from_csv(samples_to_csv(s));
  ASSERT_EQ(back.size(), 2u);
  for (std::size_t i = 0; i < s.size(); ++i) {
    EXPECT_EQ(back[i].theta, s[i].theta);
    EXPECT_EQ(back[i].x_a, s[i].x_a);
    EXPECT_EQ(back[i].x_b, s[i].x_b);
  }
}

TEST(SamplesCsv, BomAndCrlfAccepted) {
  const auto s = samples_from_csv("\xEF\xBB\xBFtheta_rad,x_a,x_b\r\n0.5,1,2\r\n\r\n");
  ASSERT_EQ(s.size(), 1u);
  EXPECT_EQ(s[0].x_b, 2.0);
}

TEST(SamplesCsv, ErrorsNameTheLine) {
  const std::string bad_number = "theta_rad,x_a,x_b\n0,1,2\n0,abc,2\n";
  EXPECT_NE(error_of([&] { samples_from_csv(bad_number, "in.csv"); }).find("in.csv:3"),
            std::string::npos);
  EXPECT_THROW(samples_from_csv(bad_number), FormatError);
  EXPECT_NE(error_of([&] { samples_from_csv("theta_rad,x_a,x_b\n0,1\n", "f"); }).find("f:2"),
            std::string::npos);
  EXPECT_NE(error_of([&] { samples_from_csv("theta,xa,xb\n0,1,2\n", "f"); }).find("f:1"),
            std::string::npos);
  EXPECT_THROW(samples_from_csv("theta_rad,x_a,x_b\n7,1,2\n"), FormatError);
  EXPECT_THROW(samples_from_csv("theta_rad,x_a,x_b\n-0.1,1,2\n"), FormatError);
}

TEST(SamplesCsv, EmptyInputIsUsageError) {
  EXPECT_THROW(samples_from_csv(""), UsageError);
  EXPECT_THROW(samples_from_csv("theta_rad,x_a,x_b\n"), UsageError);
}

TEST(ShotsCsv, RoundTripAndValidation) {
  const std::vector<ShotRecord> s{{1500, 1490, 20000}, {0, 0, 1}};
  const auto back = shots_from_csv(shots_to_csv(s));
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].n_b, 1490);
  EXPECT_NE(error_of([] { shots_from_csv("n_a,n_b,n_tot\n1,1,10\n8,8,10\n", "s"); }).find("s:3"),
            std::string::npos);
  EXPECT_THROW(shots_from_csv("n_a,n_b,n_tot\n1,1,10\n8,8,10\n"), FormatError);
  EXPECT_THROW(shots_from_csv(""), UsageError);
}

TEST(Tables, SweepAndGeneric) {
  VarianceSweep sw;
  sw.entries.push_back({0.5, 1.0, 2.0, 0.1, 0.2, 10});
  EXPECT_EQ(sweep_to_csv(sw), std::string(kSweepHeader) + "\n0.5,1,2,0.1,0.2,10\n");
  EXPECT_EQ(table_to_csv({"a", "b"}, {{"1", "2"}}), "a,b\n1,2\n");
}

TEST(OutputSet, CommitsAllFiles) {
  const fs::path dir = scratch_dir("commit");
  OutputSet out;
  out.add(dir / "sub" / "a.txt", "alpha\n");
  out.add_json(dir / "b.json", Json{{"k", 1}});
  out.commit();
  EXPECT_EQ(read_text(dir / "sub" / "a.txt"), "alpha\n");
  EXPECT_EQ(parse_json_text(read_text(dir / "b.json"), "b")["k"], 1);
  EXPECT_FALSE(fs::exists(dir / "b.json.partial"));
  fs::remove_all(dir);
}

TEST(OutputSet, FailedWriteLeavesNoPartialFiles) {
  const fs::path dir = scratch_dir("fail");
  // A directory where a file should go makes the rename fail.
  fs::create_directories(dir / "blocked" / "x");
  OutputSet out;
  out.add(dir / "ok.txt", "ok");
  out.add(dir / "blocked", "nope");
  EXPECT_ANY_THROW(out.commit());
  EXPECT_FALSE(fs::exists(dir / "ok.txt.partial"));
  EXPECT_FALSE(fs::exists(dir / "blocked.partial"));
  fs::remove_all(dir);
}

TEST(ReportJson, EprKeys) {
  EprReport r;
  r.v_x_plus = 2.0;
  const Json j = epr_report_to_json(r);
  for (const char* k : {"theta_x_rad", "theta_p_rad", "V_x_plus", "V_x_minus", "V_p_plus",
                        "V_p_minus", "epr_product", "insep_sum", "epr_threshold",
                        "insep_threshold", "epr_satisfied", "insep_satisfied", "inferred", "errors"})
    EXPECT_TRUE(j.contains(k)) << k;
  EXPECT_TRUE(j["errors"].is_null());
  r.errors = EprErrors{1, 2, 3, 4, 5, 6, 7, 8};
  r.bootstrap_resamples = 200;
  EXPECT_EQ(epr_report_to_json(r)["errors"]["resamples"], 200);
}

TEST(ReportJson, MetricsKeys) {
  const MetricsReport m = metrics_report(DensityMatrix::pure(tmsv(0.3, FockSpace(4))), 0.3);
  const Json j = metrics_to_json(m);
  for (const char* k : {"fidelity_to_target", "log_negativity", "qfi", "qfi_per_particle", "n_bar",
                        "xi_fit", "non_twin_population", "purity"})
    EXPECT_TRUE(j.contains(k)) << k;
  EXPECT_TRUE(metrics_to_json(metrics_report(DensityMatrix::maximally_mixed(FockSpace(1))))
                  ["target_xi"].is_null());
}
