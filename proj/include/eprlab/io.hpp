#pragma once

// File formats: density-matrix, histogram and report JSON; sample, shot and
// sweep CSV. Outputs are staged and committed together so a failed run leaves
// no partial files.

#include <json.hpp>

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "eprlab/criteria.hpp"
#include "eprlab/fock.hpp"
#include "eprlab/homodyne.hpp"
#include "eprlab/metrics.hpp"
#include "eprlab/tomography.hpp"

namespace eprlab {

using Json = nlohmann::ordered_json;

inline constexpr const char* kLibraryVersion = "1.0.0";
inline constexpr const char* kDensityOrdering = "row-major-(nA,nB)";

/// Shortest decimal that round-trips the double.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  if (res.ec != std::errc()) throw Error("format_double: conversion failed");
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s, const std::string& where) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw FormatError(where + ": cannot parse number '" + std::string(s) + "'");
  return v;
}

inline std::int64_t parse_int(std::string_view s, const std::string& where) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  std::int64_t v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw FormatError(where + ": cannot parse integer '" + std::string(s) + "'");
  return v;
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline Json parse_json_text(const std::string& text, const std::string& what) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(what + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Atomic output

/// Collects file contents and writes them all at once: each file goes to a
/// temporary sibling first and is renamed only after every write succeeded.
class OutputSet {
 public:
  void add(std::filesystem::path path, std::string content) {
    files_.push_back({std::move(path), std::move(content)});
  }
  void add_json(std::filesystem::path path, const Json& j) { add(std::move(path), j.dump(2) + "\n"); }

  std::vector<std::filesystem::path> paths() const {
    std::vector<std::filesystem::path> out;
    for (const auto& f : files_) out.push_back(f.path);
    return out;
  }

  void commit() const {
    std::vector<std::filesystem::path> temps;
    try {
      for (const auto& f : files_) {
        if (f.path.has_parent_path()) std::filesystem::create_directories(f.path.parent_path());
        std::filesystem::path tmp = f.path;
        tmp += ".partial";
        temps.push_back(tmp);
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out << f.content;
        out.close();
        if (!out) throw Error("cannot write " + tmp.string());
      }
      for (std::size_t i = 0; i < files_.size(); ++i)
        std::filesystem::rename(temps[i], files_[i].path);
    } catch (...) {
      std::error_code ec;
      for (const auto& t : temps) std::filesystem::remove(t, ec);
      throw;
    }
  }

 private:
  struct File {
    std::filesystem::path path;
    std::string content;
  };
  std::vector<File> files_;
};

// ---------------------------------------------------------------------------
// Density matrices

inline Json density_to_json(const DensityMatrix& rho) {
  const Index d = rho.dim();
  Json re = Json::array(), im = Json::array();
  for (Index i = 0; i < d; ++i) {
    Json rr = Json::array(), ri = Json::array();
    for (Index j = 0; j < d; ++j) {
      rr.push_back(rho(i, j).real());
      ri.push_back(rho(i, j).imag());
    }
    re.push_back(std::move(rr));
    im.push_back(std::move(ri));
  }
  Json j;
  j["n_cut"] = rho.space().n_cut();
  j["ordering"] = kDensityOrdering;
  j["re"] = std::move(re);
  j["im"] = std::move(im);
  return j;
}

/// Parses a density-matrix object without checking physical invariants.
inline std::pair<FockSpace, CMatrix> density_matrix_from_json(const Json& j) {
  try {
    if (!j.is_object()) throw FormatError("density matrix: expected a JSON object");
    for (const auto& [key, _] : j.items())
      if (key != "n_cut" && key != "ordering" && key != "re" && key != "im")
        throw FormatError("density matrix: unknown key '" + key + "'");
    const std::string ordering = j.at("ordering").get<std::string>();
    if (ordering != kDensityOrdering)
      throw FormatError("density matrix: ordering '" + ordering + "' is not " + kDensityOrdering);
    const FockSpace space(j.at("n_cut").get<int>());
    const Index d = space.dim();
    const Json& re = j.at("re");
    const Json& im = j.at("im");
    if (!re.is_array() || !im.is_array() || Index(re.size()) != d || Index(im.size()) != d)
      throw FormatError("density matrix: re/im must have " + std::to_string(d) + " rows");
    CMatrix m(d, d);
    for (Index i = 0; i < d; ++i) {
      const Json& rr = re[std::size_t(i)];
      const Json& ri = im[std::size_t(i)];
      if (!rr.is_array() || !ri.is_array() || Index(rr.size()) != d || Index(ri.size()) != d)
        throw FormatError("density matrix: row " + std::to_string(i) + " has the wrong length");
      for (Index k = 0; k < d; ++k)
        m(i, k) = Complex(rr[std::size_t(k)].get<double>(), ri[std::size_t(k)].get<double>());
    }
    return {space, std::move(m)};
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("density matrix: ") + e.what());
  }
}

/// Reads and validates; a matrix that breaks an invariant raises InvariantViolation.
inline DensityMatrix density_from_json(const Json& j) {
  auto [space, m] = density_matrix_from_json(j);
  return DensityMatrix::from_matrix_strict(space, std::move(m));
}

inline DensityMatrix read_density(const std::filesystem::path& path) {
  return density_from_json(parse_json_text(read_text(path), path.string()));
}

// ---------------------------------------------------------------------------
// Histograms

inline Json histogram_to_json(const Histogram2D& h) {
  Json counts = Json::array();
  for (Index i = 0; i < h.counts.rows(); ++i) {
    Json row = Json::array();
    for (Index k = 0; k < h.counts.cols(); ++k) row.push_back(h.counts(i, k));
    counts.push_back(std::move(row));
  }
  Json j;
  j["theta_rad"] = h.theta;
  j["dx"] = h.dx;
  j["origin"] = Json::array({h.origin_a, h.origin_b});
  j["counts"] = std::move(counts);
  return j;
}

inline Histogram2D histogram_from_json(const Json& j) {
  try {
    Histogram2D h;
    h.theta = j.at("theta_rad").get<double>();
    h.dx = j.at("dx").get<double>();
    const Json& o = j.at("origin");
    if (!o.is_array() || o.size() != 2) throw FormatError("histogram: origin must be [x_a, x_b]");
    h.origin_a = o[0].get<double>();
    h.origin_b = o[1].get<double>();
    const Json& c = j.at("counts");
    if (!c.is_array() || c.empty() || !c[0].is_array() || c[0].empty())
      throw FormatError("histogram: counts must be a non-empty 2D array");
    h.counts.resize(Index(c.size()), Index(c[0].size()));
    for (std::size_t r = 0; r < c.size(); ++r) {
      if (!c[r].is_array() || c[r].size() != c[0].size())
        throw FormatError("histogram: ragged counts array");
      for (std::size_t k = 0; k < c[r].size(); ++k)
        h.counts(Index(r), Index(k)) = c[r][k].get<std::int64_t>();
    }
    h.validate();
    return h;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("histogram: ") + e.what());
  }
}

inline Json histograms_to_json(std::span<const Histogram2D> hs) {
  Json a = Json::array();
  for (const auto& h : hs) a.push_back(histogram_to_json(h));
  return a;
}

/// Accepts a single histogram object or an array of them.
inline std::vector<Histogram2D> histograms_from_json(const Json& j) {
  std::vector<Histogram2D> out;
  if (j.is_array()) {
    for (const auto& e : j) out.push_back(histogram_from_json(e));
  } else {
    out.push_back(histogram_from_json(j));
  }
  return out;
}

// ---------------------------------------------------------------------------
// CSV

inline constexpr const char* kSampleHeader = "theta_rad,x_a,x_b";
inline constexpr const char* kShotHeader = "n_a,n_b,n_tot";
inline constexpr const char* kSweepHeader = "theta_rad,v_plus,v_minus,se_plus,se_minus,count";

namespace detail {

inline std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t k = line.find(',', start);
    out.push_back(line.substr(start, k == std::string_view::npos ? std::string_view::npos : k - start));
    if (k == std::string_view::npos) break;
    start = k + 1;
  }
  return out;
}

/// Calls row(fields, line_number) for each data line after checking the header.
template <typename Row>
void parse_csv(const std::string& text, const std::string& what, const char* header, Row&& row) {
  std::istringstream in(text);
  std::string line;
  std::size_t number = 0;
  bool seen_header = false;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (number == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    if (!seen_header) {
      if (line.empty()) continue;
      if (line != header)
        throw FormatError(what + ":" + std::to_string(number) + ": expected header '" + header +
                          "'");
      seen_header = true;
      continue;
    }
    if (line.empty()) continue;
    row(split_commas(line), what + ":" + std::to_string(number));
  }
  if (!seen_header) throw UsageError(what + ": empty file");
}

}  // namespace detail

inline std::string samples_to_csv(std::span<const QuadratureSample> samples) {
  std::string out = std::string(kSampleHeader) + "\n";
  for (const auto& s : samples)
    out += format_double(s.theta) + "," + format_double(s.x_a) + "," + format_double(s.x_b) + "\n";
  return out;
}

inline std::vector<QuadratureSample> samples_from_csv(const std::string& text,
                                                      const std::string& what = "samples") {
  std::vector<QuadratureSample> out;
  detail::parse_csv(text, what, kSampleHeader, [&](const auto& f, const std::string& where) {
    if (f.size() != 3) throw FormatError(where + ": expected 3 fields, got " + std::to_string(f.size()));
    const double th = parse_double(f[0], where);
    if (!(th >= 0.0 && th < 2.0 * kPi))
      throw FormatError(where + ": theta_rad must lie in [0, 2 pi)");
    out.push_back({th, parse_double(f[1], where), parse_double(f[2], where)});
  });
  if (out.empty()) throw UsageError(what + ": no sample rows");
  return out;
}

inline std::string shots_to_csv(std::span<const ShotRecord> shots) {
  std::string out = std::string(kShotHeader) + "\n";
  for (const auto& s : shots)
    out += std::to_string(s.n_a) + "," + std::to_string(s.n_b) + "," + std::to_string(s.n_tot) + "\n";
  return out;
}

inline std::vector<ShotRecord> shots_from_csv(const std::string& text,
                                              const std::string& what = "shots") {
  std::vector<ShotRecord> out;
  detail::parse_csv(text, what, kShotHeader, [&](const auto& f, const std::string& where) {
    if (f.size() != 3) throw FormatError(where + ": expected 3 fields, got " + std::to_string(f.size()));
    ShotRecord s{parse_int(f[0], where), parse_int(f[1], where), parse_int(f[2], where)};
    try {
      s.validate();
    } catch (const InvalidArgument& e) {
      throw FormatError(where + ": " + e.what());
    }
    out.push_back(s);
  });
  if (out.empty()) throw UsageError(what + ": no shot rows");
  return out;
}

inline std::string sweep_to_csv(const VarianceSweep& sweep) {
  std::string out = std::string(kSweepHeader) + "\n";
  for (const auto& e : sweep.entries)
    out += format_double(e.theta) + "," + format_double(e.v_plus) + "," + format_double(e.v_minus) +
           "," + format_double(e.se_plus) + "," + format_double(e.se_minus) + "," +
           std::to_string(e.count) + "\n";
  return out;
}

/// Generic table writer: header plus rows of preformatted cells.
inline std::string table_to_csv(const std::vector<std::string>& header,
                                const std::vector<std::vector<std::string>>& rows) {
  auto join = [](const std::vector<std::string>& cells) {
    std::string s;
    for (std::size_t i = 0; i < cells.size(); ++i) s += (i ? "," : "") + cells[i];
    return s + "\n";
  };
  std::string out = join(header);
  for (const auto& r : rows) out += join(r);
  return out;
}

// ---------------------------------------------------------------------------
// Reports

inline Json epr_report_to_json(const EprReport& r) {
  Json j;
  j["theta_x_rad"] = r.theta_x;
  j["theta_p_rad"] = r.theta_p;
  j["n_x"] = r.n_x;
  j["n_p"] = r.n_p;
  j["V_x_plus"] = r.v_x_plus;
  j["V_x_minus"] = r.v_x_minus;
  j["V_p_plus"] = r.v_p_plus;
  j["V_p_minus"] = r.v_p_minus;
  j["epr_product"] = r.epr_product;
  j["pairing"] = pairing_name(r.pairing);
  j["other_pairing_product"] = r.other_product;
  j["insep_sum"] = r.insep_sum;
  j["epr_threshold"] = r.epr_threshold;
  j["insep_threshold"] = r.insep_threshold;
  j["continuous_variable_limit"] = r.continuous_limit;
  j["epr_satisfied"] = r.epr_satisfied;
  j["insep_satisfied"] = r.insep_satisfied;
  j["inferred"] = {{"delta_x_B", r.inferred_dx}, {"delta_p_B", r.inferred_dp}};
  if (r.errors) {
    const EprErrors& e = *r.errors;
    j["errors"] = {{"method", "bootstrap"},
                   {"resamples", r.bootstrap_resamples},
                   {"V_x_plus", e.v_x_plus},
                   {"V_x_minus", e.v_x_minus},
                   {"V_p_plus", e.v_p_plus},
                   {"V_p_minus", e.v_p_minus},
                   {"epr_product", e.epr_product},
                   {"insep_sum", e.insep_sum},
                   {"delta_x_B", e.inferred_dx},
                   {"delta_p_B", e.inferred_dp}};
  } else {
    j["errors"] = nullptr;
  }
  return j;
}

inline Json metrics_to_json(const MetricsReport& m) {
  Json j;
  j["target_xi"] = m.target_xi ? Json(*m.target_xi) : Json(nullptr);
  j["fidelity_to_target"] = m.fidelity_to_target ? Json(*m.fidelity_to_target) : Json(nullptr);
  j["log_negativity"] = m.log_negativity;
  j["qfi"] = m.qfi.qfi;
  j["qfi_per_particle"] = m.qfi.per_particle;
  j["qfi_per_particle_defined"] = m.qfi.per_particle_defined;
  j["n_bar"] = m.qfi.n_bar;
  j["qfi_direction"] = Json::array({m.qfi.direction(0), m.qfi.direction(1), m.qfi.direction(2)});
  j["xi_fit"] = m.fit.xi;
  j["fit_phase_rad"] = m.fit.phase;
  j["fit_fidelity"] = m.fit.fidelity;
  j["non_twin_population"] = m.non_twin_population;
  j["purity"] = m.purity;
  return j;
}

inline Json ml_diagnostics_to_json(const MLResult& r) {
  Json j;
  j["converged"] = r.converged;
  j["iterations"] = r.iterations;
  j["fixed_point_residual"] = r.fixed_point_residual;
  j["trace_r_rho"] = r.trace_r_rho;
  j["diluted_steps"] = r.diluted_steps;
  j["floored_bins"] = r.floored_bins;
  j["loglik_trace"] = r.loglik_trace;
  if (!r.min_eigenvalues.empty()) j["min_eigenvalues"] = r.min_eigenvalues;
  return j;
}

inline Json noise_to_json(const NoiseModel& n) {
  return {{"sigma_phase", n.sigma_phase},
          {"rf_rel_noise", n.rf_rel_noise},
          {"sum_variance_shift", n.sum_variance_shift},
          {"detection_noise_atoms", n.detection_noise_atoms}};
}

}  // namespace eprlab
