#pragma once

// Flat JSON option files: {"option-name": value, ...}. Arrays map to
// multi-value options; nested objects are rejected. Values only fill options
// the command line left unset.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "eprlab/errors.hpp"
#include "eprlab/io.hpp"

namespace eprlab::cli {

using ConfigItems = std::vector<std::pair<std::string, std::vector<std::string>>>;

inline std::string config_scalar(const std::string& key, const nlohmann::json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number_unsigned()) return std::to_string(v.get<std::uint64_t>());
  if (v.is_number_integer()) return std::to_string(v.get<std::int64_t>());
  if (v.is_number_float()) return format_double(v.get<double>());
  throw UsageError("config: '" + key + "' must be a scalar or an array of scalars");
}

inline ConfigItems parse_json_config(const std::string& text, const std::string& origin) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(origin + ": invalid JSON: " + e.what());
  }
  if (!j.is_object()) throw UsageError(origin + ": top level must be a JSON object");
  ConfigItems items;
  for (const auto& [key, value] : j.items()) {
    std::vector<std::string> inputs;
    if (value.is_array()) {
      for (const auto& v : value) inputs.push_back(config_scalar(key, v));
    } else {
      inputs.push_back(config_scalar(key, value));
    }
    items.emplace_back(key, std::move(inputs));
  }
  return items;
}

/// Applies a config file to a parsed subcommand. Unknown keys are usage errors.
inline void apply_json_config(CLI::App* sub, const std::filesystem::path& file) {
  std::string text;
  try {
    text = read_text(file);
  } catch (const std::exception& e) {
    throw UsageError(std::string("config: ") + e.what());
  }
  for (const auto& [key, inputs] : parse_json_config(text, file.string())) {
    if (key == "config") throw UsageError("config: files cannot include other files");
    CLI::Option* opt = sub->get_option_no_throw("--" + key);
    if (opt == nullptr) throw UsageError("config: unknown option '" + key + "'");
    if (opt->count() > 0) continue;
    for (const auto& in : inputs) opt->add_result(in);
    try {
      opt->run_callback();
    } catch (const CLI::Error& e) {
      throw UsageError("config: '" + key + "': " + e.what());
    }
  }
}

}  // namespace eprlab::cli
