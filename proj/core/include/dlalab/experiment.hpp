#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dlalab/geometry.hpp"

namespace dlalab {

inline constexpr const char* kVersion = "0.1.0";

/// Bad configuration or command line; maps to exit code 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Flat key/value configuration. File lines are `key = value` where value is
/// JSON (bare words are taken as strings); '#' starts a comment.
class ExperimentConfig {
 public:
  static ExperimentConfig parse(const std::string& text);
  static ExperimentConfig from_file(const std::filesystem::path& path);

  void set(const std::string& key, nlohmann::json value) { values_[key] = std::move(value); }
  /// Stores a command-line value, parsed as JSON when possible.
  void set_raw(const std::string& key, const std::string& raw);
  bool has(const std::string& key) const { return values_.contains(key); }
  const nlohmann::json& values() const { return values_; }

  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  std::uint64_t get_uint(const std::string& key, std::uint64_t fallback) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  std::vector<std::int64_t> get_int_list(const std::string& key, std::vector<std::int64_t> fallback) const;

 private:
  nlohmann::json values_ = nlohmann::json::object();
};

/// Seed from the config, else DLA_LAB_SEED, else 1.
std::uint64_t resolve_seed(const ExperimentConfig& cfg);

/// "D4", "(0,0)", "(0,0),(1,0)", "D8\\D2" or a JSON array of [x, y] pairs.
std::vector<Site> parse_site_set(const std::string& spec);

/// 64-bit FNV-1a, hex encoded.
std::string fnv1a_hex(const std::string& bytes);

/// Header record: command, config, seed, version, and a hash of those fields.
nlohmann::json make_header(const std::string& command, const nlohmann::json& config, std::uint64_t seed);

/// `path` if it does not exist (or overwrite is set), otherwise a sibling
/// with a UTC timestamp (and counter) inserted before the extension.
std::filesystem::path resolve_output_path(const std::filesystem::path& path, bool overwrite);

struct CommandResult {
  int exit_code = 0;
  std::vector<std::filesystem::path> outputs;
  std::string message;
};

CommandResult cmd_simulate(const ExperimentConfig& cfg);
CommandResult cmd_measure(const ExperimentConfig& cfg);
CommandResult cmd_couple(const ExperimentConfig& cfg);
CommandResult cmd_verify(const ExperimentConfig& cfg);
CommandResult cmd_report(const ExperimentConfig& cfg);

/// Dispatches by name; throws UsageError for unknown commands.
CommandResult run_command(const std::string& name, const ExperimentConfig& cfg);

}  // namespace dlalab
