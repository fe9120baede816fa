#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace dlalab {

struct CriterionResult {
  int id = 0;
  std::string suite;
  std::string title;
  bool passed = false;
  double seconds = 0;
  double time_limit = 0;
  std::string summary;
  nlohmann::json details = nlohmann::json::object();

  nlohmann::json to_json() const;
  /// "PASS [n] title — summary (t s / limit s)"
  std::string line() const;
};

struct AcceptanceOptions {
  /// Reduced replica counts and widened thresholds (see quick_mode_table()).
  bool quick = false;
  std::uint64_t seed = 20240611;
};

/// Suite names in criterion order: oracle, mc, acceleration, scaling,
/// process, coupling, envelope, discrepancy, determinism, structural.
const std::vector<std::string>& acceptance_suites();

/// Human-readable description of what --quick changes.
nlohmann::json quick_mode_table();

/// Runs one criterion; throws UsageError for an unknown suite.
CriterionResult run_criterion(const std::string& suite, const AcceptanceOptions& opts);

/// Runs the given suites ("all" expands to every suite) in criterion order.
std::vector<CriterionResult> run_acceptance(const std::vector<std::string>& suites,
                                            const AcceptanceOptions& opts);

}  // namespace dlalab
