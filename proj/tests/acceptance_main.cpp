// Acceptance runner: one PASS/FAIL line per criterion.
//   acceptance [--quick] [--seed S] [--json FILE] [suite ...]
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "dlalab/acceptance.hpp"
#include "dlalab/experiment.hpp"

int main(int argc, char** argv) {
  dlalab::AcceptanceOptions opts;
  std::vector<std::string> suites;
  std::string json_path;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--quick") {
      opts.quick = true;
    } else if (a == "--seed" && i + 1 < argc) {
      opts.seed = std::stoull(argv[++i]);
    } else if (a == "--json" && i + 1 < argc) {
      json_path = argv[++i];
    } else {
      suites.push_back(a);
    }
  }
  if (suites.empty()) suites.push_back("all");

  std::vector<dlalab::CriterionResult> results;
  try {
    results = dlalab::run_acceptance(suites, opts);
  } catch (const dlalab::UsageError& e) {
    std::cerr << e.what() << '\n';
    return 2;
  }
  bool all = true;
  nlohmann::json report = nlohmann::json::array();
  for (const auto& r : results) {
    std::cout << r.line() << '\n';
    if (!r.passed) std::cout << "  details: " << r.details.dump() << '\n';
    report.push_back(r.to_json());
    all = all && r.passed;
  }
  if (!json_path.empty()) std::ofstream(json_path) << report.dump(2) << '\n';
  return all ? 0 : 1;
}
