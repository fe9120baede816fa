#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dlalab/coupling.hpp"
#include "dlalab/geometry.hpp"
#include "dlalab/process.hpp"

namespace dlalab {

struct ChiSquareResult {
  double statistic = 0;
  int dof = 0;
  double p_value = 1;
  std::size_t cells = 0;  // after pooling
};

/// Pearson goodness of fit of `observed` counts against `probabilities`
/// (which must sum to ~1). Cells with expected count below min_expected are
/// pooled into one cell.
ChiSquareResult chi_square_gof(const std::vector<std::uint64_t>& observed,
                               const std::vector<double>& probabilities, double min_expected = 5.0);

struct KsResult {
  double statistic = 0;
  double p_value = 1;
};

/// One-sample Kolmogorov-Smirnov test against Exp(rate).
KsResult ks_exponential(std::vector<double> samples, double rate);
/// Asymptotic Kolmogorov survival function P(K > lambda).
double kolmogorov_survival(double lambda);

struct Interval {
  double lo = 0, hi = 1;
};
Interval wilson_interval(std::uint64_t successes, std::uint64_t trials, double z = 1.96);

struct VerificationReport {
  std::string name;
  nlohmann::json parameters = nlohmann::json::object();
  nlohmann::json statistics = nlohmann::json::object();
  nlohmann::json thresholds = nlohmann::json::object();
  bool passed = true;
  std::uint64_t replicas = 0;
  std::uint64_t seed = 0;

  nlohmann::json to_json() const;
};

/// Fraction of Intermediate(m, N) replicas whose 2N-step trajectory stays in
/// F(m); also reports the halved-height envelope. `base` supplies walk
/// settings (kind, m and N are overwritten).
VerificationReport envelope_fraction(std::int64_t m, std::int64_t n, std::uint64_t replicas,
                                     std::uint64_t seed, double threshold = 0.95,
                                     const ProcessConfig& base = {});

struct ScarcityOptions {
  CouplingOptions coupling{};
  /// Window for the agreement statistics; empty = none.
  std::optional<WindowSpec> window;
};

/// Empirical |T_Delta| distribution of run_coupled(m, m+1, N), the tail
/// P(|T_Delta| >= m^alpha), class breakdown, and (with a window) the window
/// disagreement frequency and the structural "disagreement preceded by a
/// Delta" check.
VerificationReport discrepancy_scarcity(std::int64_t m, std::int64_t n, double alpha,
                                        std::uint64_t replicas, std::uint64_t seed,
                                        const ScarcityOptions& opts = {});

/// Sorted vertex and edge lists, e.g. "V:0,0;1,0|E:1,0>0,0".
std::string canonical_encoding(const Subgraph& g);

struct EmpiricalWindowLaw {
  WindowSpec window;
  std::vector<std::uint64_t> times;  // embedded-chain steps
  std::vector<std::map<std::string, std::uint64_t>> counts;  // per time
  std::uint64_t replicas = 0;

  std::string to_jsonl() const;
};

EmpiricalWindowLaw window_law(const ProcessConfig& cfg, const WindowSpec& k,
                              const std::vector<std::uint64_t>& times, std::uint64_t replicas,
                              std::uint64_t seed);

/// Total variation distance per time; throws on window or time mismatch.
std::vector<double> tv_distance(const EmpiricalWindowLaw& a, const EmpiricalWindowLaw& b);

/// TV distances between window laws of consecutive m (and the last m vs
/// m = N); reports whether they decrease in m.
VerificationReport bulk_convergence_sweep(const std::vector<std::int64_t>& m_list, std::int64_t n,
                                          const WindowSpec& k, const std::vector<std::uint64_t>& times,
                                          std::uint64_t replicas, std::uint64_t seed,
                                          const ProcessConfig& base = {});

struct DimensionEstimate {
  double exponent = 0;
  double stderr_ = 0;
  std::vector<std::pair<std::int64_t, std::uint64_t>> points;  // (h, M(h))
};

/// Least-squares slope of log M(h) against log h, where M(h) counts vertices
/// with |x| <= h and 1 <= |y| <= h. Exploratory. Requires >= 100 edges.
DimensionEstimate mass_dimension(const AggregateState& state);
DimensionEstimate mass_dimension(const std::vector<Site>& vertices);

}  // namespace dlalab
