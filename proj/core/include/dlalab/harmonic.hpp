#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dlalab/geometry.hpp"
#include "dlalab/walk.hpp"

namespace dlalab {

/// Truncation radii and limits for the exact solver. A zero radius means
/// "choose from the size of the obstacle set" (see resolved_for).
struct SolverConfig {
  std::int64_t inner_radius = 0;
  std::int64_t outer_radius = 0;
  double tolerance = 1e-12;
  std::size_t max_unknowns = 4'000'000;
  /// Assumed truncation error order r^{-order} used by the two-radius
  /// extrapolation.
  double order = 2.0;

  /// Fills in zero radii: inner = max(4 (R + 1), 16), outer = 2 inner, where
  /// R is the Euclidean radius of the obstacle set.
  SolverConfig resolved_for(double obstacle_radius) const;
};

class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct HarmonicEntry {
  DirectedEdge edge;
  double value = 0;
  double stderr_ = 0;
};

/// Edge harmonic measure table. Entries cover edges whose head lies in the
/// base set A; the mass of edges into the absorber is aggregated as
/// lazy_mass.
struct HarmonicTable {
  enum class Method { Exact, MonteCarlo };

  std::vector<HarmonicEntry> entries;  // sorted by edge
  std::vector<Site> base;              // sorted
  std::vector<Site> absorber;          // sorted
  double lazy_mass = 0;
  double lazy_stderr = 0;
  Method method = Method::Exact;
  std::vector<std::int64_t> radii;  // Exact
  std::uint64_t walkers = 0;        // MonteCarlo
  std::uint64_t dropped = 0;        // MonteCarlo walkers that exhausted the budget
  std::uint64_t seed = 0;
  double max_residual = 0;          // Exact

  /// 0 for edges not in the table.
  double value(const DirectedEdge& e) const;
  const HarmonicEntry* find(const DirectedEdge& e) const;
  double total_mass() const;  // sum of entries, excluding lazy mass

  nlohmann::json header_json() const;
  /// Header line followed by one line per entry.
  std::string to_jsonl() const;
};

/// Harmonic measure from infinity of every directed edge into A u absorber.
/// Throws SolverError when the system exceeds max_unknowns or the residual
/// exceeds the tolerance.
HarmonicTable exact_edge_harmonic(const SiteSet& a, const SiteSet& absorber,
                                  const SolverConfig& cfg = {});

/// P_x(first visit to A u absorber is through edge e) for the walk started at
/// x (time-zero hitting). Keys are the edges of the returned table.
HarmonicTable exact_edge_harmonic_from(Site x, const SiteSet& a, const SiteSet& absorber,
                                       const SolverConfig& cfg = {});

struct McOptions {
  std::uint64_t walkers = 100'000;
  LaunchSpec launch{};
  AccelerationPolicy policy{};
  std::uint64_t seed = 1;
  std::uint64_t budget = kDefaultWalkBudget;
  /// Escaping walkers (|S| > escape_factor * launch radius) re-enter the
  /// launch ring through the exterior Poisson kernel; 0 disables re-entry.
  double escape_factor = 2.0;
  ReentryMode reentry = ReentryMode::PoissonKernel;
};

/// Empirical first-hit edge frequencies; absorber hits are lazy mass.
HarmonicTable mc_edge_harmonic(const SiteSet& a, const SiteSet& absorber, const McOptions& opts);

enum class VertexSide { InnerVertex, OuterVertex };

/// Head sum (InnerVertex: H_A(x)) or tail sum (OuterVertex: H^e_A(x)).
/// Throws std::invalid_argument if x is not on the matching boundary.
double vertex_harmonic(const HarmonicTable& table, Site x, VertexSide side);

struct ScalingEstimate {
  struct Sample {
    std::int64_t n = 0;
    double a_n = 0;        // n * H_{D_n}(0), head-sum reading
    double a_n_outer = 0;  // n * H^e_{D_n}((0,1)), outer-vertex reading
    double stderr_ = 0;
  };
  std::vector<Sample> samples;
  std::vector<double> cauchy_gaps;  // |a_{k+1} - a_k|
  double extrapolated = 0;          // limit of a_n
  double c = 0;                     // extrapolated / 2
  double big_c = 0;                 // 2 / extrapolated
  bool warning = false;
  std::string note;

  nlohmann::json to_json() const;
};

/// Limit extrapolation of a_n assuming a_n = L + b/n + c/n^2 + ...
/// (Richardson on the trailing samples).
double extrapolate_sequence(const std::vector<std::int64_t>& n, const std::vector<double>& a);

ScalingEstimate estimate_scaling_constant(const std::vector<std::int64_t>& n_list,
                                          const SolverConfig& cfg = {});

struct StationaryEstimate {
  std::vector<std::int64_t> n_values;
  std::vector<double> estimates;  // (1/c) * N * H^e_{A u D_N}(e)
  double value = 0;               // last estimate
  double gap = 0;                 // |last - previous|, 0 with one N
};

StationaryEstimate stationary_harmonic_estimate(const SiteSet& a, const DirectedEdge& e,
                                                const std::vector<std::int64_t>& n_values,
                                                double c_est, const SolverConfig& cfg = {});

struct HeightBoundReport {
  struct Row {
    Site site;
    double scaled = 0;  // N * H^e_{A u D_N}(x), outer-vertex sum
    double ratio = 0;   // scaled / sqrt(max(|x.y|, 1))
  };
  std::vector<Row> rows;
  double fitted_c = 0;  // smallest C with scaled <= C sqrt(max(|y|,1))
  std::int64_t n = 0;
};

HeightBoundReport height_bound_check(const SiteSet& a, std::int64_t n,
                                     const std::vector<Site>& sites, const SolverConfig& cfg = {});

/// Harmonic measure from infinity of each site of `ring` (the outer ring of
/// B(0, radius)), computed on the filled ball.
std::vector<double> ring_harmonic_from_infinity(std::int64_t radius, const std::vector<Site>& ring);

}  // namespace dlalab
