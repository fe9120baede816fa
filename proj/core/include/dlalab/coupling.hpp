#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dlalab/geometry.hpp"
#include "dlalab/process.hpp"
#include "dlalab/rng.hpp"
#include "dlalab/walk.hpp"

namespace dlalab {

/// The eight transition cases of the walker-shared coupling.
enum class CaseTag : std::uint8_t { I = 1, II, III, IV, V, VI, VII, VIII };
const char* to_string(CaseTag c);

/// Max over the four endpoint pairs of the Euclidean distance.
double edge_distance(const DirectedEdge& a, const DirectedEdge& b);

struct Classification {
  enum class Kind { Good, Bad, Devastating };
  Kind kind = Kind::Good;
  double m = 0;
  double alpha = 0;
};
const char* to_string(Classification::Kind k);

/// Good iff there is no second edge or Dist(e1, e2) < m^{1-5 alpha};
/// Devastating iff Bad and an endpoint of e2 lies in DevastatingBox(m, alpha).
/// alpha must lie in (0, 1/5).
Classification classify_delta(const DirectedEdge& e1, const std::optional<DirectedEdge>& e2,
                              double m, double alpha);

struct DeltaRecord {
  std::uint64_t step = 0;
  DirectedEdge e1{};
  std::optional<DirectedEdge> e2;
  CaseTag tag = CaseTag::I;
  Classification cls;
  double dist = 0;  // edge_distance(e1, e2), 0 without e2
  std::size_t new_edge_discrepancies = 0;

  nlohmann::json to_json() const;
};

struct DiscrepancyLedger {
  SiteSet vertex_disc;  // V^D, cumulative
  EdgeSet edge_disc;    // E^D, cumulative
  std::vector<DeltaRecord> deltas;
  std::array<std::uint64_t, 8> case_counts{};
  std::uint64_t voided = 0;  // steps voided by budget exhaustion

  std::uint64_t steps() const;
  /// Good / Bad / Devastating counts over the deltas.
  std::array<std::uint64_t, 3> class_counts() const;
  std::string data_jsonl() const;
};

struct CouplingOptions {
  double alpha = 0.1;
  std::int64_t launch_radius = 0;  // 0 = 4N
  LaunchDistribution launch_distribution = LaunchDistribution::UniformOnRing;
  AccelerationPolicy policy{};
  std::uint64_t budget = kDefaultWalkBudget;
  ReentryMode reentry = ReentryMode::PoissonKernel;
  double escape_factor = 2.0;
  std::optional<std::uint64_t> horizon;  // unset = 2N
  /// Envelope whose first exit (by either side) is recorded; default F(m2).
  std::optional<EnvelopeSpec> envelope;
};

struct CoupledStepResult {
  bool voided = false;
  CaseTag tag = CaseTag::VIII;
  std::optional<DirectedEdge> e1;
  std::optional<DirectedEdge> e2;
  std::optional<DeltaRecord> delta;
  /// Whether e1's head lay in the symmetric difference before the step.
  bool head_in_symmetric_difference = false;
};

/// Two intermediate processes IA^{m1,N}, IA^{m2,N} driven by one walker per
/// step. Each side alone is the intermediate process.
class CoupledProcess {
 public:
  CoupledProcess(std::int64_t m1, std::int64_t m2, std::int64_t n, CouplingOptions opts = {});
  /// Starts from explicit aggregates (for checks of individual transitions).
  /// Both must contain their seed segments and be subsets of the seeds plus
  /// edges; no edge discrepancies are assumed to predate the call.
  CoupledProcess(std::int64_t m1, std::int64_t m2, std::int64_t n, AggregateState left,
                 AggregateState right, CouplingOptions opts = {});

  std::int64_t m1() const { return m1_; }
  std::int64_t m2() const { return m2_; }
  std::int64_t n() const { return n_; }
  const AggregateState& left() const { return left_; }
  const AggregateState& right() const { return right_; }
  const DiscrepancyLedger& ledger() const { return ledger_; }
  /// Non-voided steps taken so far.
  std::uint64_t step_count() const { return step_; }
  const CouplingOptions& options() const { return opts_; }

  CoupledStepResult step(RngStream& rng);

 private:
  void init_indices();
  void add_left(const DirectedEdge& e, double t);
  void add_right(const DirectedEdge& e, double t);

  std::int64_t m1_, m2_, n_;
  CouplingOptions opts_;
  AggregateState left_, right_;
  ObstacleIndex both_;   // V1 u V2 u D_N; target tags mark V1 u V2
  ObstacleIndex left_index_;   // V1 u D_N
  ObstacleIndex right_index_;  // V2 u D_N
  DiscrepancyLedger ledger_;
  std::uint64_t step_ = 0;
  double time_ = 0;
};

struct CoupledRun {
  std::int64_t m1 = 0, m2 = 0, n = 0;
  double alpha = 0;
  std::uint64_t seed = 0, stream = 0;
  AggregateState left, right;
  DiscrepancyLedger ledger;
  std::optional<std::uint64_t> first_exit_step;
  std::uint64_t steps = 0;
};

/// Runs the coupled chain for the horizon (default 2N non-voided steps).
/// Throws std::invalid_argument unless m1 < m2 <= N.
CoupledRun run_coupled(std::int64_t m1, std::int64_t m2, std::int64_t n, const CouplingOptions& opts,
                       std::uint64_t seed, std::uint64_t stream = 0);

struct WindowAgreement {
  std::vector<bool> agree;  // index k = after step k (0 = initial)
  std::optional<std::uint64_t> first_disagreement;
};

/// Per-step equality of the two aggregates restricted to K, from birth stamps.
WindowAgreement window_agreement(const AggregateState& left, const AggregateState& right,
                                 const WindowSpec& k, std::uint64_t horizon);

/// Invariant checks over a finished run; returns a description of the first
/// violation or an empty string.
std::string check_ledger_invariants(const CoupledRun& run);

}  // namespace dlalab
