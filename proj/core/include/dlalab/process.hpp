#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dlalab/geometry.hpp"
#include "dlalab/rng.hpp"
#include "dlalab/walk.hpp"

namespace dlalab {

struct EdgeRecord {
  DirectedEdge edge;
  std::uint64_t birth_index = 0;  // step at which the edge was added (1-based)
  double birth_time = 0;
};

/// Growing directed subgraph. Vertices are the seed plus the tail of every
/// added edge; each edge's head was already a vertex when it was added.
class AggregateState {
 public:
  AggregateState() = default;
  explicit AggregateState(std::vector<Site> seed);

  const SiteSet& vertices() const { return vertices_; }
  const std::vector<Site>& seed() const { return seed_; }
  const std::vector<EdgeRecord>& edges() const { return edges_; }
  bool contains(Site s) const { return vertices_.contains(s); }
  bool contains(const DirectedEdge& e) const { return edge_set_.contains(e); }

  /// Appends e; throws std::logic_error unless e.to is a vertex and e.from is not.
  void add_edge(const DirectedEdge& e, std::uint64_t step, double time);

  /// Whole graph (sorted); subgraph_at(k) keeps edges born at steps <= k.
  Subgraph subgraph() const;
  Subgraph subgraph_at(std::uint64_t step) const;

  /// vertices == seed u {e.from}.
  bool check_vertex_identity() const;
  /// Largest Euclidean norm over vertices.
  double radius() const { return std::sqrt(static_cast<double>(max_sq_norm_)); }

 private:
  std::vector<Site> seed_;
  SiteSet vertices_;
  std::vector<EdgeRecord> edges_;
  EdgeSet edge_set_;
  std::int64_t max_sq_norm_ = 0;
};

enum class ProcessKind { Edla, Intermediate };

struct ProcessConfig {
  ProcessKind kind = ProcessKind::Intermediate;
  std::vector<Site> seed;  // EDLA only
  std::int64_t m = 0;      // Intermediate only
  std::int64_t n = 0;      // Intermediate only

  /// Intermediate: ring radius (0 = 4N). EDLA: minimum ring radius; the
  /// actual radius is max(4 * aggregate radius, this).
  std::int64_t launch_radius = 0;
  LaunchDistribution launch_distribution = LaunchDistribution::UniformOnRing;
  AccelerationPolicy policy{};
  std::uint64_t budget = kDefaultWalkBudget;
  ReentryMode reentry = ReentryMode::PoissonKernel;
  double escape_factor = 2.0;

  /// Number of clock rings to execute (unset = 2N for Intermediate; EDLA
  /// needs a step or time horizon). A horizon_time stops earlier.
  std::optional<std::uint64_t> horizon_steps;
  std::optional<double> horizon_time;
  /// Step indices at which to store a snapshot (0 = initial state). When
  /// empty, the initial and final states are stored.
  std::vector<std::uint64_t> snapshot_steps;
  /// Envelope whose first exit is recorded (default F(m) for Intermediate).
  std::optional<EnvelopeSpec> envelope;

  static ProcessConfig edla(std::vector<Site> seed, std::uint64_t steps);
  static ProcessConfig intermediate(std::int64_t m, std::int64_t n);

  /// Throws std::invalid_argument naming the violated precondition.
  void validate() const;
  std::uint64_t resolved_horizon() const;
  std::int64_t resolved_launch_radius() const;
  nlohmann::json to_json() const;
};

struct EventRecord {
  enum class Kind { Added, Lazy, Dropped };
  std::uint64_t step = 0;
  Kind kind = Kind::Added;
  DirectedEdge edge{};  // Added
  Site site{};          // Lazy: absorber site reached
  double time = 0;
  std::uint64_t walker_steps = 0;

  nlohmann::json to_json() const;
};

const char* to_string(EventRecord::Kind k);

/// One trajectory of EDLA or the intermediate process. Steps are sequential:
/// each walker runs against the aggregate left by the previous one.
class GrowthProcess {
 public:
  explicit GrowthProcess(const ProcessConfig& cfg);

  const ProcessConfig& config() const { return cfg_; }
  const AggregateState& state() const { return state_; }
  std::uint64_t step_count() const { return step_; }
  double time() const { return time_; }

  EventRecord step(RngStream& rng);
  /// As step(), but nothing happens (and nullopt is returned) if the next
  /// clock ring falls after t_max.
  std::optional<EventRecord> step_until(RngStream& rng, double t_max);

 private:
  ProcessConfig cfg_;
  AggregateState state_;
  ObstacleIndex index_;
  std::uint64_t step_ = 0;
  double time_ = 0;
};

/// Initial state for a configuration (validates it).
AggregateState init_process(const ProcessConfig& cfg);

/// Shared obstacle index of the intermediate process at time 0: D_m tagged as
/// target and D_N \ D_m as absorber. Cached; callers copy it.
std::shared_ptr<const ObstacleIndex> intermediate_base_index(std::int64_t m, std::int64_t n);

struct Snapshot {
  std::uint64_t step = 0;
  double time = 0;
  Subgraph graph;
};

struct Trajectory {
  ProcessConfig config;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
  std::vector<EventRecord> events;
  std::vector<Snapshot> snapshots;
  AggregateState final_state;
  std::optional<std::uint64_t> first_exit_step;  // first step leaving the envelope
  std::uint64_t added = 0, lazy = 0, dropped = 0;

  double drop_rate() const;
  /// Events and snapshots as JSON lines (no header).
  std::string data_jsonl() const;
};

/// Runs a trajectory on stream RngStream(seed, stream).
Trajectory run_process(const ProcessConfig& cfg, std::uint64_t seed, std::uint64_t stream = 0);

/// Induced intersection with the window: vertices in K, edges listed by K.
Subgraph restrict_to_window(const Subgraph& g, const WindowSpec& k);
Subgraph restrict_to_window(const AggregateState& state, const WindowSpec& k);

nlohmann::json site_json(Site s);
nlohmann::json edge_json(const DirectedEdge& e);
nlohmann::json subgraph_json(const Subgraph& g);

}  // namespace dlalab
