#include "dlalab/process.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <mutex>
#include <stdexcept>

namespace dlalab {

AggregateState::AggregateState(std::vector<Site> seed) : seed_(std::move(seed)) {
  std::sort(seed_.begin(), seed_.end());
  seed_.erase(std::unique(seed_.begin(), seed_.end()), seed_.end());
  for (const Site& s : seed_) {
    vertices_.insert(s);
    max_sq_norm_ = std::max(max_sq_norm_, squared_norm(s));
  }
}

void AggregateState::add_edge(const DirectedEdge& e, std::uint64_t step, double time) {
  if (!is_unit_edge(e)) throw std::logic_error("added edge is not a unit edge");
  if (!vertices_.contains(e.to)) throw std::logic_error("added edge head is not in the aggregate");
  if (vertices_.contains(e.from)) throw std::logic_error("added edge tail already in the aggregate");
  vertices_.insert(e.from);
  edge_set_.insert(e);
  edges_.push_back({e, step, time});
  max_sq_norm_ = std::max(max_sq_norm_, squared_norm(e.from));
}

Subgraph AggregateState::subgraph() const {
  Subgraph g;
  g.vertices = sorted_sites(vertices_);
  g.edges.reserve(edges_.size());
  for (const auto& r : edges_) g.edges.push_back(r.edge);
  std::sort(g.edges.begin(), g.edges.end());
  return g;
}

Subgraph AggregateState::subgraph_at(std::uint64_t step) const {
  Subgraph g;
  g.vertices = seed_;
  for (const auto& r : edges_) {
    if (r.birth_index <= step) {
      g.vertices.push_back(r.edge.from);
      g.edges.push_back(r.edge);
    }
  }
  g.normalize();
  return g;
}

bool AggregateState::check_vertex_identity() const {
  SiteSet expect = to_set(seed_);
  for (const auto& r : edges_) {
    if (!expect.contains(r.edge.to)) return false;  // head must predate the edge
    expect.insert(r.edge.from);
  }
  return expect == vertices_ && edge_set_.size() == edges_.size();
}

// ---------------------------------------------------------------------------

ProcessConfig ProcessConfig::edla(std::vector<Site> seed, std::uint64_t steps) {
  ProcessConfig c;
  c.kind = ProcessKind::Edla;
  c.seed = std::move(seed);
  c.horizon_steps = steps;
  return c;
}

ProcessConfig ProcessConfig::intermediate(std::int64_t m, std::int64_t n) {
  ProcessConfig c;
  c.kind = ProcessKind::Intermediate;
  c.m = m;
  c.n = n;
  return c;
}

void ProcessConfig::validate() const {
  if (kind == ProcessKind::Intermediate) {
    if (m < 0) throw std::invalid_argument("intermediate process requires m >= 0");
    if (m > n) {
      throw std::invalid_argument("intermediate process requires m <= N (got m=" + std::to_string(m) +
                                  ", N=" + std::to_string(n) + ")");
    }
    if (n < 1) throw std::invalid_argument("intermediate process requires N >= 1");
    if (launch_radius != 0 && launch_radius <= n + 1) {
      throw std::invalid_argument("launch radius must exceed N + 1");
    }
  } else {
    if (seed.empty()) throw std::invalid_argument("EDLA requires a nonempty seed");
    if (!horizon_steps && !horizon_time) {
      throw std::invalid_argument("EDLA requires an explicit horizon");
    }
  }
  if (launch_radius < 0) throw std::invalid_argument("launch radius must be >= 0");
  if (horizon_time && !(*horizon_time >= 0)) throw std::invalid_argument("horizon_time must be >= 0");
}

std::uint64_t ProcessConfig::resolved_horizon() const {
  if (horizon_steps) return *horizon_steps;
  if (kind == ProcessKind::Intermediate && !horizon_time) return static_cast<std::uint64_t>(2 * n);
  return std::numeric_limits<std::uint64_t>::max();
}

std::int64_t ProcessConfig::resolved_launch_radius() const {
  if (kind == ProcessKind::Intermediate) return launch_radius > 0 ? launch_radius : 4 * n;
  return launch_radius > 0 ? launch_radius : 64;
}

namespace {

const char* distribution_name(LaunchDistribution d) {
  return d == LaunchDistribution::UniformOnRing ? "uniform" : "exact";
}

const char* reentry_name(ReentryMode m) {
  switch (m) {
    case ReentryMode::Off: return "off";
    case ReentryMode::PoissonKernel: return "poisson";
    case ReentryMode::FreshLaunch: return "fresh";
  }
  return "?";
}

}  // namespace

nlohmann::json ProcessConfig::to_json() const {
  nlohmann::json j;
  j["kind"] = kind == ProcessKind::Edla ? "edla" : "intermediate";
  if (kind == ProcessKind::Edla) {
    nlohmann::json s = nlohmann::json::array();
    for (const Site& x : seed) s.push_back(site_json(x));
    j["seed_sites"] = s;
  } else {
    j["m"] = m;
    j["N"] = n;
  }
  j["launch_radius"] = resolved_launch_radius();
  j["launch"] = distribution_name(launch_distribution);
  j["acceleration"] = policy.mode == AccelerationPolicy::Mode::SquareJump ? "square" : "none";
  j["budget"] = budget;
  j["reentry"] = reentry_name(reentry);
  j["escape_factor"] = escape_factor;
  if (horizon_steps || !horizon_time) j["horizon_steps"] = resolved_horizon();
  if (horizon_time) j["horizon_time"] = *horizon_time;
  j["snapshot_steps"] = snapshot_steps;
  if (envelope) j["envelope"] = envelope->describe();
  return j;
}

const char* to_string(EventRecord::Kind k) {
  switch (k) {
    case EventRecord::Kind::Added: return "added";
    case EventRecord::Kind::Lazy: return "lazy";
    case EventRecord::Kind::Dropped: return "dropped";
  }
  return "?";
}

nlohmann::json site_json(Site s) { return nlohmann::json::array({s.x, s.y}); }

nlohmann::json edge_json(const DirectedEdge& e) {
  return nlohmann::json::array({site_json(e.from), site_json(e.to)});
}

nlohmann::json subgraph_json(const Subgraph& g) {
  nlohmann::json v = nlohmann::json::array();
  for (const Site& s : g.vertices) v.push_back(site_json(s));
  nlohmann::json e = nlohmann::json::array();
  for (const auto& x : g.edges) e.push_back(edge_json(x));
  return {{"vertices", v}, {"edges", e}};
}

nlohmann::json EventRecord::to_json() const {
  nlohmann::json j;
  j["type"] = "event";
  j["step"] = step;
  j["outcome"] = to_string(kind);
  if (kind == Kind::Added) j["edge"] = edge_json(edge);
  if (kind == Kind::Lazy) j["site"] = site_json(site);
  j["time"] = time;
  j["walker_steps"] = walker_steps;
  return j;
}

// ---------------------------------------------------------------------------

std::shared_ptr<const ObstacleIndex> intermediate_base_index(std::int64_t m, std::int64_t n) {
  static std::mutex mutex;
  static std::map<std::pair<std::int64_t, std::int64_t>, std::shared_ptr<const ObstacleIndex>> cache;
  std::lock_guard lock(mutex);
  auto& slot = cache[{m, n}];
  if (!slot) {
    auto index = std::make_shared<ObstacleIndex>();
    for (const Site& s : SegmentSpec{n}.sites()) {
      index->insert(s, SegmentSpec{m}.contains(s) ? SiteTag::Target : SiteTag::Absorber);
    }
    slot = std::move(index);
  }
  return slot;
}

AggregateState init_process(const ProcessConfig& cfg) {
  cfg.validate();
  if (cfg.kind == ProcessKind::Intermediate) return AggregateState(SegmentSpec{cfg.m}.sites());
  return AggregateState(cfg.seed);
}

GrowthProcess::GrowthProcess(const ProcessConfig& cfg) : cfg_(cfg), state_(init_process(cfg)) {
  if (cfg_.kind == ProcessKind::Intermediate) {
    index_ = *intermediate_base_index(cfg_.m, cfg_.n);
  } else {
    for (const Site& s : state_.seed()) index_.insert(s, SiteTag::Target);
  }
}

EventRecord GrowthProcess::step(RngStream& rng) {
  return *step_until(rng, std::numeric_limits<double>::infinity());
}

std::optional<EventRecord> GrowthProcess::step_until(RngStream& rng, double t_max) {
  std::int64_t radius = cfg_.resolved_launch_radius();
  double rate = static_cast<double>(cfg_.n);
  if (cfg_.kind == ProcessKind::Edla) {
    radius = std::max(radius, static_cast<std::int64_t>(std::ceil(4.0 * state_.radius())));
    rate = 1.0;
  }
  // The holding time is independent of the walk, so it is drawn first.
  const double t = time_ + rng.exponential(rate);
  if (t > t_max) return std::nullopt;
  auto ring = LaunchRing::get({radius, cfg_.launch_distribution});
  const WalkOptions opts =
      walk_options_for(ring, cfg_.policy, cfg_.budget, cfg_.reentry, cfg_.escape_factor);
  const Site start = ring->launch(rng);
  const WalkOutcome out = run_to_absorption(start, index_, opts, rng);

  EventRecord ev;
  ev.step = ++step_;
  ev.walker_steps = out.steps;
  time_ = t;
  ev.time = time_;
  switch (out.kind) {
    case WalkOutcome::Kind::HitTarget:
      ev.kind = EventRecord::Kind::Added;
      ev.edge = out.edge;
      state_.add_edge(out.edge, ev.step, ev.time);
      index_.insert(out.edge.from, SiteTag::Target);
      break;
    case WalkOutcome::Kind::HitAbsorber:
      ev.kind = EventRecord::Kind::Lazy;
      ev.site = out.edge.to;
      break;
    case WalkOutcome::Kind::BudgetExhausted:
      ev.kind = EventRecord::Kind::Dropped;
      break;
  }
  return ev;
}

// ---------------------------------------------------------------------------

double Trajectory::drop_rate() const {
  return events.empty() ? 0.0 : static_cast<double>(dropped) / static_cast<double>(events.size());
}

std::string Trajectory::data_jsonl() const {
  std::string out;
  for (const auto& e : events) {
    out += e.to_json().dump();
    out += '\n';
  }
  for (const auto& s : snapshots) {
    nlohmann::json j = subgraph_json(s.graph);
    j["type"] = "snapshot";
    j["step"] = s.step;
    j["time"] = s.time;
    out += j.dump();
    out += '\n';
  }
  nlohmann::json summary;
  summary["type"] = "summary";
  summary["added"] = added;
  summary["lazy"] = lazy;
  summary["dropped"] = dropped;
  summary["drop_rate"] = drop_rate();
  summary["first_exit_step"] = first_exit_step ? nlohmann::json(*first_exit_step) : nlohmann::json();
  out += summary.dump();
  out += '\n';
  return out;
}

Trajectory run_process(const ProcessConfig& cfg, std::uint64_t seed, std::uint64_t stream) {
  GrowthProcess proc(cfg);
  RngStream rng(seed, stream);
  Trajectory t;
  t.config = cfg;
  t.seed = seed;
  t.stream = stream;

  std::optional<Region> envelope;
  if (cfg.envelope) {
    envelope = cfg.envelope->materialize();
  } else if (cfg.kind == ProcessKind::Intermediate) {
    envelope = EnvelopeSpec::f(static_cast<double>(std::max<std::int64_t>(cfg.m, 1))).materialize();
  }
  if (envelope && !envelope_contains(*envelope, proc.state().subgraph())) t.first_exit_step = 0;

  const std::uint64_t horizon = cfg.resolved_horizon();
  std::vector<std::uint64_t> snaps = cfg.snapshot_steps;
  if (snaps.empty()) snaps.push_back(0);
  std::sort(snaps.begin(), snaps.end());
  snaps.erase(std::unique(snaps.begin(), snaps.end()), snaps.end());
  auto snap_it = snaps.begin();
  auto take_snapshots = [&] {
    while (snap_it != snaps.end() && *snap_it <= proc.step_count()) {
      if (*snap_it == proc.step_count()) {
        t.snapshots.push_back({proc.step_count(), proc.time(), proc.state().subgraph()});
      }
      ++snap_it;
    }
  };
  take_snapshots();

  while (proc.step_count() < horizon) {
    std::optional<EventRecord> next =
        proc.step_until(rng, cfg.horizon_time ? *cfg.horizon_time : std::numeric_limits<double>::infinity());
    if (!next) break;
    EventRecord& ev = *next;
    switch (ev.kind) {
      case EventRecord::Kind::Added:
        ++t.added;
        if (envelope && !t.first_exit_step &&
            !(envelope->contains(ev.edge.from) && envelope->contains(ev.edge.to))) {
          t.first_exit_step = ev.step;
        }
        break;
      case EventRecord::Kind::Lazy: ++t.lazy; break;
      case EventRecord::Kind::Dropped: ++t.dropped; break;
    }
    t.events.push_back(ev);
    take_snapshots();
  }
  if (cfg.snapshot_steps.empty() && proc.step_count() > 0) {
    t.snapshots.push_back({proc.step_count(), proc.time(), proc.state().subgraph()});
  }
  t.final_state = proc.state();
  return t;
}

Subgraph restrict_to_window(const Subgraph& g, const WindowSpec& k) {
  Subgraph out;
  for (const Site& s : g.vertices) {
    if (k.contains(s)) out.vertices.push_back(s);
  }
  for (const auto& e : g.edges) {
    if (k.contains(e)) out.edges.push_back(e);
  }
  out.normalize();
  return out;
}

Subgraph restrict_to_window(const AggregateState& state, const WindowSpec& k) {
  Subgraph out;
  for (const Site& s : k.sites()) {
    if (state.contains(s)) out.vertices.push_back(s);
  }
  for (const auto& e : k.edges()) {
    if (state.contains(e)) out.edges.push_back(e);
  }
  out.normalize();
  return out;
}

}  // namespace dlalab
