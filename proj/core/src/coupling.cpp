#include "dlalab/coupling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace dlalab {

const char* to_string(CaseTag c) {
  static constexpr const char* kNames[] = {"I", "II", "III", "IV", "V", "VI", "VII", "VIII"};
  return kNames[static_cast<int>(c) - 1];
}

const char* to_string(Classification::Kind k) {
  switch (k) {
    case Classification::Kind::Good: return "good";
    case Classification::Kind::Bad: return "bad";
    case Classification::Kind::Devastating: return "devastating";
  }
  return "?";
}

double edge_distance(const DirectedEdge& a, const DirectedEdge& b) {
  double best = 0;
  for (Site p : {a.from, a.to}) {
    for (Site q : {b.from, b.to}) best = std::max(best, norm(p - q));
  }
  return best;
}

Classification classify_delta(const DirectedEdge& e1, const std::optional<DirectedEdge>& e2,
                              double m, double alpha) {
  if (!(alpha > 0 && alpha < 0.2)) throw std::invalid_argument("alpha must lie in (0, 1/5)");
  Classification c{Classification::Kind::Good, m, alpha};
  if (!e2) return c;
  if (edge_distance(e1, *e2) < std::pow(m, 1.0 - 5.0 * alpha)) return c;
  const Region box = EnvelopeSpec::devastating(m, alpha).materialize();
  c.kind = box.contains(e2->from) || box.contains(e2->to) ? Classification::Kind::Devastating
                                                          : Classification::Kind::Bad;
  return c;
}

nlohmann::json DeltaRecord::to_json() const {
  nlohmann::json j;
  j["type"] = "delta";
  j["step"] = step;
  j["e1"] = edge_json(e1);
  j["e2"] = e2 ? edge_json(*e2) : nlohmann::json();
  j["case"] = to_string(tag);
  j["class"] = to_string(cls.kind);
  j["dist"] = dist;
  j["new_edge_discrepancies"] = new_edge_discrepancies;
  return j;
}

std::uint64_t DiscrepancyLedger::steps() const {
  std::uint64_t s = 0;
  for (auto c : case_counts) s += c;
  return s;
}

std::array<std::uint64_t, 3> DiscrepancyLedger::class_counts() const {
  std::array<std::uint64_t, 3> out{};
  for (const auto& d : deltas) ++out[static_cast<int>(d.cls.kind)];
  return out;
}

std::string DiscrepancyLedger::data_jsonl() const {
  std::string out;
  for (const auto& d : deltas) {
    out += d.to_json().dump();
    out += '\n';
  }
  nlohmann::json s;
  s["type"] = "summary";
  nlohmann::json cases;
  for (int i = 0; i < 8; ++i) cases[to_string(static_cast<CaseTag>(i + 1))] = case_counts[static_cast<std::size_t>(i)];
  s["cases"] = cases;
  const auto cc = class_counts();
  s["good"] = cc[0];
  s["bad"] = cc[1];
  s["devastating"] = cc[2];
  s["voided"] = voided;
  s["vertex_discrepancies"] = vertex_disc.size();
  s["edge_discrepancies"] = edge_disc.size();
  out += s.dump();
  out += '\n';
  return out;
}

// ---------------------------------------------------------------------------

namespace {

void check_params(std::int64_t m1, std::int64_t m2, std::int64_t n) {
  if (!(m1 < m2)) throw std::invalid_argument("coupling requires m1 < m2");
  if (!(m2 <= n)) throw std::invalid_argument("coupling requires m2 <= N");
  if (m1 < 0) throw std::invalid_argument("coupling requires m1 >= 0");
}

void check_state(const AggregateState& s, std::int64_t m, std::int64_t n) {
  for (const Site& x : SegmentSpec{m}.sites()) {
    if (!s.contains(x)) throw std::invalid_argument("aggregate must contain its seed segment");
  }
  for (const Site& x : s.vertices()) {
    if (SegmentSpec{n}.contains(x) && !SegmentSpec{m}.contains(x)) {
      throw std::invalid_argument("aggregate meets the absorbing segment");
    }
  }
}

}  // namespace

CoupledProcess::CoupledProcess(std::int64_t m1, std::int64_t m2, std::int64_t n, CouplingOptions opts)
    : m1_(m1), m2_(m2), n_(n), opts_(std::move(opts)) {
  check_params(m1, m2, n);
  left_ = AggregateState(SegmentSpec{m1}.sites());
  right_ = AggregateState(SegmentSpec{m2}.sites());
  init_indices();
}

CoupledProcess::CoupledProcess(std::int64_t m1, std::int64_t m2, std::int64_t n, AggregateState left,
                               AggregateState right, CouplingOptions opts)
    : m1_(m1), m2_(m2), n_(n), opts_(std::move(opts)), left_(std::move(left)), right_(std::move(right)) {
  check_params(m1, m2, n);
  check_state(left_, m1, n);
  check_state(right_, m2, n);
  init_indices();
}

void CoupledProcess::init_indices() {
  both_ = *intermediate_base_index(m2_, n_);
  left_index_ = *intermediate_base_index(m1_, n_);
  right_index_ = both_;
  for (const Site& x : sorted_sites(left_.vertices())) {
    if (!SegmentSpec{n_}.contains(x)) {
      left_index_.insert(x, SiteTag::Target);
      both_.insert(x, SiteTag::Target);
    }
    if (!right_.contains(x)) ledger_.vertex_disc.insert(x);
  }
  for (const Site& x : sorted_sites(right_.vertices())) {
    if (!SegmentSpec{n_}.contains(x)) {
      right_index_.insert(x, SiteTag::Target);
      both_.insert(x, SiteTag::Target);
    }
    if (!left_.contains(x)) ledger_.vertex_disc.insert(x);
  }
  for (const auto& r : left_.edges()) {
    if (!right_.contains(r.edge)) ledger_.edge_disc.insert(r.edge);
  }
  for (const auto& r : right_.edges()) {
    if (!left_.contains(r.edge)) ledger_.edge_disc.insert(r.edge);
  }
}

void CoupledProcess::add_left(const DirectedEdge& e, double t) {
  left_.add_edge(e, step_, t);
  left_index_.insert(e.from, SiteTag::Target);
  both_.insert(e.from, SiteTag::Target);
}

void CoupledProcess::add_right(const DirectedEdge& e, double t) {
  right_.add_edge(e, step_, t);
  right_index_.insert(e.from, SiteTag::Target);
  both_.insert(e.from, SiteTag::Target);
}

CoupledStepResult CoupledProcess::step(RngStream& rng) {
  const std::int64_t radius = opts_.launch_radius > 0 ? opts_.launch_radius : 4 * n_;
  auto ring = LaunchRing::get({radius, opts_.launch_distribution});
  const WalkOptions wopts =
      walk_options_for(ring, opts_.policy, opts_.budget, opts_.reentry, opts_.escape_factor);

  CoupledStepResult res;
  const WalkOutcome first = run_to_absorption(ring->launch(rng), both_, wopts, rng);
  if (!first.hit()) {
    ++ledger_.voided;
    res.voided = true;
    return res;
  }
  const DirectedEdge e1 = first.edge;
  const Site h = e1.to;
  const bool in1 = left_.contains(h);
  const bool in2 = right_.contains(h);
  const bool in_dn = SegmentSpec{n_}.contains(h);
  res.e1 = e1;
  res.head_in_symmetric_difference = in1 != in2;

  std::optional<DirectedEdge> e2;
  bool second_hit_aggregate = false;
  if (in1 != in2 && !in_dn) {
    // Continue the same walker from h until it meets the other side u D_N.
    const ObstacleIndex& other = in1 ? right_index_ : left_index_;
    const WalkOutcome second = run_to_absorption(h, other, wopts, rng);
    if (!second.hit()) {
      ++ledger_.voided;
      res.voided = true;
      return res;
    }
    e2 = second.edge;
    second_hit_aggregate = second.kind == WalkOutcome::Kind::HitTarget;
  }

  ++step_;
  time_ += rng.exponential(static_cast<double>(n_));
  std::vector<DirectedEdge> to_left, to_right;
  if (in1 && in2) {
    res.tag = CaseTag::I;
    to_left.push_back(e1);
    to_right.push_back(e1);
  } else if (in1 && !in_dn) {
    res.tag = second_hit_aggregate ? CaseTag::II : CaseTag::IV;
    to_left.push_back(e1);
    if (second_hit_aggregate) to_right.push_back(*e2);
  } else if (in2 && !in_dn) {
    res.tag = second_hit_aggregate ? CaseTag::III : CaseTag::V;
    to_right.push_back(e1);
    if (second_hit_aggregate) to_left.push_back(*e2);
  } else if (in1) {
    res.tag = CaseTag::VI;
    to_left.push_back(e1);
  } else if (in2) {
    res.tag = CaseTag::VII;
    to_right.push_back(e1);
  } else {
    res.tag = CaseTag::VIII;
  }
  res.e2 = e2;
  ++ledger_.case_counts[static_cast<std::size_t>(res.tag) - 1];

  for (const auto& e : to_left) add_left(e, time_);
  for (const auto& e : to_right) add_right(e, time_);

  std::size_t new_edges = 0;
  auto note = [&](const DirectedEdge& e, const AggregateState& other) {
    if (!other.contains(e.from)) ledger_.vertex_disc.insert(e.from);
    if (!other.contains(e) && ledger_.edge_disc.insert(e).second) ++new_edges;
  };
  for (const auto& e : to_left) note(e, right_);
  for (const auto& e : to_right) note(e, left_);

  if ((new_edges > 0) != res.head_in_symmetric_difference) {
    throw std::logic_error("discrepancy step does not match the symmetric-difference criterion");
  }
  if (new_edges > 0) {
    DeltaRecord d;
    d.step = step_;
    d.e1 = e1;
    d.e2 = e2;
    d.tag = res.tag;
    d.cls = classify_delta(e1, e2, static_cast<double>(m1_), opts_.alpha);
    d.dist = e2 ? edge_distance(e1, *e2) : 0.0;
    d.new_edge_discrepancies = new_edges;
    ledger_.deltas.push_back(d);
    res.delta = d;
  }
  return res;
}

CoupledRun run_coupled(std::int64_t m1, std::int64_t m2, std::int64_t n, const CouplingOptions& opts,
                       std::uint64_t seed, std::uint64_t stream) {
  CoupledProcess proc(m1, m2, n, opts);
  RngStream rng(seed, stream);
  const std::uint64_t horizon = opts.horizon ? *opts.horizon : static_cast<std::uint64_t>(2 * n);
  const Region envelope =
      (opts.envelope ? *opts.envelope : EnvelopeSpec::f(static_cast<double>(m2))).materialize();
  CoupledRun run;
  run.m1 = m1;
  run.m2 = m2;
  run.n = n;
  run.alpha = opts.alpha;
  run.seed = seed;
  run.stream = stream;
  // Voided steps do not count towards the horizon; cap them so a pathological
  // budget cannot loop forever.
  std::uint64_t attempts = 0;
  const std::uint64_t max_attempts = horizon * 2 + 16;
  while (proc.step_count() < horizon && attempts++ < max_attempts) {
    const CoupledStepResult r = proc.step(rng);
    if (r.voided || run.first_exit_step) continue;
    auto outside = [&](const std::optional<DirectedEdge>& e) {
      return e && !(envelope.contains(e->from) && envelope.contains(e->to));
    };
    const bool added_e1 = r.tag != CaseTag::VIII;
    const bool added_e2 = r.tag == CaseTag::II || r.tag == CaseTag::III;
    if ((added_e1 && outside(r.e1)) || (added_e2 && outside(r.e2))) run.first_exit_step = proc.step_count();
  }
  run.steps = proc.step_count();
  run.left = proc.left();
  run.right = proc.right();
  run.ledger = proc.ledger();
  return run;
}

// ---------------------------------------------------------------------------

namespace {

constexpr std::uint64_t kNever = std::numeric_limits<std::uint64_t>::max();

struct Births {
  absl::flat_hash_map<Site, std::uint64_t> vertices;
  absl::flat_hash_map<DirectedEdge, std::uint64_t> edges;
};

Births births_in(const AggregateState& s, const WindowSpec& k) {
  Births b;
  for (const Site& x : s.seed()) {
    if (k.contains(x)) b.vertices[x] = 0;
  }
  for (const auto& r : s.edges()) {
    if (k.contains(r.edge.from)) b.vertices[r.edge.from] = r.birth_index;
    if (k.contains(r.edge)) b.edges[r.edge] = r.birth_index;
  }
  return b;
}

}  // namespace

WindowAgreement window_agreement(const AggregateState& left, const AggregateState& right,
                                 const WindowSpec& k, std::uint64_t horizon) {
  const Births a = births_in(left, k);
  const Births b = births_in(right, k);
  std::vector<std::int64_t> diff(horizon + 2, 0);
  auto mark = [&](std::uint64_t ba, std::uint64_t bb) {
    if (ba == bb) return;
    const std::uint64_t lo = std::min(ba, bb);
    const std::uint64_t hi = std::min(std::max(ba, bb), horizon + 1);
    if (lo > horizon) return;
    ++diff[lo];
    --diff[hi];
  };
  auto lookup = [](const auto& map, const auto& key) {
    auto it = map.find(key);
    return it == map.end() ? kNever : it->second;
  };
  for (const auto& [x, t] : a.vertices) mark(t, lookup(b.vertices, x));
  for (const auto& [x, t] : b.vertices) {
    if (!a.vertices.contains(x)) mark(kNever, t);
  }
  for (const auto& [e, t] : a.edges) mark(t, lookup(b.edges, e));
  for (const auto& [e, t] : b.edges) {
    if (!a.edges.contains(e)) mark(kNever, t);
  }
  WindowAgreement out;
  out.agree.resize(horizon + 1);
  std::int64_t open = 0;
  for (std::uint64_t i = 0; i <= horizon; ++i) {
    open += diff[i];
    out.agree[i] = open == 0;
    if (open != 0 && !out.first_disagreement) out.first_disagreement = i;
  }
  return out;
}

std::string check_ledger_invariants(const CoupledRun& run) {
  if (!run.left.check_vertex_identity()) return "left vertex identity";
  if (!run.right.check_vertex_identity()) return "right vertex identity";
  const DiscrepancyLedger& l = run.ledger;
  if (l.steps() != run.steps) return "case counts do not sum to the step count";
  for (std::size_t i = 1; i < l.deltas.size(); ++i) {
    if (l.deltas[i].step <= l.deltas[i - 1].step) return "delta steps not strictly increasing";
  }

  // Birth index per vertex (0 for seeds) on each side.
  auto births = [](const AggregateState& s) {
    absl::flat_hash_map<Site, std::uint64_t> b;
    for (const Site& x : s.seed()) b[x] = 0;
    for (const auto& r : s.edges()) b[r.edge.from] = r.birth_index;
    return b;
  };
  const auto b1 = births(run.left);
  const auto b2 = births(run.right);
  auto born_before = [](const auto& b, Site x, std::uint64_t step) {
    auto it = b.find(x);
    return it != b.end() && it->second < step;
  };
  for (const auto& d : l.deltas) {
    const bool in1 = born_before(b1, d.e1.to, d.step);
    const bool in2 = born_before(b2, d.e1.to, d.step);
    if (in1 == in2) return "delta at step " + std::to_string(d.step) + " outside the symmetric difference";
    if (d.new_edge_discrepancies == 0) return "delta without a new edge discrepancy";
    if ((d.tag == CaseTag::II || d.tag == CaseTag::III) && !d.e2) return "two-edge case without e2";
  }
  if (l.deltas.size() > run.steps) return "more deltas than steps";

  // Final symmetric differences are contained in the cumulative ledgers.
  for (const Site& x : run.left.vertices()) {
    if (!run.right.contains(x) && !l.vertex_disc.contains(x)) return "vertex discrepancy missing";
  }
  for (const Site& x : run.right.vertices()) {
    if (!run.left.contains(x) && !l.vertex_disc.contains(x)) return "vertex discrepancy missing";
  }
  for (const auto& r : run.left.edges()) {
    if (!run.right.contains(r.edge) && !l.edge_disc.contains(r.edge)) return "edge discrepancy missing";
  }
  for (const auto& r : run.right.edges()) {
    if (!run.left.contains(r.edge) && !l.edge_disc.contains(r.edge)) return "edge discrepancy missing";
  }

  // Every vertex discrepancy other than the extra seed sites has a witness
  // edge discrepancy leaving it.
  SiteSet tails;
  for (const auto& e : l.edge_disc) tails.insert(e.from);
  for (const Site& x : l.vertex_disc) {
    if (SegmentSpec{run.m2}.contains(x) && !SegmentSpec{run.m1}.contains(x)) continue;
    if (!tails.contains(x)) return "vertex discrepancy without a witnessing edge";
  }
  for (const auto& e : l.edge_disc) {
    if (!l.vertex_disc.contains(e.from) && !(run.left.contains(e.from) && run.right.contains(e.from))) {
      return "edge discrepancy tail outside both aggregates";
    }
  }
  return {};
}

}  // namespace dlalab
