#include "dlalab/acceptance.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "dlalab/coupling.hpp"
#include "dlalab/experiment.hpp"
#include "dlalab/harmonic.hpp"
#include "dlalab/parallel.hpp"
#include "dlalab/process.hpp"
#include "dlalab/stats.hpp"

namespace dlalab {

nlohmann::json CriterionResult::to_json() const {
  return {{"id", id},           {"suite", suite},   {"title", title},
          {"passed", passed},   {"seconds", seconds}, {"time_limit", time_limit},
          {"summary", summary}, {"details", details}};
}

std::string CriterionResult::line() const {
  char buf[64];
  std::snprintf(buf, sizeof buf, " (%.1f s / %.0f s)", seconds, time_limit);
  return std::string(passed ? "PASS" : "FAIL") + " [" + std::to_string(id) + "] " + suite + ": " + title +
         " -- " + summary + buf;
}

const std::vector<std::string>& acceptance_suites() {
  static const std::vector<std::string> names{"oracle",  "mc",       "acceleration", "scaling",
                                              "process", "coupling", "envelope",     "discrepancy",
                                              "determinism", "structural"};
  return names;
}

nlohmann::json quick_mode_table() {
  return {{"mc", "walkers 2e5 -> 2e4"},
          {"acceleration", "walks 2e5 -> 2e4 per policy"},
          {"scaling", "n in {8,16,32,64} -> {4,8,16,32}"},
          {"process", "replicas 2e5 -> 2e4"},
          {"coupling", "replicas 2e5 -> 2e4; joint cells need expected count >= 25 either way"},
          {"envelope", "m=16, N=2048, 200 replicas, >= 0.95 -> m=8, N=256, 100 replicas, >= 0.90"},
          {"discrepancy", "N=512, 200 replicas -> N=128, 100 replicas"},
          {"determinism", "unchanged"},
          {"structural", "50 runs -> 20 runs"}};
}

namespace {

using Clock = std::chrono::steady_clock;

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

SiteSet segment(std::int64_t n) { return to_set(SegmentSpec{n}.sites()); }

SiteSet annulus_segment(std::int64_t outer, std::int64_t inner) {
  SiteSet s;
  for (const Site& x : SegmentSpec{outer}.sites()) {
    if (!SegmentSpec{inner}.contains(x)) s.insert(x);
  }
  return s;
}

SiteSet l_shape() { return to_set(std::vector<Site>{{0, 0}, {1, 0}, {2, 0}, {0, 1}, {0, 2}}); }

SiteSet twenty_site_aggregate() {
  std::vector<Site> v = SegmentSpec{4}.sites();
  for (Site s : std::initializer_list<Site>{{0, 1}, {0, 2}, {0, 3}, {1, 3}, {2, 3}, {-3, -1}, {-3, -2},
                                            {-2, -2}, {3, 1}, {4, 1}, {4, 2}}) {
    v.push_back(s);
  }
  return to_set(v);
}

using Symmetry = std::function<Site(Site)>;

std::vector<Symmetry> lattice_symmetries() {
  return {[](Site s) { return Site{-s.x, s.y}; },  [](Site s) { return Site{s.x, -s.y}; },
          [](Site s) { return Site{-s.x, -s.y}; }, [](Site s) { return Site{s.y, s.x}; },
          [](Site s) { return Site{-s.y, -s.x}; }, [](Site s) { return Site{-s.y, s.x}; },
          [](Site s) { return Site{s.y, -s.x}; }};
}

bool invariant_under(const SiteSet& a, const Symmetry& g) {
  for (const Site& s : a) {
    if (!a.contains(g(s))) return false;
  }
  return true;
}

// Per-edge |mc - exact| within 4 sigma (sigma from the exact p) plus a
// chi-square over all edges and the lazy mass.
struct Agreement {
  double within_fraction = 0;
  std::size_t edges = 0;
  ChiSquareResult chi;
  double max_z = 0;
};

Agreement compare_counts(const HarmonicTable& exact, const std::map<DirectedEdge, std::uint64_t>& counts,
                         std::uint64_t lazy, std::uint64_t total, bool with_lazy) {
  Agreement a;
  std::vector<std::uint64_t> obs;
  std::vector<double> prob;
  std::size_t within = 0;
  const double n = static_cast<double>(total);
  auto check = [&](double p, std::uint64_t c) {
    const double sigma = std::sqrt(std::max(p * (1 - p), 1e-300) / n);
    const double z = std::abs(static_cast<double>(c) / n - p) / sigma;
    a.max_z = std::max(a.max_z, z);
    within += z <= 4.0;
    ++a.edges;
    obs.push_back(c);
    prob.push_back(p);
  };
  std::uint64_t matched = 0;
  for (const auto& e : exact.entries) {
    auto it = counts.find(e.edge);
    const std::uint64_t c = it == counts.end() ? 0 : it->second;
    matched += c;
    check(e.value, c);
  }
  if (with_lazy) {
    check(exact.lazy_mass, lazy);
    matched += lazy;
  }
  // Hits on edges missing from the exact table are impossible outcomes.
  if (matched != total) {
    obs.push_back(total - matched);
    prob.push_back(0.0);
  }
  a.within_fraction = a.edges ? static_cast<double>(within) / static_cast<double>(a.edges) : 0.0;
  a.chi = chi_square_gof(obs, prob);
  return a;
}

Agreement compare_table(const HarmonicTable& exact, const HarmonicTable& mc) {
  const std::uint64_t completed = mc.walkers - mc.dropped;
  std::map<DirectedEdge, std::uint64_t> counts;
  for (const auto& e : mc.entries) {
    counts[e.edge] = static_cast<std::uint64_t>(std::llround(e.value * static_cast<double>(completed)));
  }
  const auto lazy = static_cast<std::uint64_t>(std::llround(mc.lazy_mass * static_cast<double>(completed)));
  return compare_counts(exact, counts, lazy, completed, !mc.absorber.empty());
}

// ---------------------------------------------------------------------------

CriterionResult criterion_oracle(const AcceptanceOptions&) {
  CriterionResult r;
  r.title = "exact-solver soundness";
  r.time_limit = 10;
  const std::vector<std::pair<std::string, SiteSet>> sets{
      {"single", to_set(std::vector<Site>{{0, 0}})}, {"D1", segment(1)}, {"D2", segment(2)}, {"L5", l_shape()}};
  bool ok = true;
  double worst_mass = 0, worst_sym = 0, worst_single = 0;
  for (const auto& [name, a] : sets) {
    const HarmonicTable t = exact_edge_harmonic(a, {});
    const double mass_err = std::abs(t.total_mass() - 1.0);
    double sym_err = 0;
    std::size_t symmetries = 0;
    for (const auto& g : lattice_symmetries()) {
      if (!invariant_under(a, g)) continue;
      ++symmetries;
      for (const auto& e : t.entries) {
        const HarmonicEntry* img = t.find({g(e.edge.from), g(e.edge.to)});
        sym_err = std::max(sym_err, img ? std::abs(img->value - e.value) : 1.0);
      }
    }
    if (name == "single") {
      for (const auto& e : t.entries) worst_single = std::max(worst_single, std::abs(e.value - 0.25));
      ok = ok && t.entries.size() == 4;
    }
    worst_mass = std::max(worst_mass, mass_err);
    worst_sym = std::max(worst_sym, sym_err);
    r.details[name] = {{"edges", t.entries.size()}, {"mass_error", mass_err}, {"symmetries", symmetries},
                       {"symmetry_error", sym_err}, {"max_residual", t.max_residual}};
  }
  ok = ok && worst_mass <= 1e-9 && worst_sym <= 1e-9 && worst_single <= 1e-9;
  r.passed = ok;
  r.summary = "max |mass-1| " + fmt("%.2e", worst_mass) + ", symmetry " + fmt("%.2e", worst_sym) +
              ", single-site " + fmt("%.2e", worst_single);
  return r;
}

CriterionResult criterion_mc(const AcceptanceOptions& o) {
  CriterionResult r;
  r.title = "MC/exact oracle agreement";
  r.time_limit = 300;
  const std::uint64_t walkers = o.quick ? 20'000 : 200'000;
  struct Case {
    std::string name;
    SiteSet a, absorber;
    std::int64_t launch;
  };
  const std::vector<Case> cases{{"single", to_set(std::vector<Site>{{0, 0}}), {}, 16},
                                {"D1", segment(1), {}, 16},
                                {"D2", segment(2), {}, 16},
                                {"L5", l_shape(), {}, 16},
                                {"D2|D8", segment(2), annulus_segment(8, 2), 32}};
  bool ok = true;
  double worst_frac = 1, worst_p = 1;
  std::uint64_t k = 0;
  for (const auto& c : cases) {
    const HarmonicTable exact = exact_edge_harmonic(c.a, c.absorber);
    McOptions mo;
    mo.walkers = walkers;
    mo.seed = derive_seed(o.seed, 100 + k++);
    mo.launch = {c.launch, LaunchDistribution::ExactHarmonicFromInfinity};
    const HarmonicTable mc = mc_edge_harmonic(c.a, c.absorber, mo);
    const Agreement ag = compare_table(exact, mc);
    const bool pass = ag.within_fraction >= 0.95 && ag.chi.p_value > 0.001 && mc.dropped == 0;
    ok = ok && pass;
    worst_frac = std::min(worst_frac, ag.within_fraction);
    worst_p = std::min(worst_p, ag.chi.p_value);
    r.details[c.name] = {{"edges", ag.edges},         {"within_4sigma", ag.within_fraction},
                         {"max_z", ag.max_z},         {"chi2", ag.chi.statistic},
                         {"dof", ag.chi.dof},         {"p", ag.chi.p_value},
                         {"dropped", mc.dropped},     {"lazy_mc", mc.lazy_mass},
                         {"lazy_exact", exact.lazy_mass}, {"passed", pass}};
  }
  r.passed = ok;
  r.summary = "min within-4sigma " + fmt("%.3f", worst_frac) + ", min chi2 p " + fmt("%.3g", worst_p) +
              " (" + std::to_string(walkers) + " walkers each)";
  return r;
}

CriterionResult criterion_acceleration(const AcceptanceOptions& o) {
  CriterionResult r;
  r.title = "acceleration neutrality";
  r.time_limit = 600;
  const SiteSet a = twenty_site_aggregate();
  McOptions mo;
  mo.walkers = o.quick ? 20'000 : 200'000;
  mo.seed = derive_seed(o.seed, 300);
  mo.launch = {16, LaunchDistribution::UniformOnRing};
  mo.policy = AccelerationPolicy::none();
  const HarmonicTable plain = mc_edge_harmonic(a, {}, mo);
  mo.policy = AccelerationPolicy::square_jump();
  const HarmonicTable fast = mc_edge_harmonic(a, {}, mo);

  std::map<DirectedEdge, std::pair<double, double>> both;
  for (const auto& e : plain.entries) both[e.edge].first = e.value;
  for (const auto& e : fast.entries) both[e.edge].second = e.value;
  const double n1 = static_cast<double>(plain.walkers - plain.dropped);
  const double n2 = static_cast<double>(fast.walkers - fast.dropped);
  std::size_t bad = 0;
  double max_z = 0;
  for (const auto& [edge, pq] : both) {
    const double pooled = (pq.first * n1 + pq.second * n2) / (n1 + n2);
    const double sigma = std::sqrt(std::max(pooled * (1 - pooled), 1e-300) * (1 / n1 + 1 / n2));
    const double z = std::abs(pq.first - pq.second) / sigma;
    max_z = std::max(max_z, z);
    bad += z > 4.0;
  }
  r.passed = bad == 0 && plain.dropped == 0 && fast.dropped == 0 && a.size() == 20;
  r.details = {{"edges", both.size()}, {"max_z", max_z}, {"outside_4sigma", bad},
               {"walks_per_policy", mo.walkers}, {"dropped", {plain.dropped, fast.dropped}}};
  r.summary = std::to_string(both.size()) + " edges, max |z| " + fmt("%.2f", max_z);
  return r;
}

CriterionResult criterion_scaling(const AcceptanceOptions& o) {
  CriterionResult r;
  r.title = "scaling constant convergence";
  r.time_limit = 120;
  const std::vector<std::int64_t> ns = o.quick ? std::vector<std::int64_t>{4, 8, 16, 32}
                                               : std::vector<std::int64_t>{8, 16, 32, 64};
  const ScalingEstimate est = estimate_scaling_constant(ns);
  bool decreasing = est.cauchy_gaps.size() == 3;
  for (std::size_t i = 1; i < est.cauchy_gaps.size(); ++i) {
    decreasing = decreasing && est.cauchy_gaps[i] < est.cauchy_gaps[i - 1];
  }
  std::vector<double> a;
  for (const auto& s : est.samples) a.push_back(s.a_n);
  const double c_low = extrapolate_sequence({ns[0], ns[1], ns[2]}, {a[0], a[1], a[2]}) / 2;
  const double c_high = extrapolate_sequence({ns[1], ns[2], ns[3]}, {a[1], a[2], a[3]}) / 2;
  const double rel = std::abs(c_low - c_high) / std::abs(c_high);
  r.passed = decreasing && rel <= 0.02 && std::abs(est.c - c_high) < 1e-15;
  r.details = est.to_json();
  r.details["c_first_three"] = c_low;
  r.details["c_last_three"] = c_high;
  r.details["relative_change"] = rel;
  r.summary = "c = " + fmt("%.6f", est.c) + ", gaps decreasing " + (decreasing ? "yes" : "no") +
              ", relative change " + fmt("%.2e", rel);
  return r;
}

CriterionResult criterion_process(const AcceptanceOptions& o) {
  CriterionResult r;
  r.title = "intermediate first-step law";
  r.time_limit = 300;
  const std::uint64_t reps = o.quick ? 20'000 : 200'000;
  const ProcessConfig cfg = ProcessConfig::intermediate(2, 8);
  std::vector<EventRecord> events(reps);
  const std::uint64_t seed = derive_seed(o.seed, 500);
  parallel_for(reps, [&](std::uint64_t i) {
    GrowthProcess p(cfg);
    RngStream rng(seed, i);
    events[i] = p.step(rng);
  });
  std::map<DirectedEdge, std::uint64_t> counts;
  std::uint64_t lazy = 0, dropped = 0;
  for (const auto& e : events) {
    if (e.kind == EventRecord::Kind::Added) ++counts[e.edge];
    if (e.kind == EventRecord::Kind::Lazy) ++lazy;
    if (e.kind == EventRecord::Kind::Dropped) ++dropped;
  }
  const HarmonicTable exact = exact_edge_harmonic(segment(2), annulus_segment(8, 2));
  const Agreement ag = compare_counts(exact, counts, lazy, reps - dropped, true);
  r.passed = ag.chi.p_value > 0.001 && dropped == 0;
  r.details = {{"chi2", ag.chi.statistic}, {"dof", ag.chi.dof}, {"p", ag.chi.p_value},
               {"within_4sigma", ag.within_fraction}, {"lazy_empirical", static_cast<double>(lazy) / static_cast<double>(reps)},
               {"lazy_exact", exact.lazy_mass}, {"dropped", dropped}, {"replicas", reps}};
  r.summary = "chi2 p " + fmt("%.3g", ag.chi.p_value) + ", lazy " +
              fmt("%.4f", static_cast<double>(lazy) / static_cast<double>(reps)) + " vs " +
              fmt("%.4f", exact.lazy_mass);
  return r;
}

struct JointCheck {
  std::size_t cells = 0, bad = 0;
  double max_z = 0;
  std::uint64_t events = 0;
};

// Runs one coupled step from (left, right) `reps` times and compares the
// (e1, e2) frequencies of two-edge steps with the product formula.
JointCheck joint_check(const AggregateState& left, const AggregateState& right, bool second_on_right,
                       std::uint64_t reps, std::uint64_t seed) {
  const std::int64_t m1 = 2, m2 = 3, n = 8;
  std::vector<std::optional<std::pair<DirectedEdge, DirectedEdge>>> out(reps);
  parallel_for(reps, [&](std::uint64_t i) {
    CoupledProcess p(m1, m2, n, left, right);
    RngStream rng(seed, i);
    const CoupledStepResult s = p.step(rng);
    if (s.tag == CaseTag::II || s.tag == CaseTag::III) out[i] = std::make_pair(*s.e1, *s.e2);
  });
  std::map<std::pair<DirectedEdge, DirectedEdge>, std::uint64_t> counts;
  JointCheck jc;
  for (const auto& o : out) {
    if (o) {
      ++counts[*o];
      ++jc.events;
    }
  }
  SiteSet uni = left.vertices();
  for (const Site& s : right.vertices()) uni.insert(s);
  SiteSet absorber;
  for (const Site& s : SegmentSpec{n}.sites()) {
    if (!uni.contains(s)) absorber.insert(s);
  }
  const HarmonicTable first = exact_edge_harmonic(uni, absorber);
  const AggregateState& other = second_on_right ? right : left;
  const AggregateState& own = second_on_right ? left : right;
  SiteSet other_abs;
  for (const Site& s : SegmentSpec{n}.sites()) {
    if (!other.contains(s)) other_abs.insert(s);
  }
  std::map<Site, HarmonicTable> second;
  const double total = static_cast<double>(reps);
  for (const auto& e1 : first.entries) {
    const Site h = e1.edge.to;
    if (!own.contains(h) || other.contains(h) || SegmentSpec{n}.contains(h)) continue;
    if (!second.contains(h)) second.emplace(h, exact_edge_harmonic_from(h, other.vertices(), other_abs));
    for (const auto& e2 : second.at(h).entries) {
      const double p = e1.value * e2.value;
      if (p * total < 25) continue;
      const auto it = counts.find({e1.edge, e2.edge});
      const double c = it == counts.end() ? 0.0 : static_cast<double>(it->second);
      const double z = std::abs(c - p * total) / std::sqrt(total * p * (1 - p));
      jc.max_z = std::max(jc.max_z, z);
      ++jc.cells;
      jc.bad += z > 4.0;
    }
  }
  return jc;
}

CriterionResult criterion_coupling(const AcceptanceOptions& o) {
  CriterionResult r;
  r.title = "coupling marginals and joint law";
  r.time_limit = 600;
  const std::uint64_t reps = o.quick ? 20'000 : 200'000;
  const std::uint64_t seed = derive_seed(o.seed, 600);
  struct Firsts {
    std::optional<DirectedEdge> left, right;
    bool voided = false;
  };
  std::vector<Firsts> firsts(reps);
  parallel_for(reps, [&](std::uint64_t i) {
    CoupledProcess p(2, 3, 8);
    RngStream rng(seed, i);
    const CoupledStepResult s = p.step(rng);
    firsts[i].voided = s.voided;
    if (!p.left().edges().empty()) firsts[i].left = p.left().edges().front().edge;
    if (!p.right().edges().empty()) firsts[i].right = p.right().edges().front().edge;
  });
  std::map<DirectedEdge, std::uint64_t> lc, rc;
  std::uint64_t llazy = 0, rlazy = 0, voided = 0;
  for (const auto& f : firsts) {
    if (f.voided) {
      ++voided;
      continue;
    }
    f.left ? ++lc[*f.left] : ++llazy;
    f.right ? ++rc[*f.right] : ++rlazy;
  }
  const HarmonicTable lex = exact_edge_harmonic(segment(2), annulus_segment(8, 2));
  const HarmonicTable rex = exact_edge_harmonic(segment(3), annulus_segment(8, 3));
  const Agreement la = compare_counts(lex, lc, llazy, reps - voided, true);
  const Agreement ra = compare_counts(rex, rc, rlazy, reps - voided, true);

  // Constructed states in which the two-edge cases occur.
  AggregateState v1(SegmentSpec{2}.sites()), v2(SegmentSpec{3}.sites());
  AggregateState v1_tip = v1, v2_tip = v2;
  v1_tip.add_edge({{0, 1}, {0, 0}}, 0, 0);
  v2_tip.add_edge({{0, 1}, {0, 0}}, 0, 0);
  const JointCheck case2 = joint_check(v1_tip, v2, true, reps, derive_seed(o.seed, 601));
  const JointCheck case3 = joint_check(v1, v2_tip, false, reps, derive_seed(o.seed, 602));

  r.passed = la.chi.p_value > 0.001 && ra.chi.p_value > 0.001 && case2.bad == 0 && case3.bad == 0 &&
             case2.cells > 0 && case3.cells > 0 && voided == 0;
  r.details = {{"left_p", la.chi.p_value},   {"right_p", ra.chi.p_value},
               {"case_II", {{"cells", case2.cells}, {"outside_4sigma", case2.bad}, {"max_z", case2.max_z}, {"events", case2.events}}},
               {"case_III", {{"cells", case3.cells}, {"outside_4sigma", case3.bad}, {"max_z", case3.max_z}, {"events", case3.events}}},
               {"voided", voided},           {"replicas", reps}};
  r.summary = "marginal p " + fmt("%.3g", la.chi.p_value) + " / " + fmt("%.3g", ra.chi.p_value) +
              "; joint cells " + std::to_string(case2.cells + case3.cells) + ", max |z| " +
              fmt("%.2f", std::max(case2.max_z, case3.max_z));
  return r;
}

CriterionResult criterion_envelope(const AcceptanceOptions& o) {
  CriterionResult r;
  r.title = "envelope containment";
  r.time_limit = 1800;
  const std::int64_t m = o.quick ? 8 : 16, n = o.quick ? 256 : 2048;
  const std::uint64_t reps = o.quick ? 100 : 200;
  const double threshold = o.quick ? 0.90 : 0.95;
  const VerificationReport rep = envelope_fraction(m, n, reps, derive_seed(o.seed, 700), threshold);
  r.passed = rep.passed;
  r.details = rep.to_json();
  r.summary = "inside F(" + std::to_string(m) + ") " + fmt("%.3f", rep.statistics["fraction"].get<double>()) +
              " [Wilson " + fmt("%.3f", rep.statistics["wilson_lo"].get<double>()) + ", " +
              fmt("%.3f", rep.statistics["wilson_hi"].get<double>()) + "], need >= " + fmt("%.2f", threshold);
  return r;
}

CriterionResult criterion_discrepancy(const AcceptanceOptions& o) {
  CriterionResult r;
  r.title = "discrepancy scarcity and window agreement";
  r.time_limit = 2700;
  const std::int64_t n = o.quick ? 128 : 512;
  const std::uint64_t reps = o.quick ? 100 : 200;
  ScarcityOptions so;
  so.window = WindowSpec::box(-4, 4, 0, 4);
  const VerificationReport r8 = discrepancy_scarcity(8, n, 0.1, reps, derive_seed(o.seed, 800), so);
  const VerificationReport r16 = discrepancy_scarcity(16, n, 0.1, reps, derive_seed(o.seed, 816), so);
  const double f8 = r8.statistics["window_disagreement_fraction"].get<double>();
  const double f16 = r16.statistics["window_disagreement_fraction"].get<double>();
  const auto unpreceded = r8.statistics["disagreements_without_prior_delta"].get<std::uint64_t>() +
                          r16.statistics["disagreements_without_prior_delta"].get<std::uint64_t>();
  r.passed = f16 <= f8 && unpreceded == 0 && r8.passed && r16.passed;
  r.details = {{"m8", r8.to_json()}, {"m16", r16.to_json()}};
  r.summary = "P(window disagreement) m=8 " + fmt("%.3f", f8) + ", m=16 " + fmt("%.3f", f16) +
              "; disagreements without prior delta " + std::to_string(unpreceded);
  return r;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class ScopedEnv {
 public:
  ScopedEnv(const char* name, const std::string& value) : name_(name) {
    if (const char* old = std::getenv(name)) old_ = old;
    setenv(name, value.c_str(), 1);
  }
  ~ScopedEnv() {
    if (old_) {
      setenv(name_, old_->c_str(), 1);
    } else {
      unsetenv(name_);
    }
  }

 private:
  const char* name_;
  std::optional<std::string> old_;
};

CriterionResult criterion_determinism(const AcceptanceOptions& o) {
  CriterionResult r;
  r.title = "byte-identical reruns";
  r.time_limit = 120;
  const auto dir = std::filesystem::temp_directory_path() /
                   ("dla_lab_determinism_" + std::to_string(::getpid()));
  std::filesystem::create_directories(dir);
  const std::vector<std::pair<std::string, std::string>> commands{
      {"simulate", "kind = \"intermediate\"\nm = 4\nN = 32\nreplicas = 3\nsnapshots = [0, 16, 64]\n"},
      {"measure", "set = \"D1\"\nmethod = \"both\"\nwalkers = 20000\n"},
      {"couple", "m1 = 2\nm2 = 3\nN = 16\nreplicas = 4\nwindow = [-2, 2, 0, 2]\n"}};
  bool ok = true;
  for (const auto& [name, text] : commands) {
    std::string bytes[2];
    for (int run = 0; run < 2; ++run) {
      // Different worker caps must not change the data.
      ScopedEnv threads("DLA_LAB_THREADS", run == 0 ? "1" : "3");
      ExperimentConfig cfg = ExperimentConfig::parse(text);
      cfg.set("seed", o.seed);
      cfg.set("out", (dir / (name + std::to_string(run) + ".jsonl")).string());
      cfg.set("overwrite", true);
      const CommandResult res = run_command(name, cfg);
      bytes[run] = slurp(res.outputs.at(0));
    }
    const bool same = !bytes[0].empty() && bytes[0] == bytes[1];
    ok = ok && same;
    r.details[name] = {{"identical", same}, {"bytes", bytes[0].size()}, {"hash", fnv1a_hex(bytes[0])}};
  }
  std::filesystem::remove_all(dir);
  r.passed = ok;
  r.summary = ok ? "simulate, measure, couple reproduce byte-for-byte" : "outputs differ between reruns";
  return r;
}

CriterionResult criterion_structural(const AcceptanceOptions& o) {
  CriterionResult r;
  r.title = "structural invariants";
  r.time_limit = 300;
  const std::uint64_t runs = o.quick ? 20 : 50;
  std::vector<std::string> failures(runs);
  std::vector<std::array<std::uint64_t, 3>> two_edge(runs);  // II/III steps, of which with one new disc.
  parallel_for(runs, [&](std::uint64_t i) {
    RngStream pick(o.seed, 10'000 + i);
    const auto m1 = static_cast<std::int64_t>(1 + pick.uniform_below(4));
    const auto m2 = m1 + 1 + static_cast<std::int64_t>(pick.uniform_below(2));
    const auto n = m2 + 2 + static_cast<std::int64_t>(pick.uniform_below(12));
    std::string& fail = failures[i];
    try {
      const CoupledRun run = run_coupled(m1, m2, n, {}, derive_seed(o.seed, 1000), i);
      fail = check_ledger_invariants(run);
      for (const auto& d : run.ledger.deltas) {
        if (d.tag == CaseTag::II || d.tag == CaseTag::III) {
          ++two_edge[i][0];
          two_edge[i][1] += d.new_edge_discrepancies == 1;
        }
        if (d.tag != CaseTag::II && d.tag != CaseTag::III && d.new_edge_discrepancies > 1) {
          fail = "single-edge case with two new discrepancies";
        }
      }
      if (fail.empty() && run.steps != static_cast<std::uint64_t>(2 * n)) fail = "horizon not reached";

      ProcessConfig pc = ProcessConfig::intermediate(m1, n);
      const Trajectory t = run_process(pc, derive_seed(o.seed, 1001), i);
      if (fail.empty() && !t.final_state.check_vertex_identity()) fail = "intermediate vertex identity";
      if (fail.empty() && t.added + t.lazy + t.dropped != t.events.size()) fail = "event accounting";
      if (fail.empty() && t.final_state.edges().size() != t.added) fail = "edge count";
      for (std::size_t k = 1; fail.empty() && k < t.events.size(); ++k) {
        if (!(t.events[k].time > t.events[k - 1].time)) fail = "timestamps not increasing";
      }
      const Trajectory e = run_process(ProcessConfig::edla(SegmentSpec{1}.sites(), 30), derive_seed(o.seed, 1002), i);
      if (fail.empty() && !e.final_state.check_vertex_identity()) fail = "EDLA vertex identity";
    } catch (const std::exception& ex) {
      fail = std::string("exception: ") + ex.what();
    }
  });

  // Canonical encodings of subgraphs of a 3x3 window are pairwise distinct:
  // every vertex subset combined with every subset of the eight directed
  // edges of one 2x2 block.
  const WindowSpec w = WindowSpec::box(-1, 1, 0, 2);
  std::vector<DirectedEdge> block;
  for (const auto& e : w.edges()) {
    if (e.from.x >= 0 && e.to.x >= 0 && e.from.y <= 1 && e.to.y <= 1) block.push_back(e);
  }
  std::set<std::string> seen;
  std::uint64_t encoded = 0;
  for (unsigned vm = 0; vm < (1u << w.sites().size()); ++vm) {
    for (unsigned em = 0; em < (1u << block.size()); ++em) {
      Subgraph g;
      for (std::size_t i = 0; i < w.sites().size(); ++i) {
        if (vm >> i & 1u) g.vertices.push_back(w.sites()[i]);
      }
      for (std::size_t i = 0; i < block.size(); ++i) {
        if (em >> i & 1u) g.edges.push_back(block[i]);
      }
      seen.insert(canonical_encoding(g));
      ++encoded;
    }
  }
  const bool injective = seen.size() == encoded && block.size() == 8;

  std::uint64_t failed = 0, two = 0, one_new = 0;
  std::string first;
  for (std::size_t i = 0; i < runs; ++i) {
    if (!failures[i].empty()) {
      ++failed;
      if (first.empty()) first = "run " + std::to_string(i) + ": " + failures[i];
    }
    two += two_edge[i][0];
    one_new += two_edge[i][1];
  }
  r.passed = failed == 0 && injective;
  r.details = {{"runs", runs},
               {"failed", failed},
               {"first_failure", first},
               {"encodings_checked", encoded},
               {"encoding_injective", injective},
               {"two_edge_deltas", two},
               {"two_edge_deltas_with_one_new_discrepancy", one_new}};
  r.summary = std::to_string(runs - failed) + "/" + std::to_string(runs) + " runs clean; " +
              std::to_string(encoded) + " encodings " + (injective ? "distinct" : "COLLIDE");
  return r;
}

}  // namespace

CriterionResult run_criterion(const std::string& suite, const AcceptanceOptions& opts) {
  using Fn = CriterionResult (*)(const AcceptanceOptions&);
  static const std::map<std::string, std::pair<int, Fn>> table{
      {"oracle", {1, criterion_oracle}},         {"mc", {2, criterion_mc}},
      {"acceleration", {3, criterion_acceleration}}, {"scaling", {4, criterion_scaling}},
      {"process", {5, criterion_process}},       {"coupling", {6, criterion_coupling}},
      {"envelope", {7, criterion_envelope}},     {"discrepancy", {8, criterion_discrepancy}},
      {"determinism", {9, criterion_determinism}}, {"structural", {10, criterion_structural}}};
  auto it = table.find(suite);
  if (it == table.end()) throw UsageError("unknown suite '" + suite + "'");
  const auto start = Clock::now();
  CriterionResult r;
  try {
    r = it->second.second(opts);
  } catch (const UsageError&) {
    throw;
  } catch (const std::exception& e) {
    r.passed = false;
    r.summary = std::string("exception: ") + e.what();
  }
  r.id = it->second.first;
  r.suite = suite;
  r.seconds = std::chrono::duration<double>(Clock::now() - start).count();
  if (r.time_limit > 0 && r.seconds > r.time_limit) {
    r.passed = false;
    r.summary += " [over time limit]";
  }
  r.details["quick"] = opts.quick;
  return r;
}

std::vector<CriterionResult> run_acceptance(const std::vector<std::string>& suites,
                                            const AcceptanceOptions& opts) {
  std::vector<std::string> wanted;
  for (const auto& s : suites) {
    if (s == "all") {
      wanted = acceptance_suites();
      break;
    }
    if (std::find(acceptance_suites().begin(), acceptance_suites().end(), s) == acceptance_suites().end()) {
      throw UsageError("unknown suite '" + s + "'");
    }
    wanted.push_back(s);
  }
  std::vector<CriterionResult> out;
  for (const auto& s : acceptance_suites()) {
    if (std::find(wanted.begin(), wanted.end(), s) != wanted.end()) out.push_back(run_criterion(s, opts));
  }
  return out;
}

}  // namespace dlalab
