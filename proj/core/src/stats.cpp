#include "dlalab/stats.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include <boost/math/distributions/chi_squared.hpp>

#include "dlalab/parallel.hpp"

namespace dlalab {

ChiSquareResult chi_square_gof(const std::vector<std::uint64_t>& observed,
                               const std::vector<double>& probabilities, double min_expected) {
  if (observed.size() != probabilities.size()) throw std::invalid_argument("size mismatch");
  std::uint64_t total = 0;
  for (auto c : observed) total += c;
  ChiSquareResult r;
  if (total == 0) return r;
  double pooled_obs = 0, pooled_exp = 0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    const double expected = probabilities[i] * static_cast<double>(total);
    if (expected < min_expected) {
      pooled_obs += static_cast<double>(observed[i]);
      pooled_exp += expected;
      continue;
    }
    const double d = static_cast<double>(observed[i]) - expected;
    r.statistic += d * d / expected;
    ++r.cells;
  }
  if (pooled_exp > 0) {
    const double d = pooled_obs - pooled_exp;
    r.statistic += d * d / pooled_exp;
    ++r.cells;
  } else if (pooled_obs > 0) {
    r.statistic = std::numeric_limits<double>::infinity();  // mass where none is expected
  }
  r.dof = static_cast<int>(r.cells) - 1;
  if (!std::isfinite(r.statistic)) {
    r.p_value = 0;
  } else if (r.dof >= 1) {
    r.p_value = boost::math::cdf(boost::math::complement(
        boost::math::chi_squared_distribution<double>(r.dof), r.statistic));
  }
  return r;
}

double kolmogorov_survival(double lambda) {
  if (lambda <= 0) return 1.0;
  if (lambda < 0.2) return 1.0;  // series converges slowly; the value is 1 to double precision
  double sum = 0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += (k % 2 == 1 ? term : -term);
    if (term < 1e-16) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

KsResult ks_exponential(std::vector<double> samples, double rate) {
  if (samples.empty()) throw std::invalid_argument("no samples");
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double d = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double f = 1.0 - std::exp(-rate * samples[i]);
    d = std::max({d, (static_cast<double>(i) + 1.0) / n - f, f - static_cast<double>(i) / n});
  }
  const double sn = std::sqrt(n);
  return {d, kolmogorov_survival((sn + 0.12 + 0.11 / sn) * d)};
}

Interval wilson_interval(std::uint64_t successes, std::uint64_t trials, double z) {
  if (trials == 0) return {0, 1};
  const double n = static_cast<double>(trials);
  const double p = static_cast<double>(successes) / n;
  const double z2 = z * z;
  const double centre = (p + z2 / (2 * n)) / (1 + z2 / n);
  const double half = z * std::sqrt(p * (1 - p) / n + z2 / (4 * n * n)) / (1 + z2 / n);
  return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

nlohmann::json VerificationReport::to_json() const {
  return {{"type", "report"},   {"name", name},         {"parameters", parameters},
          {"statistics", statistics}, {"thresholds", thresholds}, {"passed", passed},
          {"replicas", replicas}, {"seed", seed}};
}

// ---------------------------------------------------------------------------

namespace {

bool inside(const Region& r, const AggregateState& s) {
  for (const auto& e : s.edges()) {
    if (!r.contains(e.edge.from) || !r.contains(e.edge.to)) return false;
  }
  for (const Site& x : s.seed()) {
    if (!r.contains(x)) return false;
  }
  return true;
}

Region halved_height_f(std::int64_t m) {
  const Region full = EnvelopeSpec::f(static_cast<double>(m)).materialize();
  Box b = full.include().front();
  const std::int64_t h = std::max<std::int64_t>(b.ymax / 2, 0);
  b.ymin = -h;
  b.ymax = h;
  return Region({b});
}

}  // namespace

VerificationReport envelope_fraction(std::int64_t m, std::int64_t n, std::uint64_t replicas,
                                     std::uint64_t seed, double threshold, const ProcessConfig& base) {
  if (replicas == 0) throw std::invalid_argument("replicas must be >= 1");
  ProcessConfig cfg = base;
  cfg.kind = ProcessKind::Intermediate;
  cfg.m = m;
  cfg.n = n;
  cfg.horizon_steps.reset();
  cfg.horizon_time.reset();
  cfg.snapshot_steps = {};
  cfg.envelope = EnvelopeSpec::f(static_cast<double>(m));
  cfg.validate();
  const Region full = cfg.envelope->materialize();
  const Region half = halved_height_f(m);

  struct Result {
    bool in_full = false, in_half = false;
    std::uint64_t events = 0, dropped = 0, added = 0;
  };
  std::vector<Result> results(replicas);
  parallel_for(replicas, [&](std::uint64_t r) {
    Trajectory t = run_process(cfg, seed, r);
    results[r] = {inside(full, t.final_state), inside(half, t.final_state), t.events.size(),
                  t.dropped, t.added};
  });
  std::uint64_t in_full = 0, in_half = 0, events = 0, dropped = 0, added = 0;
  bool monotone = true;
  for (const auto& r : results) {
    in_full += r.in_full;
    in_half += r.in_half;
    events += r.events;
    dropped += r.dropped;
    added += r.added;
    if (r.in_half && !r.in_full) monotone = false;
  }
  VerificationReport rep;
  rep.name = "envelope_fraction";
  rep.replicas = replicas;
  rep.seed = seed;
  rep.parameters = {{"m", m}, {"N", n}, {"envelope", cfg.envelope->describe()}};
  const double frac = static_cast<double>(in_full) / static_cast<double>(replicas);
  const Interval ci = wilson_interval(in_full, replicas);
  const double drop_rate = events ? static_cast<double>(dropped) / static_cast<double>(events) : 0.0;
  rep.statistics = {{"fraction", frac},
                    {"wilson_lo", ci.lo},
                    {"wilson_hi", ci.hi},
                    {"inside", in_full},
                    {"fraction_half_height", static_cast<double>(in_half) / static_cast<double>(replicas)},
                    {"monotone", monotone},
                    {"mean_added", static_cast<double>(added) / static_cast<double>(replicas)},
                    {"drop_rate", drop_rate}};
  rep.thresholds = {{"min_fraction", threshold}, {"max_drop_rate", 0.001}};
  rep.passed = frac >= threshold && monotone && drop_rate <= 0.001;
  return rep;
}

VerificationReport discrepancy_scarcity(std::int64_t m, std::int64_t n, double alpha,
                                        std::uint64_t replicas, std::uint64_t seed,
                                        const ScarcityOptions& opts) {
  if (!(alpha > 0 && alpha < 0.2)) throw std::invalid_argument("alpha must lie in (0, 1/5)");
  if (replicas == 0) throw std::invalid_argument("replicas must be >= 1");
  CouplingOptions copts = opts.coupling;
  copts.alpha = alpha;
  struct Result {
    std::uint64_t deltas = 0;
    std::array<std::uint64_t, 3> classes{};
    std::uint64_t voided = 0, steps = 0;
    bool disagreement = false, preceded = true;
    std::string invariant;
  };
  std::vector<Result> results(replicas);
  parallel_for(replicas, [&](std::uint64_t r) {
    CoupledRun run = run_coupled(m, m + 1, n, copts, seed, r);
    Result& out = results[r];
    out.deltas = run.ledger.deltas.size();
    out.classes = run.ledger.class_counts();
    out.voided = run.ledger.voided;
    out.steps = run.steps;
    out.invariant = check_ledger_invariants(run);
    if (opts.window) {
      const WindowAgreement w = window_agreement(run.left, run.right, *opts.window, run.steps);
      if (w.first_disagreement) {
        out.disagreement = true;
        out.preceded = !run.ledger.deltas.empty() && run.ledger.deltas.front().step <= *w.first_disagreement;
      }
    }
  });

  const double threshold = std::pow(static_cast<double>(m), alpha);
  std::uint64_t tail = 0, disagree = 0, unpreceded = 0, voided = 0, steps = 0, violations = 0;
  std::array<std::uint64_t, 3> classes{};
  std::map<std::uint64_t, std::uint64_t> hist;
  std::vector<std::uint64_t> sizes;
  for (const auto& r : results) {
    if (static_cast<double>(r.deltas) >= threshold) ++tail;
    ++hist[r.deltas];
    sizes.push_back(r.deltas);
    for (int i = 0; i < 3; ++i) classes[static_cast<std::size_t>(i)] += r.classes[static_cast<std::size_t>(i)];
    disagree += r.disagreement;
    unpreceded += r.disagreement && !r.preceded;
    voided += r.voided;
    steps += r.steps;
    violations += !r.invariant.empty();
  }
  std::sort(sizes.begin(), sizes.end());
  auto quantile = [&](double q) {
    return sizes[static_cast<std::size_t>(std::min<double>(static_cast<double>(sizes.size() - 1),
                                                           std::floor(q * static_cast<double>(sizes.size()))))];
  };
  VerificationReport rep;
  rep.name = "discrepancy_scarcity";
  rep.replicas = replicas;
  rep.seed = seed;
  rep.parameters = {{"m", m}, {"m2", m + 1}, {"N", n}, {"alpha", alpha}};
  nlohmann::json h = nlohmann::json::object();
  for (const auto& [k, v] : hist) h[std::to_string(k)] = v;
  const double reps = static_cast<double>(replicas);
  const double void_rate = steps + voided ? static_cast<double>(voided) / static_cast<double>(steps + voided) : 0.0;
  rep.statistics = {{"tail_fraction", static_cast<double>(tail) / reps},
                    {"tail_threshold", threshold},
                    {"histogram", h},
                    {"quantiles", {{"q50", quantile(0.5)}, {"q90", quantile(0.9)}, {"q99", quantile(0.99)}, {"max", sizes.back()}}},
                    {"good", classes[0]},
                    {"bad", classes[1]},
                    {"devastating", classes[2]},
                    {"void_rate", void_rate},
                    {"invariant_violations", violations}};
  if (opts.window) {
    rep.statistics["window_disagreement_fraction"] = static_cast<double>(disagree) / reps;
    rep.statistics["window_disagreements"] = disagree;
    rep.statistics["disagreements_without_prior_delta"] = unpreceded;
  }
  rep.thresholds = {{"max_void_rate", 0.001}};
  rep.passed = violations == 0 && unpreceded == 0 && void_rate <= 0.001;
  return rep;
}

// ---------------------------------------------------------------------------

std::string canonical_encoding(const Subgraph& g_in) {
  Subgraph g = g_in;
  g.normalize();
  std::string s = "V:";
  for (std::size_t i = 0; i < g.vertices.size(); ++i) {
    if (i) s += ';';
    s += std::to_string(g.vertices[i].x) + "," + std::to_string(g.vertices[i].y);
  }
  s += "|E:";
  for (std::size_t i = 0; i < g.edges.size(); ++i) {
    if (i) s += ';';
    const auto& e = g.edges[i];
    s += std::to_string(e.from.x) + "," + std::to_string(e.from.y) + ">" + std::to_string(e.to.x) + "," +
         std::to_string(e.to.y);
  }
  return s;
}

namespace {

Subgraph window_at(const AggregateState& s, const WindowSpec& k, std::uint64_t step) {
  Subgraph g;
  for (const Site& x : s.seed()) {
    if (k.contains(x)) g.vertices.push_back(x);
  }
  for (const auto& r : s.edges()) {
    if (r.birth_index > step) continue;
    if (k.contains(r.edge.from)) g.vertices.push_back(r.edge.from);
    if (k.contains(r.edge)) g.edges.push_back(r.edge);
  }
  g.normalize();
  return g;
}

}  // namespace

std::string EmpiricalWindowLaw::to_jsonl() const {
  std::string out;
  for (std::size_t i = 0; i < times.size(); ++i) {
    for (const auto& [enc, c] : counts[i]) {
      nlohmann::json j{{"type", "window_law"}, {"time", times[i]}, {"encoding", enc}, {"count", c}};
      out += j.dump();
      out += '\n';
    }
  }
  return out;
}

EmpiricalWindowLaw window_law(const ProcessConfig& cfg_in, const WindowSpec& k,
                              const std::vector<std::uint64_t>& times, std::uint64_t replicas,
                              std::uint64_t seed) {
  if (replicas == 0) throw std::invalid_argument("replicas must be >= 1");
  ProcessConfig cfg = cfg_in;
  cfg.validate();
  const std::uint64_t horizon = cfg.resolved_horizon();
  std::uint64_t last = 0;
  for (auto t : times) {
    if (t > horizon) throw std::invalid_argument("window-law time beyond the horizon");
    last = std::max(last, t);
  }
  cfg.horizon_steps = last;
  cfg.horizon_time.reset();
  cfg.snapshot_steps = {0};
  std::vector<std::vector<std::string>> enc(replicas);
  parallel_for(replicas, [&](std::uint64_t r) {
    const Trajectory t = run_process(cfg, seed, r);
    for (auto step : times) enc[r].push_back(canonical_encoding(window_at(t.final_state, k, step)));
  });
  EmpiricalWindowLaw law;
  law.window = k;
  law.times = times;
  law.replicas = replicas;
  law.counts.resize(times.size());
  for (const auto& per : enc) {
    for (std::size_t i = 0; i < times.size(); ++i) ++law.counts[i][per[i]];
  }
  return law;
}

std::vector<double> tv_distance(const EmpiricalWindowLaw& a, const EmpiricalWindowLaw& b) {
  if (!(a.window == b.window)) throw std::invalid_argument("window mismatch");
  if (a.times != b.times) throw std::invalid_argument("time mismatch");
  std::vector<double> out;
  for (std::size_t i = 0; i < a.times.size(); ++i) {
    std::set<std::string> keys;
    for (const auto& [k, v] : a.counts[i]) keys.insert(k);
    for (const auto& [k, v] : b.counts[i]) keys.insert(k);
    double l1 = 0;
    for (const auto& key : keys) {
      auto pa = a.counts[i].find(key);
      auto pb = b.counts[i].find(key);
      const double fa = pa == a.counts[i].end() ? 0.0 : static_cast<double>(pa->second) / static_cast<double>(a.replicas);
      const double fb = pb == b.counts[i].end() ? 0.0 : static_cast<double>(pb->second) / static_cast<double>(b.replicas);
      l1 += std::abs(fa - fb);
    }
    out.push_back(std::min(1.0, 0.5 * l1));
  }
  return out;
}

VerificationReport bulk_convergence_sweep(const std::vector<std::int64_t>& m_list, std::int64_t n,
                                          const WindowSpec& k, const std::vector<std::uint64_t>& times,
                                          std::uint64_t replicas, std::uint64_t seed,
                                          const ProcessConfig& base) {
  if (m_list.empty()) throw std::invalid_argument("m_list must be nonempty");
  for (std::size_t i = 0; i < m_list.size(); ++i) {
    if (m_list[i] > n || (i && m_list[i] <= m_list[i - 1])) {
      throw std::invalid_argument("m_list must be increasing with max <= N");
    }
  }
  std::vector<std::int64_t> ms = m_list;
  if (ms.back() != n) ms.push_back(n);
  std::vector<EmpiricalWindowLaw> laws;
  std::size_t support = 0;
  for (std::int64_t m : ms) {
    ProcessConfig cfg = base;
    cfg.kind = ProcessKind::Intermediate;
    cfg.m = m;
    cfg.n = n;
    cfg.horizon_steps.reset();
    laws.push_back(window_law(cfg, k, times, replicas, seed));
    for (const auto& c : laws.back().counts) support = std::max(support, c.size());
  }
  VerificationReport rep;
  rep.name = "bulk_convergence_sweep";
  rep.replicas = replicas;
  rep.seed = seed;
  rep.parameters = {{"m_list", ms}, {"N", n}, {"times", times}};
  nlohmann::json rows = nlohmann::json::array();
  std::vector<double> max_tv;
  for (std::size_t i = 0; i + 1 < laws.size(); ++i) {
    const auto d = tv_distance(laws[i], laws[i + 1]);
    rows.push_back({{"m", ms[i]}, {"next_m", ms[i + 1]}, {"tv", d}});
    max_tv.push_back(*std::max_element(d.begin(), d.end()));
  }
  bool decreasing = true;
  for (std::size_t i = 1; i < max_tv.size(); ++i) decreasing = decreasing && max_tv[i] <= max_tv[i - 1];
  rep.statistics = {{"distances", rows},
                    {"decreasing", decreasing},
                    {"noise_floor", std::sqrt(static_cast<double>(support) / static_cast<double>(replicas))}};
  rep.passed = true;  // informational
  return rep;
}

DimensionEstimate mass_dimension(const std::vector<Site>& vertices) {
  std::int64_t top = 0;
  for (const Site& v : vertices) top = std::max(top, std::max(std::abs(v.y), std::abs(v.x)));
  DimensionEstimate est;
  std::vector<std::int64_t> hs;
  for (std::int64_t h = 2; h <= top; h *= 2) hs.push_back(h);
  if (hs.empty() || hs.back() != top) hs.push_back(top);
  for (std::int64_t h : hs) {
    std::uint64_t mass = 0;
    for (const Site& v : vertices) {
      const std::int64_t ay = std::abs(v.y);
      if (std::abs(v.x) <= h && ay >= 1 && ay <= h) ++mass;
    }
    if (mass > 0) est.points.emplace_back(h, mass);
  }
  if (est.points.size() < 3) throw std::invalid_argument("too few scales for a dimension estimate");
  const double k = static_cast<double>(est.points.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& [h, mass] : est.points) {
    const double x = std::log(static_cast<double>(h));
    const double y = std::log(static_cast<double>(mass));
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double denom = k * sxx - sx * sx;
  est.exponent = (k * sxy - sx * sy) / denom;
  const double intercept = (sy - est.exponent * sx) / k;
  double rss = 0;
  for (const auto& [h, mass] : est.points) {
    const double r = std::log(static_cast<double>(mass)) - intercept - est.exponent * std::log(static_cast<double>(h));
    rss += r * r;
  }
  est.stderr_ = k > 2 ? std::sqrt(rss / (k - 2) * k / denom) : 0.0;
  return est;
}

DimensionEstimate mass_dimension(const AggregateState& state) {
  if (state.edges().size() < 100) throw std::invalid_argument("mass_dimension needs >= 100 added edges");
  return mass_dimension(sorted_sites(state.vertices()));
}

}  // namespace dlalab
