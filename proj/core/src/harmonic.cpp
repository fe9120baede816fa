#include "dlalab/harmonic.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include "dlalab/parallel.hpp"

namespace dlalab {

SolverConfig SolverConfig::resolved_for(double obstacle_radius) const {
  SolverConfig out = *this;
  const auto base = static_cast<std::int64_t>(std::ceil(obstacle_radius)) + 1;
  if (out.inner_radius <= 0) out.inner_radius = std::max<std::int64_t>(4 * base, 16);
  if (out.outer_radius <= 0) out.outer_radius = 2 * out.inner_radius;
  if (out.inner_radius >= out.outer_radius) {
    throw std::invalid_argument("solver inner_radius must be < outer_radius");
  }
  if (static_cast<double>(out.inner_radius) < obstacle_radius + 2.0) {
    throw std::invalid_argument("solver domain must strictly contain the obstacle set");
  }
  return out;
}

namespace {

double set_radius(const SiteSet& s) {
  std::int64_t best = 0;
  for (const Site& x : s) best = std::max(best, squared_norm(x));
  return std::sqrt(static_cast<double>(best));
}

// Discrete Dirichlet problem on the ball {|z| < r} minus the obstacles.
// The operator is M = 4I - adjacency restricted to the unknowns, which is
// symmetric positive definite; we factor it once per radius.
class DirichletSolver {
 public:
  DirichletSolver(const SiteSet& obstacles, std::int64_t r, const SolverConfig& cfg)
      : obstacles_(obstacles), r2_(r * r), tolerance_(cfg.tolerance) {
    for (std::int64_t x = -r; x <= r; ++x) {
      for (std::int64_t y = -r; y <= r; ++y) {
        const Site s{x, y};
        if (squared_norm(s) < r2_ && !obstacles.contains(s)) sites_.push_back(s);
      }
    }
    if (sites_.size() > cfg.max_unknowns) {
      throw SolverError("system too large: " + std::to_string(sites_.size()) +
                        " unknowns exceeds max_unknowns=" + std::to_string(cfg.max_unknowns));
    }
    index_.reserve(sites_.size());
    for (std::size_t i = 0; i < sites_.size(); ++i) index_.emplace(sites_[i], static_cast<int>(i));

    const auto n = static_cast<Eigen::Index>(sites_.size());
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(sites_.size() * 5);
    ring_rhs_ = Eigen::VectorXd::Zero(n);
    for (std::size_t i = 0; i < sites_.size(); ++i) {
      const auto row = static_cast<Eigen::Index>(i);
      triplets.emplace_back(row, row, 4.0);
      for (const Site& nb : neighbors(sites_[i])) {
        if (squared_norm(nb) >= r2_) {
          ring_rhs_[row] += 1.0;
        } else if (auto it = index_.find(nb); it != index_.end()) {
          triplets.emplace_back(row, static_cast<Eigen::Index>(it->second), -1.0);
        }
      }
    }
    matrix_.resize(n, n);
    matrix_.setFromTriplets(triplets.begin(), triplets.end());
    solver_.compute(matrix_);
    if (solver_.info() != Eigen::Success) {
      throw SolverError("factorisation failed (singular or ill-conditioned system)");
    }
    escape_ = solve(ring_rhs_);
  }

  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) {
    Eigen::VectorXd x = solver_.solve(rhs);
    if (solver_.info() != Eigen::Success) throw SolverError("back substitution failed");
    const double residual = (matrix_ * x - rhs).lpNorm<Eigen::Infinity>();
    max_residual_ = std::max(max_residual_, residual);
    if (!(residual <= tolerance_)) {
      std::ostringstream os;
      os << "ill-conditioned system: residual " << residual << " exceeds tolerance " << tolerance_;
      throw SolverError(os.str());
    }
    return x;
  }

  /// P_u(reach |z| >= r before the obstacles); 1 outside the ball, 0 on obstacles.
  double escape(Site u) const { return value(escape_, u, 1.0); }

  /// Column x of M^{-1}: entry u is P_x(leave u for a fixed neighbour on the
  /// step after a visit), i.e. the Green's function divided by 4.
  Eigen::VectorXd green_column(Site x) {
    auto it = index_.find(x);
    if (it == index_.end()) throw std::invalid_argument("walk start is not a free site of the domain");
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(sites_.size()));
    rhs[it->second] = 1.0;
    return solve(rhs);
  }

  double value(const Eigen::VectorXd& v, Site u, double outside) const {
    if (obstacles_.contains(u)) return 0.0;
    if (squared_norm(u) >= r2_) return outside;
    return v[index_.at(u)];
  }

  double max_residual() const { return max_residual_; }

 private:
  const SiteSet& obstacles_;
  std::int64_t r2_;
  double tolerance_;
  std::vector<Site> sites_;
  absl::flat_hash_map<Site, int> index_;
  Eigen::SparseMatrix<double> matrix_;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver_;
  Eigen::VectorXd ring_rhs_;
  Eigen::VectorXd escape_;
  double max_residual_ = 0;
};

struct PreparedSets {
  SiteSet obstacles;
  std::vector<DirectedEdge> boundary;  // sorted edges into the obstacles
  SiteSet base;
};

PreparedSets prepare(const SiteSet& a, const SiteSet& absorber) {
  if (a.empty() && absorber.empty()) throw std::invalid_argument("empty target set");
  PreparedSets p;
  p.base = a;
  p.obstacles = a;
  for (const Site& s : absorber) p.obstacles.insert(s);
  p.boundary = edge_boundary(p.obstacles);
  return p;
}

double extrapolate(double v1, double v2, std::int64_t r1, std::int64_t r2, double order) {
  const double ratio = std::pow(static_cast<double>(r2) / static_cast<double>(r1), order);
  return v2 + (v2 - v1) / (ratio - 1.0);
}

HarmonicTable assemble(const PreparedSets& p, const SiteSet& a, const SiteSet& absorber,
                       const std::vector<double>& v1, const std::vector<double>& v2,
                       const SolverConfig& cfg, double residual) {
  HarmonicTable table;
  table.method = HarmonicTable::Method::Exact;
  table.radii = {cfg.inner_radius, cfg.outer_radius};
  table.base = sorted_sites(a);
  for (const Site& s : sorted_sites(absorber)) {
    if (!a.contains(s)) table.absorber.push_back(s);
  }
  table.max_residual = residual;
  for (std::size_t i = 0; i < p.boundary.size(); ++i) {
    const double v = extrapolate(v1[i], v2[i], cfg.inner_radius, cfg.outer_radius, cfg.order);
    const double err = std::abs(v - v2[i]);
    if (p.base.contains(p.boundary[i].to)) {
      table.entries.push_back({p.boundary[i], v, err});
    } else {
      table.lazy_mass += v;
      table.lazy_stderr += err;
    }
  }
  return table;
}

std::vector<double> normalised_escape_weights(DirichletSolver& solver,
                                              const std::vector<DirectedEdge>& edges) {
  std::vector<double> w(edges.size());
  double total = 0;
  for (std::size_t i = 0; i < edges.size(); ++i) {
    w[i] = solver.escape(edges[i].from) / 4.0;
    total += w[i];
  }
  if (!(total > 0)) throw SolverError("no escape mass: obstacle set encloses the boundary");
  for (double& v : w) v /= total;
  return w;
}

}  // namespace

const HarmonicEntry* HarmonicTable::find(const DirectedEdge& e) const {
  auto it = std::lower_bound(entries.begin(), entries.end(), e,
                             [](const HarmonicEntry& h, const DirectedEdge& k) { return h.edge < k; });
  if (it == entries.end() || it->edge != e) return nullptr;
  return &*it;
}

double HarmonicTable::value(const DirectedEdge& e) const {
  const HarmonicEntry* h = find(e);
  return h ? h->value : 0.0;
}

double HarmonicTable::total_mass() const {
  double t = 0;
  for (const auto& e : entries) t += e.value;
  return t;
}

nlohmann::json HarmonicTable::header_json() const {
  nlohmann::json h;
  h["type"] = "header";
  h["method"] = method == Method::Exact ? "exact" : "monte_carlo";
  if (method == Method::Exact) {
    h["radii"] = radii;
    h["max_residual"] = max_residual;
  } else {
    h["walkers"] = walkers;
    h["dropped"] = dropped;
    h["seed"] = seed;
  }
  auto sites_json = [](const std::vector<Site>& v) {
    nlohmann::json arr = nlohmann::json::array();
    for (const Site& s : v) arr.push_back({s.x, s.y});
    return arr;
  };
  h["base"] = sites_json(base);
  h["absorber"] = sites_json(absorber);
  h["lazy_mass"] = lazy_mass;
  h["lazy_stderr"] = lazy_stderr;
  h["edge_count"] = entries.size();
  return h;
}

std::string HarmonicTable::to_jsonl() const {
  std::string out = header_json().dump() + "\n";
  for (const auto& e : entries) {
    nlohmann::json r;
    r["from"] = {e.edge.from.x, e.edge.from.y};
    r["to"] = {e.edge.to.x, e.edge.to.y};
    r["value"] = e.value;
    r["stderr"] = e.stderr_;
    out += r.dump();
    out += '\n';
  }
  return out;
}

HarmonicTable exact_edge_harmonic(const SiteSet& a, const SiteSet& absorber,
                                  const SolverConfig& cfg_in) {
  PreparedSets p = prepare(a, absorber);
  const SolverConfig cfg = cfg_in.resolved_for(set_radius(p.obstacles));
  DirichletSolver inner(p.obstacles, cfg.inner_radius, cfg);
  const auto v1 = normalised_escape_weights(inner, p.boundary);
  const double res1 = inner.max_residual();
  DirichletSolver outer(p.obstacles, cfg.outer_radius, cfg);
  const auto v2 = normalised_escape_weights(outer, p.boundary);
  return assemble(p, a, absorber, v1, v2, cfg, std::max(res1, outer.max_residual()));
}

HarmonicTable exact_edge_harmonic_from(Site x, const SiteSet& a, const SiteSet& absorber,
                                       const SolverConfig& cfg_in) {
  PreparedSets p = prepare(a, absorber);
  if (p.obstacles.contains(x)) throw std::invalid_argument("start site lies in the target set");
  SiteSet with_start = p.obstacles;
  with_start.insert(x);
  const SolverConfig cfg = cfg_in.resolved_for(set_radius(with_start));
  std::vector<std::vector<double>> per_radius;
  double residual = 0;
  for (std::int64_t r : {cfg.inner_radius, cfg.outer_radius}) {
    DirichletSolver solver(p.obstacles, r, cfg);
    const auto from_infinity = normalised_escape_weights(solver, p.boundary);
    const Eigen::VectorXd green = solver.green_column(x);
    const double escape_x = solver.escape(x);
    std::vector<double> v(p.boundary.size());
    for (std::size_t i = 0; i < p.boundary.size(); ++i) {
      v[i] = solver.value(green, p.boundary[i].from, 0.0) + escape_x * from_infinity[i];
    }
    residual = std::max(residual, solver.max_residual());
    per_radius.push_back(std::move(v));
  }
  return assemble(p, a, absorber, per_radius[0], per_radius[1], cfg, residual);
}

HarmonicTable mc_edge_harmonic(const SiteSet& a, const SiteSet& absorber, const McOptions& opts) {
  if (opts.walkers == 0) throw std::invalid_argument("walkers must be >= 1");
  ObstacleIndex index;
  for (const Site& s : sorted_sites(absorber)) index.insert(s, SiteTag::Absorber);
  for (const Site& s : sorted_sites(a)) index.insert(s, SiteTag::Target);
  if (index.radius() + 1.0 >= static_cast<double>(opts.launch.radius)) {
    throw std::invalid_argument("launch radius must exceed the target radius");
  }
  auto ring = LaunchRing::get(opts.launch);
  WalkOptions wopts;
  wopts.policy = opts.policy;
  wopts.budget = opts.budget;
  if (opts.escape_factor > 0 && opts.reentry != ReentryMode::Off) {
    wopts.reentry.mode = opts.reentry;
    wopts.reentry.escape_radius = static_cast<std::int64_t>(
        std::ceil(opts.escape_factor * static_cast<double>(opts.launch.radius)));
    wopts.reentry.ring = ring;
  }

  std::vector<WalkOutcome> outcomes(opts.walkers);
  parallel_for(opts.walkers, [&](std::uint64_t i) {
    RngStream rng(opts.seed, i);
    const Site start = ring->launch(rng);
    outcomes[i] = run_to_absorption(start, index, wopts, rng);
  });

  std::map<DirectedEdge, std::uint64_t> counts;
  std::uint64_t lazy = 0;
  std::uint64_t dropped = 0;
  for (const WalkOutcome& o : outcomes) {
    switch (o.kind) {
      case WalkOutcome::Kind::HitTarget: ++counts[o.edge]; break;
      case WalkOutcome::Kind::HitAbsorber: ++lazy; break;
      case WalkOutcome::Kind::BudgetExhausted: ++dropped; break;
    }
  }
  HarmonicTable table;
  table.method = HarmonicTable::Method::MonteCarlo;
  table.walkers = opts.walkers;
  table.dropped = dropped;
  table.seed = opts.seed;
  table.base = sorted_sites(a);
  for (const Site& s : sorted_sites(absorber)) {
    if (!a.contains(s)) table.absorber.push_back(s);
  }
  const double completed = static_cast<double>(opts.walkers - dropped);
  auto binomial = [&](std::uint64_t c, double& p, double& se) {
    p = completed > 0 ? static_cast<double>(c) / completed : 0.0;
    se = completed > 0 ? std::sqrt(p * (1.0 - p) / completed) : 0.0;
  };
  for (const auto& [edge, c] : counts) {
    HarmonicEntry h{edge, 0, 0};
    binomial(c, h.value, h.stderr_);
    table.entries.push_back(h);
  }
  binomial(lazy, table.lazy_mass, table.lazy_stderr);
  return table;
}

double vertex_harmonic(const HarmonicTable& table, Site x, VertexSide side) {
  const SiteSet base = to_set(table.base);
  const SiteSet absorber = to_set(table.absorber);
  double total = 0;
  if (side == VertexSide::InnerVertex) {
    bool on_boundary = base.contains(x);
    if (on_boundary) {
      const auto nb = neighbors(x);
      on_boundary = std::any_of(nb.begin(), nb.end(), [&](Site n) { return !base.contains(n); });
    }
    if (!on_boundary) throw std::invalid_argument("site is not on the inner boundary of the base set");
    for (const auto& e : table.entries) {
      if (e.edge.to == x) total += e.value;
    }
  } else {
    bool on_boundary = !base.contains(x) && !absorber.contains(x);
    if (on_boundary) {
      const auto nb = neighbors(x);
      on_boundary = std::any_of(nb.begin(), nb.end(), [&](Site n) { return base.contains(n); });
    }
    if (!on_boundary) throw std::invalid_argument("site is not on the outer boundary of the base set");
    for (const auto& e : table.entries) {
      if (e.edge.from == x) total += e.value;
    }
  }
  return total;
}

double extrapolate_sequence(const std::vector<std::int64_t>& n, const std::vector<double>& a) {
  if (n.size() != a.size() || n.empty()) throw std::invalid_argument("bad sequence");
  const std::size_t k = n.size();
  if (k == 1) return a[0];
  if (k == 2) {
    const double n1 = static_cast<double>(n[0]);
    const double n2 = static_cast<double>(n[1]);
    return (n2 * a[1] - n1 * a[0]) / (n2 - n1);
  }
  // Fit L + b/n + c/n^2 through the last three samples.
  Eigen::Matrix3d m;
  Eigen::Vector3d rhs;
  for (int i = 0; i < 3; ++i) {
    const double nn = static_cast<double>(n[k - 3 + static_cast<std::size_t>(i)]);
    m(i, 0) = 1.0;
    m(i, 1) = 1.0 / nn;
    m(i, 2) = 1.0 / (nn * nn);
    rhs[i] = a[k - 3 + static_cast<std::size_t>(i)];
  }
  return m.colPivHouseholderQr().solve(rhs)[0];
}

nlohmann::json ScalingEstimate::to_json() const {
  nlohmann::json j;
  j["type"] = "scaling_estimate";
  nlohmann::json s = nlohmann::json::array();
  for (const auto& x : samples) {
    s.push_back({{"n", x.n}, {"a_n", x.a_n}, {"a_n_outer", x.a_n_outer}, {"stderr", x.stderr_}});
  }
  j["samples"] = s;
  j["cauchy_gaps"] = cauchy_gaps;
  j["extrapolated"] = extrapolated;
  j["c"] = c;
  j["C"] = big_c;
  j["warning"] = warning;
  j["note"] = note;
  return j;
}

ScalingEstimate estimate_scaling_constant(const std::vector<std::int64_t>& n_list,
                                          const SolverConfig& cfg) {
  if (n_list.empty()) throw std::invalid_argument("n_list must be nonempty");
  for (std::size_t i = 1; i < n_list.size(); ++i) {
    if (n_list[i] <= n_list[i - 1]) throw std::invalid_argument("n_list must be increasing");
  }
  ScalingEstimate est;
  std::vector<double> a;
  for (std::int64_t n : n_list) {
    if (n < 1) throw std::invalid_argument("n must be >= 1");
    const auto seg = SegmentSpec{n}.sites();
    SolverConfig c = cfg;
    c.inner_radius = 0;
    c.outer_radius = 0;
    if (cfg.inner_radius > 0) {
      // Radii in the config are read as multiples of n + 1 for this sweep.
      c.inner_radius = cfg.inner_radius * (n + 1);
      c.outer_radius = (cfg.outer_radius > 0 ? cfg.outer_radius : 2 * cfg.inner_radius) * (n + 1);
    }
    const HarmonicTable t = exact_edge_harmonic(to_set(seg), {}, c);
    ScalingEstimate::Sample s;
    s.n = n;
    const auto nn = static_cast<double>(n);
    s.a_n = nn * vertex_harmonic(t, {0, 0}, VertexSide::InnerVertex);
    s.a_n_outer = nn * vertex_harmonic(t, {0, 1}, VertexSide::OuterVertex);
    for (const auto& e : t.entries) {
      if (e.edge.to == Site{0, 0}) s.stderr_ += nn * e.stderr_;
    }
    est.samples.push_back(s);
    a.push_back(s.a_n);
  }
  for (std::size_t i = 1; i < a.size(); ++i) est.cauchy_gaps.push_back(std::abs(a[i] - a[i - 1]));
  est.extrapolated = extrapolate_sequence(n_list, a);
  est.c = est.extrapolated / 2.0;
  est.big_c = 2.0 / est.extrapolated;
  if (a.size() < 2) {
    est.warning = true;
    est.note = "single sample: no extrapolation";
  } else {
    for (std::size_t i = 1; i < est.cauchy_gaps.size(); ++i) {
      if (!(est.cauchy_gaps[i] < est.cauchy_gaps[i - 1])) {
        est.warning = true;
        est.note = "successive gaps are not decreasing";
      }
    }
  }
  return est;
}

StationaryEstimate stationary_harmonic_estimate(const SiteSet& a, const DirectedEdge& e,
                                                const std::vector<std::int64_t>& n_values,
                                                double c_est, const SolverConfig& cfg) {
  if (!(c_est > 0)) throw std::invalid_argument("c_est must be positive");
  StationaryEstimate out;
  for (std::int64_t n : n_values) {
    SiteSet target = a;
    for (const Site& s : SegmentSpec{n}.sites()) target.insert(s);
    const HarmonicTable t = exact_edge_harmonic(target, {}, cfg);
    out.n_values.push_back(n);
    out.estimates.push_back(static_cast<double>(n) * t.value(e) / c_est);
  }
  out.value = out.estimates.back();
  if (out.estimates.size() >= 2) {
    out.gap = std::abs(out.estimates.back() - out.estimates[out.estimates.size() - 2]);
  }
  return out;
}

HeightBoundReport height_bound_check(const SiteSet& a, std::int64_t n,
                                     const std::vector<Site>& sites, const SolverConfig& cfg) {
  HeightBoundReport report;
  report.n = n;
  if (sites.empty()) return report;
  SiteSet target = a;
  for (const Site& s : SegmentSpec{n}.sites()) target.insert(s);
  const HarmonicTable t = exact_edge_harmonic(target, {}, cfg);
  for (const Site& x : sites) {
    HeightBoundReport::Row row;
    row.site = x;
    double sum = 0;
    for (const auto& e : t.entries) {
      if (e.edge.from == x) sum += e.value;
    }
    row.scaled = static_cast<double>(n) * sum;
    row.ratio = row.scaled / std::sqrt(static_cast<double>(std::max<std::int64_t>(std::abs(x.y), 1)));
    report.fitted_c = std::max(report.fitted_c, row.ratio);
    report.rows.push_back(row);
  }
  return report;
}

std::vector<double> ring_harmonic_from_infinity(std::int64_t radius, const std::vector<Site>& ring) {
  SiteSet filled;
  const std::int64_t r2 = radius * radius;
  for (std::int64_t x = -radius; x <= radius; ++x) {
    for (std::int64_t y = -radius; y <= radius; ++y) {
      if (x * x + y * y < r2) filled.insert({x, y});
    }
  }
  for (const Site& s : ring) filled.insert(s);
  SolverConfig cfg;
  cfg.inner_radius = 4 * (radius + 2);
  cfg.outer_radius = 8 * (radius + 2);
  const HarmonicTable t = exact_edge_harmonic(filled, {}, cfg);
  absl::flat_hash_map<Site, double> mass;
  for (const auto& e : t.entries) mass[e.edge.to] += e.value;
  std::vector<double> w;
  w.reserve(ring.size());
  for (const Site& s : ring) {
    auto it = mass.find(s);
    w.push_back(it == mass.end() ? 0.0 : std::max(0.0, it->second));
  }
  return w;
}

}  // namespace dlalab
