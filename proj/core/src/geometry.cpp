#include "dlalab/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace dlalab {

double norm(Site s) { return std::hypot(static_cast<double>(s.x), static_cast<double>(s.y)); }

bool is_unit_edge(const DirectedEdge& e) { return squared_norm(e.to - e.from) == 1; }

DirectedEdge make_edge(Site from, Site to) {
  DirectedEdge e{from, to};
  if (!is_unit_edge(e)) {
    throw std::invalid_argument("directed edge endpoints must be lattice neighbours");
  }
  return e;
}

DirectedEdge reversed(const DirectedEdge& e) { return {e.to, e.from}; }

std::array<Site, 4> neighbors(Site s) {
  return {s + kUnitSteps[0], s + kUnitSteps[1], s + kUnitSteps[2], s + kUnitSteps[3]};
}

std::vector<Site> inner_boundary(const SiteSet& a) {
  std::vector<Site> out;
  for (const Site& s : a) {
    for (const Site& n : neighbors(s)) {
      if (!a.contains(n)) {
        out.push_back(s);
        break;
      }
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<Site> outer_boundary(const SiteSet& a) {
  SiteSet seen;
  for (const Site& s : a) {
    for (const Site& n : neighbors(s)) {
      if (!a.contains(n)) seen.insert(n);
    }
  }
  return sorted_sites(seen);
}

std::vector<DirectedEdge> edge_boundary(const SiteSet& a) {
  std::vector<DirectedEdge> out;
  for (const Site& s : a) {
    for (const Site& n : neighbors(s)) {
      if (!a.contains(n)) out.push_back({n, s});
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<Site> SegmentSpec::sites() const {
  std::vector<Site> out;
  if (n < 0) return out;
  out.reserve(static_cast<std::size_t>(2 * n + 1));
  for (std::int64_t x = -n; x <= n; ++x) out.push_back({x, 0});
  return out;
}

SiteSet to_set(std::span<const Site> sites) { return SiteSet(sites.begin(), sites.end()); }

std::vector<Site> sorted_sites(const SiteSet& s) {
  std::vector<Site> out(s.begin(), s.end());
  std::sort(out.begin(), out.end());
  return out;
}

Box box_from_reals(double x0, double x1, double y0, double y1) {
  // Small slack so that values like 16^{0.5} computed as 3.9999999 still
  // land on the intended integer.
  constexpr double kSlack = 1e-9;
  return {static_cast<std::int64_t>(std::ceil(x0 - kSlack)),
          static_cast<std::int64_t>(std::floor(x1 + kSlack)),
          static_cast<std::int64_t>(std::ceil(y0 - kSlack)),
          static_cast<std::int64_t>(std::floor(y1 + kSlack))};
}

bool Region::contains(Site s) const {
  bool in = std::any_of(include_.begin(), include_.end(),
                        [&](const Box& b) { return b.contains(s); });
  if (!in) return false;
  return std::none_of(exclude_.begin(), exclude_.end(),
                      [&](const Box& b) { return b.contains(s); });
}

std::vector<Site> Region::sites() const {
  SiteSet seen;
  for (const Box& b : include_) {
    for (std::int64_t x = b.xmin; x <= b.xmax; ++x) {
      for (std::int64_t y = b.ymin; y <= b.ymax; ++y) {
        Site s{x, y};
        if (contains(s)) seen.insert(s);
      }
    }
  }
  return sorted_sites(seen);
}

std::int64_t ceil_log(double v) {
  if (v <= 1.0) return 0;
  return static_cast<std::int64_t>(std::ceil(std::log(v) - 1e-12));
}

Region EnvelopeSpec::materialize() const {
  const double s = scale;
  switch (kind) {
    case EnvelopeKind::F: {
      const auto h = static_cast<double>(ceil_log(s));
      return Region({box_from_reals(-s - h, s + h, -h, h)});
    }
    case EnvelopeKind::B1: {
      const double w = 4.0 * param * std::sqrt(s);
      return Region({box_from_reals(-s - w, s / 2, -w, w), box_from_reals(s / 2, s + w, -w, w)});
    }
    case EnvelopeKind::B2: {
      const auto h = static_cast<double>(ceil_log(s));
      return Region({box_from_reals(-s / 2, s / 2, -h, h)});
    }
    case EnvelopeKind::B3: {
      const auto h = static_cast<double>(ceil_log(s));
      const double w = std::pow(s, 0.2);
      return Region({box_from_reals(-w, w, -h, h)});
    }
    case EnvelopeKind::B4: {
      Region b2 = EnvelopeSpec::b2(s).materialize();
      Region b3 = EnvelopeSpec::b3(s).materialize();
      return Region(b2.include(), b3.include());
    }
    case EnvelopeKind::Devastating: {
      const auto h = static_cast<double>(ceil_log(s));
      const double w = std::pow(s, 1.0 - 3.0 * param);
      return Region({box_from_reals(-w, w, 0, h)});
    }
    case EnvelopeKind::InnerWindow: {
      const auto h = static_cast<double>(ceil_log(s));
      const double w = std::pow(s, param);
      return Region({box_from_reals(-w, w, -h, h)});
    }
  }
  throw std::logic_error("unknown envelope kind");
}

std::string EnvelopeSpec::describe() const {
  std::ostringstream os;
  switch (kind) {
    case EnvelopeKind::F: os << "F(" << scale << ")"; break;
    case EnvelopeKind::B1: os << "B1(" << scale << ", c0=" << param << ")"; break;
    case EnvelopeKind::B2: os << "B2(" << scale << ")"; break;
    case EnvelopeKind::B3: os << "B3(" << scale << ")"; break;
    case EnvelopeKind::B4: os << "B4(" << scale << ")"; break;
    case EnvelopeKind::Devastating: os << "DevastatingBox(" << scale << ", " << param << ")"; break;
    case EnvelopeKind::InnerWindow: os << "InnerWindow(" << scale << ", " << param << ")"; break;
  }
  return os.str();
}

void Subgraph::normalize() {
  std::sort(vertices.begin(), vertices.end());
  vertices.erase(std::unique(vertices.begin(), vertices.end()), vertices.end());
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
}

bool envelope_contains(const Region& env, const Subgraph& g) {
  for (const Site& s : g.vertices) {
    if (!env.contains(s)) return false;
  }
  for (const DirectedEdge& e : g.edges) {
    if (!env.contains(e.from) || !env.contains(e.to)) return false;
  }
  return true;
}

bool envelope_contains(const EnvelopeSpec& env, const Subgraph& g) {
  return envelope_contains(env.materialize(), g);
}

WindowSpec::WindowSpec(std::vector<Site> sites, std::optional<std::vector<DirectedEdge>> edges)
    : sites_(std::move(sites)) {
  std::sort(sites_.begin(), sites_.end());
  sites_.erase(std::unique(sites_.begin(), sites_.end()), sites_.end());
  for (const Site& s : sites_) {
    if (s.y < 0) throw std::invalid_argument("window sites must lie in the upper half plane");
  }
  site_set_ = to_set(sites_);
  if (edges) {
    edges_ = std::move(*edges);
    for (const DirectedEdge& e : edges_) {
      if (!is_unit_edge(e)) throw std::invalid_argument("window edge is not a unit edge");
      if (e.from.y < 0 || e.to.y < 0) {
        throw std::invalid_argument("window edges must lie in the upper half plane");
      }
    }
  } else {
    for (const Site& s : sites_) {
      for (const Site& n : neighbors(s)) {
        if (site_set_.contains(n)) edges_.push_back({n, s});
      }
    }
  }
  std::sort(edges_.begin(), edges_.end());
  edges_.erase(std::unique(edges_.begin(), edges_.end()), edges_.end());
  edge_set_ = EdgeSet(edges_.begin(), edges_.end());
}

WindowSpec WindowSpec::box(std::int64_t xmin, std::int64_t xmax, std::int64_t ymin,
                           std::int64_t ymax) {
  std::vector<Site> sites;
  for (std::int64_t x = xmin; x <= xmax; ++x) {
    for (std::int64_t y = ymin; y <= ymax; ++y) sites.push_back({x, y});
  }
  return WindowSpec(std::move(sites));
}

bool WindowSpec::contains(const DirectedEdge& e) const { return edge_set_.contains(e); }

}  // namespace dlalab
