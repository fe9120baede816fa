#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <absl/container/flat_hash_set.h>
#include <absl/hash/hash.h>

namespace dlalab {

/// A point of Z^2.
struct Site {
  std::int64_t x = 0;
  std::int64_t y = 0;

  friend constexpr auto operator<=>(const Site&, const Site&) = default;

  template <typename H>
  friend H AbslHashValue(H h, const Site& s) {
    return H::combine(std::move(h), s.x, s.y);
  }
};

constexpr Site operator+(Site a, Site b) { return {a.x + b.x, a.y + b.y}; }
constexpr Site operator-(Site a, Site b) { return {a.x - b.x, a.y - b.y}; }

inline constexpr std::int64_t squared_norm(Site s) { return s.x * s.x + s.y * s.y; }
double norm(Site s);

/// Oriented unit edge `from -> to`. The walker traverses it last before
/// landing on `to`.
struct DirectedEdge {
  Site from;
  Site to;

  friend constexpr auto operator<=>(const DirectedEdge&, const DirectedEdge&) = default;

  template <typename H>
  friend H AbslHashValue(H h, const DirectedEdge& e) {
    return H::combine(std::move(h), e.from, e.to);
  }
};

/// Throws std::invalid_argument unless |from - to| == 1.
DirectedEdge make_edge(Site from, Site to);
bool is_unit_edge(const DirectedEdge& e);
DirectedEdge reversed(const DirectedEdge& e);

using SiteSet = absl::flat_hash_set<Site>;
using EdgeSet = absl::flat_hash_set<DirectedEdge>;

/// Unit steps in the fixed order E, N, W, S.
inline constexpr std::array<Site, 4> kUnitSteps{{{1, 0}, {0, 1}, {-1, 0}, {0, -1}}};

std::array<Site, 4> neighbors(Site s);

/// Boundary operators. Results are returned sorted so callers never observe
/// hash iteration order.
std::vector<Site> inner_boundary(const SiteSet& a);
std::vector<Site> outer_boundary(const SiteSet& a);
std::vector<DirectedEdge> edge_boundary(const SiteSet& a);

/// D_n = [-n, n] x {0}, left to right.
struct SegmentSpec {
  std::int64_t n = 0;

  std::vector<Site> sites() const;
  bool contains(Site s) const { return s.y == 0 && s.x >= -n && s.x <= n; }
};

SiteSet to_set(std::span<const Site> sites);
std::vector<Site> sorted_sites(const SiteSet& s);

/// Inclusive integer box.
struct Box {
  std::int64_t xmin = 0, xmax = -1, ymin = 0, ymax = -1;

  bool empty() const { return xmin > xmax || ymin > ymax; }
  bool contains(Site s) const {
    return s.x >= xmin && s.x <= xmax && s.y >= ymin && s.y <= ymax;
  }
  std::int64_t size() const {
    return empty() ? 0 : (xmax - xmin + 1) * (ymax - ymin + 1);
  }
  friend bool operator==(const Box&, const Box&) = default;
};

/// Box covering the real rectangle [x0, x1] x [y0, y1] intersected with Z^2.
Box box_from_reals(double x0, double x1, double y0, double y1);

/// Union of `include` boxes minus the union of `exclude` boxes.
class Region {
 public:
  Region() = default;
  explicit Region(std::vector<Box> include, std::vector<Box> exclude = {})
      : include_(std::move(include)), exclude_(std::move(exclude)) {}

  bool contains(Site s) const;
  /// Every site of the region, sorted.
  std::vector<Site> sites() const;
  const std::vector<Box>& include() const { return include_; }
  const std::vector<Box>& exclude() const { return exclude_; }

 private:
  std::vector<Box> include_;
  std::vector<Box> exclude_;
};

/// log() as used in envelope heights: natural log rounded up.
std::int64_t ceil_log(double v);

enum class EnvelopeKind { F, B1, B2, B3, B4, Devastating, InnerWindow };

/// Named rectangular regions from the growth bounds.
///   F(m)               [-m-log m, m+log m] x [-log m, log m]
///   B1(N, c0)          ([-N-4c0 sqrt N, N/2] u [N/2, N+4c0 sqrt N]) x [-4c0 sqrt N, 4c0 sqrt N]
///   B2(N)              [-N/2, N/2] x [-log N, log N]
///   B3(N)              [-N^{1/5}, N^{1/5}] x [-log N, log N]
///   B4(N)              B2 \ B3
///   Devastating(m, a)  [-m^{1-3a}, m^{1-3a}] x [0, log m]
///   InnerWindow(N, p)  [-N^p, N^p] x [-log N, log N]  (p defaults to 1/10)
struct EnvelopeSpec {
  EnvelopeKind kind = EnvelopeKind::F;
  double scale = 1;     // m or N
  double param = 0;     // alpha, c0, or exponent, depending on kind

  static EnvelopeSpec f(double m) { return {EnvelopeKind::F, m, 0}; }
  static EnvelopeSpec b1(double n, double c0 = 1.0) { return {EnvelopeKind::B1, n, c0}; }
  static EnvelopeSpec b2(double n) { return {EnvelopeKind::B2, n, 0}; }
  static EnvelopeSpec b3(double n) { return {EnvelopeKind::B3, n, 0}; }
  static EnvelopeSpec b4(double n) { return {EnvelopeKind::B4, n, 0}; }
  static EnvelopeSpec devastating(double m, double alpha) {
    return {EnvelopeKind::Devastating, m, alpha};
  }
  static EnvelopeSpec inner_window(double n, double exponent = 0.1) {
    return {EnvelopeKind::InnerWindow, n, exponent};
  }

  Region materialize() const;
  std::string describe() const;
};

/// A finite graph of sites and directed edges; vectors kept sorted.
struct Subgraph {
  std::vector<Site> vertices;
  std::vector<DirectedEdge> edges;

  void normalize();
  bool empty() const { return vertices.empty() && edges.empty(); }
  friend bool operator==(const Subgraph&, const Subgraph&) = default;
};

bool envelope_contains(const Region& env, const Subgraph& g);
bool envelope_contains(const EnvelopeSpec& env, const Subgraph& g);

/// Finite observation window in the closed upper half plane. With no explicit
/// edge list the window holds every directed edge between two of its sites.
class WindowSpec {
 public:
  WindowSpec() = default;
  WindowSpec(std::vector<Site> sites, std::optional<std::vector<DirectedEdge>> edges = {});

  static WindowSpec box(std::int64_t xmin, std::int64_t xmax, std::int64_t ymin,
                        std::int64_t ymax);

  bool contains(Site s) const { return site_set_.contains(s); }
  bool contains(const DirectedEdge& e) const;
  const std::vector<Site>& sites() const { return sites_; }
  /// Edges of the window, sorted.
  const std::vector<DirectedEdge>& edges() const { return edges_; }
  friend bool operator==(const WindowSpec& a, const WindowSpec& b) {
    return a.sites_ == b.sites_ && a.edges_ == b.edges_;
  }

 private:
  std::vector<Site> sites_;
  std::vector<DirectedEdge> edges_;
  SiteSet site_set_;
  EdgeSet edge_set_;
};

}  // namespace dlalab
