#include <gtest/gtest.h>

#include <cmath>

#include "dlalab/geometry.hpp"

using namespace dlalab;

TEST(Neighbors, FixedOrder) {
  const auto n = neighbors({0, 0});
  EXPECT_EQ(n[0], (Site{1, 0}));
  EXPECT_EQ(n[1], (Site{0, 1}));
  EXPECT_EQ(n[2], (Site{-1, 0}));
  EXPECT_EQ(n[3], (Site{0, -1}));
  const auto m = neighbors({2, -1});
  EXPECT_EQ(m, (std::array<Site, 4>{Site{3, -1}, Site{2, 0}, Site{1, -1}, Site{2, -2}}));
  for (const Site& s : neighbors({-5, 7})) EXPECT_DOUBLE_EQ(norm(s - Site{-5, 7}), 1.0);
}

TEST(Boundary, OuterBoundary) {
  EXPECT_EQ(outer_boundary(to_set(std::vector<Site>{{0, 0}})).size(), 4u);
  EXPECT_EQ(outer_boundary(to_set(SegmentSpec{1}.sites())).size(), 8u);
  EXPECT_TRUE(outer_boundary({}).empty());
}

// Brute force: every unit edge in a bounding box whose head is in A and tail is not.
static std::size_t brute_edge_boundary(const SiteSet& a) {
  std::size_t count = 0;
  for (std::int64_t x = -10; x <= 10; ++x) {
    for (std::int64_t y = -10; y <= 10; ++y) {
      for (const Site& d : std::array<Site, 4>{Site{1, 0}, Site{-1, 0}, Site{0, 1}, Site{0, -1}}) {
        const Site from{x, y};
        count += !a.contains(from) && a.contains(from + d);
      }
    }
  }
  return count;
}

TEST(Boundary, EdgeBoundaryMatchesBruteForce) {
  const SiteSet single = to_set(std::vector<Site>{{0, 0}});
  const auto e = edge_boundary(single);
  ASSERT_EQ(e.size(), 4u);
  for (const auto& edge : e) EXPECT_EQ(edge.to, (Site{0, 0}));
  for (std::int64_t n : {1, 2, 5}) {
    const SiteSet d = to_set(SegmentSpec{n}.sites());
    EXPECT_EQ(edge_boundary(d).size(), brute_edge_boundary(d)) << "n=" << n;
  }
  // Three from above, three from below, one into each end.
  EXPECT_EQ(edge_boundary(to_set(SegmentSpec{1}.sites())).size(), 8u);
  EXPECT_TRUE(edge_boundary({}).empty());
}

TEST(Boundary, InnerBoundaryOfSegmentIsEverySite) {
  EXPECT_EQ(inner_boundary(to_set(SegmentSpec{3}.sites())).size(), 7u);
}

TEST(Segment, Sites) {
  EXPECT_EQ(SegmentSpec{4}.sites().size(), 9u);
  EXPECT_TRUE(SegmentSpec{2}.contains({-2, 0}));
  EXPECT_FALSE(SegmentSpec{2}.contains({0, 1}));
}

TEST(Envelope, FContainsSegmentAndCapsHeight) {
  Subgraph g;
  g.vertices = SegmentSpec{16}.sites();
  EXPECT_TRUE(envelope_contains(EnvelopeSpec::f(16), g));
  const std::int64_t h = static_cast<std::int64_t>(std::ceil(std::log(16.0)));
  g.vertices.push_back({0, h + 1});
  EXPECT_FALSE(envelope_contains(EnvelopeSpec::f(16), g));
}

TEST(Envelope, DevastatingBoxContainsOriginColumn) {
  Subgraph g;
  g.vertices = {{0, 1}};
  EXPECT_TRUE(envelope_contains(EnvelopeSpec::devastating(16, 0.1), g));
  g.vertices = {{100, 0}};
  EXPECT_FALSE(envelope_contains(EnvelopeSpec::devastating(16, 0.1), g));
}

TEST(Envelope, EdgesNeedBothEndpoints) {
  const Region r = EnvelopeSpec::f(4).materialize();
  Subgraph g;
  g.edges = {make_edge({0, 2}, {0, 1})};
  EXPECT_TRUE(envelope_contains(r, g));
  g.edges = {make_edge({0, 3}, {0, 2})};
  EXPECT_FALSE(envelope_contains(r, g));
}

TEST(Window, BoxEnumeratesSitesAndInternalEdges) {
  const WindowSpec w = WindowSpec::box(-1, 1, 0, 2);
  EXPECT_EQ(w.sites().size(), 9u);
  // 12 undirected unit edges in a 3x3 block, both orientations.
  EXPECT_EQ(w.edges().size(), 24u);
  EXPECT_TRUE(w.contains(make_edge({0, 0}, {0, 1})));
  EXPECT_FALSE(w.contains(make_edge({1, 0}, {2, 0})));
}

TEST(Edge, RejectsNonUnit) {
  EXPECT_THROW(make_edge({0, 0}, {2, 0}), std::invalid_argument);
  EXPECT_EQ(reversed(make_edge({0, 1}, {0, 0})), make_edge({0, 0}, {0, 1}));
}
