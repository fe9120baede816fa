#include <gtest/gtest.h>

#include "dlalab/harmonic.hpp"

using namespace dlalab;

namespace {
SiteSet segment(std::int64_t n) { return to_set(SegmentSpec{n}.sites()); }
SiteSet annulus(std::int64_t outer, std::int64_t inner) {
  SiteSet s;
  for (const Site& x : SegmentSpec{outer}.sites()) {
    if (!SegmentSpec{inner}.contains(x)) s.insert(x);
  }
  return s;
}
}  // namespace

TEST(Exact, SingleSiteQuarterEach) {
  const HarmonicTable t = exact_edge_harmonic(to_set(std::vector<Site>{{0, 0}}), {});
  ASSERT_EQ(t.entries.size(), 4u);
  for (const auto& e : t.entries) EXPECT_NEAR(e.value, 0.25, 1e-9);
  EXPECT_NEAR(vertex_harmonic(t, {0, 0}, VertexSide::InnerVertex), 1.0, 1e-9);
}

TEST(Exact, SegmentSymmetryAndEndpointMass) {
  const HarmonicTable t = exact_edge_harmonic(segment(1), {});
  EXPECT_EQ(t.entries.size(), 8u);
  EXPECT_NEAR(t.total_mass(), 1.0, 1e-9);
  for (const auto& e : t.entries) {
    EXPECT_NEAR(e.value, t.value({{-e.edge.from.x, e.edge.from.y}, {-e.edge.to.x, e.edge.to.y}}), 1e-9);
    EXPECT_NEAR(e.value, t.value({{e.edge.from.x, -e.edge.from.y}, {e.edge.to.x, -e.edge.to.y}}), 1e-9);
  }
  const double end = vertex_harmonic(t, {1, 0}, VertexSide::InnerVertex);
  const double centre = vertex_harmonic(t, {0, 0}, VertexSide::InnerVertex);
  EXPECT_GT(end, centre);
  // Edge and vertex measures differ: the outer site (0,1) vs the inner site (0,0).
  EXPECT_GT(std::abs(vertex_harmonic(t, {0, 1}, VertexSide::OuterVertex) - centre), 1e-6);
  EXPECT_THROW(vertex_harmonic(t, {5, 5}, VertexSide::InnerVertex), std::invalid_argument);
}

TEST(Exact, TwoRadiusPairsAgree) {
  SolverConfig a, b;
  a.inner_radius = 32;
  a.outer_radius = 64;
  b.inner_radius = 64;
  b.outer_radius = 128;
  const HarmonicTable x = exact_edge_harmonic(segment(2), {}, a);
  const HarmonicTable y = exact_edge_harmonic(segment(2), {}, b);
    // Residual truncation error decays like r^-4.
  for (const auto& e : x.entries) EXPECT_NEAR(e.value, y.value(e.edge), 5e-7);
}

TEST(Exact, AbsorberLazyMassIsComplement) {
  const HarmonicTable t = exact_edge_harmonic(segment(2), annulus(8, 2));
  EXPECT_GT(t.lazy_mass, 0.5);
  EXPECT_NEAR(t.total_mass() + t.lazy_mass, 1.0, 1e-9);
}

TEST(Exact, TooLargeProblemIsRejected) {
  SolverConfig cfg;
  cfg.max_unknowns = 100;
  EXPECT_THROW(exact_edge_harmonic(segment(2), {}, cfg), SolverError);
}

TEST(Exact, FromStartSumsToOne) {
  const HarmonicTable t = exact_edge_harmonic_from({0, 3}, segment(2), annulus(8, 2));
  EXPECT_NEAR(t.total_mass() + t.lazy_mass, 1.0, 1e-9);
}

TEST(MonteCarlo, SingleSite) {
  McOptions o;
  o.walkers = 100000;
  o.seed = 4;
  o.launch = {8, LaunchDistribution::UniformOnRing};
  const HarmonicTable t = mc_edge_harmonic(to_set(std::vector<Site>{{0, 0}}), {}, o);
  ASSERT_EQ(t.entries.size(), 4u);
  for (const auto& e : t.entries) EXPECT_NEAR(e.value, 0.25, 4 * e.stderr_);
}

TEST(MonteCarlo, AgreesWithExactIncludingLazyMass) {
  const HarmonicTable exact = exact_edge_harmonic(segment(2), annulus(8, 2));
  McOptions o;
  o.walkers = 50000;
  o.seed = 8;
  o.launch = {32, LaunchDistribution::ExactHarmonicFromInfinity};
  const HarmonicTable mc = mc_edge_harmonic(segment(2), annulus(8, 2), o);
  const double n = static_cast<double>(o.walkers);
  int outside = 0;
  for (const auto& e : exact.entries) {
    const double sigma = std::sqrt(e.value * (1 - e.value) / n);
    outside += std::abs(mc.value(e.edge) - e.value) > 4 * sigma;
  }
  EXPECT_LE(outside, 1);
  const double sl = std::sqrt(exact.lazy_mass * (1 - exact.lazy_mass) / n);
  EXPECT_NEAR(mc.lazy_mass, exact.lazy_mass, 4 * sl);
  EXPECT_EQ(mc.dropped, 0u);
}

TEST(MonteCarlo, Deterministic) {
  McOptions o;
  o.walkers = 2000;
  o.seed = 12;
  o.launch = {16, LaunchDistribution::UniformOnRing};
  const auto a = mc_edge_harmonic(segment(1), {}, o);
  const auto b = mc_edge_harmonic(segment(1), {}, o);
  EXPECT_EQ(a.to_jsonl(), b.to_jsonl());
}

TEST(Scaling, SingleSampleWarns) {
  const ScalingEstimate e = estimate_scaling_constant({4});
  EXPECT_EQ(e.samples.size(), 1u);
  EXPECT_TRUE(e.warning);
  EXPECT_TRUE(e.cauchy_gaps.empty());
}

TEST(Scaling, GapsDecrease) {
  const ScalingEstimate e = estimate_scaling_constant({4, 8, 16, 32});
  ASSERT_EQ(e.cauchy_gaps.size(), 3u);
  EXPECT_LT(e.cauchy_gaps[1], e.cauchy_gaps[0]);
  EXPECT_LT(e.cauchy_gaps[2], e.cauchy_gaps[1]);
  EXPECT_NEAR(e.c, e.extrapolated / 2, 1e-15);
  for (const auto& s : e.samples) EXPECT_NEAR(s.a_n_outer, s.a_n / 2, 1e-9);
}

TEST(Scaling, ExtrapolationIsExactOnModel) {
  const std::vector<std::int64_t> n{8, 16, 32};
  std::vector<double> a;
  for (auto k : n) a.push_back(0.3 + 1.0 / k - 2.0 / (k * k));
  EXPECT_NEAR(extrapolate_sequence(n, a), 0.3, 1e-12);
}

TEST(HeightBound, EmptyListGivesEmptyReport) {
  const HeightBoundReport r = height_bound_check(segment(2), 8, {});
  EXPECT_TRUE(r.rows.empty());
}
