#include <gtest/gtest.h>

#include <set>

#include "dlalab/stats.hpp"

using namespace dlalab;

// Reference values below were computed with scipy/statsmodels.
TEST(ChiSquare, ReferenceValues) {
  const auto a = chi_square_gof({18, 22, 20, 40}, {0.2, 0.2, 0.2, 0.4});
  EXPECT_NEAR(a.statistic, 0.4, 1e-12);
  EXPECT_EQ(a.dof, 3);
  EXPECT_NEAR(a.p_value, 0.9402424948393607, 1e-9);
  const auto b = chi_square_gof({30, 14, 34, 45, 57, 20}, {0.1, 0.1, 0.1, 0.2, 0.3, 0.2});
  EXPECT_NEAR(b.statistic, 27.375, 1e-9);
  EXPECT_NEAR(b.p_value, 4.820796405175916e-05, 1e-10);
}

TEST(ChiSquare, PoolsSmallCells) {
  const auto r = chi_square_gof({50, 45, 3, 2}, {0.5, 0.46, 0.02, 0.02});
  EXPECT_EQ(r.cells, 3u);
  EXPECT_EQ(r.dof, 2);
}

TEST(ChiSquare, ImpossibleOutcomeFails) {
  EXPECT_LT(chi_square_gof({100, 0, 5}, {0.5, 0.5, 0.0}).p_value, 1e-6);
}

TEST(Ks, Exponential) {
  const auto r = ks_exponential({0.1, 0.5, 0.9, 1.3, 2.2, 0.05, 0.7, 3.1, 0.4, 1.0}, 1.0);
  EXPECT_NEAR(r.statistic, 0.12967995396436066, 1e-12);
  EXPECT_GT(r.p_value, 0.5);
  EXPECT_NEAR(kolmogorov_survival(1.0), 0.26999967167735456, 1e-9);
  RngStream rng(1, 0);
  std::vector<double> x;
  for (int i = 0; i < 5000; ++i) x.push_back(rng.exponential(3.0));
  EXPECT_GT(ks_exponential(x, 3.0).p_value, 0.001);
  EXPECT_LT(ks_exponential(x, 1.5).p_value, 1e-6);
}

TEST(Wilson, Reference) {
  const Interval i = wilson_interval(183, 200);
  EXPECT_NEAR(i.lo, 0.8681041292843443, 1e-4);
  EXPECT_NEAR(i.hi, 0.9462542498225244, 1e-4);
}

TEST(Tv, IdentityAndDisjoint) {
  EmpiricalWindowLaw a;
  a.times = {0};
  a.replicas = 10;
  a.counts = {{{"x", 4}, {"y", 6}}};
  EmpiricalWindowLaw b = a;
  EXPECT_DOUBLE_EQ(tv_distance(a, b)[0], 0.0);
  b.counts = {{{"z", 10}}};
  EXPECT_DOUBLE_EQ(tv_distance(a, b)[0], 1.0);
}

TEST(Encoding, OrderIndependentAndDistinct) {
  Subgraph g;
  g.vertices = {{1, 0}, {0, 0}};
  g.edges = {make_edge({0, 1}, {0, 0})};
  Subgraph h;
  h.vertices = {{0, 0}, {1, 0}};
  h.edges = g.edges;
  EXPECT_EQ(canonical_encoding(g), canonical_encoding(h));
  h.edges = {make_edge({0, 0}, {0, 1})};
  EXPECT_NE(canonical_encoding(g), canonical_encoding(h));
  EXPECT_EQ(canonical_encoding(Subgraph{}), canonical_encoding(Subgraph{}));
}

TEST(Dimension, SyntheticProfiles) {
  std::vector<Site> box, column;
  for (std::int64_t y = 0; y <= 128; ++y) {
    column.push_back({0, y});
    for (std::int64_t x = -128; x <= 128; ++x) box.push_back({x, y});
  }
  EXPECT_NEAR(mass_dimension(box).exponent, 2.0, 0.1);
  EXPECT_NEAR(mass_dimension(column).exponent, 1.0, 0.05);
}

TEST(Envelope, ZeroReplicasIsAnError) {
  EXPECT_THROW(envelope_fraction(8, 64, 0, 1), std::invalid_argument);
}

TEST(Envelope, SmallRunReportsInterval) {
  const VerificationReport r = envelope_fraction(4, 32, 20, 3, 0.5);
  const double f = r.statistics["fraction"].get<double>();
  EXPECT_GE(f, r.statistics["wilson_lo"].get<double>());
  EXPECT_LE(f, r.statistics["wilson_hi"].get<double>());
  EXPECT_EQ(r.replicas, 20u);
}

TEST(Scarcity, SmallRunHasNoViolations) {
  ScarcityOptions o;
  o.window = WindowSpec::box(-2, 2, 0, 2);
  const VerificationReport r = discrepancy_scarcity(4, 32, 0.1, 10, 9, o);
  EXPECT_EQ(r.statistics["invariant_violations"].get<std::uint64_t>(), 0u);
  EXPECT_EQ(r.statistics["disagreements_without_prior_delta"].get<std::uint64_t>(), 0u);
}

TEST(WindowLaw, CountsSumToReplicas) {
  const auto law = window_law(ProcessConfig::intermediate(2, 8), WindowSpec::box(-1, 1, 0, 1), {0, 4, 16}, 30, 4);
  ASSERT_EQ(law.counts.size(), 3u);
  for (const auto& c : law.counts) {
    std::uint64_t total = 0;
    for (const auto& [k, v] : c) total += v;
    EXPECT_EQ(total, 30u);
  }
  EXPECT_EQ(law.counts[0].size(), 1u);
}
