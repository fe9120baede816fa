#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <map>

#include "dlalab/harmonic.hpp"
#include "dlalab/rng.hpp"
#include "dlalab/walk.hpp"

using namespace dlalab;

TEST(Rng, StreamsAreReproducibleAndDistinct) {
  RngStream a(42, 3), b(42, 3), c(42, 4);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next_u64();
    EXPECT_EQ(x, b.next_u64());
    differs = differs || x != c.next_u64();
  }
  EXPECT_TRUE(differs);
  EXPECT_NE(derive_seed(1, 0), derive_seed(1, 1));
}

TEST(Rng, ExponentialMean) {
  RngStream r(7, 0);
  double sum = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) sum += r.exponential(4.0);
  EXPECT_NEAR(sum / n, 0.25, 4 * 0.25 / std::sqrt(n));
}

TEST(Rng, UniformBelowIsInRange) {
  RngStream r(1, 1);
  std::array<int, 5> hist{};
  for (int i = 0; i < 50000; ++i) ++hist.at(r.uniform_below(5));
  for (int h : hist) EXPECT_NEAR(h, 10000, 400);
}

// Exit distribution from the centre of [-h,h]^2 by a direct linear solve.
static std::map<Site, double> square_exit_by_solve(std::int64_t h) {
  const std::int64_t w = 2 * h - 1;
  auto idx = [&](Site s) { return (s.x + h - 1) * w + (s.y + h - 1); };
  std::map<Site, double> out;
  for (std::int64_t bx = -h; bx <= h; ++bx) {
    for (std::int64_t by = -h; by <= h; ++by) {
      if (std::max(std::abs(bx), std::abs(by)) != h) continue;
      Eigen::MatrixXd a = Eigen::MatrixXd::Zero(w * w, w * w);
      Eigen::VectorXd rhs = Eigen::VectorXd::Zero(w * w);
      for (std::int64_t x = 1 - h; x < h; ++x) {
        for (std::int64_t y = 1 - h; y < h; ++y) {
          const Site s{x, y};
          a(idx(s), idx(s)) = 1.0;
          for (const Site& n : neighbors(s)) {
            if (std::max(std::abs(n.x), std::abs(n.y)) == h) {
              rhs(idx(s)) += (n == Site{bx, by}) ? 0.25 : 0.0;
            } else {
              a(idx(s), idx(n)) -= 0.25;
            }
          }
        }
      }
      out[{bx, by}] = a.partialPivLu().solve(rhs)(idx({0, 0}));
    }
  }
  return out;
}

TEST(SquareExitLaw, HalfwidthOneIsUniform) {
  const SquareExitLaw law(1);
  for (const Site& n : neighbors({0, 0})) EXPECT_NEAR(law.probability(n), 0.25, 1e-12);
  EXPECT_NEAR(law.probability({1, 1}), 0.0, 1e-15);
}

TEST(SquareExitLaw, MatchesLinearSolve) {
  for (std::int64_t h : {2, 3, 5, 8}) {
    const SquareExitLaw law(h);
    EXPECT_NEAR(law.total_mass(), 1.0, 1e-12);
    for (const auto& [site, p] : square_exit_by_solve(h)) {
      EXPECT_NEAR(law.probability(site), p, 1e-10) << "h=" << h << " site " << site.x << "," << site.y;
    }
  }
}

TEST(SquareExitLaw, HalfwidthTwoAgainstPathEnumeration) {
  // Propagate the walk for 30 steps; mass still inside bounds the error.
  const std::int64_t h = 2;
  std::map<Site, double> inside{{{0, 0}, 1.0}}, exited;
  for (int step = 0; step < 30; ++step) {
    std::map<Site, double> next;
    for (const auto& [s, p] : inside) {
      for (const Site& n : neighbors(s)) {
        (std::max(std::abs(n.x), std::abs(n.y)) == h ? exited : next)[n] += p / 4;
      }
    }
    inside = std::move(next);
  }
  double remaining = 0;
  for (const auto& [s, p] : inside) remaining += p;
  const SquareExitLaw law(h);
  for (const auto& [s, p] : exited) {
    EXPECT_LE(p, law.probability(s) + 1e-15);
    EXPECT_GE(p + remaining, law.probability(s) - 1e-15);
  }
  EXPECT_LT(law.probability({2, 2}), law.probability({2, 0}));
  EXPECT_NEAR(law.probability({2, 1}), law.probability({-1, -2}), 1e-14);
}

TEST(SquareExitLaw, SamplingMatchesProbabilities) {
  const SquareExitLaw law(4);
  RngStream rng(3, 0);
  std::map<Site, int> hist;
  const int n = 100000;
  for (int i = 0; i < n; ++i) ++hist[law.sample(rng)];
  for (const auto& [s, c] : hist) {
    const double p = law.probability(s);
    EXPECT_GT(p, 0.0);
    EXPECT_NEAR(c, n * p, 5 * std::sqrt(n * p) + 1);
  }
}

TEST(Launch, RadiusOneRing) {
  const auto ring = ball_outer_ring(1);
  EXPECT_EQ(ring.size(), 4u);
  const auto lr = LaunchRing::get({1, LaunchDistribution::UniformOnRing});
  for (double w : lr->weights()) EXPECT_NEAR(w, 0.25, 1e-12);
}

TEST(Launch, ExactWeightsAreNormalisedAndSymmetric) {
  const auto ring = ball_outer_ring(8);
  const auto w = ring_harmonic_from_infinity(8, ring);
  ASSERT_EQ(w.size(), ring.size());
  double sum = 0;
  std::map<Site, double> by_site;
  for (std::size_t i = 0; i < ring.size(); ++i) {
    sum += w[i];
    by_site[ring[i]] = w[i];
  }
  EXPECT_NEAR(sum, 1.0, 1e-9);
  for (const auto& [s, p] : by_site) {
    EXPECT_NEAR(p, by_site.at({-s.x, s.y}), 1e-9);
    EXPECT_NEAR(p, by_site.at({s.y, s.x}), 1e-9);
  }
}

TEST(Launch, UniformRingFrequencies) {
  const auto lr = LaunchRing::get({8, LaunchDistribution::UniformOnRing});
  RngStream rng(11, 0);
  std::map<Site, int> hist;
  const int n = 100000;
  for (int i = 0; i < n; ++i) ++hist[lr->launch(rng)];
  const double p = 1.0 / static_cast<double>(lr->sites().size());
  EXPECT_EQ(hist.size(), lr->sites().size());
  for (const auto& [s, c] : hist) EXPECT_NEAR(c, n * p, 4 * std::sqrt(n * p * (1 - p)) + 1);
}

class WalkLaw : public ::testing::TestWithParam<bool> {};

// From (0,2) onto D_1 with D_4 \ D_1 absorbing, compared to the exact table.
TEST_P(WalkLaw, HitDistributionMatchesExact) {
  const SiteSet target = to_set(SegmentSpec{1}.sites());
  SiteSet absorber;
  for (const Site& s : SegmentSpec{4}.sites()) {
    if (!target.contains(s)) absorber.insert(s);
  }
  const HarmonicTable exact = exact_edge_harmonic_from({0, 2}, target, absorber);
  const auto ring = LaunchRing::get({8, LaunchDistribution::UniformOnRing});
  WalkOptions opts = walk_options_for(ring, GetParam() ? AccelerationPolicy::square_jump() : AccelerationPolicy::none(),
                                      kDefaultWalkBudget, ReentryMode::PoissonKernel, 2.0);
  opts.verify_jumps = true;
  const int n = 40000;
  std::map<DirectedEdge, int> hist;
  int absorbed = 0;
  for (int i = 0; i < n; ++i) {
    RngStream rng(5, i);
    const WalkOutcome o = run_to_absorption({0, 2}, target, absorber, opts, rng);
    ASSERT_TRUE(o.hit());
    if (o.kind == WalkOutcome::Kind::HitTarget) {
      ++hist[o.edge];
    } else {
      ++absorbed;
    }
  }
  for (const auto& e : exact.entries) {
    const double p = e.value;
    EXPECT_NEAR(hist[e.edge], n * p, 4.5 * std::sqrt(n * p * (1 - p)) + 1);
  }
  const double lazy = exact.lazy_mass;
  EXPECT_NEAR(absorbed, n * lazy, 4.5 * std::sqrt(n * lazy * (1 - lazy)) + 1);
}

INSTANTIATE_TEST_SUITE_P(Acceleration, WalkLaw, ::testing::Bool());

TEST(Walk, DeterministicOutcome) {
  const SiteSet target = to_set(SegmentSpec{2}.sites());
  const auto ring = LaunchRing::get({16, LaunchDistribution::UniformOnRing});
  const WalkOptions opts =
      walk_options_for(ring, AccelerationPolicy::square_jump(), kDefaultWalkBudget, ReentryMode::PoissonKernel, 2.0);
  RngStream a(9, 1), b(9, 1);
  const Site start = ring->launch(a);
  ASSERT_EQ(start, ring->launch(b));
  const WalkOutcome x = run_to_absorption(start, target, {}, opts, a);
  const WalkOutcome y = run_to_absorption(start, target, {}, opts, b);
  EXPECT_EQ(x.edge, y.edge);
  EXPECT_EQ(x.steps, y.steps);
  EXPECT_EQ(x.jumps, y.jumps);
}

TEST(Walk, RejectsStartOnObstacle) {
  ObstacleIndex idx;
  idx.insert({0, 0}, SiteTag::Target);
  RngStream rng(1, 0);
  EXPECT_THROW(run_to_absorption({0, 0}, idx, WalkOptions{}, rng), std::invalid_argument);
  ObstacleIndex empty;
  EXPECT_THROW(run_to_absorption({0, 0}, empty, WalkOptions{}, rng), std::invalid_argument);
}

TEST(Walk, BudgetExhaustion) {
  ObstacleIndex idx;
  idx.insert({1000, 0}, SiteTag::Target);
  WalkOptions opts;
  opts.policy = AccelerationPolicy::none();
  opts.budget = 10;
  RngStream rng(1, 0);
  EXPECT_EQ(run_to_absorption({0, 0}, idx, opts, rng).kind, WalkOutcome::Kind::BudgetExhausted);
}
