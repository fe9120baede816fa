#include <gtest/gtest.h>

#include <map>

#include "dlalab/harmonic.hpp"
#include "dlalab/process.hpp"

using namespace dlalab;

TEST(Process, InitialStates) {
  const AggregateState e = init_process(ProcessConfig::edla(SegmentSpec{4}.sites(), 10));
  EXPECT_EQ(e.vertices().size(), 9u);
  EXPECT_TRUE(e.edges().empty());
  const AggregateState i = init_process(ProcessConfig::intermediate(2, 8));
  EXPECT_EQ(i.vertices().size(), 5u);
  EXPECT_TRUE(i.edges().empty());
  EXPECT_THROW(ProcessConfig::intermediate(9, 8).validate(), std::invalid_argument);
  EXPECT_THROW(ProcessConfig::intermediate(-1, 8).validate(), std::invalid_argument);
}

TEST(Process, HorizonDefaultsToTwoN) {
  const Trajectory t = run_process(ProcessConfig::intermediate(8, 64), 7);
  EXPECT_NO_THROW(ProcessConfig::intermediate(0, 8).validate());
  EXPECT_EQ(t.events.size(), 128u);
  EXPECT_EQ(t.added + t.lazy + t.dropped, 128u);
  EXPECT_EQ(t.final_state.edges().size(), t.added);
  EXPECT_TRUE(t.final_state.check_vertex_identity());
  for (std::size_t k = 1; k < t.events.size(); ++k) EXPECT_GT(t.events[k].time, t.events[k - 1].time);
}

TEST(Process, HorizonZeroKeepsOnlyInitialSnapshot) {
  ProcessConfig cfg = ProcessConfig::intermediate(2, 8);
  cfg.horizon_steps = 0;
  const Trajectory t = run_process(cfg, 1);
  EXPECT_TRUE(t.events.empty());
  ASSERT_EQ(t.snapshots.size(), 1u);
  EXPECT_EQ(t.snapshots[0].step, 0u);
}

TEST(Process, SameSeedSameBytes) {
  ProcessConfig cfg = ProcessConfig::edla(SegmentSpec{2}.sites(), 40);
  cfg.snapshot_steps = {0, 10, 40};
  EXPECT_EQ(run_process(cfg, 5, 2).data_jsonl(), run_process(cfg, 5, 2).data_jsonl());
  EXPECT_NE(run_process(cfg, 5, 2).data_jsonl(), run_process(cfg, 5, 3).data_jsonl());
}

TEST(Process, EdlaAddsAnEdgeEveryStep) {
  const Trajectory t = run_process(ProcessConfig::edla(SegmentSpec{1}.sites(), 50), 3);
  EXPECT_EQ(t.added, 50u);
  EXPECT_EQ(t.final_state.edges().size(), 50u);
  EXPECT_TRUE(t.final_state.check_vertex_identity());
  for (const auto& e : t.final_state.edges()) EXPECT_TRUE(is_unit_edge(e.edge));
}

TEST(Process, EdlaFirstStepMatchesExactTable) {
  const ProcessConfig cfg = ProcessConfig::edla(SegmentSpec{1}.sites(), 1);
  const HarmonicTable exact = exact_edge_harmonic(to_set(SegmentSpec{1}.sites()), {});
  std::map<DirectedEdge, int> hist;
  const int n = 40000;
  for (int i = 0; i < n; ++i) {
    GrowthProcess p(cfg);
    RngStream rng(21, i);
    const EventRecord e = p.step(rng);
    ASSERT_EQ(e.kind, EventRecord::Kind::Added);
    ++hist[e.edge];
  }
  for (const auto& e : exact.entries) {
    EXPECT_NEAR(hist[e.edge], n * e.value, 4.5 * std::sqrt(n * e.value * (1 - e.value)) + 1);
  }
}

TEST(Process, AddEdgeRejectsInvalidEdges) {
  AggregateState s(SegmentSpec{1}.sites());
  EXPECT_THROW(s.add_edge(make_edge({5, 5}, {5, 6}), 1, 0.1), std::logic_error);
  s.add_edge(make_edge({0, 1}, {0, 0}), 1, 0.1);
  EXPECT_TRUE(s.contains(Site{0, 1}));
  EXPECT_THROW(s.add_edge(make_edge({0, 1}, {0, 0}), 2, 0.2), std::logic_error);
  EXPECT_TRUE(s.check_vertex_identity());
}

TEST(Process, SubgraphAtStep) {
  AggregateState s(SegmentSpec{0}.sites());
  s.add_edge(make_edge({0, 1}, {0, 0}), 1, 0.5);
  s.add_edge(make_edge({0, 2}, {0, 1}), 2, 0.7);
  EXPECT_EQ(s.subgraph_at(0).edges.size(), 0u);
  EXPECT_EQ(s.subgraph_at(1).vertices.size(), 2u);
  EXPECT_EQ(s.subgraph_at(2), s.subgraph());
}

TEST(Window, Restriction) {
  AggregateState s(SegmentSpec{3}.sites());
  s.add_edge(make_edge({0, 1}, {0, 0}), 1, 0.5);
  EXPECT_TRUE(restrict_to_window(s, WindowSpec::box(10, 12, 10, 12)).empty());
  Subgraph all = restrict_to_window(s, WindowSpec::box(-5, 5, 0, 5));
  EXPECT_EQ(all, s.subgraph());
  Subgraph part = restrict_to_window(s, WindowSpec::box(0, 1, 0, 0));
  EXPECT_EQ(part.vertices.size(), 2u);
  EXPECT_TRUE(part.edges.empty());
}

TEST(Process, TimeHorizon) {
  ProcessConfig cfg = ProcessConfig::edla(SegmentSpec{1}.sites(), 0);
  cfg.horizon_steps.reset();
  cfg.horizon_time = 1.5;
  const Trajectory t = run_process(cfg, 2);
  ASSERT_FALSE(t.events.empty());
  for (const auto& e : t.events) EXPECT_LE(e.time, 1.5);
  // Rate-1 clock: the event count over [0, 1.5] is Poisson(1.5), far below 40.
  EXPECT_LT(t.events.size(), 40u);
}
