#include <gtest/gtest.h>

#include <cmath>

#include "dlalab/coupling.hpp"

using namespace dlalab;

TEST(Dist, Examples) {
  const auto e = make_edge({0, 1}, {0, 0});
  EXPECT_DOUBLE_EQ(edge_distance(e, e), 1.0);
  EXPECT_DOUBLE_EQ(edge_distance(e, make_edge({5, 1}, {5, 0})), std::sqrt(26.0));
}

TEST(Classify, Branches) {
  const auto e1 = make_edge({0, 1}, {0, 0});
  EXPECT_EQ(classify_delta(e1, std::nullopt, 16, 0.1).kind, Classification::Kind::Good);
  // m^{1-5 alpha} = 4 for m = 16, alpha = 0.1.
  EXPECT_EQ(classify_delta(e1, make_edge({2, 1}, {2, 0}), 16, 0.1).kind, Classification::Kind::Good);
  EXPECT_EQ(classify_delta(e1, make_edge({10, 1}, {10, 0}), 16, 0.1).kind, Classification::Kind::Bad);
  // m^{0.7} ~ 6.96 and log 16 ~ 2.77.
  EXPECT_EQ(classify_delta(make_edge({40, 1}, {40, 0}), make_edge({5, 1}, {5, 0}), 16, 0.1).kind,
            Classification::Kind::Devastating);
  EXPECT_THROW(classify_delta(e1, std::nullopt, 16, 0.3), std::invalid_argument);
}

TEST(Coupling, FreshStateCaseOneAddsIdenticalEdge) {
  int seen = 0;
  for (std::uint64_t i = 0; i < 400; ++i) {
    CoupledProcess p(2, 3, 8);
    RngStream rng(17, i);
    const CoupledStepResult s = p.step(rng);
    if (s.tag != CaseTag::I) continue;
    ++seen;
    ASSERT_EQ(p.left().edges().size(), 1u);
    ASSERT_EQ(p.right().edges().size(), 1u);
    EXPECT_EQ(p.left().edges()[0].edge, p.right().edges()[0].edge);
    EXPECT_TRUE(SegmentSpec{2}.contains(p.left().edges()[0].edge.to));
    EXPECT_FALSE(s.delta);
  }
  EXPECT_GT(seen, 0);
}

TEST(Coupling, FirstStepNeverTwoEdgeCase) {
  // From the fresh state the only site of V2 \ V1 lies on the axis, so
  // Cases II and III cannot occur on the first step.
  for (std::uint64_t i = 0; i < 400; ++i) {
    CoupledProcess p(2, 3, 8);
    RngStream rng(18, i);
    const CaseTag t = p.step(rng).tag;
    EXPECT_NE(t, CaseTag::II);
    EXPECT_NE(t, CaseTag::III);
  }
}

TEST(Coupling, ConstructedStateProducesCaseTwo) {
  AggregateState left(SegmentSpec{2}.sites()), right(SegmentSpec{3}.sites());
  left.add_edge(make_edge({0, 1}, {0, 0}), 0, 0);
  int two = 0;
  for (std::uint64_t i = 0; i < 2000 && two == 0; ++i) {
    CoupledProcess p(2, 3, 8, left, right);
    RngStream rng(19, i);
    const CoupledStepResult s = p.step(rng);
    if (s.tag == CaseTag::II) {
      ++two;
      ASSERT_TRUE(s.e2.has_value());
      EXPECT_EQ(s.e1->to, (Site{0, 1}));
      EXPECT_TRUE(p.left().contains(*s.e1));
      EXPECT_FALSE(p.right().contains(*s.e1));
      EXPECT_TRUE(p.right().contains(*s.e2));
    }
  }
  EXPECT_GT(two, 0);
}

TEST(Coupling, ConstructedStateIsValidated) {
  AggregateState left(SegmentSpec{3}.sites()), right(SegmentSpec{3}.sites());
  EXPECT_THROW(CoupledProcess(2, 3, 8, left, right), std::invalid_argument);
}

TEST(Coupling, RunsSatisfyLedgerInvariants) {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const CoupledRun run = run_coupled(2, 4, 24, {}, 31, s);
    EXPECT_EQ(check_ledger_invariants(run), "") << "stream " << s;
    EXPECT_EQ(run.steps, 48u);
    EXPECT_EQ(run.ledger.steps(), 48u);
  }
}

TEST(Coupling, Deterministic) {
  const CoupledRun a = run_coupled(2, 3, 16, {}, 5, 1);
  const CoupledRun b = run_coupled(2, 3, 16, {}, 5, 1);
  EXPECT_EQ(a.ledger.data_jsonl(), b.ledger.data_jsonl());
}

TEST(WindowAgreement, NoDeltaMeansAgreement) {
  AggregateState left(SegmentSpec{3}.sites()), right(SegmentSpec{3}.sites());
  const auto w = window_agreement(left, right, WindowSpec::box(-1, 1, 0, 1), 4);
  EXPECT_EQ(w.agree.size(), 5u);
  for (bool b : w.agree) EXPECT_TRUE(b);
  EXPECT_FALSE(w.first_disagreement.has_value());
}

TEST(WindowAgreement, DetectsDifference) {
  AggregateState left(SegmentSpec{3}.sites()), right(SegmentSpec{3}.sites());
  left.add_edge(make_edge({0, 1}, {0, 0}), 2, 0.1);
  const auto w = window_agreement(left, right, WindowSpec::box(-1, 1, 0, 1), 4);
  EXPECT_TRUE(w.agree[1]);
  EXPECT_FALSE(w.agree[2]);
  EXPECT_EQ(w.first_disagreement, 2u);
  const auto far = window_agreement(left, right, WindowSpec::box(20, 22, 0, 1), 4);
  EXPECT_FALSE(far.first_disagreement.has_value());
}
