#include <gtest/gtest.h>

#include "support/oracles.hpp"

using namespace tnc;

namespace {

/// Stem whose sliced legs a (steps 1..3) and b (steps 2..4) cross.
oracle::StemBuilder crossing_stem() {
  oracle::StemBuilder b(oracle::legs("s", 1, 7));
  b.absorb({"s1"}, {{"a", 2}});
  b.absorb({"s2"}, {{"b", 2}});
  b.absorb({"s3", "a"}, {});
  b.absorb({"s4", "b"}, {});
  return b;
}

std::multiset<std::uint64_t> step_costs(const LinearSchedule& s) {
  std::multiset<std::uint64_t> out;
  for (StepId id = 1; id <= s.size(); ++id) out.insert(s.cost(id));
  return out;
}

}  // namespace

TEST(Lifetimes, FirstUseToSummation) {
  const auto s = crossing_stem().schedule();
  const auto life = compute_lifetimes(s);
  EXPECT_EQ(life.at("a"), (Lifetime{1, 3}));
  EXPECT_EQ(life.at("b"), (Lifetime{2, 4}));
  EXPECT_EQ(life.at("s6"), (Lifetime{1, 4}));  // open leg lives to the end
  EXPECT_THROW(lifetime_of(s, "zz"), InvalidArgument);
}

TEST(SliceSpec, NestingAndCrossings) {
  const auto s = crossing_stem().schedule();
  const auto spec = make_slice_spec(s, {"a", "b"});
  EXPECT_FALSE(spec.nesting_ok);
  EXPECT_EQ(crossing_pairs(spec.entries), 1u);
  EXPECT_EQ(spec.subtasks(), 4u);
  EXPECT_TRUE(make_slice_spec(s, {"a"}).nesting_ok);
}

TEST(IndexOverhead, MatchesProjectedStepCosts) {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 30; ++trial) {
    const auto net = oracle::random_network(8, 12, rng, 3);
    const auto path = oracle::random_ssa_path(net.size(), rng);
    const auto t = ContractionTree::from_ssa(net.shapes(), path);
    const auto c_ori = oracle::sum(oracle::path_step_costs(net.shapes(), path));
    for (const auto& a : t.closed_indices()) {
      const auto c_a = oracle::sum(oracle::path_step_costs(net.shapes(), path, {a.label}));
      EXPECT_EQ(index_overhead(t, a), Rational(static_cast<std::int64_t>(a.dim * c_a), static_cast<std::int64_t>(c_ori)));
    }
  }
}

TEST(IndexOverhead, SingleStepNetworkIsOne) {
  const std::vector<IndexList> shapes{{{"i", 2}, {"j", 2}}, {{"i", 2}, {"j", 2}}};
  const auto t = ContractionTree::from_ssa(shapes, {{0, 1}});
  EXPECT_EQ(index_overhead(t, {"i", 2}), Rational(1));
}

TEST(IndexOverhead, LegAbsentFromMostWorkCostsAlmostDouble) {
  const auto b = crossing_stem();
  const auto s = b.schedule();
  const auto o = index_overhead(s.tree, {"a", 2});
  EXPECT_GT(o, Rational(1));
  EXPECT_LT(o, Rational(2));
}

TEST(SelectSlices, ReachesCapWithPredictedOverhead) {
  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 15; ++trial) {
    const auto c = oracle::random_circuit(8, 5, rng);
    const auto net = circuit_to_network(c, oracle::random_bits(8, rng));
    const auto s = linearize(greedy_path(net.shapes(), trial));
    const auto max_rank = tree_metrics(s.tree).max_rank;
    if (max_rank < 6) continue;
    const auto sel = select_slices(s, max_rank - 2, 0, trial);
    ASSERT_TRUE(sel.success) << sel.failure;
    EXPECT_LE(tree_metrics(s.tree, sel.spec.labels()).max_rank, max_rank - 2);
    const auto predicted = Rational::from_wide(__int128(sel.spec.subtasks()) * s.total_cost(sel.spec.labels()), s.total_cost());
    EXPECT_EQ(sel.total_overhead, predicted);
    EXPECT_EQ(sel.round_overheads.size(), sel.spec.entries.size());
  }
}

TEST(SelectSlices, FailsWhenLeafExceedsCap) {
  std::mt19937_64 rng(43);
  const auto net = circuit_to_network(oracle::random_circuit(4, 3, rng), "0000");
  const auto s = linearize(greedy_path(net.shapes(), 1));
  const auto sel = select_slices(s, 2, 0, 1);
  EXPECT_FALSE(sel.success);
  EXPECT_NE(sel.failure.find("leaf"), std::string::npos);
}

TEST(SelectSlices, CandidateBudgetIsSeeded) {
  std::mt19937_64 rng(44);
  const auto net = circuit_to_network(oracle::random_circuit(9, 6, rng), std::string(9, '0'));
  const auto s = linearize(greedy_path(net.shapes(), 2));
  const auto cap = std::max<std::size_t>(4, tree_metrics(s.tree).max_rank - 3);
  const auto a = select_slices(s, cap, 2, 7), b = select_slices(s, cap, 2, 7);
  ASSERT_TRUE(a.success);
  EXPECT_EQ(a.spec.labels(), b.spec.labels());
  EXPECT_LE(a.evaluations, 2 * a.spec.entries.size());
}

TEST(BranchExchange, NestsCrossingLifetimesWithoutChangingCosts) {
  const auto b = crossing_stem();
  const auto s = b.schedule();
  const auto spec = make_slice_spec(s, {"a", "b"});
  const auto ex = branch_exchange_nest(s, spec);
  EXPECT_TRUE(ex.nesting_ok);
  EXPECT_EQ(ex.swaps, 1u);
  EXPECT_EQ(step_costs(ex.schedule), step_costs(s));
  EXPECT_EQ(ex.schedule.total_cost(), s.total_cost());
  std::mt19937_64 rng(45);
  const auto net = b.network(rng);
  const auto before = run_direct(s, leaves_as<double>(net)).value;
  const auto after = run_direct(ex.schedule, leaves_as<double>(net)).value;
  ASSERT_EQ(before.indices(), after.indices());
  for (std::size_t i = 0; i < before.size(); ++i) EXPECT_LT(std::abs(before[i] - after[i]), 1e-12);
}

TEST(BranchExchange, ReportsWhenNoSwapHelps) {
  // neighbouring branches share d and c, so only the middle pair may swap
  oracle::StemBuilder b(oracle::legs("s", 1, 6));
  b.absorb({"s1"}, {{"a", 2}, {"d", 2}});
  b.absorb({"s2", "d"}, {{"b", 2}});
  b.absorb({"s3", "a"}, {{"c", 2}});
  b.absorb({"c", "b"}, {});
  const auto s = b.schedule();
  const auto spec = make_slice_spec(s, {"a", "b"});
  ASSERT_FALSE(spec.nesting_ok);
  EXPECT_FALSE(branch_exchange_nest(s, spec).nesting_ok);
}

TEST(SliceSpecJson, RoundTripAndValidation) {
  const auto s = crossing_stem().schedule();
  const auto spec = make_slice_spec(s, {"a"});
  const auto back = slice_spec_from_json(json::parse(slice_spec_to_json(spec).dump()));
  EXPECT_EQ(back.labels(), spec.labels());
  EXPECT_EQ(back.entries[0].lifetime, spec.entries[0].lifetime);
  auto j = slice_spec_to_json(spec);
  j[0]["fork"] = 3;
  EXPECT_THROW(slice_spec_from_json(j), InvalidArgument);
}
