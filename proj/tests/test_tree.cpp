#include <gtest/gtest.h>

#include "support/oracles.hpp"

using namespace tnc;

TEST(ContractionTree, CostMatchesSetAlgebraOracle) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 50; ++trial) {
    const auto net = oracle::random_network(8, 12, rng, 3);
    const auto path = oracle::random_ssa_path(net.size(), rng);
    const auto t = ContractionTree::from_ssa(net.shapes(), path);
    EXPECT_EQ(t.total_cost(), oracle::sum(oracle::path_step_costs(net.shapes(), path)));
    EXPECT_EQ(t.internal_count(), net.size() - 1);
    EXPECT_TRUE(t.node(t.root()).indices.empty());
  }
}

TEST(ContractionTree, RejectsBadPaths) {
  const std::vector<IndexList> shapes{{{"a", 2}}, {{"a", 2}, {"b", 2}}, {{"b", 2}}};
  EXPECT_THROW(ContractionTree::from_ssa(shapes, {{0, 0}}), InvalidArgument);
  EXPECT_THROW(ContractionTree::from_ssa(shapes, {{0, 1}, {0, 2}}), InvalidArgument);
  EXPECT_THROW(ContractionTree::from_ssa(shapes, {{0, 7}}), InvalidArgument);
}

TEST(ContractionTree, PartialPathIsCompletedWithOuterProducts) {
  const std::vector<IndexList> shapes{{{"a", 2}}, {{"a", 2}}, {{"b", 2}}, {{"b", 2}}};
  const auto t = ContractionTree::from_ssa(shapes, {{0, 1}});
  EXPECT_EQ(t.internal_count(), 3u);
}

TEST(ContractionTree, LargerOperandGoesLeft) {
  std::mt19937_64 rng(32);
  const auto net = oracle::random_network(9, 14, rng);
  const auto t = ContractionTree::from_ssa(net.shapes(), oracle::random_ssa_path(net.size(), rng));
  for (std::size_t id = t.leaf_count(); id < t.node_count(); ++id)
    EXPECT_GE(t.volume(static_cast<std::size_t>(t.node(id).left)), t.volume(static_cast<std::size_t>(t.node(id).right)));
}

TEST(ContractionTree, SsaPathRoundTripKeepsCost) {
  std::mt19937_64 rng(33);
  const auto net = oracle::random_network(7, 10, rng);
  const auto t = ContractionTree::from_ssa(net.shapes(), oracle::random_ssa_path(net.size(), rng));
  const auto back = ContractionTree::from_ssa(net.shapes(), ssa_path_from_json(json::parse(tree_to_json(t).dump())));
  EXPECT_EQ(back.total_cost(), t.total_cost());
}

TEST(TreeMetrics, SlicedLegsCountAsOne) {
  const std::vector<IndexList> shapes{{{"a", 2}, {"b", 4}}, {{"b", 4}, {"c", 2}}, {{"a", 2}, {"c", 2}}};
  const auto t = ContractionTree::from_ssa(shapes, {{0, 1}, {3, 2}});
  const auto m = tree_metrics(t);
  EXPECT_EQ(m.total_cost, 16u + 4u);
  EXPECT_EQ(m.max_rank, 2u);
  EXPECT_EQ(tree_metrics(t, {"b"}).total_cost, 4u + 4u);
}

TEST(GreedyPath, DeterministicPerSeedAndValid) {
  std::mt19937_64 rng(34);
  const auto net = oracle::random_network(10, 15, rng);
  const auto a = greedy_path(net.shapes(), 5), b = greedy_path(net.shapes(), 5);
  EXPECT_EQ(a.ssa_path(), b.ssa_path());
  EXPECT_EQ(a.internal_count(), net.size() - 1);
}

TEST(GreedyPath, CostEqualsExecutedMultiplies) {
  std::mt19937_64 rng(35);
  for (int trial = 0; trial < 10; ++trial) {
    const auto net = oracle::random_network(10, 13, rng);
    const auto s = linearize(greedy_path(net.shapes(), trial));
    EXPECT_EQ(run_direct(s, leaves_as<double>(net)).stats.multiplies, s.total_cost());
  }
}

TEST(Linearize, EveryNodeOnceChildrenFirst) {
  std::mt19937_64 rng(36);
  for (int trial = 0; trial < 30; ++trial) {
    const auto net = oracle::random_network(9, 13, rng);
    const auto s = linearize(ContractionTree::from_ssa(net.shapes(), oracle::random_ssa_path(net.size(), rng)));
    ASSERT_EQ(s.size(), s.tree.internal_count());
    for (StepId id = 1; id <= s.size(); ++id) {
      const auto& st = s.step(id);
      EXPECT_EQ(s.step_of_node[st.node], id);
      for (auto child : {st.lhs, st.rhs})
        if (!s.tree.is_leaf(child)) EXPECT_LT(s.step_of_node[child], id);
    }
    EXPECT_EQ(s.frontier(s.size()), std::vector<std::size_t>{s.tree.root()});
    EXPECT_TRUE(s.frontier(0).empty());
  }
}

TEST(Linearize, StemChainIsContiguous) {
  auto b = oracle::oscillating_stem(12, 6, 9);
  const auto s = b.schedule();
  ASSERT_EQ(s.stems.size(), 1u);
  const auto& chain = s.stems[0].steps;
  EXPECT_EQ(chain.size(), 12u);
  for (std::size_t i = 1; i < chain.size(); ++i) EXPECT_EQ(chain[i], chain[i - 1] + 1);
  EXPECT_FALSE(s.multi_stem);
}

TEST(Linearize, TwoStemNetworkIsMultiStem) {
  const auto n = oracle::two_stem_network();
  const auto s = linearize(ContractionTree::from_ssa(n.shapes, n.path));
  EXPECT_TRUE(s.multi_stem);
  ASSERT_GE(s.stems.size(), 2u);
  EXPECT_EQ(s.stems[0].steps.size() + s.stems[1].steps.size(), 14u);
}
