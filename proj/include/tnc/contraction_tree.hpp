#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "tnc/index.hpp"
#include "tnc/tensor_io.hpp"

namespace tnc {

using LabelSet = std::set<std::string>;
using SsaPath = std::vector<std::pair<std::size_t, std::size_t>>;

struct TreeNode {
  std::ptrdiff_t left = -1;
  std::ptrdiff_t right = -1;
  std::ptrdiff_t parent = -1;
  IndexList indices;        // result legs
  IndexList union_indices;  // every leg touched by the step; empty for leaves

  bool is_leaf() const noexcept { return left < 0; }
};

inline std::uint64_t volume_excluding(std::span<const Index> indices, const LabelSet& sliced) {
  std::uint64_t v = 1;
  for (const auto& i : indices)
    if (!sliced.count(i.label)) v *= i.dim;
  return v;
}

inline std::size_t rank_excluding(std::span<const Index> indices, const LabelSet& sliced) {
  std::size_t r = 0;
  for (const auto& i : indices) r += sliced.count(i.label) ? 0 : 1;
  return r;
}

/// Binary pairwise-contraction plan. Nodes [0, leaf_count) are the network
/// tensors; the remaining nodes are contractions and the last one is the
/// root. The larger operand of every contraction is kept as the left child
/// (equal sizes: the smaller first label goes left).
class ContractionTree {
 public:
  ContractionTree() = default;

  /// Builds the tree from SSA pairs: leaves are ids 0..n-1, the k-th pair
  /// creates id n+k. Tensors left unpaired are joined by outer products in
  /// id order.
  static ContractionTree from_ssa(std::vector<IndexList> leaves, const SsaPath& path) {
    if (leaves.empty()) throw InvalidArgument("contraction tree needs at least one tensor");
    ContractionTree t;
    t.leaf_count_ = leaves.size();
    for (auto& l : leaves) {
      validate_indices(l);
      t.nodes_.push_back(TreeNode{-1, -1, -1, std::move(l), {}});
    }
    std::vector<bool> consumed(t.leaf_count_, false);
    for (const auto& [i, j] : path) {
      if (i == j || i >= t.nodes_.size() || j >= t.nodes_.size() || consumed[i] || consumed[j])
        throw InvalidArgument("invalid ssa pair (" + std::to_string(i) + ", " + std::to_string(j) + ")");
      consumed[i] = consumed[j] = true;
      t.add_internal(i, j);
      consumed.push_back(false);
    }
    std::vector<std::size_t> open;
    for (std::size_t i = 0; i < consumed.size(); ++i)
      if (!consumed[i]) open.push_back(i);
    while (open.size() > 1) {
      const auto a = open[0], b = open[1];
      open.erase(open.begin(), open.begin() + 2);
      t.add_internal(a, b);
      open.insert(open.begin(), t.nodes_.size() - 1);
    }
    return t;
  }

  std::size_t leaf_count() const noexcept { return leaf_count_; }
  std::size_t node_count() const noexcept { return nodes_.size(); }
  std::size_t internal_count() const noexcept { return nodes_.size() - leaf_count_; }
  std::size_t root() const noexcept { return nodes_.size() - 1; }
  const TreeNode& node(std::size_t id) const { return nodes_.at(id); }
  bool is_leaf(std::size_t id) const { return id < leaf_count_; }

  std::uint64_t volume(std::size_t id, const LabelSet& sliced = {}) const {
    return volume_excluding(nodes_.at(id).indices, sliced);
  }
  std::size_t rank(std::size_t id, const LabelSet& sliced = {}) const {
    return rank_excluding(nodes_.at(id).indices, sliced);
  }
  /// Scalar multiplies of an internal node: volume of the union of its legs.
  std::uint64_t step_cost(std::size_t id, const LabelSet& sliced = {}) const {
    const auto& n = nodes_.at(id);
    return n.is_leaf() ? 0 : volume_excluding(n.union_indices, sliced);
  }

  std::uint64_t total_cost(const LabelSet& sliced = {}) const {
    std::uint64_t c = 0;
    for (std::size_t id = leaf_count_; id < nodes_.size(); ++id) c += step_cost(id, sliced);
    return c;
  }

  /// Every label in the network with its dim.
  std::map<std::string, std::size_t> labels() const {
    std::map<std::string, std::size_t> out;
    for (std::size_t i = 0; i < leaf_count_; ++i)
      for (const auto& x : nodes_[i].indices) out.emplace(x.label, x.dim);
    return out;
  }

  /// Labels that are summed somewhere in the tree.
  std::vector<Index> closed_indices() const {
    std::vector<Index> out;
    const auto& root_legs = nodes_[root()].indices;
    for (const auto& [label, dim] : labels())
      if (!contains_label(root_legs, label)) out.push_back({label, dim});
    return out;
  }

  /// Post-order over the current structure; yields SSA pairs usable by from_ssa.
  SsaPath ssa_path() const {
    SsaPath path;
    std::vector<std::size_t> ssa_of(nodes_.size(), 0);
    for (std::size_t i = 0; i < leaf_count_; ++i) ssa_of[i] = i;
    std::size_t next = leaf_count_;
    for (auto id : postorder()) {
      const auto& n = nodes_[id];
      path.emplace_back(ssa_of[n.left], ssa_of[n.right]);
      ssa_of[id] = next++;
    }
    return path;
  }

  /// Internal nodes, children before parents (left subtree first).
  std::vector<std::size_t> postorder() const {
    std::vector<std::size_t> out;
    std::vector<std::pair<std::size_t, bool>> stack{{root(), false}};
    while (!stack.empty()) {
      auto [id, expanded] = stack.back();
      stack.pop_back();
      if (is_leaf(id)) continue;
      if (expanded) {
        out.push_back(id);
        continue;
      }
      stack.push_back({id, true});
      stack.push_back({static_cast<std::size_t>(nodes_[id].right), false});
      stack.push_back({static_cast<std::size_t>(nodes_[id].left), false});
    }
    return out;
  }

  /// Labels carried by leaves under `id`.
  LabelSet subtree_labels(std::size_t id) const {
    LabelSet out;
    std::vector<std::size_t> stack{id};
    while (!stack.empty()) {
      const auto x = stack.back();
      stack.pop_back();
      if (is_leaf(x)) {
        for (const auto& i : nodes_[x].indices) out.insert(i.label);
      } else {
        stack.push_back(static_cast<std::size_t>(nodes_[x].left));
        stack.push_back(static_cast<std::size_t>(nodes_[x].right));
      }
    }
    return out;
  }

  /// Replaces the children of an internal node and refreshes the legs of it
  /// and all of its ancestors.
  void set_children(std::size_t id, std::size_t a, std::size_t b) {
    auto& n = nodes_.at(id);
    if (n.is_leaf()) throw InvalidArgument("cannot set children of a leaf");
    n.left = static_cast<std::ptrdiff_t>(a);
    n.right = static_cast<std::ptrdiff_t>(b);
    nodes_[a].parent = nodes_[b].parent = static_cast<std::ptrdiff_t>(id);
    for (std::ptrdiff_t x = static_cast<std::ptrdiff_t>(id); x >= 0; x = nodes_[x].parent) refresh(static_cast<std::size_t>(x));
  }

 private:
  void add_internal(std::size_t a, std::size_t b) {
    TreeNode n;
    n.left = static_cast<std::ptrdiff_t>(a);
    n.right = static_cast<std::ptrdiff_t>(b);
    nodes_.push_back(std::move(n));
    const auto id = nodes_.size() - 1;
    nodes_[a].parent = nodes_[b].parent = static_cast<std::ptrdiff_t>(id);
    refresh(id);
  }

  static bool goes_left(const IndexList& a, const IndexList& b) {
    const auto va = tnc::volume(a), vb = tnc::volume(b);
    if (va != vb) return va > vb;
    const std::string fa = a.empty() ? "" : a.front().label;
    const std::string fb = b.empty() ? "" : b.front().label;
    return fa <= fb;
  }

  void refresh(std::size_t id) {
    auto& n = nodes_[id];
    if (!goes_left(nodes_[n.left].indices, nodes_[n.right].indices)) std::swap(n.left, n.right);
    const auto& l = nodes_[n.left].indices;
    const auto& r = nodes_[n.right].indices;
    for (const auto& i : l) {
      const auto pos = find_label(r, i.label);
      if (pos >= 0 && r[static_cast<std::size_t>(pos)].dim != i.dim)
        throw DimensionMismatch("label '" + i.label + "' has mismatched dimensions");
    }
    n.indices = symmetric_difference(l, r);
    n.union_indices = index_union(l, r);
  }

  std::size_t leaf_count_ = 0;
  std::vector<TreeNode> nodes_;
};

struct StepMetric {
  std::size_t node = 0;
  std::uint64_t cost = 0;
  std::size_t rank = 0;
  std::uint64_t size = 0;
};

struct TreeMetrics {
  std::uint64_t total_cost = 0;
  std::size_t max_rank = 0;
  std::uint64_t peak_memory_elements = 0;
  std::vector<StepMetric> per_step;
};

/// Cost (scalar multiplies), rank and memory metrics; legs in `sliced`
/// count as dimension 1.
inline TreeMetrics tree_metrics(const ContractionTree& t, const LabelSet& sliced = {}) {
  TreeMetrics m;
  std::uint64_t max_size = 0;
  for (std::size_t id = t.leaf_count(); id < t.node_count(); ++id) {
    StepMetric s{id, t.step_cost(id, sliced), t.rank(id, sliced), t.volume(id, sliced)};
    m.total_cost += s.cost;
    m.max_rank = std::max(m.max_rank, s.rank);
    max_size = std::max(max_size, s.size);
    m.per_step.push_back(s);
  }
  bool all_two = true;
  for (const auto& [label, dim] : t.labels()) all_two = all_two && (dim == 2 || sliced.count(label));
  m.peak_memory_elements = all_two ? 3 * (std::uint64_t{1} << m.max_rank) : 3 * max_size;
  return m;
}

/// Pairwise greedy path: repeatedly contracts the connected pair with the
/// smallest result, breaking ties with a seeded generator. Disconnected
/// components are joined by outer products once nothing shares a leg.
inline ContractionTree greedy_path(const std::vector<IndexList>& shapes, std::uint64_t seed) {
  if (shapes.empty()) throw InvalidArgument("greedy path needs a nonempty network");
  std::mt19937_64 rng(seed);
  std::vector<IndexList> live(shapes.begin(), shapes.end());
  std::vector<std::size_t> ssa(shapes.size());
  std::vector<bool> alive(shapes.size(), true);
  for (std::size_t i = 0; i < ssa.size(); ++i) ssa[i] = i;
  std::size_t next = shapes.size();
  std::map<std::string, std::vector<std::size_t>> holders;
  for (std::size_t i = 0; i < live.size(); ++i)
    for (const auto& x : live[i]) holders[x.label].push_back(i);

  SsaPath path;
  std::size_t remaining = live.size();
  while (remaining > 1) {
    std::set<std::pair<std::size_t, std::size_t>> candidates;
    for (const auto& [label, hs] : holders) {
      std::vector<std::size_t> h;
      for (auto x : hs)
        if (alive[x]) h.push_back(x);
      for (std::size_t a = 0; a < h.size(); ++a)
        for (std::size_t b = a + 1; b < h.size(); ++b) candidates.insert(std::minmax(h[a], h[b]));
    }
    if (candidates.empty())
      for (std::size_t a = 0; a < live.size(); ++a)
        for (std::size_t b = a + 1; b < live.size(); ++b)
          if (alive[a] && alive[b]) candidates.insert({a, b});

    std::uint64_t best = std::numeric_limits<std::uint64_t>::max();
    std::vector<std::pair<std::size_t, std::size_t>> tied;
    for (const auto& [a, b] : candidates) {
      const auto size = tnc::volume(symmetric_difference(live[a], live[b]));
      if (size < best) {
        best = size;
        tied.clear();
      }
      if (size == best) tied.emplace_back(a, b);
    }
    const auto [a, b] = tied[tied.size() == 1 ? 0 : std::uniform_int_distribution<std::size_t>(0, tied.size() - 1)(rng)];
    path.emplace_back(ssa[a], ssa[b]);
    auto merged = symmetric_difference(live[a], live[b]);
    alive[a] = alive[b] = false;
    live.push_back(merged);
    alive.push_back(true);
    ssa.push_back(next++);
    for (const auto& x : merged) holders[x.label].push_back(live.size() - 1);
    --remaining;
  }
  return ContractionTree::from_ssa(shapes, path);
}

inline json tree_to_json(const ContractionTree& t) {
  json path = json::array();
  for (const auto& [a, b] : t.ssa_path()) path.push_back(json::array({a, b}));
  return {{"ssa_path", std::move(path)}};
}

inline SsaPath ssa_path_from_json(const json& j) {
  SsaPath p;
  for (const auto& e : j.at("ssa_path")) {
    if (!e.is_array() || e.size() != 2) throw InvalidArgument("ssa_path entries must be [i, j] pairs");
    p.emplace_back(e[0].get<std::size_t>(), e[1].get<std::size_t>());
  }
  return p;
}

}  // namespace tnc
