#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include "tnc/contraction_tree.hpp"

namespace tnc {

/// 1-based position of a contraction in a LinearSchedule; 0 means "none".
using StepId = std::size_t;

struct Step {
  std::size_t node = 0;
  std::size_t lhs = 0;  // tree node ids of the operands
  std::size_t rhs = 0;
  std::uint64_t cost = 0;
  bool stem = false;
};

/// A maximal run of stem contractions; every step's left operand is the
/// previous step's result.
struct StemChain {
  std::vector<StepId> steps;
  std::uint64_t cost = 0;
};

struct LinearSchedule {
  ContractionTree tree;
  std::vector<Step> steps;
  std::vector<StemChain> stems;
  bool multi_stem = false;
  std::vector<StepId> step_of_node;  // 0 for leaves

  StepId size() const noexcept { return steps.size(); }
  const Step& step(StepId id) const { return steps.at(id - 1); }

  std::uint64_t cost(StepId id, const LabelSet& sliced = {}) const { return tree.step_cost(step(id).node, sliced); }

  /// Sum of step costs over the inclusive range [first, last]; empty when first > last.
  std::uint64_t cost_range(StepId first, StepId last, const LabelSet& sliced = {}) const {
    std::uint64_t c = 0;
    for (StepId s = std::max<StepId>(first, 1); s <= last && s <= size(); ++s) c += cost(s, sliced);
    return c;
  }

  std::uint64_t total_cost(const LabelSet& sliced = {}) const { return cost_range(1, size(), sliced); }

  const IndexList& lhs_indices(StepId id) const { return tree.node(step(id).lhs).indices; }
  const IndexList& rhs_indices(StepId id) const { return tree.node(step(id).rhs).indices; }
  const IndexList& result_indices(StepId id) const { return tree.node(step(id).node).indices; }

  /// Internal nodes computed at or before `pos` and not yet consumed.
  std::vector<std::size_t> frontier(StepId pos) const {
    std::vector<std::size_t> out;
    for (StepId s = 1; s <= pos && s <= size(); ++s) {
      const auto n = step(s).node;
      const auto parent = tree.node(n).parent;
      if (parent < 0 || step_of_node[static_cast<std::size_t>(parent)] > pos) out.push_back(n);
    }
    return out;
  }

  /// Rebuilds step records from the tree while keeping the node order.
  void refresh() {
    for (auto& s : steps) {
      const auto& n = tree.node(s.node);
      s.lhs = static_cast<std::size_t>(n.left);
      s.rhs = static_cast<std::size_t>(n.right);
      s.cost = tree.step_cost(s.node);
    }
    for (auto& chain : stems) {
      chain.cost = 0;
      for (auto s : chain.steps) chain.cost += steps[s - 1].cost;
    }
  }
};

/// Threshold for counting a chain as an additional stem (share of total cost).
inline constexpr std::uint64_t kStemShareNum = 1, kStemShareDen = 4;

namespace detail {

/// A node continues a stem when its absorbed (right) operand has rank at
/// most result_rank - 1.
inline bool stem_eligible(const ContractionTree& t, std::size_t id) {
  const auto& n = t.node(id);
  if (n.is_leaf()) return false;
  return t.rank(static_cast<std::size_t>(n.right)) + 1 <= t.rank(id);
}

inline std::vector<std::vector<std::size_t>> detect_stems(const ContractionTree& t, bool& multi) {
  std::vector<std::size_t> order;
  for (std::size_t id = t.leaf_count(); id < t.node_count(); ++id) order.push_back(id);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return t.step_cost(a) > t.step_cost(b); });
  const std::uint64_t total = t.total_cost();
  std::vector<bool> used(t.node_count(), false);
  std::vector<std::vector<std::size_t>> chains;
  std::size_t heavy = 0;
  for (auto h : order) {
    if (used[h]) continue;
    used[h] = true;
    if (!stem_eligible(t, h)) continue;
    std::vector<std::size_t> chain{h};
    for (auto c = static_cast<std::size_t>(t.node(h).left); !t.is_leaf(c) && !used[c] && stem_eligible(t, c);
         c = static_cast<std::size_t>(t.node(c).left)) {
      chain.insert(chain.begin(), c);
      used[c] = true;
    }
    for (auto p = t.node(h).parent; p >= 0; p = t.node(static_cast<std::size_t>(p)).parent) {
      const auto pid = static_cast<std::size_t>(p);
      if (used[pid] || static_cast<std::size_t>(t.node(pid).left) != chain.back() || !stem_eligible(t, pid)) break;
      chain.push_back(pid);
      used[pid] = true;
    }
    if (chain.size() < 2) continue;
    std::uint64_t cost = 0;
    for (auto id : chain) cost += t.step_cost(id);
    const bool is_heavy = cost * kStemShareDen >= total * kStemShareNum;
    if (chains.empty() || is_heavy) chains.push_back(std::move(chain));
    heavy += is_heavy ? 1 : 0;
  }
  multi = heavy >= 2;
  return chains;
}

}  // namespace detail

/// Post-order linearization that keeps every stem contiguous: a chain's base
/// and absorbed branches are computed first (in absorption order), then the
/// chain's steps run back to back.
inline LinearSchedule linearize(const ContractionTree& t) {
  LinearSchedule s;
  s.tree = t;
  s.step_of_node.assign(t.node_count(), 0);
  bool multi = false;
  const auto chains = detail::detect_stems(t, multi);
  s.multi_stem = multi;

  std::vector<std::ptrdiff_t> chain_of_top(t.node_count(), -1);
  for (std::size_t c = 0; c < chains.size(); ++c) chain_of_top[chains[c].back()] = static_cast<std::ptrdiff_t>(c);
  std::vector<StemChain> stems(chains.size());

  auto push = [&](std::size_t id, bool stem) {
    const auto& n = t.node(id);
    s.steps.push_back(Step{id, static_cast<std::size_t>(n.left), static_cast<std::size_t>(n.right), t.step_cost(id), stem});
    s.step_of_node[id] = s.steps.size();
  };

  auto emit = [&](auto&& self, std::size_t id) -> void {
    if (t.is_leaf(id)) return;
    if (chain_of_top[id] >= 0) {
      const auto ci = static_cast<std::size_t>(chain_of_top[id]);
      const auto& chain = chains[ci];
      self(self, static_cast<std::size_t>(t.node(chain.front()).left));
      for (auto x : chain) self(self, static_cast<std::size_t>(t.node(x).right));
      for (auto x : chain) {
        push(x, true);
        stems[ci].steps.push_back(s.steps.size());
        stems[ci].cost += s.steps.back().cost;
      }
      return;
    }
    self(self, static_cast<std::size_t>(t.node(id).left));
    self(self, static_cast<std::size_t>(t.node(id).right));
    push(id, false);
  };
  emit(emit, t.root());
  s.stems = std::move(stems);
  return s;
}

inline json schedule_to_json(const LinearSchedule& s) {
  json steps = json::array();
  for (StepId id = 1; id <= s.size(); ++id) {
    const auto& st = s.step(id);
    steps.push_back({{"step", id},
                     {"node", st.node},
                     {"lhs", st.lhs},
                     {"rhs", st.rhs},
                     {"result", indices_to_json(s.result_indices(id))},
                     {"cost", st.cost},
                     {"stem", st.stem}});
  }
  json stems = json::array();
  for (const auto& c : s.stems) stems.push_back({{"steps", c.steps}, {"cost", c.cost}});
  return {{"steps", std::move(steps)}, {"stems", std::move(stems)}, {"multi_stem", s.multi_stem}};
}

}  // namespace tnc
