#pragma once

#include <algorithm>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "tnc/rational.hpp"
#include "tnc/schedule.hpp"

namespace tnc {

/// Steps during which a leg is present: from the first step that consumes an
/// operand carrying it to the step that sums it (or the last step).
struct Lifetime {
  StepId start = 0;
  StepId end = 0;

  bool contains(StepId s) const noexcept { return start <= s && s <= end; }
  friend bool operator==(const Lifetime&, const Lifetime&) = default;
};

inline std::map<std::string, Lifetime> compute_lifetimes(const LinearSchedule& s) {
  std::map<std::string, Lifetime> out;
  for (StepId id = 1; id <= s.size(); ++id) {
    for (const auto* legs : {&s.lhs_indices(id), &s.rhs_indices(id)})
      for (const auto& i : *legs) {
        auto [it, fresh] = out.try_emplace(i.label, Lifetime{id, s.size()});
        (void)fresh;
        if (!contains_label(s.result_indices(id), i.label)) it->second.end = std::min(it->second.end, id);
      }
  }
  return out;
}

inline Lifetime lifetime_of(const LinearSchedule& s, const std::string& label) {
  const auto all = compute_lifetimes(s);
  const auto it = all.find(label);
  if (it == all.end()) throw InvalidArgument("index '" + label + "' does not occur in the schedule");
  return it->second;
}

struct SliceEntry {
  Index index;
  Lifetime lifetime;
  StepId fork = 0;   // <= lifetime.start
  StepId merge = 0;  // >= lifetime.end
};

struct SliceSpec {
  std::vector<SliceEntry> entries;
  bool nesting_ok = true;

  LabelSet labels() const {
    LabelSet out;
    for (const auto& e : entries) out.insert(e.index.label);
    return out;
  }
  std::uint64_t subtasks() const {
    std::uint64_t n = 1;
    for (const auto& e : entries) n *= e.index.dim;
    return n;
  }
  const SliceEntry* find(const std::string& label) const {
    for (const auto& e : entries)
      if (e.index.label == label) return &e;
    return nullptr;
  }
};

/// True when the (fork, merge) intervals form a single chain under inclusion.
inline bool intervals_nested(std::vector<SliceEntry> entries) {
  std::sort(entries.begin(), entries.end(), [](const SliceEntry& a, const SliceEntry& b) {
    if (a.fork != b.fork) return a.fork < b.fork;
    if (a.merge != b.merge) return a.merge > b.merge;
    return a.index.label < b.index.label;
  });
  for (std::size_t i = 1; i < entries.size(); ++i)
    if (entries[i].merge > entries[i - 1].merge) return false;
  return true;
}

/// Pairs of entries whose intervals neither contain one another.
inline std::size_t crossing_pairs(const std::vector<SliceEntry>& entries) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < entries.size(); ++i)
    for (std::size_t j = i + 1; j < entries.size(); ++j) {
      const auto& a = entries[i];
      const auto& b = entries[j];
      const bool a_in_b = b.fork <= a.fork && a.merge <= b.merge;
      const bool b_in_a = a.fork <= b.fork && b.merge <= a.merge;
      n += (a_in_b || b_in_a) ? 0 : 1;
    }
  return n;
}

/// Slice entries for `labels` with fork/merge at the lifetime bounds.
inline SliceSpec make_slice_spec(const LinearSchedule& s, const std::vector<std::string>& labels) {
  const auto lifetimes = compute_lifetimes(s);
  const auto dims = s.tree.labels();
  SliceSpec spec;
  for (const auto& l : labels) {
    const auto it = lifetimes.find(l);
    if (it == lifetimes.end()) throw InvalidArgument("index '" + l + "' does not occur in the schedule");
    spec.entries.push_back({{l, dims.at(l)}, it->second, it->second.start, it->second.end});
  }
  spec.nesting_ok = intervals_nested(spec.entries);
  return spec;
}

/// d * C(sliced + {a}) / C(sliced): work after additionally slicing `a`
/// relative to the work before. Above 1 means slicing `a` adds work.
inline Rational index_overhead(const ContractionTree& t, const Index& a, const LabelSet& sliced = {}) {
  auto with = sliced;
  with.insert(a.label);
  const auto before = t.total_cost(sliced);
  const auto after = t.total_cost(with);
  return Rational::from_wide(__int128(a.dim) * after, before);
}

struct SliceSelection {
  SliceSpec spec;
  bool success = false;
  std::string failure;
  std::vector<Rational> round_overheads;
  Rational total_overhead{1};
  std::size_t evaluations = 0;
};

/// Greedy slicing: while some intermediate exceeds `max_rank`, slice the
/// candidate with the lowest overhead (ties by label). Candidates are closed
/// legs of over-cap intermediates; at most `budget` of them (a seeded
/// sample) are evaluated per round, 0 meaning all.
inline SliceSelection select_slices(const LinearSchedule& s, std::size_t max_rank, std::size_t budget,
                                    std::uint64_t seed) {
  SliceSelection out;
  const auto& t = s.tree;
  for (std::size_t i = 0; i < t.leaf_count(); ++i)
    if (t.rank(i) > max_rank) {
      out.failure = "leaf tensor " + std::to_string(i) + " has rank " + std::to_string(t.rank(i)) +
                    " above the cap " + std::to_string(max_rank);
      return out;
    }
  const auto closed = t.closed_indices();
  std::mt19937_64 rng(seed);
  LabelSet sliced;
  std::vector<std::string> order;
  for (;;) {
    LabelSet hot;
    for (std::size_t id = t.leaf_count(); id < t.node_count(); ++id)
      if (t.rank(id, sliced) > max_rank)
        for (const auto& i : t.node(id).indices)
          if (!sliced.count(i.label)) hot.insert(i.label);
    if (hot.empty()) break;
    std::vector<Index> candidates;
    for (const auto& i : closed)
      if (hot.count(i.label)) candidates.push_back(i);
    if (candidates.empty()) {
      out.failure = "no closed index reduces the rank of the over-cap intermediates";
      return out;
    }
    if (budget > 0 && candidates.size() > budget) {
      std::shuffle(candidates.begin(), candidates.end(), rng);
      candidates.resize(budget);
    }
    std::sort(candidates.begin(), candidates.end(), [](const Index& a, const Index& b) { return a.label < b.label; });
    const Index* best = nullptr;
    Rational best_o;
    for (const auto& c : candidates) {
      const auto o = index_overhead(t, c, sliced);
      ++out.evaluations;
      if (!best || o < best_o) {
        best = &c;
        best_o = o;
      }
    }
    sliced.insert(best->label);
    order.push_back(best->label);
    out.round_overheads.push_back(best_o);
    out.total_overhead = out.total_overhead * best_o;
  }
  out.spec = make_slice_spec(s, order);
  out.success = true;
  return out;
}

struct ExchangeResult {
  LinearSchedule schedule;
  SliceSpec spec;
  bool nesting_ok = false;
  std::size_t swaps = 0;
};

namespace detail {

inline SliceSpec respec(const LinearSchedule& s, const SliceSpec& spec) {
  std::vector<std::string> labels;
  for (const auto& e : spec.entries) labels.push_back(e.index.label);
  return make_slice_spec(s, labels);
}

/// Exchanges the branches absorbed by two consecutive stem steps. Returns
/// false (leaving `s` untouched) when the branches share a leg, the stem
/// would stop being the larger operand, or the pair of step costs changes.
inline bool try_branch_swap(LinearSchedule& s, StepId lower, StepId upper) {
  const auto c = s.step(lower).node, p = s.step(upper).node;
  auto& tree = s.tree;
  if (static_cast<std::size_t>(tree.node(p).left) != c) return false;
  const auto x = static_cast<std::size_t>(tree.node(c).left);
  const auto b1 = static_cast<std::size_t>(tree.node(c).right);
  const auto b2 = static_cast<std::size_t>(tree.node(p).right);
  if (!index_intersection(tree.node(b1).indices, tree.node(b2).indices).empty()) return false;
  std::vector<std::uint64_t> before{tree.step_cost(c), tree.step_cost(p)};
  const auto saved = tree;
  tree.set_children(c, x, b2);
  tree.set_children(p, c, b1);
  std::vector<std::uint64_t> after{tree.step_cost(c), tree.step_cost(p)};
  std::sort(before.begin(), before.end());
  std::sort(after.begin(), after.end());
  const bool shape_kept = static_cast<std::size_t>(tree.node(c).left) == x &&
                          static_cast<std::size_t>(tree.node(p).left) == c;
  if (before != after || !shape_kept) {
    tree = saved;
    return false;
  }
  s.refresh();
  return true;
}

}  // namespace detail

/// Reorders adjacent stem absorptions (keeping every step cost) until the
/// sliced lifetimes nest. Greedy: each round applies the swap that removes
/// the most crossing pairs; stops when nested or no swap helps.
inline ExchangeResult branch_exchange_nest(const LinearSchedule& s, const SliceSpec& spec) {
  ExchangeResult r{s, detail::respec(s, spec), false, 0};
  auto crossings = crossing_pairs(r.spec.entries);
  while (crossings > 0) {
    std::size_t best_cross = crossings;
    std::pair<StepId, StepId> best_move{0, 0};
    for (const auto& chain : r.schedule.stems)
      for (std::size_t i = 0; i + 1 < chain.steps.size(); ++i) {
        auto trial = r.schedule;
        if (!detail::try_branch_swap(trial, chain.steps[i], chain.steps[i + 1])) continue;
        const auto c = crossing_pairs(detail::respec(trial, spec).entries);
        if (c < best_cross) {
          best_cross = c;
          best_move = {chain.steps[i], chain.steps[i + 1]};
        }
      }
    if (best_move.first == 0) break;
    detail::try_branch_swap(r.schedule, best_move.first, best_move.second);
    r.spec = detail::respec(r.schedule, spec);
    crossings = best_cross;
    ++r.swaps;
  }
  r.nesting_ok = intervals_nested(r.spec.entries);
  r.spec.nesting_ok = r.nesting_ok;
  return r;
}

inline json slice_spec_to_json(const SliceSpec& spec) {
  json arr = json::array();
  for (const auto& e : spec.entries)
    arr.push_back({{"label", e.index.label},
                   {"dim", e.index.dim},
                   {"fork", e.fork},
                   {"start", e.lifetime.start},
                   {"end", e.lifetime.end},
                   {"merge", e.merge}});
  return arr;
}

inline SliceSpec slice_spec_from_json(const json& j) {
  SliceSpec spec;
  for (const auto& e : j) {
    SliceEntry x;
    x.index = {e.at("label").get<std::string>(), e.value("dim", std::size_t{2})};
    x.fork = e.at("fork").get<StepId>();
    x.lifetime = {e.at("start").get<StepId>(), e.at("end").get<StepId>()};
    x.merge = e.at("merge").get<StepId>();
    if (x.fork > x.lifetime.start || x.merge < x.lifetime.end || x.lifetime.start > x.lifetime.end)
      throw InvalidArgument("slice entry '" + x.index.label + "' violates fork <= start <= end <= merge");
    spec.entries.push_back(std::move(x));
  }
  spec.nesting_ok = intervals_nested(spec.entries);
  return spec;
}

}  // namespace tnc
