#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "tnc/contract.hpp"
#include "tnc/slicer.hpp"

namespace tnc {

/// Core-array parameters. Ranks count dimension-2 legs.
struct ArrayParams {
  std::size_t cells = 64;
  std::size_t intra_rank_cap = 13;
  std::size_t coop_rank_cap = 19;
  std::size_t element_bytes = 8;
  double dma_bandwidth = 51.2e9;  // bytes/s, model only
  double rma_bandwidth = 0.0;     // 0: no time estimate

  std::size_t inter_slots() const { return static_cast<std::size_t>(std::countr_zero(cells)); }

  void validate() const {
    if (cells == 0 || !std::has_single_bit(cells)) throw InvalidArgument("cell count must be a power of two");
    if (coop_rank_cap != intra_rank_cap + inter_slots())
      throw InvalidArgument("cooperative rank cap must equal intra cap + log2(cells)");
    if (element_bytes == 0) throw InvalidArgument("element size must be positive");
  }

  static ArrayParams with_intra_cap(std::size_t intra, std::size_t cells = 64, std::size_t element_bytes = 8) {
    ArrayParams p;
    p.cells = cells;
    p.intra_rank_cap = intra;
    p.coop_rank_cap = intra + static_cast<std::size_t>(std::countr_zero(cells));
    p.element_bytes = element_bytes;
    return p;
  }
};

struct SwapEvent {
  StepId step = 0;
  std::vector<std::string> indices;  // inter legs brought into the cell
  std::vector<std::string> victims;  // intra legs sent out
  std::size_t group_size = 2;        // cells exchanging data
  std::uint64_t per_cell_bytes = 0;
};

struct FusedSection {
  StepId start = 0;
  StepId end = 0;
  std::size_t length = 0;
};

struct TrafficReport {
  bool cooperate = false;
  std::uint64_t dma_bytes = 0;
  std::uint64_t rma_bytes = 0;  // per cell, summed over swap events
  std::vector<SwapEvent> swap_events;
  std::vector<FusedSection> fused_sections;
  std::uint64_t memory_accesses = 0;
  std::uint64_t baseline_accesses = 0;  // 2 per stem step
  std::size_t stem_steps = 0;
  std::size_t inter_contractions = 0;  // contracted legs that were inter-cell when needed

  double dma_seconds(const ArrayParams& p) const { return p.dma_bandwidth > 0 ? dma_bytes / p.dma_bandwidth : 0.0; }
  double rma_seconds(const ArrayParams& p) const { return p.rma_bandwidth > 0 ? rma_bytes / p.rma_bandwidth : 0.0; }
};

/// n * 2^(n-1) / (2^n - 1): per-cell traffic of n pairwise swaps over one
/// batched 2^n-cell exchange.
inline Rational batch_swap_ratio(std::int64_t n) {
  if (n < 1) throw InvalidArgument("batch size must be at least 1");
  if (n > 60) throw InvalidArgument("batch size too large");
  return Rational(n * (std::int64_t{1} << (n - 1)), (std::int64_t{1} << n) - 1);
}

/// 1 - (1 - p)^n, evaluated without cancellation.
inline double failure_rate(std::uint64_t n_nodes, double per_node) {
  if (!(per_node >= 0.0 && per_node <= 1.0)) throw InvalidArgument("per-node failure probability must lie in [0, 1]");
  if (n_nodes == 0 || per_node == 0.0) return 0.0;
  if (per_node == 1.0) return 1.0;
  return -std::expm1(static_cast<double>(n_nodes) * std::log1p(-per_node));
}

namespace detail {

/// Per-cell bytes of one exchange of n legs within a 2^n-cell group.
inline std::uint64_t swap_traffic(std::uint64_t intra_bytes, std::size_t n) {
  return intra_bytes - (intra_bytes >> n);
}

class FusionSim {
 public:
  FusionSim(const LinearSchedule& s, const ArrayParams& p, bool cooperate, bool batch, std::size_t lookahead)
      : s_(s), p_(p), coop_(cooperate), batch_(batch), lookahead_(lookahead), life_(compute_lifetimes(s)) {
    p_.validate();
    r_.cooperate = cooperate;
  }

  TrafficReport run() {
    for (const auto& chain : s_.stems) walk(chain);
    return std::move(r_);
  }

 private:
  std::size_t cap() const { return coop_ ? p_.coop_rank_cap : p_.intra_rank_cap; }
  std::uint64_t bytes(const IndexList& l) const { return volume(l) * p_.element_bytes; }
  StepId end_of(const std::string& label) const { return life_.at(label).end; }

  bool fits(StepId id) const {
    return std::max(s_.lhs_indices(id).size(), s_.result_indices(id).size()) <= cap();
  }

  /// Longest lifetime first, ties by label.
  std::vector<std::string> by_life_desc(const std::vector<std::string>& labels) const {
    auto out = labels;
    std::sort(out.begin(), out.end(), [&](const std::string& a, const std::string& b) {
      const auto ea = end_of(a), eb = end_of(b);
      return ea != eb ? ea > eb : a < b;
    });
    return out;
  }

  void close_section(StepId first, StepId last) {
    r_.fused_sections.push_back({first, last, last - first + 1});
    r_.memory_accesses += 2;
    r_.dma_bytes += bytes(s_.lhs_indices(first)) + bytes(s_.result_indices(last));
  }

  void walk(const StemChain& chain) {
    std::size_t i = 0;
    while (i < chain.steps.size()) {
      const auto first = chain.steps[i];
      if (!fits(first)) {
        account_step(first);
        close_section(first, first);
        ++i;
        continue;
      }
      start_residency(first);
      std::size_t j = i;
      while (j < chain.steps.size() && fits(chain.steps[j])) {
        account_step(chain.steps[j]);
        if (coop_) residency_step(chain.steps[j]);
        ++j;
      }
      close_section(first, chain.steps[j - 1]);
      i = j;
    }
  }

  void account_step(StepId id) {
    ++r_.stem_steps;
    r_.baseline_accesses += 2;
    r_.dma_bytes += bytes(s_.rhs_indices(id));
  }

  void start_residency(StepId id) {
    intra_.clear();
    inter_.clear();
    std::vector<std::string> legs;
    for (const auto& i : s_.lhs_indices(id)) legs.push_back(i.label);
    const auto ordered = by_life_desc(legs);
    const auto n_inter = coop_ && legs.size() > p_.intra_rank_cap ? legs.size() - p_.intra_rank_cap : 0;
    for (std::size_t k = 0; k < ordered.size(); ++k) (k < n_inter ? inter_ : intra_).insert(ordered[k]);
  }

  std::uint64_t intra_bytes() const {
    std::uint64_t v = p_.element_bytes;
    const auto dims = s_.tree.labels();
    for (const auto& l : intra_) v *= dims.at(l);
    return v;
  }

  void residency_step(StepId id) {
    const auto& lhs = s_.lhs_indices(id);
    const auto& rhs = s_.rhs_indices(id);
    std::set<std::string> contracted;
    for (const auto& i : lhs)
      if (contains_label(rhs, i.label)) contracted.insert(i.label);

    std::vector<std::string> needed;
    for (const auto& l : inter_)
      if (contracted.count(l)) needed.push_back(l);
    r_.inter_contractions += needed.size();
    if (!needed.empty() && batch_)
      for (const auto& l : inter_)
        if (!contracted.count(l) && end_of(l) <= id + lookahead_) needed.push_back(l);
    std::sort(needed.begin(), needed.end());

    if (!needed.empty()) {
      // victims: intra legs not used now, longest remaining life first
      std::vector<std::string> pool;
      for (const auto& l : intra_)
        if (!contracted.count(l)) pool.push_back(l);
      pool = by_life_desc(pool);
      const std::set<std::string> needed_now(needed.begin(), needed.end());
      if (pool.size() < needed.size()) {
        // not enough free intra legs: bring in only what this step needs
        std::erase_if(needed, [&](const std::string& l) { return !contracted.count(l); });
        if (pool.size() < needed.size()) throw PlanningError("intra capacity too small to swap in contracted legs");
      }
      const auto tensor = intra_bytes();
      if (batch_) {
        SwapEvent e{id, needed, {pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(needed.size())},
                    std::size_t{1} << needed.size(), swap_traffic(tensor, needed.size())};
        apply(e);
      } else {
        for (std::size_t k = 0; k < needed.size(); ++k) apply({id, {needed[k]}, {pool[k]}, 2, swap_traffic(tensor, 1)});
      }
    }

    for (const auto& l : contracted) intra_.erase(l);
    for (const auto& i : rhs) {
      if (contracted.count(i.label)) continue;
      if (intra_.size() < p_.intra_rank_cap) intra_.insert(i.label);
      else inter_.insert(i.label);
    }
  }

  void apply(SwapEvent e) {
    for (const auto& l : e.indices) {
      inter_.erase(l);
      intra_.insert(l);
    }
    for (const auto& l : e.victims) {
      intra_.erase(l);
      inter_.insert(l);
    }
    r_.rma_bytes += e.per_cell_bytes;
    r_.swap_events.push_back(std::move(e));
  }

  const LinearSchedule& s_;
  ArrayParams p_;
  bool coop_;
  bool batch_;
  std::size_t lookahead_;
  std::map<std::string, Lifetime> life_;
  std::set<std::string> intra_, inter_;
  TrafficReport r_;
};

}  // namespace detail

/// Walks the stem steps and segments them into fused sections. With
/// `cooperate` the stem may spread over the cell array up to the
/// cooperative cap, and contracted inter-cell legs are swapped in pairwise.
inline TrafficReport simulate_fusion(const LinearSchedule& s, const ArrayParams& p, bool cooperate) {
  return detail::FusionSim(s, p, cooperate, false, 0).run();
}

/// Cooperative simulation where the inter-cell legs needed at a step are
/// exchanged in one group event, together with inter legs whose lifetime
/// ends within `lookahead` steps.
inline TrafficReport plan_batch_swaps(const LinearSchedule& s, const ArrayParams& p, std::size_t lookahead) {
  return detail::FusionSim(s, p, true, true, lookahead).run();
}

/// Permutation bucket counts (and moved elements) over the two TTGT
/// layout changes of every step, following the layouts execution produces.
struct PermutationHistogram {
  std::map<PermutationCase, std::uint64_t> count;
  std::map<PermutationCase, std::uint64_t> elements;
};

inline PermutationHistogram permutation_histogram(const LinearSchedule& s, const LabelSet& sliced = {}) {
  PermutationHistogram h;
  for (auto c : kAllPermutationCases) h.count[c] = h.elements[c] = 0;
  std::map<std::size_t, IndexList> layout;
  auto layout_of = [&](std::size_t n) -> IndexList {
    if (auto it = layout.find(n); it != layout.end()) return it->second;
    IndexList l;
    for (const auto& i : s.tree.node(n).indices)
      if (!sliced.count(i.label)) l.push_back(i);
    return l;
  };
  for (StepId id = 1; id <= s.size(); ++id) {
    const auto& st = s.step(id);
    const auto a = layout_of(st.lhs), b = layout_of(st.rhs);
    const auto shape = contraction_shape(a, b);
    const auto plans = ttgt_plans(a, b, shape);
    for (const auto* p : {&plans.left, &plans.right}) {
      ++h.count[p->case_class];
      h.elements[p->case_class] += volume(p->source_order);
    }
    IndexList out = shape.free_a;
    out.insert(out.end(), shape.free_b.begin(), shape.free_b.end());
    layout[st.node] = std::move(out);
  }
  return h;
}

inline json traffic_report_to_json(const TrafficReport& r) {
  json events = json::array();
  for (const auto& e : r.swap_events)
    events.push_back({{"step", e.step},
                      {"indices", e.indices},
                      {"victims", e.victims},
                      {"group_size", e.group_size},
                      {"per_cell_bytes", e.per_cell_bytes}});
  json sections = json::array();
  for (const auto& f : r.fused_sections) sections.push_back({{"start", f.start}, {"end", f.end}, {"length", f.length}});
  return {{"cooperate", r.cooperate},
          {"dma_bytes", r.dma_bytes},
          {"rma_bytes", r.rma_bytes},
          {"memory_accesses", r.memory_accesses},
          {"baseline_accesses", r.baseline_accesses},
          {"stem_steps", r.stem_steps},
          {"swap_events", std::move(events)},
          {"fused_sections", std::move(sections)}};
}

}  // namespace tnc
