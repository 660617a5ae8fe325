#pragma once

#include <algorithm>
#include <map>
#include <string>
#include <vector>

#include "tnc/slicer.hpp"

namespace tnc {

/// Tree shares the work before each fork, Merge sums partials after each
/// merge point, Spindle does both.
enum class ReuseMode { Tree, Merge, Spindle };

inline const char* to_string(ReuseMode m) {
  switch (m) {
    case ReuseMode::Tree: return "tree";
    case ReuseMode::Merge: return "merge";
    case ReuseMode::Spindle: return "spindle";
  }
  return "?";
}

/// One reused sliced index. Levels are ordered outermost first, so forks
/// ascend and merges descend.
struct ReuseLevel {
  Index index;
  StepId fork = 0;
  StepId merge = 0;
};

struct ReuseAction {
  enum class Kind { Run, Checkpoint, Restore, StorePartial, Merge, Free };
  Kind kind = Kind::Run;
  StepId first = 0;  // Run: inclusive step range
  StepId last = 0;
  std::vector<std::size_t> assignment;  // Run: values of levels 0..depth-1
  std::size_t id = 0;                   // checkpoint / partial slot (the level)
  std::string label;                    // StorePartial / Merge
};

inline const char* to_string(ReuseAction::Kind k) {
  switch (k) {
    case ReuseAction::Kind::Run: return "RUN";
    case ReuseAction::Kind::Checkpoint: return "CHECKPOINT";
    case ReuseAction::Kind::Restore: return "RESTORE";
    case ReuseAction::Kind::StorePartial: return "STORE_PARTIAL";
    case ReuseAction::Kind::Merge: return "MERGE";
    case ReuseAction::Kind::Free: return "FREE";
  }
  return "?";
}

/// Action program executed once per assignment of the outer slices.
struct ReuseSchedule {
  ReuseMode mode = ReuseMode::Spindle;
  std::vector<ReuseAction> actions;
  std::vector<ReuseLevel> nested;
  std::vector<Index> outer;
  std::vector<std::string> demoted;
  StepId steps = 0;

  LabelSet sliced_labels() const {
    LabelSet s;
    for (const auto& l : nested) s.insert(l.index.label);
    for (const auto& i : outer) s.insert(i.label);
    return s;
  }
  std::uint64_t outer_subtasks() const {
    std::uint64_t n = 1;
    for (const auto& i : outer) n *= i.dim;
    return n;
  }
  std::uint64_t nested_subtasks() const {
    std::uint64_t n = 1;
    for (const auto& l : nested) n *= l.index.dim;
    return n;
  }
};

struct ReusePlanReport {
  std::uint64_t predicted_multiplies = 0;
  std::uint64_t predicted_peak_bytes = 0;
  Rational overhead_with_reuse{1};
  Rational overhead_without_reuse{1};
};

struct SpindlePlan {
  ReuseSchedule schedule;
  ReusePlanReport report;
};

namespace detail {

inline std::vector<ReuseLevel> sorted_levels(std::vector<ReuseLevel> levels) {
  std::stable_sort(levels.begin(), levels.end(), [](const ReuseLevel& a, const ReuseLevel& b) {
    if (a.fork != b.fork) return a.fork < b.fork;
    if (a.merge != b.merge) return a.merge > b.merge;
    return a.index.label < b.index.label;
  });
  return levels;
}

inline bool levels_nested(const std::vector<ReuseLevel>& levels) {
  for (std::size_t i = 1; i < levels.size(); ++i)
    if (levels[i].fork < levels[i - 1].fork || levels[i].merge > levels[i - 1].merge) return false;
  return true;
}

inline void emit_run(std::vector<ReuseAction>& out, StepId first, StepId last, const std::vector<std::size_t>& assign) {
  if (first > last) return;
  ReuseAction a;
  a.kind = ReuseAction::Kind::Run;
  a.first = first;
  a.last = last;
  a.assignment = assign;
  out.push_back(std::move(a));
}

inline void emit_level(std::vector<ReuseAction>& out, const std::vector<ReuseLevel>& levels, std::size_t j,
                       std::vector<std::size_t>& assign) {
  const auto& lv = levels[j];
  const auto simple = [&](ReuseAction::Kind k) {
    ReuseAction a;
    a.kind = k;
    a.id = j;
    if (k == ReuseAction::Kind::StorePartial || k == ReuseAction::Kind::Merge) a.label = lv.index.label;
    out.push_back(std::move(a));
  };
  simple(ReuseAction::Kind::Checkpoint);
  for (std::size_t v = 0; v < lv.index.dim; ++v) {
    if (v > 0) simple(ReuseAction::Kind::Restore);
    if (v + 1 == lv.index.dim) simple(ReuseAction::Kind::Free);
    assign.push_back(v);
    if (j + 1 < levels.size()) {
      emit_run(out, lv.fork, levels[j + 1].fork - 1, assign);
      emit_level(out, levels, j + 1, assign);
      emit_run(out, levels[j + 1].merge + 1, lv.merge, assign);
    } else {
      emit_run(out, lv.fork, lv.merge, assign);
    }
    assign.pop_back();
    simple(ReuseAction::Kind::StorePartial);
  }
  simple(ReuseAction::Kind::Merge);
}

/// Static sizes used by planning: bytes of the live frontier after each
/// position and the reused-index-dependent tensor at a position.
class SizeOracle {
 public:
  SizeOracle(const LinearSchedule& s, LabelSet sliced, std::size_t element_bytes)
      : s_(s), sliced_(std::move(sliced)), elem_(element_bytes), frontier_bytes_(s.size() + 1, 0) {
    for (StepId p = 0; p <= s.size(); ++p)
      for (auto n : s.frontier(p)) frontier_bytes_[p] += s.tree.volume(n, sliced_) * elem_;
  }

  std::uint64_t frontier_bytes(StepId pos) const { return frontier_bytes_.at(pos); }

  /// Bytes of the frontier tensor at `pos` that depends on `label`.
  std::uint64_t dependent_bytes(StepId pos, const std::string& label) const {
    for (auto n : s_.frontier(pos))
      if (subtree(n).count(label)) return s_.tree.volume(n, sliced_) * elem_;
    return 0;
  }

  std::ptrdiff_t dependent_node(StepId pos, const std::string& label) const {
    for (auto n : s_.frontier(pos))
      if (subtree(n).count(label)) return static_cast<std::ptrdiff_t>(n);
    return -1;
  }

 private:
  const LabelSet& subtree(std::size_t n) const {
    auto it = cache_.find(n);
    if (it == cache_.end()) it = cache_.emplace(n, s_.tree.subtree_labels(n)).first;
    return it->second;
  }

  const LinearSchedule& s_;
  LabelSet sliced_;
  std::size_t elem_;
  std::vector<std::uint64_t> frontier_bytes_;
  mutable std::map<std::size_t, LabelSet> cache_;
};

}  // namespace detail

/// Closed-form multiply count of one outer assignment: steps before the
/// outermost fork and after the outermost merge run once; steps between
/// consecutive forks (merges) run once per assignment of the enclosing
/// levels; the innermost interval runs once per full nested assignment.
inline std::uint64_t spindle_multiplies(const LinearSchedule& s, const std::vector<ReuseLevel>& levels,
                                        const LabelSet& sliced) {
  const StepId T = s.size();
  if (levels.empty()) return s.cost_range(1, T, sliced);
  const auto k = levels.size();
  std::uint64_t total = s.cost_range(1, levels[0].fork - 1, sliced);
  std::uint64_t mult = 1;
  for (std::size_t j = 0; j < k; ++j) {
    mult *= levels[j].index.dim;
    if (j + 1 < k) {
      total += mult * s.cost_range(levels[j].fork, levels[j + 1].fork - 1, sliced);
      total += mult * s.cost_range(levels[j + 1].merge + 1, levels[j].merge, sliced);
    } else {
      total += mult * s.cost_range(levels[j].fork, levels[j].merge, sliced);
    }
  }
  total += s.cost_range(levels[0].merge + 1, T, sliced);
  return total;
}

/// Peak bytes held in checkpoints and merge buffers by the program built
/// from `levels`: at the moment level j stores its first partial, every
/// enclosing level holds its checkpoint and/or partial.
inline std::uint64_t spindle_peak_bytes(const detail::SizeOracle& sizes, const std::vector<ReuseLevel>& levels) {
  std::uint64_t peak = 0, prefix = 0;
  for (const auto& lv : levels) {
    const auto cp = sizes.frontier_bytes(lv.fork - 1);
    const auto part = sizes.dependent_bytes(lv.merge, lv.index.label);
    peak = std::max(peak, prefix + cp + part);
    prefix += lv.index.dim > 2 ? cp + part : std::max(cp, part);
  }
  return peak;
}

inline std::vector<ReuseLevel> reuse_levels(const LinearSchedule& s, const SliceSpec& spec, const LabelSet& reuse,
                                            ReuseMode mode) {
  std::vector<ReuseLevel> levels;
  for (const auto& e : spec.entries) {
    if (!reuse.count(e.index.label)) continue;
    ReuseLevel lv{e.index, e.fork, e.merge};
    if (mode == ReuseMode::Tree) lv.merge = s.size();
    if (mode == ReuseMode::Merge) lv.fork = 1;
    levels.push_back(std::move(lv));
  }
  return detail::sorted_levels(std::move(levels));
}

/// Builds the action program. Throws PlanningError when the reused
/// intervals do not nest.
inline ReuseSchedule build_reuse_schedule(const LinearSchedule& s, const SliceSpec& spec, const LabelSet& reuse,
                                          ReuseMode mode) {
  for (const auto& l : reuse)
    if (!spec.find(l)) throw InvalidArgument("reuse index '" + l + "' is not in the slice spec");
  ReuseSchedule r;
  r.mode = mode;
  r.steps = s.size();
  r.nested = reuse_levels(s, spec, reuse, mode);
  for (const auto& lv : r.nested)
    if (lv.fork < 1 || lv.merge > s.size() || lv.fork > lv.merge)
      throw InvalidArgument("reuse index '" + lv.index.label + "' has an invalid fork/merge interval");
  if (!detail::levels_nested(r.nested))
    throw PlanningError("reused slice intervals are not nested; run branch_exchange_nest first");
  for (const auto& e : spec.entries)
    if (!reuse.count(e.index.label)) r.outer.push_back(e.index);

  std::vector<std::size_t> assign;
  if (r.nested.empty()) {
    detail::emit_run(r.actions, 1, s.size(), assign);
    return r;
  }
  detail::emit_run(r.actions, 1, r.nested[0].fork - 1, assign);
  detail::emit_level(r.actions, r.nested, 0, assign);
  detail::emit_run(r.actions, r.nested[0].merge + 1, s.size(), assign);
  return r;
}

struct ScheduleCheck {
  bool ok = true;
  std::string error;
  std::size_t peak_checkpoints = 0;
  std::size_t peak_partials = 0;
  std::size_t peak_stored = 0;  // checkpoints + partial buffers
  std::uint64_t peak_stored_bytes = 0;
  std::uint64_t multiplies_per_outer = 0;
};

/// Stack interpreter over the action program: checks bracket structure,
/// step coverage and slot lifetimes, and tallies checkpoint/partial peaks
/// and the multiply count of one outer assignment.
inline ScheduleCheck check_reuse_schedule(const ReuseSchedule& r, const LinearSchedule& s, std::size_t element_bytes) {
  ScheduleCheck c;
  const auto sliced = r.sliced_labels();
  const detail::SizeOracle sizes(s, sliced, element_bytes);
  std::map<std::size_t, StepId> checkpoints;
  std::map<std::size_t, std::pair<std::size_t, std::uint64_t>> partials;  // slot -> (stored count, bytes)
  std::map<std::string, std::size_t> dims;
  for (const auto& lv : r.nested) dims[lv.index.label] = lv.index.dim;
  StepId pos = 0;
  std::uint64_t cp_bytes = 0, part_bytes = 0;
  std::map<std::size_t, std::uint64_t> cp_size;
  auto fail = [&](const std::string& msg) {
    c.ok = false;
    if (c.error.empty()) c.error = msg;
  };
  for (const auto& a : r.actions) {
    using K = ReuseAction::Kind;
    switch (a.kind) {
      case K::Run:
        if (a.first != pos + 1) fail("RUN " + std::to_string(a.first) + " does not continue from step " + std::to_string(pos));
        c.multiplies_per_outer += s.cost_range(a.first, a.last, sliced);
        pos = a.last;
        break;
      case K::Checkpoint:
        if (checkpoints.count(a.id)) fail("checkpoint " + std::to_string(a.id) + " taken twice");
        checkpoints[a.id] = pos;
        cp_size[a.id] = sizes.frontier_bytes(pos);
        cp_bytes += cp_size[a.id];
        break;
      case K::Restore:
        if (!checkpoints.count(a.id)) fail("restore of dead checkpoint " + std::to_string(a.id));
        else pos = checkpoints[a.id];
        break;
      case K::Free:
        if (!checkpoints.count(a.id)) fail("free of dead checkpoint " + std::to_string(a.id));
        else {
          checkpoints.erase(a.id);
          cp_bytes -= cp_size[a.id];
        }
        break;
      case K::StorePartial: {
        auto& slot = partials[a.id];
        if (slot.first == 0) {
          slot.second = sizes.dependent_bytes(pos, a.label);
          part_bytes += slot.second;
        }
        ++slot.first;
        break;
      }
      case K::Merge: {
        const auto it = partials.find(a.id);
        const auto want = dims.count(a.label) ? dims[a.label] : 0;
        if (it == partials.end() || it->second.first != want)
          fail("merge of '" + a.label + "' without exactly " + std::to_string(want) + " stored partials");
        if (it != partials.end()) {
          part_bytes -= it->second.second;
          partials.erase(it);
        }
        break;
      }
    }
    c.peak_checkpoints = std::max(c.peak_checkpoints, checkpoints.size());
    c.peak_partials = std::max(c.peak_partials, partials.size());
    c.peak_stored = std::max(c.peak_stored, checkpoints.size() + partials.size());
    c.peak_stored_bytes = std::max(c.peak_stored_bytes, cp_bytes + part_bytes);
  }
  if (pos != s.size()) fail("program ends at step " + std::to_string(pos) + " of " + std::to_string(s.size()));
  if (!checkpoints.empty()) fail("checkpoints left live at the end");
  if (!partials.empty()) fail("partials left unmerged at the end");
  return c;
}

namespace detail {

inline SpindlePlan plan_with_mode(const LinearSchedule& s, const SliceSpec& spec, LabelSet reuse,
                                  std::uint64_t mem_budget, std::size_t element_bytes, ReuseMode mode) {
  std::vector<std::string> demoted;
  for (;;) {
    auto r = build_reuse_schedule(s, spec, reuse, mode);
    const auto check = check_reuse_schedule(r, s, element_bytes);
    if (!check.ok) throw PlanningError("internal: malformed reuse program: " + check.error);
    if (check.peak_stored_bytes > mem_budget && !r.nested.empty()) {
      // tree reuse gives up the outermost fork, the others the innermost level
      const auto& victim = mode == ReuseMode::Tree ? r.nested.front() : r.nested.back();
      demoted.push_back(victim.index.label);
      reuse.erase(victim.index.label);
      continue;
    }
    r.demoted = demoted;
    const auto sliced = r.sliced_labels();
    const auto per_outer = spindle_multiplies(s, r.nested, sliced);
    if (per_outer != check.multiplies_per_outer)
      throw PlanningError("internal: closed-form multiplies disagree with the action program");
    SpindlePlan plan;
    plan.report.predicted_multiplies = per_outer * r.outer_subtasks();
    plan.report.predicted_peak_bytes = check.peak_stored_bytes;
    const auto c_ori = s.total_cost();
    plan.report.overhead_with_reuse = Rational::from_wide(plan.report.predicted_multiplies, c_ori);
    plan.report.overhead_without_reuse =
        Rational::from_wide(__int128(spec.subtasks()) * s.total_cost(spec.labels()), c_ori);
    plan.schedule = std::move(r);
    return plan;
  }
}

}  // namespace detail

/// Pre-lifetime sharing only: one checkpoint per fork, depth-first.
inline SpindlePlan plan_tree_reuse(const LinearSchedule& s, const SliceSpec& spec, const LabelSet& reuse,
                                   std::uint64_t mem_budget, std::size_t element_bytes = 8) {
  return detail::plan_with_mode(s, spec, reuse, mem_budget, element_bytes, ReuseMode::Tree);
}

/// Post-lifetime sharing only: partial sums merged after each merge point.
inline SpindlePlan plan_merge_reuse(const LinearSchedule& s, const SliceSpec& spec, const LabelSet& reuse,
                                    std::uint64_t mem_budget, std::size_t element_bytes = 8) {
  return detail::plan_with_mode(s, spec, reuse, mem_budget, element_bytes, ReuseMode::Merge);
}

/// Checkpoints at forks and merges after merge points, two-way depth-first.
inline SpindlePlan plan_spindle(const LinearSchedule& s, const SliceSpec& spec, const LabelSet& reuse,
                                std::uint64_t mem_budget, std::size_t element_bytes = 8) {
  return detail::plan_with_mode(s, spec, reuse, mem_budget, element_bytes, ReuseMode::Spindle);
}

inline SpindlePlan plan_spindle(const LinearSchedule& s, const SliceSpec& spec, std::uint64_t mem_budget,
                                std::size_t element_bytes = 8) {
  return plan_spindle(s, spec, spec.labels(), mem_budget, element_bytes);
}

struct TuneMove {
  std::string label;
  bool fork = true;  // false: merge moved
  StepId from = 0;
  StepId to = 0;
  std::uint64_t added_multiplies = 0;
};

struct TuneResult {
  SliceSpec spec;
  LabelSet reuse;
  std::vector<std::string> demoted;
  std::vector<TuneMove> moves;
  std::uint64_t added_multiplies = 0;  // per outer assignment
  std::uint64_t peak_bytes = 0;
};

/// Moves forks earlier and merges later (where checkpoints and merge buffers
/// are smaller) until the stored bytes fit `mem_budget`, picking the
/// cheapest move each round. When no move reduces the peak, the innermost
/// level is demoted to an outer slice.
inline TuneResult tune_memory(const LinearSchedule& s, const SliceSpec& spec, const LabelSet& reuse,
                              std::uint64_t mem_budget, std::size_t element_bytes = 8) {
  TuneResult out;
  out.spec = spec;
  out.reuse = reuse;
  const auto sliced = spec.labels();
  const detail::SizeOracle sizes(s, sliced, element_bytes);
  auto levels_now = [&] { return reuse_levels(s, out.spec, out.reuse, ReuseMode::Spindle); };
  auto entry = [&](const std::string& label) -> SliceEntry& {
    for (auto& e : out.spec.entries)
      if (e.index.label == label) return e;
    throw InvalidArgument("unknown slice '" + label + "'");
  };

  for (;;) {
    auto levels = levels_now();
    if (!detail::levels_nested(levels)) throw PlanningError("reused slice intervals are not nested");
    const auto peak = spindle_peak_bytes(sizes, levels);
    out.peak_bytes = peak;
    if (peak <= mem_budget || levels.empty()) break;
    const auto base = spindle_multiplies(s, levels, sliced);

    struct Cand {
      std::size_t level;
      bool fork;
      StepId to;
      std::uint64_t added;
      std::uint64_t peak;
    };
    std::vector<Cand> cands;
    for (std::size_t j = 0; j < levels.size(); ++j) {
      const StepId lo = j > 0 ? levels[j - 1].fork : 1;
      const StepId hi = j > 0 ? levels[j - 1].merge : s.size();
      for (StepId f = levels[j].fork; f-- > lo;) {
        auto trial = levels;
        trial[j].fork = f;
        cands.push_back({j, true, f, spindle_multiplies(s, trial, sliced) - base, spindle_peak_bytes(sizes, trial)});
      }
      for (StepId m = levels[j].merge + 1; m <= hi; ++m) {
        auto trial = levels;
        trial[j].merge = m;
        cands.push_back({j, false, m, spindle_multiplies(s, trial, sliced) - base, spindle_peak_bytes(sizes, trial)});
      }
    }
    const Cand* pick = nullptr;
    for (const auto& c : cands)  // cheapest move that meets the budget
      if (c.peak <= mem_budget && (!pick || c.added < pick->added)) pick = &c;
    if (!pick)
      for (const auto& c : cands)  // otherwise the cheapest move that helps
        if (c.peak < peak && (!pick || c.added < pick->added || (c.added == pick->added && c.peak < pick->peak)))
          pick = &c;
    if (!pick) {
      const auto& victim = levels.back().index.label;
      out.demoted.push_back(victim);
      out.reuse.erase(victim);
      continue;
    }
    auto& e = entry(levels[pick->level].index.label);
    TuneMove mv{e.index.label, pick->fork, pick->fork ? e.fork : e.merge, pick->to, pick->added};
    (pick->fork ? e.fork : e.merge) = pick->to;
    out.added_multiplies += pick->added;
    out.moves.push_back(std::move(mv));
  }
  out.spec.nesting_ok = intervals_nested(out.spec.entries);
  return out;
}

struct ReuseSubset {
  std::vector<std::string> nested;
  std::vector<std::string> outer;
  LinearSchedule schedule;  // after branch exchange for the nested set
  SliceSpec spec;           // lifetimes on `schedule`
  std::vector<std::pair<std::string, Rational>> ranking;
};

/// Ranks sliced indices by overhead (highest first) and admits them while
/// the admitted set still nests after branch exchange, fits `mem_budget`
/// and stays within `max_k`. Indices with overhead <= 1 are never reused.
inline ReuseSubset choose_reuse_subset(const LinearSchedule& s, const SliceSpec& spec, std::uint64_t mem_budget,
                                       std::size_t max_k, std::size_t element_bytes = 8) {
  ReuseSubset out;
  for (const auto& e : spec.entries) out.ranking.emplace_back(e.index.label, index_overhead(s.tree, e.index));
  std::stable_sort(out.ranking.begin(), out.ranking.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  out.schedule = s;
  const auto all = spec.labels();
  for (const auto& [label, o] : out.ranking) {
    if (out.nested.size() >= max_k || o <= Rational(1)) break;
    auto trial = out.nested;
    trial.push_back(label);
    const auto ex = branch_exchange_nest(s, make_slice_spec(s, trial));
    if (!ex.nesting_ok) continue;
    const detail::SizeOracle sizes(ex.schedule, all, element_bytes);
    const auto levels = reuse_levels(ex.schedule, ex.spec, LabelSet(trial.begin(), trial.end()), ReuseMode::Spindle);
    if (spindle_peak_bytes(sizes, levels) > mem_budget) continue;
    out.nested = std::move(trial);
    out.schedule = ex.schedule;
  }
  std::vector<std::string> labels;
  for (const auto& e : spec.entries) {
    labels.push_back(e.index.label);
    if (std::find(out.nested.begin(), out.nested.end(), e.index.label) == out.nested.end())
      out.outer.push_back(e.index.label);
  }
  out.spec = make_slice_spec(out.schedule, labels);
  return out;
}

inline json reuse_schedule_to_json(const ReuseSchedule& r) {
  json actions = json::array();
  for (const auto& a : r.actions) {
    json j = {{"kind", to_string(a.kind)}};
    if (a.kind == ReuseAction::Kind::Run) {
      j["first"] = a.first;
      j["last"] = a.last;
      j["assignment"] = a.assignment;
    } else {
      j["id"] = a.id;
      if (!a.label.empty()) j["label"] = a.label;
    }
    actions.push_back(std::move(j));
  }
  json nested = json::array();
  for (const auto& lv : r.nested)
    nested.push_back({{"label", lv.index.label}, {"dim", lv.index.dim}, {"fork", lv.fork}, {"merge", lv.merge}});
  return {{"mode", to_string(r.mode)},
          {"steps", r.steps},
          {"nested", std::move(nested)},
          {"outer", indices_to_json(r.outer)},
          {"demoted", r.demoted},
          {"actions", std::move(actions)}};
}

inline json plan_report_to_json(const ReusePlanReport& p) {
  return {{"predicted_multiplies", p.predicted_multiplies},
          {"predicted_peak_bytes", p.predicted_peak_bytes},
          {"overhead_with_reuse", p.overhead_with_reuse.str()},
          {"overhead_without_reuse", p.overhead_without_reuse.str()},
          {"overhead_with_reuse_value", p.overhead_with_reuse.to_double()},
          {"overhead_without_reuse_value", p.overhead_without_reuse.to_double()}};
}

}  // namespace tnc
