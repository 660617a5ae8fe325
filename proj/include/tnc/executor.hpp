#pragma once

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <exception>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "tnc/contract.hpp"
#include "tnc/network.hpp"
#include "tnc/reuse.hpp"

namespace tnc {

struct RunStats {
  std::uint64_t multiplies = 0;
  std::uint64_t bytes_peak = 0;   // live intermediates + stored checkpoints/partials, max over workers
  std::uint64_t bytes_moved = 0;  // operand + result bytes summed over executed steps
  double wall_time = 0.0;
  std::uint64_t subtasks_done = 0;  // outer assignments completed

  void absorb(const RunStats& o) {
    multiplies += o.multiplies;
    bytes_peak = std::max(bytes_peak, o.bytes_peak);
    bytes_moved += o.bytes_moved;
    subtasks_done += o.subtasks_done;
  }
};

struct ExecOptions {
  std::size_t workers = 1;
  std::size_t group_size = 0;                  // 0: a single reduction group
  std::uint64_t max_intermediate_elements = 0;  // 0: unlimited
  std::uint64_t checkpoint_budget_bytes = 0;    // 0: unlimited
  std::string spill_path;                       // non-empty: scalar partials go to this file
  std::optional<std::uint64_t> inject_fault;    // outer assignment whose partial is corrupted
};

template <class Real>
struct ExecResult {
  Tensor<Real> value;
  RunStats stats;
  std::vector<Tensor<Real>> partials;  // one per outer assignment, in assignment order
};

/// Worker count from TNC_WORKERS, or `fallback` when unset or invalid.
inline std::size_t workers_from_env(std::size_t fallback = 1) {
  const char* v = std::getenv("TNC_WORKERS");
  if (!v || !*v) return fallback;
  char* end = nullptr;
  const auto n = std::strtoull(v, &end, 10);
  return (end && *end == '\0' && n > 0) ? static_cast<std::size_t>(n) : fallback;
}

template <class Real>
std::vector<Tensor<Real>> leaves_as(const TensorNetwork& net) {
  std::vector<Tensor<Real>> out;
  out.reserve(net.size());
  for (const auto& t : net.tensors()) out.push_back(t.template cast<Real>());
  return out;
}

/// Throws PlanningError naming the first step whose result exceeds `cap` elements.
inline void check_intermediate_cap(const LinearSchedule& s, const LabelSet& sliced, std::uint64_t cap) {
  if (cap == 0) return;
  for (StepId id = 1; id <= s.size(); ++id) {
    const auto v = s.tree.volume(s.step(id).node, sliced);
    if (v > cap)
      throw PlanningError("step " + std::to_string(id) + " produces " + std::to_string(v) +
                          " elements, above the intermediate cap of " + std::to_string(cap));
  }
}

/// Mixed-radix decoding of an assignment number; the last index varies fastest.
inline std::vector<std::size_t> decode_assignment(std::uint64_t n, const std::vector<Index>& indices) {
  std::vector<std::size_t> v(indices.size());
  for (std::size_t i = indices.size(); i-- > 0;) {
    v[i] = static_cast<std::size_t>(n % indices[i].dim);
    n /= indices[i].dim;
  }
  return v;
}

inline std::uint64_t assignment_count(const std::vector<Index>& indices) {
  std::uint64_t n = 1;
  for (const auto& i : indices) n *= i.dim;
  return n;
}

/// Executes schedule steps over a live frontier. Leaves are projected on the
/// sliced legs when consumed; intermediates never carry sliced legs.
template <class Real>
class ScheduleRunner {
 public:
  using Frontier = std::map<std::size_t, Tensor<Real>>;

  ScheduleRunner(const LinearSchedule& s, const std::vector<Tensor<Real>>& leaves, LabelSet sliced)
      : s_(s), leaves_(leaves), sliced_(std::move(sliced)) {
    if (leaves_.size() != s_.tree.leaf_count())
      throw InvalidArgument("leaf count " + std::to_string(leaves_.size()) + " does not match the tree (" +
                            std::to_string(s_.tree.leaf_count()) + ")");
  }

  void set_value(const std::string& label, std::size_t v) { values_[label] = v; }
  void reset() {
    frontier_.clear();
    frontier_bytes_ = 0;
  }

  void run(StepId first, StepId last) {
    for (StepId id = first; id <= last; ++id) step(id);
  }

  const Frontier& frontier() const noexcept { return frontier_; }
  void restore(const Frontier& f) {
    frontier_ = f;
    frontier_bytes_ = 0;
    for (const auto& [n, t] : frontier_) frontier_bytes_ += t.bytes();
  }
  std::uint64_t frontier_bytes() const noexcept { return frontier_bytes_; }

  Tensor<Real>& at(std::size_t node) { return frontier_.at(node); }
  void put(std::size_t node, Tensor<Real> t) {
    auto it = frontier_.find(node);
    if (it != frontier_.end()) frontier_bytes_ -= it->second.bytes();
    frontier_bytes_ += t.bytes();
    frontier_[node] = std::move(t);
  }

  /// Root tensor with legs in the tree's order (sliced legs dropped).
  Tensor<Real> take_result() {
    auto it = frontier_.find(s_.tree.root());
    if (it == frontier_.end()) throw PlanningError("schedule did not produce the root tensor");
    auto t = std::move(it->second);
    frontier_.erase(it);
    frontier_bytes_ = 0;
    IndexList order;
    for (const auto& i : s_.tree.node(s_.tree.root()).indices)
      if (!sliced_.count(i.label)) order.push_back(i);
    return t.indices() == order ? t : permute(t, order);
  }

  /// Bytes held outside the frontier (checkpoints, partial buffers), counted in the peak.
  std::uint64_t stored_bytes = 0;
  RunStats stats;

 private:
  Tensor<Real> fetch(std::size_t node) {
    if (s_.tree.is_leaf(node)) {
      Tensor<Real> t = leaves_[node];
      for (const auto& i : leaves_[node].indices()) {
        if (!sliced_.count(i.label)) continue;
        const auto v = values_.find(i.label);
        if (v == values_.end()) throw InvalidArgument("no value assigned to sliced index '" + i.label + "'");
        t = t.project(i.label, v->second);
      }
      return t;
    }
    auto it = frontier_.find(node);
    if (it == frontier_.end()) throw PlanningError("operand node " + std::to_string(node) + " is not live");
    auto t = std::move(it->second);
    frontier_bytes_ -= t.bytes();
    frontier_.erase(it);
    return t;
  }

  void step(StepId id) {
    const auto& st = s_.step(id);
    const auto a = fetch(st.lhs);
    const auto b = fetch(st.rhs);
    auto c = contract_pair(a, b, &stats.multiplies);
    const auto io = a.bytes() + b.bytes() + c.bytes();
    stats.bytes_moved += io;
    stats.bytes_peak = std::max(stats.bytes_peak, frontier_bytes_ + io + stored_bytes);
    frontier_bytes_ += c.bytes();
    frontier_.emplace(st.node, std::move(c));
  }

  const LinearSchedule& s_;
  const std::vector<Tensor<Real>>& leaves_;
  LabelSet sliced_;
  std::map<std::string, std::size_t> values_;
  Frontier frontier_;
  std::uint64_t frontier_bytes_ = 0;
};

/// Sums partials in groups of `group_size` (left to right), then sums the
/// group results left to right. group_size 0 or >= N is a plain left fold.
template <class Real>
Tensor<Real> hierarchical_reduce(const std::vector<Tensor<Real>>& partials, std::size_t group_size = 0) {
  if (partials.empty()) throw InvalidArgument("nothing to reduce");
  const auto n = partials.size();
  const auto g = (group_size == 0 || group_size >= n) ? n : group_size;
  std::optional<Tensor<Real>> total;
  for (std::size_t start = 0; start < n; start += g) {
    Tensor<Real> acc = partials[start];
    for (std::size_t i = start + 1; i < std::min(n, start + g); ++i) acc += partials[i];
    if (!total) total = std::move(acc);
    else *total += acc;
  }
  return std::move(*total);
}

/// Flips the top exponent bit of the real part of the first element.
template <class Real>
void inject_bit_flip(Tensor<Real>& t) {
  using Bits = std::conditional_t<sizeof(Real) == 8, std::uint64_t, std::uint32_t>;
  auto v = t[0].real();
  auto bits = std::bit_cast<Bits>(v);
  bits ^= Bits{1} << (sizeof(Real) * 8 - 2);
  t[0] = {std::bit_cast<Real>(bits), t[0].imag()};
}

inline constexpr std::size_t kSpillRecordBytes = 24;

/// Spill record: u64 assignment number, f64 real, f64 imaginary.
inline void write_spill_record(std::ostream& os, std::uint64_t assignment, std::complex<double> v) {
  const double re = v.real(), im = v.imag();
  os.write(reinterpret_cast<const char*>(&assignment), 8);
  os.write(reinterpret_cast<const char*>(&re), 8);
  os.write(reinterpret_cast<const char*>(&im), 8);
}

inline std::vector<std::pair<std::uint64_t, std::complex<double>>> read_spill_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InvalidArgument("cannot open spill file '" + path + "'");
  std::vector<std::pair<std::uint64_t, std::complex<double>>> out;
  for (;;) {
    std::uint64_t a = 0;
    double re = 0, im = 0;
    if (!is.read(reinterpret_cast<char*>(&a), 8)) break;
    if (!is.read(reinterpret_cast<char*>(&re), 8) || !is.read(reinterpret_cast<char*>(&im), 8))
      throw ParseError(0, "truncated spill record in '" + path + "'");
    out.emplace_back(a, std::complex<double>(re, im));
  }
  return out;
}

namespace detail {

/// Runs `task(runner, assignment_number)` for every assignment of `outer`,
/// statically block-partitioned over workers. Partials come back in
/// assignment order regardless of the worker count.
template <class Real, class Task>
ExecResult<Real> run_outer(const LinearSchedule& s, const std::vector<Tensor<Real>>& leaves, const LabelSet& sliced,
                           const std::vector<Index>& outer, const ExecOptions& opts, Task task) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto n = assignment_count(outer);
  const auto workers = static_cast<std::uint64_t>(std::max<std::size_t>(1, std::min<std::uint64_t>(opts.workers, n)));
  const bool spill = !opts.spill_path.empty();
  if (spill && !s.tree.node(s.tree.root()).indices.empty())
    throw InvalidArgument("spilled partials need a closed network (scalar result)");

  ExecResult<Real> res;
  res.partials.resize(spill ? 0 : n);
  if (spill) {
    std::ofstream create(opts.spill_path, std::ios::binary | std::ios::trunc);
    if (!create) throw InvalidArgument("cannot create spill file '" + opts.spill_path + "'");
    const std::vector<char> zeros(kSpillRecordBytes * n, 0);
    create.write(zeros.data(), static_cast<std::streamsize>(zeros.size()));
  }
  std::vector<RunStats> stats(workers);
  std::vector<std::exception_ptr> errors(workers);
  auto body = [&](std::uint64_t w) {
    try {
      ScheduleRunner<Real> runner(s, leaves, sliced);
      std::ofstream out;
      if (spill) {
        out.open(opts.spill_path, std::ios::binary | std::ios::in | std::ios::out);
        out.seekp(static_cast<std::streamoff>(w * n / workers * kSpillRecordBytes));
      }
      for (std::uint64_t a = w * n / workers; a < (w + 1) * n / workers; ++a) {
        const auto values = decode_assignment(a, outer);
        for (std::size_t i = 0; i < outer.size(); ++i) runner.set_value(outer[i].label, values[i]);
        runner.reset();
        auto part = task(runner, a);
        if (opts.inject_fault && *opts.inject_fault == a) inject_bit_flip(part);
        if (spill) {
          const auto v = part[0];
          write_spill_record(out, a, {static_cast<double>(v.real()), static_cast<double>(v.imag())});
        } else {
          res.partials[a] = std::move(part);
        }
        ++runner.stats.subtasks_done;
      }
      stats[w] = runner.stats;
    } catch (...) {
      errors[w] = std::current_exception();
    }
  };
  if (workers == 1) {
    body(0);
  } else {
    std::vector<std::thread> pool;
    for (std::uint64_t w = 0; w < workers; ++w) pool.emplace_back(body, w);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  for (const auto& st : stats) res.stats.absorb(st);

  if (spill) {
    for (const auto& [a, v] : read_spill_file(opts.spill_path)) {
      (void)a;
      res.partials.push_back(Tensor<Real>::scalar({static_cast<Real>(v.real()), static_cast<Real>(v.imag())}));
    }
  }
  res.value = hierarchical_reduce(res.partials, opts.group_size);
  res.stats.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

/// Interprets the action program for one outer assignment.
template <class Real>
Tensor<Real> run_program(ScheduleRunner<Real>& runner, const ReuseSchedule& r,
                         const std::vector<std::ptrdiff_t>& partial_node) {
  std::map<std::size_t, typename ScheduleRunner<Real>::Frontier> checkpoints;
  std::map<std::size_t, Tensor<Real>> partials;
  std::map<std::size_t, std::uint64_t> held;
  const auto hold = [&](std::size_t slot, std::uint64_t bytes) {
    runner.stored_bytes -= held[slot];
    held[slot] = bytes;
    runner.stored_bytes += bytes;
  };
  std::map<std::size_t, std::uint64_t> part_held;
  const auto hold_part = [&](std::size_t slot, std::uint64_t bytes) {
    runner.stored_bytes -= part_held[slot];
    part_held[slot] = bytes;
    runner.stored_bytes += bytes;
  };
  for (const auto& a : r.actions) {
    using K = ReuseAction::Kind;
    switch (a.kind) {
      case K::Run:
        for (std::size_t i = 0; i < a.assignment.size(); ++i) runner.set_value(r.nested[i].index.label, a.assignment[i]);
        runner.run(a.first, a.last);
        break;
      case K::Checkpoint:
        checkpoints[a.id] = runner.frontier();
        hold(a.id, runner.frontier_bytes());
        break;
      case K::Restore:
        runner.restore(checkpoints.at(a.id));
        break;
      case K::Free:
        checkpoints.erase(a.id);
        hold(a.id, 0);
        break;
      case K::StorePartial: {
        const auto node = static_cast<std::size_t>(partial_node.at(a.id));
        auto it = partials.find(a.id);
        if (it == partials.end()) {
          partials.emplace(a.id, runner.at(node));
          hold_part(a.id, runner.at(node).bytes());
        } else {
          it->second += runner.at(node);
        }
        break;
      }
      case K::Merge: {
        const auto node = static_cast<std::size_t>(partial_node.at(a.id));
        runner.put(node, std::move(partials.at(a.id)));
        partials.erase(a.id);
        hold_part(a.id, 0);
        break;
      }
    }
  }
  return runner.take_result();
}

}  // namespace detail

template <class Real>
ExecResult<Real> run_direct(const LinearSchedule& s, const std::vector<Tensor<Real>>& leaves,
                            const ExecOptions& opts = {}) {
  check_intermediate_cap(s, {}, opts.max_intermediate_elements);
  auto o = opts;
  o.workers = 1;
  return detail::run_outer<Real>(s, leaves, {}, {}, o, [&](ScheduleRunner<Real>& r, std::uint64_t) {
    r.run(1, s.size());
    return r.take_result();
  });
}

/// Sum over every assignment of the sliced legs of the projected contraction.
template <class Real>
ExecResult<Real> run_sliced(const LinearSchedule& s, const std::vector<Tensor<Real>>& leaves, const SliceSpec& spec,
                            const ExecOptions& opts = {}) {
  const auto sliced = spec.labels();
  check_intermediate_cap(s, sliced, opts.max_intermediate_elements);
  std::vector<Index> outer;
  for (const auto& e : spec.entries) outer.push_back(e.index);
  return detail::run_outer<Real>(s, leaves, sliced, outer, opts, [&](ScheduleRunner<Real>& r, std::uint64_t) {
    r.run(1, s.size());
    return r.take_result();
  });
}

/// Executes a reuse program once per outer assignment; nested levels run
/// sequentially inside each worker.
template <class Real>
ExecResult<Real> run_reuse(const LinearSchedule& s, const std::vector<Tensor<Real>>& leaves, const ReuseSchedule& r,
                           const ExecOptions& opts = {}) {
  const auto sliced = r.sliced_labels();
  check_intermediate_cap(s, sliced, opts.max_intermediate_elements);
  const detail::SizeOracle sizes(s, sliced, sizeof(std::complex<Real>));
  if (opts.checkpoint_budget_bytes > 0) {
    std::uint64_t stored = 0;
    for (const auto& lv : r.nested) {
      stored += sizes.frontier_bytes(lv.fork - 1);
      if (stored > opts.checkpoint_budget_bytes)
        throw PlanningError("checkpoint at the fork of '" + lv.index.label + "' (step " + std::to_string(lv.fork) +
                            ") exceeds the checkpoint budget of " + std::to_string(opts.checkpoint_budget_bytes) +
                            " bytes");
    }
  }
  std::vector<std::ptrdiff_t> partial_node;
  for (const auto& lv : r.nested) {
    partial_node.push_back(sizes.dependent_node(lv.merge, lv.index.label));
    if (partial_node.back() < 0)
      throw PlanningError("no tensor depends on '" + lv.index.label + "' at its merge step");
  }
  return detail::run_outer<Real>(s, leaves, sliced, r.outer, opts, [&](ScheduleRunner<Real>& runner, std::uint64_t) {
    return detail::run_program(runner, r, partial_node);
  });
}

template <class Real>
constexpr double default_tolerance() {
  return sizeof(Real) == 4 ? 1e-5 : 1e-10;
}

struct ReplaySample {
  std::uint64_t assignment = 0;
  double deviation = 0.0;
  bool ok = true;
};

struct VerifyReport {
  std::vector<ReplaySample> samples;
  double max_deviation = 0.0;
  double tolerance = 0.0;
  bool ok = true;
};

/// max |x - y| over max(|x|, |y|) elementwise maxima; 0 when both vanish.
template <class Real>
double relative_deviation(const Tensor<Real>& recorded, const Tensor<Real>& recomputed) {
  if (recorded.size() != recomputed.size()) return std::numeric_limits<double>::infinity();
  double diff = 0, scale = 0;
  for (std::size_t i = 0; i < recorded.size(); ++i) {
    const std::complex<double> x(recorded[i].real(), recorded[i].imag());
    const std::complex<double> y(recomputed[i].real(), recomputed[i].imag());
    if (!std::isfinite(x.real()) || !std::isfinite(x.imag())) return std::numeric_limits<double>::infinity();
    diff = std::max(diff, std::abs(x - y));
    scale = std::max({scale, std::abs(x), std::abs(y)});
  }
  return scale == 0 ? diff : diff / scale;
}

/// Recomputes `sample_count` seeded-random outer partials without reuse (as
/// the sum of plain projected runs over the nested legs) and compares them
/// with the recorded ones.
template <class Real>
VerifyReport replay_verify(const LinearSchedule& s, const std::vector<Tensor<Real>>& leaves, const ReuseSchedule& r,
                           const std::vector<Tensor<Real>>& partials, std::size_t sample_count, std::uint64_t seed,
                           double tolerance = default_tolerance<Real>()) {
  VerifyReport rep;
  rep.tolerance = tolerance;
  const auto n = assignment_count(r.outer);
  if (partials.size() != n) throw InvalidArgument("recorded partial count does not match the outer assignments");
  std::vector<std::uint64_t> all(n), picked;
  for (std::uint64_t i = 0; i < n; ++i) all[i] = i;
  std::mt19937_64 rng(seed);
  std::sample(all.begin(), all.end(), std::back_inserter(picked), std::min<std::uint64_t>(sample_count, n), rng);

  std::vector<Index> nested;
  for (const auto& lv : r.nested) nested.push_back(lv.index);
  ScheduleRunner<Real> runner(s, leaves, r.sliced_labels());
  for (auto a : picked) {
    const auto ov = decode_assignment(a, r.outer);
    for (std::size_t i = 0; i < r.outer.size(); ++i) runner.set_value(r.outer[i].label, ov[i]);
    std::optional<Tensor<Real>> sum;
    for (std::uint64_t b = 0; b < assignment_count(nested); ++b) {
      const auto nv = decode_assignment(b, nested);
      for (std::size_t i = 0; i < nested.size(); ++i) runner.set_value(nested[i].label, nv[i]);
      runner.reset();
      runner.run(1, s.size());
      auto t = runner.take_result();
      if (!sum) sum = std::move(t);
      else *sum += t;
    }
    ReplaySample smp{a, relative_deviation(partials[a], *sum), true};
    smp.ok = smp.deviation <= tolerance;
    rep.max_deviation = std::max(rep.max_deviation, smp.deviation);
    rep.ok = rep.ok && smp.ok;
    rep.samples.push_back(smp);
  }
  return rep;
}

/// Seeded Bernoulli failure injector: fraction of `trials` in which at least
/// one of `n` partials fails with probability `p`.
inline double simulate_failure_rate(std::uint64_t n, double p, std::uint64_t trials, std::uint64_t seed) {
  if (!(p >= 0.0 && p <= 1.0)) throw InvalidArgument("failure probability must lie in [0, 1]");
  if (trials == 0) return 0.0;
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution fail(p);
  std::uint64_t failed = 0;
  for (std::uint64_t t = 0; t < trials; ++t) {
    bool any = false;
    for (std::uint64_t i = 0; i < n && !any; ++i) any = fail(rng);
    failed += any ? 1 : 0;
  }
  return static_cast<double>(failed) / static_cast<double>(trials);
}

inline json run_stats_to_json(const RunStats& s, bool with_time = true) {
  json j = {{"multiplies", s.multiplies},
            {"bytes_peak", s.bytes_peak},
            {"bytes_moved", s.bytes_moved},
            {"subtasks_done", s.subtasks_done}};
  if (with_time) j["wall_time"] = s.wall_time;
  return j;
}

inline json verify_report_to_json(const VerifyReport& r) {
  json samples = json::array();
  for (const auto& s : r.samples) samples.push_back({{"assignment", s.assignment}, {"deviation", s.deviation}, {"ok", s.ok}});
  return {{"ok", r.ok}, {"tolerance", r.tolerance}, {"max_deviation", r.max_deviation}, {"samples", std::move(samples)}};
}

}  // namespace tnc
