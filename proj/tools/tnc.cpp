// tnc: command-line driver for planning, slicing, reuse, cost simulation and
// execution of tensor-network contractions.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include "tnc/tnc.hpp"

namespace {

using tnc::json;

enum Exit { kOk = 0, kConfig = 2, kPlanning = 3, kVerification = 4 };

struct Config {
  std::string circuit, bitstring, network, tree;
  std::size_t max_rank = 64;
  std::uint64_t mem_budget = std::uint64_t{1} << 30;
  std::size_t reuse_max_k = 12;
  std::size_t workers = 0;
  std::string precision = "single";
  std::uint64_t seed = 1;
  std::size_t group_size = 256;
  std::size_t lookahead = 0;
  std::size_t slice_candidates = 0;
  std::string out;
  std::string format = "json";
  bool reuse = true;
  std::size_t replay_samples = 4;
  std::string partials = "memory";
  std::string spill_path;
  std::size_t intra_cap = 13;
  std::size_t cells = 64;
  bool timing = false;
  std::int64_t inject_fault = -1;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw tnc::InvalidArgument("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

tnc::TensorNetwork load_network(const Config& c) {
  if (!c.network.empty()) return tnc::TensorNetwork::from_json(json::parse(read_file(c.network)));
  if (c.circuit.empty()) throw tnc::InvalidArgument("need --circuit or --network");
  const auto circ = tnc::parse_circuit(read_file(c.circuit));
  const auto bits = c.bitstring.empty() ? std::string(circ.n_qubits, '0') : c.bitstring;
  return tnc::circuit_to_network(circ, bits);
}

tnc::LinearSchedule load_schedule(const Config& c, const tnc::TensorNetwork& net) {
  if (!c.tree.empty()) {
    const auto path = tnc::ssa_path_from_json(json::parse(read_file(c.tree)));
    return tnc::linearize(tnc::ContractionTree::from_ssa(net.shapes(), path));
  }
  return tnc::linearize(tnc::greedy_path(net.shapes(), c.seed));
}

std::size_t element_bytes(const Config& c) { return tnc::parse_precision(c.precision) == tnc::Precision::Single ? 8 : 16; }

/// Everything the planner decides before execution.
struct Plan {
  tnc::TensorNetwork net;
  tnc::LinearSchedule schedule;
  tnc::SliceSelection selection;
  tnc::ReuseSubset subset;
  tnc::TuneResult tuned;
  tnc::SpindlePlan spindle;
};

Plan make_plan(const Config& c) {
  Plan p;
  p.net = load_network(c);
  const auto base = load_schedule(c, p.net);
  p.selection = tnc::select_slices(base, c.max_rank, c.slice_candidates, c.seed);
  if (!p.selection.success) throw tnc::PlanningError("slicing failed: " + p.selection.failure);
  const auto elem = element_bytes(c);
  if (c.reuse) {
    p.subset = tnc::choose_reuse_subset(base, p.selection.spec, c.mem_budget, c.reuse_max_k, elem);
  } else {
    p.subset.schedule = base;
    p.subset.spec = p.selection.spec;
    for (const auto& e : p.selection.spec.entries) p.subset.outer.push_back(e.index.label);
  }
  p.schedule = p.subset.schedule;
  const tnc::LabelSet nested(p.subset.nested.begin(), p.subset.nested.end());
  p.tuned = tnc::tune_memory(p.schedule, p.subset.spec, nested, c.mem_budget, elem);
  p.spindle = tnc::plan_spindle(p.schedule, p.tuned.spec, p.tuned.reuse, c.mem_budget, elem);
  return p;
}

json overheads_json(const std::vector<tnc::Rational>& v) {
  json a = json::array();
  for (const auto& r : v) a.push_back(r.str());
  return a;
}

json plan_json(const Plan& p) {
  json ranking = json::array();
  for (const auto& [label, o] : p.subset.ranking) ranking.push_back({{"label", label}, {"overhead", o.str()}});
  json demoted = p.tuned.demoted;
  for (const auto& d : p.spindle.schedule.demoted) demoted.push_back(d);
  return {{"slices", tnc::slice_spec_to_json(p.tuned.spec)},
          {"slice_overheads", overheads_json(p.selection.round_overheads)},
          {"ranking", std::move(ranking)},
          {"nested", p.subset.nested},
          {"demoted", std::move(demoted)},
          {"tune_added_multiplies", p.tuned.added_multiplies},
          {"report", tnc::plan_report_to_json(p.spindle.report)}};
}

void emit(const Config& c, const json& j, const std::string& csv) {
  std::ostringstream os;
  if (c.format == "csv") os << csv;
  else os << j.dump(2) << "\n";
  if (c.out.empty()) {
    std::cout << os.str();
    return;
  }
  std::ofstream f(c.out, std::ios::binary);
  if (!f) throw tnc::InvalidArgument("cannot write '" + c.out + "'");
  f << os.str();
}

std::string kv_csv(const json& flat) {
  std::ostringstream os;
  os << "field,value\n";
  for (const auto& [k, v] : flat.items()) os << k << "," << (v.is_string() ? v.get<std::string>() : v.dump()) << "\n";
  return os.str();
}

int cmd_plan(const Config& c) {
  const auto net = load_network(c);
  const auto s = load_schedule(c, net);
  const auto m = tnc::tree_metrics(s.tree);
  json j = {{"leaves", s.tree.leaf_count()},
            {"total_cost", m.total_cost},
            {"max_rank", m.max_rank},
            {"peak_memory_elements", m.peak_memory_elements},
            {"tree", tnc::tree_to_json(s.tree)},
            {"schedule", tnc::schedule_to_json(s)}};
  std::ostringstream csv;
  csv << "step,node,cost,rank,stem\n";
  for (tnc::StepId id = 1; id <= s.size(); ++id)
    csv << id << "," << s.step(id).node << "," << s.step(id).cost << "," << s.result_indices(id).size() << ","
        << (s.step(id).stem ? 1 : 0) << "\n";
  emit(c, j, csv.str());
  return kOk;
}

int cmd_slice(const Config& c) {
  const auto net = load_network(c);
  const auto s = load_schedule(c, net);
  const auto sel = tnc::select_slices(s, c.max_rank, c.slice_candidates, c.seed);
  if (!sel.success) throw tnc::PlanningError("slicing failed: " + sel.failure);
  const auto ex = tnc::branch_exchange_nest(s, sel.spec);
  json j = {{"slices", tnc::slice_spec_to_json(sel.spec)},
            {"round_overheads", overheads_json(sel.round_overheads)},
            {"total_overhead", sel.total_overhead.str()},
            {"subtasks", sel.spec.subtasks()},
            {"nesting_ok", sel.spec.nesting_ok},
            {"exchange", {{"swaps", ex.swaps}, {"nesting_ok", ex.nesting_ok}, {"slices", tnc::slice_spec_to_json(ex.spec)}}}};
  std::ostringstream csv;
  csv << "label,dim,fork,start,end,merge\n";
  for (const auto& e : sel.spec.entries)
    csv << e.index.label << "," << e.index.dim << "," << e.fork << "," << e.lifetime.start << "," << e.lifetime.end
        << "," << e.merge << "\n";
  emit(c, j, csv.str());
  return kOk;
}

int cmd_reuse_plan(const Config& c) {
  const auto p = make_plan(c);
  json j = plan_json(p);
  j["schedule"] = tnc::reuse_schedule_to_json(p.spindle.schedule);
  std::ostringstream csv;
  csv << "label,dim,fork,merge,role\n";
  for (const auto& lv : p.spindle.schedule.nested)
    csv << lv.index.label << "," << lv.index.dim << "," << lv.fork << "," << lv.merge << ",nested\n";
  for (const auto& i : p.spindle.schedule.outer) csv << i.label << "," << i.dim << ",,,outer\n";
  emit(c, j, csv.str());
  return kOk;
}

int cmd_cost(const Config& c) {
  const auto net = load_network(c);
  const auto s = load_schedule(c, net);
  auto params = tnc::ArrayParams::with_intra_cap(c.intra_cap, c.cells, element_bytes(c));
  params.validate();
  const auto solo = tnc::simulate_fusion(s, params, false);
  const auto coop = tnc::simulate_fusion(s, params, true);
  const auto batch = tnc::plan_batch_swaps(s, params, c.lookahead);
  json j = {{"params", {{"cells", params.cells}, {"intra_rank_cap", params.intra_rank_cap},
                        {"coop_rank_cap", params.coop_rank_cap}, {"element_bytes", params.element_bytes}}},
            {"solo", tnc::traffic_report_to_json(solo)},
            {"coop", tnc::traffic_report_to_json(coop)},
            {"batched", tnc::traffic_report_to_json(batch)},
            {"lookahead", c.lookahead}};
  std::ostringstream csv;
  csv << "mode,fused_sections,memory_accesses,baseline_accesses,dma_bytes,rma_bytes,swap_events\n";
  for (const auto& [name, r] : {std::pair{"solo", &solo}, {"coop", &coop}, {"batched", &batch}})
    csv << name << "," << r->fused_sections.size() << "," << r->memory_accesses << "," << r->baseline_accesses << ","
        << r->dma_bytes << "," << r->rma_bytes << "," << r->swap_events.size() << "\n";
  emit(c, j, csv.str());
  return kOk;
}

int cmd_perm_stats(const Config& c) {
  const auto net = load_network(c);
  const auto s = load_schedule(c, net);
  const auto h = tnc::permutation_histogram(s);
  json buckets = json::array();
  std::ostringstream csv;
  csv << "case,count,elements\n";
  for (auto k : tnc::kAllPermutationCases) {
    buckets.push_back({{"case", tnc::to_string(k)}, {"count", h.count.at(k)}, {"elements", h.elements.at(k)}});
    csv << tnc::to_string(k) << "," << h.count.at(k) << "," << h.elements.at(k) << "\n";
  }
  emit(c, {{"steps", s.size()}, {"buckets", std::move(buckets)}}, csv.str());
  return kOk;
}

template <class Real>
int execute(const Config& c, bool verify_only) {
  const auto p = make_plan(c);
  const auto leaves = tnc::leaves_as<Real>(p.net);
  tnc::ExecOptions opts;
  opts.workers = c.workers ? c.workers : tnc::workers_from_env(1);
  opts.group_size = c.group_size;
  if (c.partials == "spill") opts.spill_path = c.spill_path.empty() ? (c.out.empty() ? "tnc_partials.bin" : c.out + ".partials") : c.spill_path;
  if (c.inject_fault >= 0) opts.inject_fault = static_cast<std::uint64_t>(c.inject_fault);
  const auto res = tnc::run_reuse(p.schedule, leaves, p.spindle.schedule, opts);
  const auto samples = verify_only ? std::max<std::size_t>(c.replay_samples, 1) : c.replay_samples;
  const auto ver = tnc::replay_verify(p.schedule, leaves, p.spindle.schedule, res.partials, samples, c.seed);

  json j;
  j["precision"] = c.precision;
  if (res.value.rank() == 0) j["amplitude"] = {{"re", res.value[0].real()}, {"im", res.value[0].imag()}};
  else j["tensor"] = tnc::tensor_to_json(res.value);
  j["direct_cost"] = p.schedule.total_cost();
  j["stats"] = tnc::run_stats_to_json(res.stats, c.timing);
  j["workers"] = opts.workers;
  j["group_size"] = c.group_size;
  j["reuse"] = c.reuse;
  j["plan"] = plan_json(p);
  j["verify"] = tnc::verify_report_to_json(ver);
  j["counters_match"] = res.stats.multiplies == p.spindle.report.predicted_multiplies;

  json flat = {{"precision", c.precision}};
  if (res.value.rank() == 0) {
    flat["amplitude_re"] = res.value[0].real();
    flat["amplitude_im"] = res.value[0].imag();
  }
  flat["multiplies"] = res.stats.multiplies;
  flat["predicted_multiplies"] = p.spindle.report.predicted_multiplies;
  flat["bytes_peak"] = res.stats.bytes_peak;
  flat["bytes_moved"] = res.stats.bytes_moved;
  flat["subtasks_done"] = res.stats.subtasks_done;
  flat["overhead_with_reuse"] = p.spindle.report.overhead_with_reuse.str();
  flat["overhead_without_reuse"] = p.spindle.report.overhead_without_reuse.str();
  flat["verify_ok"] = ver.ok;
  flat["max_deviation"] = ver.max_deviation;
  emit(c, j, kv_csv(flat));
  if (!ver.ok) {
    std::cerr << "tnc: replay verification failed (max deviation " << ver.max_deviation << ")\n";
    return kVerification;
  }
  return kOk;
}

int cmd_run(const Config& c, bool verify_only) {
  return tnc::parse_precision(c.precision) == tnc::Precision::Single ? execute<float>(c, verify_only)
                                                                      : execute<double>(c, verify_only);
}

void add_common(CLI::App* sub, Config& c) {
  sub->add_option("--circuit", c.circuit, "circuit file");
  sub->add_option("--bitstring", c.bitstring, "output bitstring (default all zeros)");
  sub->add_option("--network", c.network, "tensor network JSON (instead of --circuit)");
  sub->add_option("--tree", c.tree, "contraction tree JSON with an ssa_path");
  sub->add_option("--seed", c.seed, "seed for path search, slicing and replay sampling");
  sub->add_option("--precision", c.precision, "single or double")->check(CLI::IsMember({"single", "double"}));
  sub->add_option("--out", c.out, "output file (default stdout)");
  sub->add_option("--format", c.format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
}

void add_planning(CLI::App* sub, Config& c) {
  sub->add_option("--max-rank", c.max_rank, "rank cap for intermediates")->check(CLI::Range(1, 64));
  sub->add_option("--slice-candidates", c.slice_candidates, "candidates evaluated per slicing round (0 = all)");
  sub->add_option("--mem-budget-bytes", c.mem_budget, "budget for checkpoints and merge buffers");
  sub->add_option("--reuse-max-k", c.reuse_max_k, "maximum number of nested reused slices");
  sub->add_flag("--reuse,!--no-reuse", c.reuse, "reuse work across sliced subtasks");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tnc: sliced tensor-network contraction with computation reuse"};
  app.require_subcommand(1);
  Config c;

  auto* run = app.add_subcommand("run", "plan, execute, reduce and replay-verify");
  auto* verify = app.add_subcommand("verify", "execute and replay-verify sampled subtasks");
  for (auto* sub : {run, verify}) {
    add_common(sub, c);
    add_planning(sub, c);
    sub->add_option("--workers", c.workers, "worker threads (default: TNC_WORKERS or 1)");
    sub->add_option("--group-size", c.group_size, "partials per reduction group")->check(CLI::PositiveNumber);
    sub->add_option("--replay-samples", c.replay_samples, "outer subtasks recomputed for verification");
    sub->add_option("--partials", c.partials, "memory or spill")->check(CLI::IsMember({"memory", "spill"}));
    sub->add_option("--spill-path", c.spill_path, "spill file for partials");
    sub->add_flag("--timing", c.timing, "include wall time in the report");
    sub->add_option("--inject-fault", c.inject_fault)->group("");
  }
  auto* plan = app.add_subcommand("plan", "contraction tree, metrics and linear schedule");
  add_common(plan, c);
  auto* slice = app.add_subcommand("slice", "greedy slicing under the rank cap");
  add_common(slice, c);
  add_planning(slice, c);
  auto* reuse = app.add_subcommand("reuse-plan", "slice, choose reused subset, tune memory, build the program");
  add_common(reuse, c);
  add_planning(reuse, c);
  auto* cost = app.add_subcommand("cost", "fused-section and swap traffic simulation");
  add_common(cost, c);
  cost->add_option("--lookahead", c.lookahead, "steps of lookahead for batched swaps");
  cost->add_option("--intra-cap", c.intra_cap, "rank a single cell holds");
  cost->add_option("--cells", c.cells, "cells in the array (power of two)");
  auto* perm = app.add_subcommand("perm-stats", "permutation bucket histogram over the schedule");
  add_common(perm, c);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (*run) return cmd_run(c, false);
    if (*verify) return cmd_run(c, true);
    if (*plan) return cmd_plan(c);
    if (*slice) return cmd_slice(c);
    if (*reuse) return cmd_reuse_plan(c);
    if (*cost) return cmd_cost(c);
    if (*perm) return cmd_perm_stats(c);
  } catch (const tnc::PlanningError& e) {
    std::cerr << "tnc: planning failed: " << e.what() << "\n";
    return kPlanning;
  } catch (const tnc::VerificationError& e) {
    std::cerr << "tnc: verification failed: " << e.what() << "\n";
    return kVerification;
  } catch (const tnc::ParseError& e) {
    std::cerr << "tnc: parse error: " << e.what() << "\n";
    return kConfig;
  } catch (const tnc::Error& e) {
    std::cerr << "tnc: " << e.what() << "\n";
    return kConfig;
  } catch (const json::exception& e) {
    std::cerr << "tnc: bad JSON input: " << e.what() << "\n";
    return kConfig;
  }
  return kConfig;
}
