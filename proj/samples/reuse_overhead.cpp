// Slices a circuit's contraction to a rank cap, then compares the work of
// plain slicing with the reuse plan and checks both amplitudes agree.
//
//   sample_reuse_overhead samples/grid12.circuit 8

#include <fstream>
#include <iostream>
#include <sstream>

#include "tnc/tnc.hpp"

int main(int argc, char** argv) {
  if (argc < 3) {
    std::cerr << "usage: " << argv[0] << " <circuit> <max-rank>\n";
    return 2;
  }
  std::ifstream in(argv[1]);
  std::stringstream text;
  text << in.rdbuf();
  try {
    const auto circuit = tnc::parse_circuit(text.str());
    const auto net = tnc::circuit_to_network(circuit, std::string(circuit.n_qubits, '0'));
    const auto schedule = tnc::linearize(tnc::greedy_path(net.shapes(), 1));
    const auto sel = tnc::select_slices(schedule, std::stoul(argv[2]), 0, 1);
    if (!sel.success) {
      std::cerr << sel.failure << "\n";
      return 3;
    }
    const auto subset = tnc::choose_reuse_subset(schedule, sel.spec, std::uint64_t{1} << 28, 12);
    const tnc::LabelSet nested(subset.nested.begin(), subset.nested.end());
    const auto plan = tnc::plan_spindle(subset.schedule, subset.spec, nested, std::uint64_t{1} << 28);
    const auto leaves = tnc::leaves_as<double>(net);
    const auto plain = tnc::run_sliced(schedule, leaves, sel.spec);
    const auto reused = tnc::run_reuse(subset.schedule, leaves, plan.schedule);

    std::cout << "sliced indices " << sel.spec.entries.size() << ", reused " << nested.size() << "\n"
              << "overhead without reuse " << plan.report.overhead_without_reuse.to_double() << " ("
              << plain.stats.multiplies << " multiplies)\n"
              << "overhead with reuse    " << plan.report.overhead_with_reuse.to_double() << " ("
              << reused.stats.multiplies << " multiplies)\n"
              << "amplitude " << plain.value[0] << " vs " << reused.value[0] << "\n";
  } catch (const tnc::Error& e) {
    std::cerr << e.what() << "\n";
    return 2;
  }
}
