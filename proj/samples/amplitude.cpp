// Contracts one amplitude of a circuit file directly and prints it with the
// contraction cost.
//
//   sample_amplitude samples/demo3.circuit 101

#include <fstream>
#include <iostream>
#include <sstream>

#include "tnc/tnc.hpp"

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: " << argv[0] << " <circuit> [bitstring]\n";
    return 2;
  }
  std::ifstream in(argv[1]);
  std::stringstream text;
  text << in.rdbuf();
  try {
    const auto circuit = tnc::parse_circuit(text.str());
    const std::string bits = argc > 2 ? argv[2] : std::string(circuit.n_qubits, '0');
    const auto net = tnc::circuit_to_network(circuit, bits);
    const auto schedule = tnc::linearize(tnc::greedy_path(net.shapes(), 1));
    const auto res = tnc::run_direct(schedule, tnc::leaves_as<double>(net));
    const auto m = tnc::tree_metrics(schedule.tree);
    std::cout << "<" << bits << "|C|0> = " << res.value[0] << "\n"
              << "steps " << schedule.size() << ", multiplies " << res.stats.multiplies << ", max rank " << m.max_rank
              << "\n";
  } catch (const tnc::Error& e) {
    std::cerr << e.what() << "\n";
    return 2;
  }
}
