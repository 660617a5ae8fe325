#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "tnc/errors.hpp"

namespace tnc {

struct Gate {
  std::string name;
  std::vector<std::size_t> qubits;
  std::vector<double> params;
  std::size_t cycle = 0;
};

struct Circuit {
  std::size_t n_qubits = 0;
  std::vector<Gate> gates;
};

struct GateKind {
  const char* name;
  std::size_t arity;
  std::size_t n_params;
};

inline constexpr GateKind kGateKinds[] = {
    {"h", 1, 0},      {"t", 1, 0},     {"x", 1, 0},  {"y", 1, 0},  {"z", 1, 0},   {"x_1_2", 1, 0}, {"y_1_2", 1, 0},
    {"hz_1_2", 1, 0}, {"rz", 1, 1},    {"cz", 2, 0}, {"cx", 2, 0}, {"is", 2, 0},  {"fs", 2, 2},
};

inline const GateKind* find_gate_kind(const std::string& name) {
  for (const auto& k : kGateKinds)
    if (name == k.name) return &k;
  return nullptr;
}

/// Row-major unitary of a gate. Two-qubit gates use |q0 q1> with q0 as the
/// high bit. fs(theta, phi) is the fSim gate:
///   [[1,0,0,0],[0,cos t,-i sin t,0],[0,-i sin t,cos t,0],[0,0,0,e^{-i phi}]].
inline std::vector<std::complex<double>> gate_matrix(const Gate& g) {
  using C = std::complex<double>;
  const double r = 1.0 / std::sqrt(2.0);
  const C i{0.0, 1.0};
  const auto& n = g.name;
  if (n == "h") return {r, r, r, -r};
  if (n == "t") return {1.0, 0.0, 0.0, std::polar(1.0, std::numbers::pi / 4)};
  if (n == "x") return {0.0, 1.0, 1.0, 0.0};
  if (n == "y") return {0.0, -i, i, 0.0};
  if (n == "z") return {1.0, 0.0, 0.0, -1.0};
  if (n == "x_1_2") return {r, -i * r, -i * r, r};
  if (n == "y_1_2") return {r, -r, r, r};
  if (n == "hz_1_2") {
    // exp(-i pi/4 W), W = (X + Y) / sqrt(2)
    const C w01 = std::polar(1.0, -std::numbers::pi / 4), w10 = std::polar(1.0, std::numbers::pi / 4);
    return {r, -i * r * w01, -i * r * w10, r};
  }
  if (n == "rz") {
    const double t = g.params.at(0);
    return {std::polar(1.0, -t / 2), 0.0, 0.0, std::polar(1.0, t / 2)};
  }
  if (n == "cz") return {1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, -1};
  if (n == "cx") return {1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 0, 1, 0, 0, 1, 0};
  if (n == "is") return {1, 0, 0, 0, 0, 0, i, 0, 0, i, 0, 0, 0, 0, 0, 1};
  if (n == "fs") {
    const double t = g.params.at(0), p = g.params.at(1);
    const C c = std::cos(t), s = -i * std::sin(t);
    return {1, 0, 0, 0, 0, c, s, 0, 0, s, c, 0, 0, 0, 0, std::polar(1.0, -p)};
  }
  throw InvalidArgument("unsupported gate '" + n + "'");
}

/// Parses the line-oriented circuit format:
///   <n_qubits>
///   <cycle> <gate> <q0> [q1] [params...]
/// Blank lines and '#' comments are ignored. Gates are returned stably
/// sorted by cycle.
inline Circuit parse_circuit(const std::string& text) {
  Circuit c;
  std::istringstream in(text);
  std::string raw;
  std::size_t line_no = 0;
  bool have_header = false;
  std::map<std::size_t, std::set<std::size_t>> busy;

  auto parse_uint = [&](const std::string& tok, const char* what) {
    std::size_t pos = 0;
    unsigned long long v = 0;
    try {
      if (!tok.empty() && tok[0] == '-') throw std::invalid_argument("negative");
      v = std::stoull(tok, &pos);
    } catch (const std::exception&) {
      throw ParseError(line_no, std::string("expected ") + what + ", got '" + tok + "'");
    }
    if (pos != tok.size()) throw ParseError(line_no, std::string("expected ") + what + ", got '" + tok + "'");
    return static_cast<std::size_t>(v);
  };

  while (std::getline(in, raw)) {
    ++line_no;
    if (const auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
    std::istringstream ls(raw);
    std::vector<std::string> tok;
    for (std::string t; ls >> t;) tok.push_back(t);
    if (tok.empty()) continue;

    if (!have_header) {
      if (tok.size() != 1) throw ParseError(line_no, "first line must hold only the qubit count");
      c.n_qubits = parse_uint(tok[0], "qubit count");
      if (c.n_qubits == 0) throw ParseError(line_no, "qubit count must be positive");
      have_header = true;
      continue;
    }
    if (tok.size() < 3) throw ParseError(line_no, "expected '<cycle> <gate> <qubit>...'");
    Gate g;
    g.cycle = parse_uint(tok[0], "cycle");
    g.name = tok[1];
    const auto* kind = find_gate_kind(g.name);
    if (!kind) throw ParseError(line_no, "unknown gate '" + g.name + "'");
    if (tok.size() != 2 + kind->arity + kind->n_params)
      throw ParseError(line_no, "gate '" + g.name + "' takes " + std::to_string(kind->arity) + " qubit(s) and " +
                                    std::to_string(kind->n_params) + " parameter(s)");
    for (std::size_t q = 0; q < kind->arity; ++q) {
      const auto id = parse_uint(tok[2 + q], "qubit id");
      if (id >= c.n_qubits)
        throw ParseError(line_no, "qubit " + std::to_string(id) + " out of range for " +
                                      std::to_string(c.n_qubits) + " qubits");
      if (!busy[g.cycle].insert(id).second)
        throw ParseError(line_no, "qubit " + std::to_string(id) + " used twice in cycle " + std::to_string(g.cycle));
      g.qubits.push_back(id);
    }
    for (std::size_t p = 0; p < kind->n_params; ++p) {
      const auto& t = tok[2 + kind->arity + p];
      try {
        std::size_t pos = 0;
        g.params.push_back(std::stod(t, &pos));
        if (pos != t.size()) throw std::invalid_argument(t);
      } catch (const std::exception&) {
        throw ParseError(line_no, "bad gate parameter '" + t + "'");
      }
    }
    c.gates.push_back(std::move(g));
  }
  if (!have_header) throw ParseError(line_no, "empty circuit description");
  std::stable_sort(c.gates.begin(), c.gates.end(), [](const Gate& a, const Gate& b) { return a.cycle < b.cycle; });
  return c;
}

inline std::string format_circuit(const Circuit& c) {
  std::ostringstream os;
  os.precision(17);
  os << c.n_qubits << "\n";
  for (const auto& g : c.gates) {
    os << g.cycle << " " << g.name;
    for (auto q : g.qubits) os << " " << q;
    for (auto p : g.params) os << " " << p;
    os << "\n";
  }
  return os.str();
}

}  // namespace tnc
