#pragma once

#include <map>
#include <string>
#include <vector>

#include "tnc/circuit.hpp"
#include "tnc/tensor_io.hpp"

namespace tnc {

/// A set of tensors joined by shared labels. Each label appears in at most
/// two tensors; a closed network has every label in exactly two.
class TensorNetwork {
 public:
  TensorNetwork() = default;
  explicit TensorNetwork(std::vector<Tensor<double>> tensors) : tensors_(std::move(tensors)) { validate(); }

  void add(Tensor<double> t) {
    tensors_.push_back(std::move(t));
    validate();
  }

  const std::vector<Tensor<double>>& tensors() const noexcept { return tensors_; }
  std::size_t size() const noexcept { return tensors_.size(); }

  std::vector<IndexList> shapes() const {
    std::vector<IndexList> out;
    out.reserve(tensors_.size());
    for (const auto& t : tensors_) out.push_back(t.indices());
    return out;
  }

  /// label -> (occurrences, dim)
  std::map<std::string, std::pair<std::size_t, std::size_t>> label_table() const {
    std::map<std::string, std::pair<std::size_t, std::size_t>> table;
    for (const auto& t : tensors_)
      for (const auto& i : t.indices()) {
        auto [it, fresh] = table.try_emplace(i.label, 0, i.dim);
        if (!fresh && it->second.second != i.dim)
          throw DimensionMismatch("label '" + i.label + "' used with dimensions " + std::to_string(it->second.second) +
                                  " and " + std::to_string(i.dim));
        ++it->second.first;
      }
    return table;
  }

  bool closed() const {
    for (const auto& [label, entry] : label_table())
      if (entry.first != 2) return false;
    return true;
  }

  json to_json() const {
    json arr = json::array();
    for (const auto& t : tensors_) arr.push_back(tensor_to_json(t));
    return {{"tensors", std::move(arr)}};
  }

  static TensorNetwork from_json(const json& j) {
    std::vector<Tensor<double>> ts;
    for (const auto& t : j.at("tensors")) ts.push_back(tensor_from_json<double>(t));
    return TensorNetwork(std::move(ts));
  }

 private:
  void validate() const {
    for (const auto& [label, entry] : label_table())
      if (entry.first > 2) throw InvalidArgument("label '" + label + "' appears in more than two tensors");
  }

  std::vector<Tensor<double>> tensors_;
};

inline std::string wire_label(std::size_t qubit, std::size_t segment) {
  return "q" + std::to_string(qubit) + "_" + std::to_string(segment);
}

/// Closed network whose full contraction is <bitstring| C |0...0>:
/// |0> vectors, one rank-2 or rank-4 tensor per gate (legs: outputs then
/// inputs), and <b_i| projectors on the final wire segments.
inline TensorNetwork circuit_to_network(const Circuit& c, const std::string& bitstring) {
  if (bitstring.size() != c.n_qubits)
    throw InvalidArgument("bitstring length " + std::to_string(bitstring.size()) + " does not match " +
                          std::to_string(c.n_qubits) + " qubits");
  for (char b : bitstring)
    if (b != '0' && b != '1') throw InvalidArgument("bitstring must contain only 0 and 1");

  std::vector<Tensor<double>> ts;
  std::vector<std::size_t> segment(c.n_qubits, 0);
  for (std::size_t q = 0; q < c.n_qubits; ++q) ts.emplace_back(IndexList{{wire_label(q, 0), 2}}, std::vector<std::complex<double>>{1.0, 0.0});

  for (const auto& g : c.gates) {
    for (auto q : g.qubits)
      if (q >= c.n_qubits) throw InvalidArgument("gate qubit out of range");
    IndexList outs, ins;
    for (auto q : g.qubits) {
      ins.push_back({wire_label(q, segment[q]), 2});
      outs.push_back({wire_label(q, ++segment[q]), 2});
    }
    IndexList legs = outs;
    legs.insert(legs.end(), ins.begin(), ins.end());
    ts.emplace_back(std::move(legs), gate_matrix(g));
  }

  for (std::size_t q = 0; q < c.n_qubits; ++q) {
    std::vector<std::complex<double>> proj{0.0, 0.0};
    proj[bitstring[q] == '1' ? 1 : 0] = 1.0;
    ts.emplace_back(IndexList{{wire_label(q, segment[q]), 2}}, std::move(proj));
  }
  return TensorNetwork(std::move(ts));
}

}  // namespace tnc
