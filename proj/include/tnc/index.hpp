#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tnc/errors.hpp"

namespace tnc {

/// A labeled tensor leg. Labels identify legs across the whole network.
struct Index {
  std::string label;
  std::size_t dim = 2;

  friend bool operator==(const Index&, const Index&) = default;
};

using IndexList = std::vector<Index>;

inline std::uint64_t volume(std::span<const Index> indices) {
  std::uint64_t v = 1;
  for (const auto& i : indices) v *= i.dim;
  return v;
}

inline std::ptrdiff_t find_label(std::span<const Index> indices, const std::string& label) {
  for (std::size_t i = 0; i < indices.size(); ++i)
    if (indices[i].label == label) return static_cast<std::ptrdiff_t>(i);
  return -1;
}

inline bool contains_label(std::span<const Index> indices, const std::string& label) {
  return find_label(indices, label) >= 0;
}

inline void validate_indices(std::span<const Index> indices) {
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i].dim < 1) throw InvalidArgument("index '" + indices[i].label + "' has dimension 0");
    for (std::size_t j = i + 1; j < indices.size(); ++j)
      if (indices[i].label == indices[j].label)
        throw InvalidArgument("duplicate index label '" + indices[i].label + "'");
  }
}

/// Labels present in exactly one of the two lists: first-only labels in `a`
/// order, then second-only labels in `b` order.
inline IndexList symmetric_difference(std::span<const Index> a, std::span<const Index> b) {
  IndexList out;
  for (const auto& i : a)
    if (!contains_label(b, i.label)) out.push_back(i);
  for (const auto& i : b)
    if (!contains_label(a, i.label)) out.push_back(i);
  return out;
}

inline IndexList index_union(std::span<const Index> a, std::span<const Index> b) {
  IndexList out(a.begin(), a.end());
  for (const auto& i : b)
    if (!contains_label(a, i.label)) out.push_back(i);
  return out;
}

inline IndexList index_intersection(std::span<const Index> a, std::span<const Index> b) {
  IndexList out;
  for (const auto& i : a)
    if (contains_label(b, i.label)) out.push_back(i);
  return out;
}

}  // namespace tnc
