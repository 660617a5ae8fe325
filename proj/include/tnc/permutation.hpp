#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "tnc/tensor.hpp"

namespace tnc {

/// Vectorization buckets of a permutation, keyed by [2^stride, offset].
enum class PermutationCase {
  Stride2Offset1,
  Stride4Offset1,
  Stride4Offset2,
  Stride8Offset1,
  Stride8Offset2,
  Stride8Offset4,
  Contiguous,
  ScalarFallback,
};

inline constexpr std::array<PermutationCase, 8> kAllPermutationCases = {
    PermutationCase::Stride2Offset1, PermutationCase::Stride4Offset1, PermutationCase::Stride4Offset2,
    PermutationCase::Stride8Offset1, PermutationCase::Stride8Offset2, PermutationCase::Stride8Offset4,
    PermutationCase::Contiguous,     PermutationCase::ScalarFallback,
};

inline const char* to_string(PermutationCase c) {
  switch (c) {
    case PermutationCase::Stride2Offset1: return "[2,1]";
    case PermutationCase::Stride4Offset1: return "[4,1]";
    case PermutationCase::Stride4Offset2: return "[4,2]";
    case PermutationCase::Stride8Offset1: return "[>=8,1]";
    case PermutationCase::Stride8Offset2: return "[>=8,2]";
    case PermutationCase::Stride8Offset4: return "[>=8,4]";
    case PermutationCase::Contiguous: return "contiguous";
    case PermutationCase::ScalarFallback: return "scalar-fallback";
  }
  return "?";
}

struct PermutationPlan {
  IndexList source_order;
  IndexList target_order;
  /// source position of each target position
  std::vector<std::size_t> source_of;
  /// trailing target indices that form an ascending contiguous run in the source
  std::size_t stride = 0;
  /// n - (source position of the last target index); 1 when the tail stays put
  std::size_t offset = 1;
  PermutationCase case_class = PermutationCase::Contiguous;

  bool identity() const {
    for (std::size_t i = 0; i < source_of.size(); ++i)
      if (source_of[i] != i) return false;
    return true;
  }
  /// Elements copied per chunk: product of the stride run's dims.
  std::uint64_t chunk_elements() const {
    std::uint64_t v = 1;
    for (std::size_t i = target_order.size() - stride; i < target_order.size(); ++i) v *= target_order[i].dim;
    return v;
  }
  /// Element distance in the source between consecutive chunk elements.
  std::uint64_t source_step() const {
    std::uint64_t v = 1;
    for (std::size_t i = source_order.size() + 1 - offset; i < source_order.size(); ++i) v *= source_order[i].dim;
    return v;
  }
};

inline PermutationCase bucket_for(std::size_t rank, std::size_t stride, std::size_t offset, bool identity) {
  if (rank == 0 || identity) return PermutationCase::Contiguous;
  if (stride == 1) return offset == 1 ? PermutationCase::Stride2Offset1 : PermutationCase::ScalarFallback;
  if (stride == 2) {
    if (offset == 1) return PermutationCase::Stride4Offset1;
    if (offset == 2) return PermutationCase::Stride4Offset2;
    return PermutationCase::ScalarFallback;
  }
  if (offset == 1) return PermutationCase::Stride8Offset1;
  if (offset == 2) return PermutationCase::Stride8Offset2;
  if (offset <= 4) return PermutationCase::Stride8Offset4;
  return PermutationCase::ScalarFallback;
}

inline PermutationPlan classify_permutation(const IndexList& source, const IndexList& target) {
  if (source.size() != target.size())
    throw InvalidPermutation("permutation changes rank " + std::to_string(source.size()) + " -> " +
                             std::to_string(target.size()));
  validate_indices(target);
  PermutationPlan plan;
  plan.source_order = source;
  plan.target_order = target;
  plan.source_of.resize(target.size());
  for (std::size_t i = 0; i < target.size(); ++i) {
    const auto pos = find_label(source, target[i].label);
    if (pos < 0) throw InvalidPermutation("label '" + target[i].label + "' is not an index of the source");
    if (source[static_cast<std::size_t>(pos)].dim != target[i].dim)
      throw InvalidPermutation("label '" + target[i].label + "' changes dimension");
    plan.source_of[i] = static_cast<std::size_t>(pos);
  }
  const std::size_t n = target.size();
  if (n == 0) return plan;

  plan.offset = n - plan.source_of[n - 1];
  plan.stride = 1;
  while (plan.stride < n && plan.source_of[n - 1 - plan.stride] + 1 == plan.source_of[n - plan.stride]) ++plan.stride;
  plan.case_class = bucket_for(n, plan.stride, plan.offset, plan.identity());
  return plan;
}

inline IndexList reorder_by_labels(const IndexList& source, std::span<const std::string> labels) {
  IndexList out;
  out.reserve(labels.size());
  for (const auto& l : labels) {
    const auto pos = find_label(source, l);
    if (pos < 0) throw InvalidPermutation("label '" + l + "' is not an index of the source");
    out.push_back(source[static_cast<std::size_t>(pos)]);
  }
  if (out.size() != source.size()) throw InvalidPermutation("target order must list every source label once");
  return out;
}

/// Reference permutation: copies chunks of `plan.chunk_elements()` target
/// elements, each gathered from the source at a fixed `plan.source_step()`.
template <class Real>
Tensor<Real> permute(const Tensor<Real>& t, const PermutationPlan& plan) {
  if (plan.source_order != t.indices()) throw InvalidPermutation("plan does not match tensor indices");
  if (plan.identity()) return t;
  const std::size_t n = t.rank();
  const auto src_strides = t.strides();
  const std::size_t chunk = plan.chunk_elements();
  const std::size_t step = plan.source_step();
  const std::size_t outer_rank = n - plan.stride;

  Tensor<Real> out(plan.target_order);
  auto dst = out.data();
  auto src = t.data();

  std::vector<std::size_t> counter(outer_rank, 0);
  std::size_t base = 0;
  for (std::size_t written = 0; written < dst.size(); written += chunk) {
    auto* d = dst.data() + written;
    const auto* s = src.data() + base;
    if (step == 1) {
      std::copy(s, s + chunk, d);
    } else {
      for (std::size_t e = 0; e < chunk; ++e) d[e] = s[e * step];
    }
    // odometer over the leading target indices
    for (std::size_t i = outer_rank; i-- > 0;) {
      const std::size_t sp = src_strides[plan.source_of[i]];
      if (++counter[i] < plan.target_order[i].dim) {
        base += sp;
        break;
      }
      base -= sp * (counter[i] - 1);
      counter[i] = 0;
    }
  }
  return out;
}

template <class Real>
Tensor<Real> permute(const Tensor<Real>& t, const IndexList& target) {
  return permute(t, classify_permutation(t.indices(), target));
}

template <class Real>
Tensor<Real> permute(const Tensor<Real>& t, std::span<const std::string> target_labels) {
  return permute(t, reorder_by_labels(t.indices(), target_labels));
}

}  // namespace tnc
