#pragma once

#include <bit>
#include <cstdint>
#include <vector>

#include "tnc/permutation.hpp"
#include "tnc/rational.hpp"

namespace tnc {

/// GEMM view of a pairwise contraction.
struct ContractionShape {
  std::uint64_t M = 1;  // free volume of the left operand
  std::uint64_t N = 1;  // free volume of the right operand
  std::uint64_t K = 1;  // volume of the shared indices
  std::size_t n_common = 0;
  std::size_t n_a = 0;
  std::size_t n_b = 0;
  IndexList free_a;
  IndexList common;  // in left-operand order
  IndexList free_b;

  /// 2 * n_common / (n_a + n_b)
  Rational narrow() const {
    if (n_a + n_b == 0) return Rational(0);
    return Rational(static_cast<std::int64_t>(2 * n_common), static_cast<std::int64_t>(n_a + n_b));
  }
  std::uint64_t multiplies() const { return M * K * N; }
};

inline ContractionShape contraction_shape(const IndexList& a, const IndexList& b) {
  ContractionShape s;
  s.n_a = a.size();
  s.n_b = b.size();
  for (const auto& i : a) {
    const auto pos = find_label(b, i.label);
    if (pos < 0) {
      s.free_a.push_back(i);
      continue;
    }
    if (b[static_cast<std::size_t>(pos)].dim != i.dim)
      throw DimensionMismatch("shared label '" + i.label + "' has dimensions " + std::to_string(i.dim) + " and " +
                              std::to_string(b[static_cast<std::size_t>(pos)].dim));
    s.common.push_back(i);
  }
  for (const auto& i : b)
    if (!contains_label(a, i.label)) s.free_b.push_back(i);
  s.n_common = s.common.size();
  s.M = volume(s.free_a);
  s.N = volume(s.free_b);
  s.K = volume(s.common);
  return s;
}

/// The two layout permutations of transpose-transpose-GEMM: left operand to
/// (free, common), right operand to (common, free).
struct TtgtPlans {
  PermutationPlan left;
  PermutationPlan right;
};

inline TtgtPlans ttgt_plans(const IndexList& a, const IndexList& b, const ContractionShape& shape) {
  IndexList left_target = shape.free_a;
  left_target.insert(left_target.end(), shape.common.begin(), shape.common.end());
  IndexList right_target = shape.common;
  right_target.insert(right_target.end(), shape.free_b.begin(), shape.free_b.end());
  return {classify_permutation(a, left_target), classify_permutation(b, right_target)};
}

namespace detail {

template <class Real>
inline void mul_add(std::complex<Real>& acc, const std::complex<Real>& x, const std::complex<Real>& y) {
  const Real re = x.real() * y.real() - x.imag() * y.imag();
  const Real im = x.real() * y.imag() + x.imag() * y.real();
  acc = {acc.real() + re, acc.imag() + im};
}

/// out[m, n] = sum over k in [k0, k1) of a[m, k] * b[k, n], accumulated in
/// ascending k starting from zero.
template <class Real>
void gemm_panel(std::span<const std::complex<Real>> a, std::span<const std::complex<Real>> b, std::size_t M,
                std::size_t N, std::size_t K, std::size_t k0, std::size_t k1, std::span<std::complex<Real>> out) {
  std::fill(out.begin(), out.end(), std::complex<Real>{});
  for (std::size_t m = 0; m < M; ++m) {
    auto* row = out.data() + m * N;
    const auto* arow = a.data() + m * K;
    for (std::size_t k = k0; k < k1; ++k) {
      const auto x = arow[k];
      const auto* brow = b.data() + k * N;
      for (std::size_t n = 0; n < N; ++n) mul_add(row[n], x, brow[n]);
    }
  }
}

}  // namespace detail

/// Einstein summation over the shared labels. Result legs are the left
/// operand's free legs followed by the right operand's free legs.
template <class Real>
Tensor<Real> contract_pair(const Tensor<Real>& a, const Tensor<Real>& b, std::uint64_t* multiplies = nullptr) {
  const auto shape = contraction_shape(a.indices(), b.indices());
  const auto plans = ttgt_plans(a.indices(), b.indices(), shape);
  const auto lhs = permute(a, plans.left);
  const auto rhs = permute(b, plans.right);

  IndexList result = shape.free_a;
  result.insert(result.end(), shape.free_b.begin(), shape.free_b.end());
  Tensor<Real> out(std::move(result));
  detail::gemm_panel<Real>(lhs.data(), rhs.data(), shape.M, shape.N, shape.K, 0, shape.K, out.data());
  if (multiplies) *multiplies += shape.multiplies();
  return out;
}

/// Half-open K ranges of `panels` balanced panels (sizes differ by at most one).
inline std::vector<std::pair<std::uint64_t, std::uint64_t>> k_panels(std::uint64_t K, std::uint64_t panels) {
  if (panels < 1) throw InvalidArgument("panel count must be positive");
  panels = std::min(panels, std::max<std::uint64_t>(K, 1));
  std::vector<std::pair<std::uint64_t, std::uint64_t>> out;
  const std::uint64_t base = K / panels, rem = K % panels;
  std::uint64_t k = 0;
  for (std::uint64_t p = 0; p < panels; ++p) {
    const std::uint64_t len = base + (p < rem ? 1 : 0);
    out.emplace_back(k, k + len);
    k += len;
  }
  return out;
}

/// Longest chain of dependent additions feeding one output element:
/// the largest panel's sequential sum plus the depth of the pairwise combine.
inline std::uint64_t accumulation_chain_length(std::uint64_t K, std::uint64_t panels) {
  const auto ranges = k_panels(K, panels);
  std::uint64_t longest = 0;
  for (const auto& [lo, hi] : ranges) longest = std::max(longest, hi - lo);
  return longest + std::bit_width(ranges.size() - 1);
}

/// Split-K contraction: K is cut into blocks * group_size panels, each panel
/// is accumulated separately, and the panel partials are combined pairwise
/// in a fixed tree so the result is reproducible for given (blocks, group).
template <class Real>
Tensor<Real> split_common_contract(const Tensor<Real>& a, const Tensor<Real>& b, std::int64_t blocks,
                                   std::int64_t group_size, std::uint64_t* multiplies = nullptr) {
  if (blocks < 1 || group_size < 1)
    throw InvalidArgument("split-common contraction needs blocks >= 1 and group size >= 1");
  const auto shape = contraction_shape(a.indices(), b.indices());
  const auto plans = ttgt_plans(a.indices(), b.indices(), shape);
  const auto lhs = permute(a, plans.left);
  const auto rhs = permute(b, plans.right);
  const auto ranges = k_panels(shape.K, static_cast<std::uint64_t>(blocks) * static_cast<std::uint64_t>(group_size));

  const std::size_t MN = shape.M * shape.N;
  std::vector<std::vector<std::complex<Real>>> partials(ranges.size(), std::vector<std::complex<Real>>(MN));
  for (std::size_t p = 0; p < ranges.size(); ++p)
    detail::gemm_panel<Real>(lhs.data(), rhs.data(), shape.M, shape.N, shape.K, ranges[p].first, ranges[p].second,
                             partials[p]);

  while (partials.size() > 1) {
    std::vector<std::vector<std::complex<Real>>> next;
    next.reserve((partials.size() + 1) / 2);
    for (std::size_t i = 0; i + 1 < partials.size(); i += 2) {
      auto& acc = partials[i];
      const auto& rhs_part = partials[i + 1];
      for (std::size_t e = 0; e < MN; ++e) acc[e] += rhs_part[e];
      next.push_back(std::move(acc));
    }
    if (partials.size() % 2) next.push_back(std::move(partials.back()));
    partials = std::move(next);
  }

  IndexList result = shape.free_a;
  result.insert(result.end(), shape.free_b.begin(), shape.free_b.end());
  if (multiplies) *multiplies += shape.multiplies();
  return Tensor<Real>(std::move(result), std::move(partials.front()));
}

}  // namespace tnc
