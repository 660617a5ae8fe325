#pragma once

#include <complex>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tnc/index.hpp"

namespace tnc {

enum class Precision { Single, Double };

inline const char* to_string(Precision p) { return p == Precision::Single ? "single" : "double"; }

inline Precision parse_precision(const std::string& s) {
  if (s == "single" || s == "float" || s == "complex64") return Precision::Single;
  if (s == "double" || s == "complex128") return Precision::Double;
  throw InvalidArgument("unknown precision '" + s + "'");
}

template <class Real>
constexpr Precision precision_of() {
  static_assert(std::is_same_v<Real, float> || std::is_same_v<Real, double>);
  return std::is_same_v<Real, float> ? Precision::Single : Precision::Double;
}

/// Dense complex tensor with labeled legs, stored row-major (last index
/// fastest) as interleaved (re, im) pairs.
template <class Real>
class Tensor {
 public:
  using value_type = std::complex<Real>;

  Tensor() : data_(1, value_type{}) {}

  explicit Tensor(IndexList indices) : indices_(std::move(indices)) {
    validate_indices(indices_);
    data_.assign(volume(indices_), value_type{});
  }

  Tensor(IndexList indices, std::vector<value_type> data) : indices_(std::move(indices)), data_(std::move(data)) {
    validate_indices(indices_);
    if (data_.size() != volume(indices_))
      throw DimensionMismatch("tensor data length " + std::to_string(data_.size()) + " does not match index volume " +
                              std::to_string(volume(indices_)));
  }

  static Tensor scalar(value_type v) {
    Tensor t;
    t.data_[0] = v;
    return t;
  }

  const IndexList& indices() const noexcept { return indices_; }
  std::size_t rank() const noexcept { return indices_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  std::uint64_t bytes() const noexcept { return data_.size() * sizeof(value_type); }

  std::span<value_type> data() noexcept { return data_; }
  std::span<const value_type> data() const noexcept { return data_; }
  std::vector<value_type>& storage() noexcept { return data_; }

  value_type& operator[](std::size_t flat) { return data_[flat]; }
  const value_type& operator[](std::size_t flat) const { return data_[flat]; }

  /// Row-major strides, in elements.
  std::vector<std::size_t> strides() const {
    std::vector<std::size_t> s(indices_.size(), 1);
    for (std::size_t i = indices_.size(); i-- > 1;) s[i - 1] = s[i] * indices_[i].dim;
    return s;
  }

  value_type at(std::span<const std::size_t> multi) const {
    if (multi.size() != rank()) throw InvalidArgument("multi-index rank mismatch");
    std::size_t flat = 0;
    for (std::size_t i = 0; i < multi.size(); ++i) flat = flat * indices_[i].dim + multi[i];
    return data_[flat];
  }

  /// Fixes `label` to `value` and drops the leg.
  Tensor project(const std::string& label, std::size_t value) const {
    const auto pos = find_label(indices_, label);
    if (pos < 0) return *this;
    const auto p = static_cast<std::size_t>(pos);
    if (value >= indices_[p].dim) throw InvalidArgument("projection value out of range for '" + label + "'");
    std::size_t outer = 1, inner = 1;
    for (std::size_t i = 0; i < p; ++i) outer *= indices_[i].dim;
    for (std::size_t i = p + 1; i < indices_.size(); ++i) inner *= indices_[i].dim;
    const std::size_t d = indices_[p].dim;
    IndexList rest = indices_;
    rest.erase(rest.begin() + pos);
    std::vector<value_type> out(outer * inner);
    for (std::size_t o = 0; o < outer; ++o) {
      const auto* src = data_.data() + (o * d + value) * inner;
      std::copy(src, src + inner, out.data() + o * inner);
    }
    return Tensor(std::move(rest), std::move(out));
  }

  template <class Other>
  Tensor<Other> cast() const {
    std::vector<std::complex<Other>> out(data_.size());
    for (std::size_t i = 0; i < data_.size(); ++i)
      out[i] = {static_cast<Other>(data_[i].real()), static_cast<Other>(data_[i].imag())};
    return Tensor<Other>(indices_, std::move(out));
  }

  Tensor& operator+=(const Tensor& other) {
    if (other.indices_ != indices_) throw DimensionMismatch("tensor addition with different index lists");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
    return *this;
  }

  Tensor& operator*=(value_type s) {
    for (auto& v : data_) v *= s;
    return *this;
  }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  IndexList indices_;
  std::vector<value_type> data_;
};

/// Fills a tensor with independent uniform(-1, 1) real and imaginary parts.
template <class Real>
Tensor<Real> random_tensor(IndexList indices, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Tensor<Real> t(std::move(indices));
  for (auto& v : t.data()) v = {static_cast<Real>(u(rng)), static_cast<Real>(u(rng))};
  return t;
}

}  // namespace tnc
