#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>

#include "json.hpp"
#include "tnc/tensor.hpp"

namespace tnc {

using json = nlohmann::ordered_json;

inline json indices_to_json(const IndexList& indices) {
  json arr = json::array();
  for (const auto& i : indices) arr.push_back({{"label", i.label}, {"dim", i.dim}});
  return arr;
}

inline IndexList indices_from_json(const json& arr) {
  IndexList out;
  for (const auto& e : arr) out.push_back({e.at("label").get<std::string>(), e.at("dim").get<std::size_t>()});
  return out;
}

/// {"indices": [{"label", "dim"}...], "data": [[re, im], ...]} in row-major order.
template <class Real>
json tensor_to_json(const Tensor<Real>& t) {
  json data = json::array();
  for (const auto& v : t.data()) data.push_back(json::array({v.real(), v.imag()}));
  return {{"indices", indices_to_json(t.indices())}, {"data", std::move(data)}};
}

template <class Real>
Tensor<Real> tensor_from_json(const json& j) {
  auto indices = indices_from_json(j.at("indices"));
  std::vector<std::complex<Real>> data;
  for (const auto& e : j.at("data")) {
    if (!e.is_array() || e.size() != 2) throw InvalidArgument("tensor data entries must be [re, im] pairs");
    data.emplace_back(e[0].get<Real>(), e[1].get<Real>());
  }
  return Tensor<Real>(std::move(indices), std::move(data));
}

// Binary layout, little-endian:
//   char[4]  "TNCB"
//   u32      rank
//   u32      precision tag (4 = single, 8 = double; bytes per real)
//   u64      dims[rank]
//   real     interleaved (re, im) data in row-major order
namespace detail {

static_assert(std::endian::native == std::endian::little, "binary tensor format assumes a little-endian host");

template <class T>
void write_pod(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T read_pod(std::istream& is) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(T))) throw InvalidArgument("truncated binary tensor");
  return v;
}

}  // namespace detail

template <class Real>
void write_tensor_binary(std::ostream& os, const Tensor<Real>& t) {
  os.write("TNCB", 4);
  detail::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(t.rank()));
  detail::write_pod<std::uint32_t>(os, sizeof(Real));
  for (const auto& i : t.indices()) detail::write_pod<std::uint64_t>(os, i.dim);
  os.write(reinterpret_cast<const char*>(t.data().data()), static_cast<std::streamsize>(t.bytes()));
}

/// Reads a binary tensor of either precision and converts it to `Real`.
/// Labels are not stored in the binary form; `labels` names the legs
/// (defaults to i0, i1, ...).
template <class Real>
Tensor<Real> read_tensor_binary(std::istream& is, std::span<const std::string> labels = {}) {
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, "TNCB", 4) != 0) throw InvalidArgument("not a binary tensor");
  const auto rank = detail::read_pod<std::uint32_t>(is);
  const auto tag = detail::read_pod<std::uint32_t>(is);
  if (tag != 4 && tag != 8) throw InvalidArgument("unknown precision tag " + std::to_string(tag));
  if (!labels.empty() && labels.size() != rank) throw InvalidArgument("label count does not match tensor rank");
  IndexList indices;
  for (std::uint32_t i = 0; i < rank; ++i) {
    const auto d = detail::read_pod<std::uint64_t>(is);
    indices.push_back({labels.empty() ? "i" + std::to_string(i) : labels[i], static_cast<std::size_t>(d)});
  }
  const auto n = volume(indices);
  if (tag == sizeof(Real)) {
    std::vector<std::complex<Real>> data(n);
    if (!is.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(n * sizeof(std::complex<Real>))))
      throw InvalidArgument("truncated binary tensor data");
    return Tensor<Real>(std::move(indices), std::move(data));
  }
  using Other = std::conditional_t<std::is_same_v<Real, float>, double, float>;
  std::vector<std::complex<Other>> data(n);
  if (!is.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(n * sizeof(std::complex<Other>))))
    throw InvalidArgument("truncated binary tensor data");
  return Tensor<Other>(std::move(indices), std::move(data)).template cast<Real>();
}

}  // namespace tnc
