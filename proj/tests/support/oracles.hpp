#pragma once

// Independent reference implementations used by the test suite. Nothing in
// here calls the library's contraction, permutation or cost code.

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "tnc/tnc.hpp"

namespace oracle {

using cd = std::complex<double>;

/// Amplitude <bits| C |0...0> by dense state-vector simulation. Qubit q is
/// bit (n-1-q) of the basis index, so bits[0] is the most significant.
inline cd statevector_amplitude(const tnc::Circuit& c, const std::string& bits) {
  const std::size_t n = c.n_qubits;
  std::vector<cd> psi(std::size_t{1} << n, 0.0);
  psi[0] = 1.0;
  auto mask = [n](std::size_t q) { return std::size_t{1} << (n - 1 - q); };
  for (const auto& g : c.gates) {
    const auto m = tnc::gate_matrix(g);
    if (g.qubits.size() == 1) {
      const auto b = mask(g.qubits[0]);
      for (std::size_t i = 0; i < psi.size(); ++i) {
        if (i & b) continue;
        const cd x0 = psi[i], x1 = psi[i | b];
        psi[i] = m[0] * x0 + m[1] * x1;
        psi[i | b] = m[2] * x0 + m[3] * x1;
      }
    } else {
      const auto ba = mask(g.qubits[0]), bb = mask(g.qubits[1]);
      for (std::size_t i = 0; i < psi.size(); ++i) {
        if ((i & ba) || (i & bb)) continue;
        const std::size_t idx[4] = {i, i | bb, i | ba, i | ba | bb};
        cd in[4], out[4];
        for (int k = 0; k < 4; ++k) in[k] = psi[idx[k]];
        for (int o = 0; o < 4; ++o) {
          out[o] = 0.0;
          for (int k = 0; k < 4; ++k) out[o] += m[o * 4 + k] * in[k];
        }
        for (int k = 0; k < 4; ++k) psi[idx[k]] = out[k];
      }
    }
  }
  std::size_t at = 0;
  for (std::size_t q = 0; q < n; ++q)
    if (bits[q] == '1') at |= mask(q);
  return psi[at];
}

/// Random circuit: a Hadamard layer, then `depth` rounds of random
/// single-qubit gates followed by random disjoint two-qubit gates.
inline tnc::Circuit random_circuit(std::size_t n, std::size_t depth, std::mt19937_64& rng) {
  static const char* singles[] = {"h", "t", "x", "y", "z", "x_1_2", "y_1_2", "hz_1_2", "rz"};
  static const char* doubles[] = {"cz", "cx", "is", "fs"};
  std::uniform_real_distribution<double> angle(-3.0, 3.0);
  tnc::Circuit c;
  c.n_qubits = n;
  std::size_t cycle = 0;
  for (std::size_t q = 0; q < n; ++q) c.gates.push_back({"h", {q}, {}, cycle});
  for (std::size_t d = 0; d < depth; ++d) {
    ++cycle;
    for (std::size_t q = 0; q < n; ++q) {
      if (rng() % 3 == 0) continue;
      tnc::Gate g{singles[rng() % 9], {q}, {}, cycle};
      if (g.name == "rz") g.params = {angle(rng)};
      c.gates.push_back(g);
    }
    ++cycle;
    std::vector<std::size_t> qs(n);
    for (std::size_t q = 0; q < n; ++q) qs[q] = q;
    std::shuffle(qs.begin(), qs.end(), rng);
    for (std::size_t k = 0; k + 1 < n; k += 2) {
      if (rng() % 4 == 0) continue;
      tnc::Gate g{doubles[rng() % 4], {qs[k], qs[k + 1]}, {}, cycle};
      if (g.name == "fs") g.params = {angle(rng), angle(rng)};
      c.gates.push_back(g);
    }
  }
  return c;
}

inline std::string random_bits(std::size_t n, std::mt19937_64& rng) {
  std::string s(n, '0');
  for (auto& ch : s) ch = (rng() & 1) ? '1' : '0';
  return s;
}

/// Row-major flat offset of a multi-index given as label -> value.
inline std::size_t flat_of(const tnc::IndexList& legs, const std::map<std::string, std::size_t>& at) {
  std::size_t f = 0;
  for (const auto& i : legs) f = f * i.dim + at.at(i.label);
  return f;
}

/// Element-wise permutation into `target` order.
template <class Real>
tnc::Tensor<Real> naive_permute(const tnc::Tensor<Real>& t, const tnc::IndexList& target) {
  tnc::Tensor<Real> out(target);
  std::vector<std::size_t> idx(target.size(), 0);
  for (std::size_t f = 0; f < out.size(); ++f) {
    std::map<std::string, std::size_t> at;
    for (std::size_t k = 0; k < target.size(); ++k) at[target[k].label] = idx[k];
    out[f] = t[flat_of(t.indices(), at)];
    for (std::size_t k = target.size(); k-- > 0;) {
      if (++idx[k] < target[k].dim) break;
      idx[k] = 0;
    }
  }
  return out;
}

/// Einstein summation by enumerating the union of legs. Result legs are
/// a's unshared legs followed by b's unshared legs.
template <class Real>
tnc::Tensor<Real> naive_contract(const tnc::Tensor<Real>& a, const tnc::Tensor<Real>& b) {
  tnc::IndexList out_legs, all;
  std::set<std::string> seen;
  for (const auto& i : a.indices())
    if (tnc::find_label(b.indices(), i.label) < 0) out_legs.push_back(i);
  for (const auto& i : b.indices())
    if (tnc::find_label(a.indices(), i.label) < 0) out_legs.push_back(i);
  for (const auto* side : {&a.indices(), &b.indices()})
    for (const auto& i : *side)
      if (seen.insert(i.label).second) all.push_back(i);
  tnc::Tensor<Real> out(out_legs);
  std::vector<std::size_t> idx(all.size(), 0);
  std::size_t total = 1;
  for (const auto& i : all) total *= i.dim;
  for (std::size_t n = 0; n < total; ++n) {
    std::map<std::string, std::size_t> at;
    for (std::size_t k = 0; k < all.size(); ++k) at[all[k].label] = idx[k];
    const auto x = a[flat_of(a.indices(), at)];
    const auto y = b[flat_of(b.indices(), at)];
    out[flat_of(out_legs, at)] += std::complex<Real>(x.real() * y.real() - x.imag() * y.imag(),
                                                     x.real() * y.imag() + x.imag() * y.real());
    for (std::size_t k = all.size(); k-- > 0;) {
      if (++idx[k] < all[k].dim) break;
      idx[k] = 0;
    }
  }
  return out;
}

/// Step costs of an ssa path computed from leaf shapes with set algebra:
/// each step multiplies the dims of the union of the operands' legs,
/// skipping `projected` labels.
inline std::vector<std::uint64_t> path_step_costs(const std::vector<tnc::IndexList>& shapes, const tnc::SsaPath& path,
                                                  const std::set<std::string>& projected = {}) {
  std::vector<std::map<std::string, std::size_t>> legs;
  for (const auto& s : shapes) {
    std::map<std::string, std::size_t> m;
    for (const auto& i : s) m[i.label] = i.dim;
    legs.push_back(m);
  }
  std::vector<std::uint64_t> costs;
  for (const auto& [i, j] : path) {
    std::map<std::string, std::size_t> uni = legs[i], res;
    for (const auto& kv : legs[j]) uni.insert(kv);
    std::uint64_t c = 1;
    for (const auto& [l, d] : uni)
      if (!projected.count(l)) c *= d;
    costs.push_back(c);
    for (const auto& [l, d] : uni)
      if (legs[i].count(l) != legs[j].count(l)) res[l] = d;
    legs.push_back(res);
  }
  return costs;
}

inline std::uint64_t sum(const std::vector<std::uint64_t>& v) {
  std::uint64_t s = 0;
  for (auto x : v) s += x;
  return s;
}

/// Closed random network: every label joins two distinct random tensors.
inline tnc::TensorNetwork random_network(std::size_t n_tensors, std::size_t n_labels, std::mt19937_64& rng,
                                         std::size_t max_dim = 2) {
  std::vector<tnc::IndexList> legs(n_tensors);
  for (std::size_t l = 0; l < n_labels; ++l) {
    std::size_t a = rng() % n_tensors, b = rng() % n_tensors;
    while (b == a) b = rng() % n_tensors;
    if (l < n_tensors) a = l;  // every tensor gets a leg
    if (b == a) b = (a + 1) % n_tensors;
    const std::size_t d = 2 + rng() % (max_dim - 1);
    const tnc::Index idx{"e" + std::to_string(l), d};
    legs[a].push_back(idx);
    legs[b].push_back(idx);
  }
  std::vector<tnc::Tensor<double>> ts;
  for (auto& l : legs) ts.push_back(tnc::random_tensor<double>(l, rng));
  return tnc::TensorNetwork(std::move(ts));
}

/// Uniformly random pairing order over the leaves.
inline tnc::SsaPath random_ssa_path(std::size_t n_leaves, std::mt19937_64& rng) {
  std::vector<std::size_t> live(n_leaves);
  for (std::size_t i = 0; i < n_leaves; ++i) live[i] = i;
  tnc::SsaPath p;
  std::size_t next = n_leaves;
  while (live.size() > 1) {
    const auto a = rng() % live.size();
    auto b = rng() % (live.size() - 1);
    if (b >= a) ++b;
    p.emplace_back(live[a], live[b]);
    const auto hi = std::max(a, b), lo = std::min(a, b);
    live.erase(live.begin() + static_cast<std::ptrdiff_t>(hi));
    live.erase(live.begin() + static_cast<std::ptrdiff_t>(lo));
    live.push_back(next++);
  }
  return p;
}

/// A stem network built step by step: the stem starts with `base` legs and
/// each step absorbs one tensor carrying some current stem legs (summed) and
/// some fresh legs. Leftover legs stay open.
struct StemBuilder {
  std::vector<tnc::IndexList> shapes;
  tnc::SsaPath path;
  tnc::IndexList stem;
  std::size_t current = 0;

  explicit StemBuilder(tnc::IndexList base) : shapes{base}, stem(std::move(base)) {}

  void absorb(const std::vector<std::string>& contract, const tnc::IndexList& fresh) {
    tnc::IndexList t;
    for (const auto& l : contract) {
      const auto pos = tnc::find_label(stem, l);
      if (pos < 0) throw std::logic_error("stem has no leg " + l);
      t.push_back(stem[static_cast<std::size_t>(pos)]);
      stem.erase(stem.begin() + pos);
    }
    t.insert(t.end(), fresh.begin(), fresh.end());
    stem.insert(stem.end(), fresh.begin(), fresh.end());
    shapes.push_back(t);
    pending_.push_back(shapes.size() - 1);
  }

  /// Ssa path: the stem absorbs the tensors in order.
  tnc::SsaPath ssa() const {
    tnc::SsaPath p;
    std::size_t acc = 0, next = shapes.size();
    for (auto leaf : pending_) {
      p.emplace_back(acc, leaf);
      acc = next++;
    }
    return p;
  }

  tnc::TensorNetwork network(std::mt19937_64& rng) const {
    std::vector<tnc::Tensor<double>> ts;
    for (const auto& s : shapes) ts.push_back(tnc::random_tensor<double>(s, rng));
    return tnc::TensorNetwork(std::move(ts));
  }

  tnc::LinearSchedule schedule() const { return tnc::linearize(tnc::ContractionTree::from_ssa(shapes, ssa())); }

 private:
  std::vector<std::size_t> pending_;
};

inline tnc::IndexList legs(const std::string& prefix, std::size_t from, std::size_t to, std::size_t dim = 2) {
  tnc::IndexList out;
  for (std::size_t i = from; i < to; ++i) out.push_back({prefix + std::to_string(i), dim});
  return out;
}

/// Stem whose rank oscillates between `lo` and `hi`: rising steps sum one
/// leg and add two, falling steps sum two and add one.
inline StemBuilder oscillating_stem(std::size_t steps, std::size_t lo, std::size_t hi) {
  StemBuilder b(legs("s", 0, lo));
  std::size_t fresh = 0, rank = lo;
  bool up = true;
  for (std::size_t k = 0; k < steps; ++k) {
    if (rank >= hi) up = false;
    if (rank <= lo) up = true;
    const std::size_t take = up ? 1 : 2, add = up ? 2 : 1;
    std::vector<std::string> c;
    for (std::size_t i = 0; i < take; ++i) c.push_back(b.stem[i].label);
    b.absorb(c, legs("f", fresh, fresh + add));
    fresh += add;
    rank = b.stem.size();
  }
  return b;
}

/// Random stem with ranks kept inside [lo, hi].
inline StemBuilder random_stem(std::size_t steps, std::size_t lo, std::size_t hi, std::mt19937_64& rng) {
  const std::size_t r0 = lo + rng() % (hi - lo + 1);
  StemBuilder b(legs("s", 0, r0));
  std::size_t fresh = 0;
  for (std::size_t k = 0; k < steps; ++k) {
    const std::size_t rank = b.stem.size();
    std::size_t take = 1 + rng() % 3, add = rng() % 4;
    take = std::min(take, rank);
    while (rank - take + add > hi && add > 0) --add;
    while (rank - take + add < lo) ++add;
    std::vector<std::string> c;
    std::vector<std::size_t> pos(rank);
    for (std::size_t i = 0; i < rank; ++i) pos[i] = i;
    std::shuffle(pos.begin(), pos.end(), rng);
    for (std::size_t i = 0; i < take; ++i) c.push_back(b.stem[pos[i]].label);
    b.absorb(c, legs("f", fresh, fresh + add));
    fresh += add;
  }
  return b;
}

/// Two-stem network: a heavy stem A that never touches the reused legs and
/// a stem B threaded by three nested dimension-4 legs a1 > a2 > a3, plus a
/// dimension-2 leg u1 living only on stem A. All legs are closed.
struct TwoStemNet {
  std::vector<tnc::IndexList> shapes;
  tnc::SsaPath path;
};

inline TwoStemNet two_stem_network() {
  using tnc::Index;
  TwoStemNet n;
  auto& s = n.shapes;
  tnc::IndexList a0 = legs("x", 1, 7);
  for (auto& u : legs("u", 1, 5)) a0.push_back(u);
  s.push_back(a0);                                                   // 0: stem A base
  for (std::size_t j = 1; j <= 6; ++j)                               // 1..6
    s.push_back({{"x" + std::to_string(j), 2}, {"y" + std::to_string(j), 2}});
  s.push_back({{"u1", 2}, {"u2", 2}});                               // 7
  s.push_back({{"u3", 2}, {"u4", 2}});                               // 8
  s.push_back(legs("w", 1, 7));                                      // 9: stem B base
  const Index a1{"a1", 4}, a2{"a2", 4}, a3{"a3", 4};
  s.push_back({{"w1", 2}, {"y1", 2}, a1});                           // 10
  s.push_back({{"w2", 2}, {"y2", 2}, a2});                           // 11
  s.push_back({{"w3", 2}, {"y3", 2}, a3});                           // 12
  s.push_back({{"w4", 2}, {"y4", 2}, a3});                           // 13
  s.push_back({{"w5", 2}, {"y5", 2}, a2});                           // 14
  s.push_back({{"w6", 2}, {"y6", 2}, a1});                           // 15
  std::size_t next = s.size(), acc = 0;
  for (std::size_t leaf = 1; leaf <= 8; ++leaf) {
    n.path.emplace_back(acc, leaf);
    acc = next++;
  }
  const auto top_a = acc;
  acc = 9;
  for (std::size_t leaf = 10; leaf <= 15; ++leaf) {
    n.path.emplace_back(acc, leaf);
    acc = next++;
  }
  n.path.emplace_back(top_a, acc);
  return n;
}

inline tnc::TensorNetwork random_data(const std::vector<tnc::IndexList>& shapes, std::mt19937_64& rng) {
  std::vector<tnc::Tensor<double>> ts;
  for (const auto& s : shapes) ts.push_back(tnc::random_tensor<double>(s, rng));
  return tnc::TensorNetwork(std::move(ts));
}

/// |x - y| / max(|y|, floor)
inline double rel_err(cd x, cd y, double floor = 0.0) {
  const double scale = std::max(std::abs(y), floor);
  return scale == 0.0 ? std::abs(x - y) : std::abs(x - y) / scale;
}

template <class Real>
cd to_cd(std::complex<Real> v) {
  return {static_cast<double>(v.real()), static_cast<double>(v.imag())};
}

}  // namespace oracle
