#include <gtest/gtest.h>

#include "support/oracles.hpp"

using namespace tnc;

namespace {

IndexList named(const std::string& letters) {
  IndexList out;
  for (char c : letters) out.push_back({std::string(1, c), 2});
  return out;
}

}  // namespace

TEST(Permutation, SwappedTailHasOffsetTwoStrideOne) {
  const auto p = classify_permutation(named("fghij"), named("fghji"));
  EXPECT_EQ(p.offset, 2u);
  EXPECT_EQ(p.stride, 1u);
}

TEST(Permutation, BucketsOnConstructedCases) {
  // target tails: the stride run and where its last index sat in the source
  EXPECT_EQ(classify_permutation(named("abcd"), named("bcad")).case_class, PermutationCase::Stride2Offset1);
  EXPECT_EQ(classify_permutation(named("abcd"), named("bacd")).case_class, PermutationCase::Stride4Offset1);
  EXPECT_EQ(classify_permutation(named("abcde"), named("ebacd")).case_class, PermutationCase::Stride4Offset2);
  EXPECT_EQ(classify_permutation(named("abcde"), named("bacde")).case_class, PermutationCase::Stride8Offset1);
  EXPECT_EQ(classify_permutation(named("abcdef"), named("afbcde")).case_class, PermutationCase::Stride8Offset2);
  EXPECT_EQ(classify_permutation(named("abcdefgh"), named("agh" "bcdef")).case_class, PermutationCase::Stride8Offset4);
  EXPECT_EQ(classify_permutation(named("abc"), named("abc")).case_class, PermutationCase::Contiguous);
  EXPECT_EQ(classify_permutation(named("abcdef"), named("bcdfea")).case_class, PermutationCase::ScalarFallback);
}

TEST(Permutation, RejectsMismatchedLabels) {
  EXPECT_THROW(classify_permutation(named("abc"), named("abd")), InvalidPermutation);
  EXPECT_THROW(classify_permutation(named("abc"), named("ab")), InvalidPermutation);
  EXPECT_THROW(classify_permutation({{"a", 2}, {"b", 3}}, {{"b", 2}, {"a", 3}}), InvalidPermutation);
}

TEST(Permutation, ChunkedCopyMatchesElementwiseOracle) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t rank = 1 + rng() % 7;
    IndexList src;
    for (std::size_t i = 0; i < rank; ++i) src.push_back({"l" + std::to_string(i), 1 + rng() % 3});
    auto dst = src;
    std::shuffle(dst.begin(), dst.end(), rng);
    const auto t = random_tensor<double>(src, rng);
    const auto fast = permute(t, dst);
    const auto slow = oracle::naive_permute(t, dst);
    ASSERT_EQ(fast, slow) << "trial " << trial;
    ASSERT_EQ(permute(fast, src), t);
  }
}

TEST(Permutation, ScalarAndLabelOverloads) {
  const Tensor<float> s = Tensor<float>::scalar({2.0f, 1.0f});
  EXPECT_EQ(permute(s, IndexList{}), s);
  std::mt19937_64 rng(2);
  const auto t = random_tensor<float>({{"a", 2}, {"b", 3}}, rng);
  const std::vector<std::string> order{"b", "a"};
  EXPECT_EQ(permute(t, std::span<const std::string>(order)).indices()[0].label, "b");
}
