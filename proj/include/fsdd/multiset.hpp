#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "fsdd/rng.hpp"

namespace fsdd {

/// Unordered collection of M token indices drawn from a codebook of size C.
///
/// Elements are kept sorted, so two multisets built from different orderings
/// of the same elements compare equal.
class TokenMultiset {
 public:
  /// Cardinality is taken from `tokens.size()`.
  TokenMultiset(std::vector<int> tokens, int codebook_size);
  /// Also checks that `tokens.size() == cardinality`.
  TokenMultiset(std::vector<int> tokens, int codebook_size, int cardinality);

  int codebook_size() const noexcept { return codebook_size_; }
  int cardinality() const noexcept { return static_cast<int>(tokens_.size()); }
  /// Ascending token order.
  std::span<const int> tokens() const noexcept { return tokens_; }

  friend bool operator==(const TokenMultiset&, const TokenMultiset&) = default;

 private:
  std::vector<int> tokens_;
  int codebook_size_;
};

/// Length-C vector of non-negative counts summing to exactly M.
class CountVector {
 public:
  /// Throws ValidationError on a negative entry, an entry above M, or a sum != M.
  CountVector(std::vector<int> counts, int target_sum);

  int codebook_size() const noexcept { return static_cast<int>(counts_.size()); }
  int target_sum() const noexcept { return target_sum_; }
  std::span<const int> counts() const noexcept { return counts_; }
  int operator[](std::size_t j) const { return counts_[j]; }
  const std::vector<int>& to_vector() const noexcept { return counts_; }

  friend bool operator==(const CountVector&, const CountVector&) = default;
  friend auto operator<=>(const CountVector& a, const CountVector& b) {
    return a.counts_ <=> b.counts_;
  }

 private:
  std::vector<int> counts_;
  int target_sum_;
};

/// Sum of a raw integer sequence (64-bit so large C*M cannot overflow).
std::int64_t total(std::span<const int> values);

/// True when `values` would form a valid CountVector for target sum `m`.
bool satisfies_fixed_sum(std::span<const int> values, int m);

/// Multiplicity of each codebook index.
CountVector set_to_counts(const TokenMultiset& s);

/// Inverse of set_to_counts; tokens come out in ascending index order.
TokenMultiset counts_to_set(const CountVector& x);

/// Raw-sequence overload: rejects negative entries or a sum other than `m`.
TokenMultiset counts_to_set(std::span<const int> counts, int m);

/// Ordered sequence of the multiset's elements, shuffled deterministically.
std::vector<int> random_permutation(const TokenMultiset& s, RngStream& rng);

}  // namespace fsdd
