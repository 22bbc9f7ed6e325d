#include "fsdd/multiset.hpp"

#include <algorithm>
#include <numeric>
#include <string>
#include <utility>

#include "fsdd/error.hpp"

namespace fsdd {

TokenMultiset::TokenMultiset(std::vector<int> tokens, int codebook_size)
    : tokens_(std::move(tokens)), codebook_size_(codebook_size) {
  if (codebook_size_ <= 0) {
    throw ValidationError("codebook size must be positive, got " +
                          std::to_string(codebook_size_));
  }
  for (int t : tokens_) {
    if (t < 0 || t >= codebook_size_) {
      throw ValidationError("token index " + std::to_string(t) + " outside [0, " +
                            std::to_string(codebook_size_) + ")");
    }
  }
  std::sort(tokens_.begin(), tokens_.end());
}

TokenMultiset::TokenMultiset(std::vector<int> tokens, int codebook_size, int cardinality)
    : TokenMultiset(std::move(tokens), codebook_size) {
  if (this->cardinality() != cardinality) {
    throw ValidationError("multiset has " + std::to_string(this->cardinality()) +
                          " tokens, expected " + std::to_string(cardinality));
  }
}

CountVector::CountVector(std::vector<int> counts, int target_sum)
    : counts_(std::move(counts)), target_sum_(target_sum) {
  if (counts_.empty()) throw ValidationError("count vector must have positive length");
  if (target_sum_ < 0) throw ValidationError("target sum must be non-negative");
  for (std::size_t j = 0; j < counts_.size(); ++j) {
    if (counts_[j] < 0 || counts_[j] > target_sum_) {
      throw ValidationError("count " + std::to_string(counts_[j]) + " at index " +
                            std::to_string(j) + " outside [0, " +
                            std::to_string(target_sum_) + "]");
    }
  }
  const auto sum = total(counts_);
  if (sum != target_sum_) {
    throw ValidationError("fixed-sum constraint violated: sum " + std::to_string(sum) +
                          " != " + std::to_string(target_sum_));
  }
}

std::int64_t total(std::span<const int> values) {
  return std::accumulate(values.begin(), values.end(), std::int64_t{0});
}

bool satisfies_fixed_sum(std::span<const int> values, int m) {
  if (values.empty() || m < 0) return false;
  for (int v : values) {
    if (v < 0 || v > m) return false;
  }
  return total(values) == m;
}

CountVector set_to_counts(const TokenMultiset& s) {
  std::vector<int> counts(static_cast<std::size_t>(s.codebook_size()), 0);
  for (int t : s.tokens()) ++counts[static_cast<std::size_t>(t)];
  return CountVector(std::move(counts), s.cardinality());
}

TokenMultiset counts_to_set(const CountVector& x) {
  std::vector<int> tokens;
  tokens.reserve(static_cast<std::size_t>(x.target_sum()));
  for (int j = 0; j < x.codebook_size(); ++j) {
    tokens.insert(tokens.end(), static_cast<std::size_t>(x[j]), j);
  }
  return TokenMultiset(std::move(tokens), x.codebook_size());
}

TokenMultiset counts_to_set(std::span<const int> counts, int m) {
  return counts_to_set(CountVector(std::vector<int>(counts.begin(), counts.end()), m));
}

std::vector<int> random_permutation(const TokenMultiset& s, RngStream& rng) {
  std::vector<int> out(s.tokens().begin(), s.tokens().end());
  // Fisher-Yates with our own index draws; std::shuffle is not portable.
  for (std::size_t i = out.size(); i > 1; --i) {
    const auto k = static_cast<std::size_t>(rng.uniform_index(i));
    std::swap(out[i - 1], out[k]);
  }
  return out;
}

}  // namespace fsdd
