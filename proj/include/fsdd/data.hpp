#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fsdd/eval.hpp"
#include "fsdd/multiset.hpp"
#include "fsdd/text_format.hpp"

namespace fsdd {

/// Count vectors sharing (C, M), optionally labeled with classes in [0, num_classes).
struct Dataset {
  int codebook_size = 0;
  int target_sum = 0;
  int num_classes = 0;
  std::vector<CountVector> rows;
  std::vector<int> labels;  ///< empty, or one per row

  bool labeled() const noexcept { return !labels.empty(); }
  std::size_t size() const noexcept { return rows.size(); }
  /// Throws ValidationError on mixed shapes, bad labels or an empty set.
  void validate() const;

  CountFile to_count_file() const;
  static Dataset from_count_file(const CountFile& file);
  /// Token multisets become count vectors through set_to_counts.
  static Dataset from_token_file(const TokenFile& file);
};

enum class SyntheticKind { two_point, dirichlet_multinomial, class_conditional_two_point };

std::string_view to_string(SyntheticKind kind);
/// Throws ValidationError listing the accepted names.
SyntheticKind parse_synthetic_kind(std::string_view name);

struct SyntheticSpec {
  SyntheticKind kind = SyntheticKind::two_point;
  int codebook_size = 0;
  int target_sum = 0;
  std::uint64_t seed = 0;
  double alpha = 1.0;           ///< Dirichlet concentration
  double mixture_weight = 0.5;  ///< probability of the first anchor of a pair
  int num_classes = 2;          ///< class_conditional_two_point only
  /// Explicit anchors; when empty they are drawn from the seed. two_point
  /// takes 2, class_conditional_two_point takes 2 per class (class k owns 2k, 2k+1).
  std::vector<CountVector> anchors;

  void validate() const;
  int label_count() const noexcept {
    return kind == SyntheticKind::class_conditional_two_point ? num_classes : 0;
  }
};

/// Explicit anchors, or distinct uniform-multinomial draws from stream (seed, 0).
std::vector<CountVector> resolve_anchors(const SyntheticSpec& spec);

/// n i.i.d. draws using stream (seed, 1). Class-conditional draws pick a
/// uniform class per row and attach it as the label.
Dataset sample_dataset(const SyntheticSpec& spec, std::size_t n);

/// Exact distribution of one draw; for class-conditional specs `label`
/// selects the class and nullopt gives the uniform class mixture.
/// Dirichlet-multinomial needs an enumerable space (see enumerate_count_vectors).
Pmf reference_pmf(const SyntheticSpec& spec, std::optional<int> label = std::nullopt);

}  // namespace fsdd
