#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fsdd/multiset.hpp"

namespace fsdd {

/// Probability mass over raw integer vectors. Vectors need not satisfy the
/// fixed-sum constraint, so unconstrained samples can be tallied too.
using Pmf = std::map<std::vector<int>, double>;

/// Relative frequencies. Throws ValidationError on an empty sample.
Pmf empirical_pmf(std::span<const std::vector<int>> samples);

/// Half the L1 distance over the union support.
double tv_distance(const Pmf& p, const Pmf& q);
double tv_distance(std::span<const std::vector<int>> samples, const Pmf& reference);
double tv_distance(std::span<const std::vector<int>> a, std::span<const std::vector<int>> b);

/// Pearson statistic sum (O - E)^2 / E over the reference support, with every
/// sample outside it pooled into one extra cell whose expectation is the
/// reference's missing mass. Infinite when that cell is observed but expected empty.
double chi_square_statistic(std::span<const std::vector<int>> samples, const Pmf& reference);

struct SumViolation {
  double rate = 0.0;            ///< fraction with sum != M
  double mean_abs_error = 0.0;  ///< mean |sum - M|
};

SumViolation sum_violation(std::span<const std::vector<int>> samples, int m);

/// binomial(M+C-1, C-1), or nullopt when it exceeds `limit`.
std::optional<std::uint64_t> count_vector_space_size(int c, int m,
                                                     std::uint64_t limit = UINT64_MAX);

inline constexpr std::uint64_t kEnumerationLimit = 1'000'000;

/// Every valid count vector in descending lexicographic order, so [M,0,...,0]
/// comes first. Throws ValidationError when the space exceeds 10^6 vectors.
std::vector<CountVector> enumerate_count_vectors(int c, int m);

struct ClassEval {
  int label = 0;
  std::size_t n_samples = 0;
  double tv_distance = 0.0;
  double support_hit_rate = 0.0;
};

struct EvalReport {
  double tv_distance = 0.0;
  double chi_square_stat = 0.0;
  double sum_violation_rate = 0.0;
  double mean_abs_sum_error = 0.0;
  /// Fraction of samples inside the reference support.
  double support_hit_rate = 0.0;
  std::size_t n_samples = 0;
  std::vector<ClassEval> per_class;

  std::string to_text() const;
  static std::string csv_header();
  /// One row for the overall figures.
  std::string to_csv_row() const;
};

/// Overall figures against `reference`; when `labels` is non-empty, one
/// per-class row against `class_references[label]` as well.
EvalReport evaluate(std::span<const std::vector<int>> samples, int m, const Pmf& reference,
                    std::span<const int> labels = {},
                    std::span<const Pmf> class_references = {});

}  // namespace fsdd
