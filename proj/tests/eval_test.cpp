#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <vector>

#include "fsdd/error.hpp"
#include "fsdd/eval.hpp"
#include "fsdd/prob.hpp"
#include "fsdd/rng.hpp"
#include "oracles.hpp"

namespace fsdd {
namespace {

using Samples = std::vector<std::vector<int>>;

TEST(TvDistance, IdenticalAndDisjoint) {
  const Samples a{{1, 0}, {0, 1}, {1, 0}};
  EXPECT_EQ(tv_distance(a, a), 0.0);
  const Samples b{{2, 0}, {0, 2}};
  EXPECT_EQ(tv_distance(a, b), 1.0);
  EXPECT_THROW(tv_distance(Samples{}, a), ValidationError);
}

TEST(TvDistance, HandComputed) {
  const Pmf p{{{1, 0}, 0.5}, {{0, 1}, 0.5}};
  const Pmf q{{{1, 0}, 0.8}, {{0, 1}, 0.1}, {{2, 0}, 0.1}};
  EXPECT_NEAR(tv_distance(p, q), 0.5 * (0.3 + 0.4 + 0.1), 1e-15);
}

TEST(TvDistance, SymmetricAndTriangle) {
  RngStream rng(5, 0);
  auto draw = [&](int n) {
    Samples s;
    for (int i = 0; i < n; ++i) s.push_back(sample_multinomial_noise(3, 3, rng).to_vector());
    return s;
  };
  for (int trial = 0; trial < 50; ++trial) {
    const auto a = draw(20), b = draw(30), c = draw(25);
    EXPECT_EQ(tv_distance(a, b), tv_distance(b, a));
    EXPECT_LE(tv_distance(a, c), tv_distance(a, b) + tv_distance(b, c) + 1e-15);
  }
}

TEST(TvDistance, ExactSamplesConverge) {
  // 10 atoms with uneven weights; n = 10^5 draws from the reference itself.
  Pmf ref;
  std::vector<double> w;
  for (int k = 0; k < 10; ++k) {
    w.push_back(k + 1.0);
    ref[{k, 9 - k}] = (k + 1.0) / 55.0;
  }
  RngStream rng(17, 0);
  Samples s;
  for (int i = 0; i < 100000; ++i) {
    const int k = sample_categorical(w, rng);
    s.push_back({k, 9 - k});
  }
  EXPECT_LT(tv_distance(s, ref), 0.02);
}

TEST(SumViolation, HandBuilt) {
  const auto v = sum_violation(Samples{{2, 1}, {3, 1}}, 3);
  EXPECT_EQ(v.rate, 0.5);
  EXPECT_EQ(v.mean_abs_error, 0.5);
  const auto ok = sum_violation(Samples{{2, 1}, {0, 3}}, 3);
  EXPECT_EQ(ok.rate, 0.0);
}

TEST(ChiSquare, ZeroForExactFrequencies) {
  const Pmf ref{{{1, 0}, 0.25}, {{0, 1}, 0.75}};
  const Samples s{{1, 0}, {0, 1}, {0, 1}, {0, 1}};
  EXPECT_NEAR(chi_square_statistic(s, ref), 0.0, 1e-12);
  const Samples off{{1, 0}, {0, 1}, {0, 1}, {2, 0}};
  EXPECT_TRUE(std::isinf(chi_square_statistic(off, ref)));
}

TEST(Enumerate, HandListForThreeByTwo) {
  const auto all = enumerate_count_vectors(3, 2);
  const std::vector<std::vector<int>> expect{{2, 0, 0}, {1, 1, 0}, {1, 0, 1}, {0, 2, 0}, {0, 1, 1}, {0, 0, 2}};
  ASSERT_EQ(all.size(), expect.size());
  for (std::size_t i = 0; i < all.size(); ++i) EXPECT_EQ(all[i].to_vector(), expect[i]);
}

TEST(Enumerate, SingleCoordinate) {
  for (int m : {0, 1, 7}) {
    const auto all = enumerate_count_vectors(1, m);
    ASSERT_EQ(all.size(), 1u);
    EXPECT_EQ(all[0].to_vector(), std::vector<int>{m});
  }
}

TEST(Enumerate, StarsAndBarsClosedForm) {
  for (int c = 1; c <= 6; ++c) {
    for (int m = 0; m <= 6; ++m) {
      const auto all = enumerate_count_vectors(c, m);
      EXPECT_EQ(static_cast<double>(all.size()), oracle::binomial(m + c - 1, c - 1)) << c << "," << m;
      std::set<std::vector<int>> unique;
      for (std::size_t i = 0; i < all.size(); ++i) {
        unique.insert(all[i].to_vector());
        if (i > 0) EXPECT_GT(all[i - 1], all[i]);
      }
      EXPECT_EQ(unique.size(), all.size());
    }
  }
}

TEST(Enumerate, SizeBound) {
  EXPECT_EQ(count_vector_space_size(4096, 128, kEnumerationLimit), std::nullopt);
  EXPECT_THROW(enumerate_count_vectors(64, 32), ValidationError);
  EXPECT_EQ(static_cast<double>(count_vector_space_size(16, 32).value()), oracle::binomial(47, 15));
}

TEST(EvalReport, PerClassAndFormats) {
  const Pmf ref{{{1, 0}, 0.5}, {{0, 1}, 0.5}};
  const std::vector<Pmf> per_class{Pmf{{{1, 0}, 1.0}}, Pmf{{{0, 1}, 1.0}}};
  const Samples s{{1, 0}, {0, 1}, {0, 1}, {2, 0}};
  const std::vector<int> labels{0, 1, 1, 0};
  const auto r = evaluate(s, 1, ref, labels, per_class);
  EXPECT_EQ(r.n_samples, 4u);
  EXPECT_EQ(r.sum_violation_rate, 0.25);
  EXPECT_EQ(r.support_hit_rate, 0.75);
  ASSERT_EQ(r.per_class.size(), 2u);
  EXPECT_EQ(r.per_class[0].tv_distance, 0.5);
  EXPECT_EQ(r.per_class[1].tv_distance, 0.0);
  EXPECT_NE(r.to_text().find("tv_distance"), std::string::npos);
  EXPECT_EQ(EvalReport::csv_header().find("tv_distance"), 10u);
  EXPECT_EQ(r.to_csv_row().substr(0, 2), "4,");
}

}  // namespace
}  // namespace fsdd
