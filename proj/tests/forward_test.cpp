#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "fsdd/error.hpp"
#include "fsdd/forward.hpp"
#include "oracles.hpp"

namespace fsdd {
namespace {

TEST(ForwardParams, MidpointArithmetic) {
  const auto p = forward_params(CountVector({4, 0}, 4), CountVector({0, 4}, 4), 0.5);
  EXPECT_EQ(p.mu, (std::vector<double>{2.0, 2.0}));
  EXPECT_EQ(p.sigma, (std::vector<double>{1.0, 1.0}));
}

TEST(ForwardParams, EndpointsAndDegeneratePath) {
  const CountVector x0({3, 1, 0, 2}, 6);
  const CountVector x1({0, 2, 2, 2}, 6);
  EXPECT_EQ(forward_params(x0, x1, 0.0).mu, (std::vector<double>{3, 1, 0, 2}));
  EXPECT_EQ(forward_params(x0, x1, 1.0).mu, (std::vector<double>{0, 2, 2, 2}));
  for (double t : {0.0, 0.3, 1.0}) {
    const auto p = forward_params(x0, x0, t);
    EXPECT_EQ(p.mu, (std::vector<double>{3, 1, 0, 2}));
    EXPECT_EQ(p.sigma, (std::vector<double>{0, 0, 0, 0}));
  }
}

TEST(ForwardParams, MeansMoveLinearly) {
  const CountVector x0({5, 1, 0}, 6);
  const CountVector x1({1, 1, 4}, 6);
  for (double t : {0.0, 0.25, 0.5, 0.75, 1.0}) {
    const auto p = forward_params(x0, x1, t);
    for (std::size_t j = 0; j < 3; ++j) {
      EXPECT_DOUBLE_EQ(p.mu[j], x0[j] + t * (x1[j] - x0[j]));
    }
  }
}

TEST(ForwardParams, RejectsMismatch) {
  EXPECT_THROW(forward_params(CountVector({1, 1}, 2), CountVector({1, 1, 0}, 2), 0.5),
               ValidationError);
  EXPECT_THROW(forward_params(CountVector({1, 1}, 2), CountVector({3, 0}, 3), 0.5),
               ValidationError);
  EXPECT_THROW(forward_params(CountVector({1, 1}, 2), CountVector({2, 0}, 2), 1.5),
               ValidationError);
}

TEST(GreedyAdjust, ValidInputUnchanged) {
  const GaussianParams p({1.0, 1.0, 1.0}, {1.0, 1.0, 1.0});
  EXPECT_EQ(greedy_adjust({2, 0, 1}, p, 3).to_vector(), (std::vector<int>{2, 0, 1}));
}

TEST(GreedyAdjust, SingleDecrementMatchesBruteForce) {
  const GaussianParams p({2.4, 0.6}, {1.0, 1.0});
  const auto kernels = coordinate_kernels(p, 3);
  auto lik = [&](int a, int b) { return kernels[0].pmf(a) * kernels[1].pmf(b); };
  const std::vector<int> best = lik(2, 1) >= lik(3, 0) ? std::vector<int>{2, 1}
                                                        : std::vector<int>{3, 0};
  const auto x = greedy_adjust({3, 1}, p, 3);
  EXPECT_EQ(total(x.counts()), 3);
  EXPECT_EQ(x.to_vector(), best);
}

TEST(GreedyAdjust, AttainsExhaustiveOptimum) {
  RngStream rng(31337, 0);
  for (int instance = 0; instance < 1000; ++instance) {
    const int c = 2 + static_cast<int>(rng.uniform_index(5));
    const int m = 1 + static_cast<int>(rng.uniform_index(8));
    std::vector<double> mu(static_cast<std::size_t>(c));
    std::vector<double> sigma(static_cast<std::size_t>(c));
    for (int j = 0; j < c; ++j) {
      mu[static_cast<std::size_t>(j)] = m * rng.uniform();
      sigma[static_cast<std::size_t>(j)] = rng.uniform_index(5) == 0 ? 0.0 : 0.1 + 2.0 * rng.uniform();
    }
    const GaussianParams params(mu, sigma);
    const auto kernels = coordinate_kernels(params, m);

    // Random vector in {0..m}^c whose sum is within 3 of m.
    std::vector<int> x;
    do {
      x.assign(static_cast<std::size_t>(c), 0);
      for (auto& v : x) v = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(m) + 1));
    } while (std::llabs(total(x) - m) > 3);

    oracle::LogLik ll = [&](std::size_t j, int v) { return kernels[j].log_pmf(v); };
    const double best = oracle::best_adjustment(x, m, ll);
    const auto adjusted = greedy_adjust(x, params, m);
    const double got = oracle::log_likelihood(adjusted.to_vector(), ll);
    if (std::isinf(best)) {
      ASSERT_EQ(got, best) << "instance " << instance;
    } else {
      ASSERT_NEAR(got, best, 1e-9) << "instance " << instance;
    }
  }
}

TEST(GreedyAdjust, RepeatsRoundsWhenDeltaExceedsIndices) {
  // Two indices, surplus of 3: needs two rounds.
  const GaussianParams p({1.0, 1.0}, {1.0, 1.0});
  const auto x = greedy_adjust({3, 3}, p, 3);
  EXPECT_EQ(x.to_vector(), (std::vector<int>{1, 2}));
  const auto y = greedy_adjust({0, 0, 0}, GaussianParams({3, 3, 3}, {1, 1, 1}), 9);
  EXPECT_EQ(y.to_vector(), (std::vector<int>{3, 3, 3}));
}

TEST(GreedyAdjust, TiesBreakTowardLowerIndex) {
  const GaussianParams p({1.0, 1.0, 1.0}, {1.0, 1.0, 1.0});
  EXPECT_EQ(greedy_adjust({2, 2, 2}, p, 5).to_vector(), (std::vector<int>{1, 2, 2}));
}

TEST(GreedyAdjust, RejectsOutOfRangeInput) {
  const GaussianParams p({1.0, 1.0}, {1.0, 1.0});
  EXPECT_THROW(greedy_adjust({4, 0}, p, 3), ValidationError);
  EXPECT_THROW(greedy_adjust({-1, 0}, p, 3), ValidationError);
}

TEST(SampleForward, IdentityOnDegeneratePath) {
  const CountVector x0({3, 0, 1, 4}, 8);
  RngStream rng(2, 0);
  for (double t : {0.0, 0.4, 1.0}) {
    const auto s = sample_forward(x0, x0, t, rng);
    EXPECT_EQ(s.x_t, x0);
    EXPECT_EQ(s.t, t);
  }
}

TEST(SampleForward, SumConservedOnRandomTriples) {
  RngStream rng(17, 0);
  for (int i = 0; i < 10000; ++i) {
    const int c = 1 + static_cast<int>(rng.uniform_index(16));
    const int m = static_cast<int>(rng.uniform_index(40));
    const auto x0 = sample_multinomial_noise(c, m, rng);
    const auto x1 = sample_multinomial_noise(c, m, rng);
    const auto s = sample_forward(x0, x1, rng.uniform(), rng);
    ASSERT_EQ(total(s.x_t.counts()), m);
  }
}

TEST(SampleForward, UnadjustedSumHasExpectationM) {
  constexpr int kDraws = 100000;
  constexpr int kC = 16;
  constexpr int kM = 32;
  RngStream rng(55, 0);
  double sum = 0.0;
  double sum_sq = 0.0;
  for (int i = 0; i < kDraws; ++i) {
    const auto x0 = sample_multinomial_noise(kC, kM, rng);
    const auto x1 = sample_multinomial_noise(kC, kM, rng);
    const double s = static_cast<double>(total(sample_forward_unadjusted(x0, x1, 0.5, rng)));
    sum += s;
    sum_sq += s * s;
  }
  const double mean = sum / kDraws;
  const double se = std::sqrt((sum_sq / kDraws - mean * mean) / kDraws);
  EXPECT_LE(std::abs(mean - kM), 3.0 * se);
}

TEST(SampleForward, Deterministic) {
  const CountVector x0({5, 1, 2, 0}, 8);
  const CountVector x1({0, 4, 2, 2}, 8);
  RngStream a(8, 8);
  RngStream b(8, 8);
  for (int i = 0; i < 100; ++i) {
    ASSERT_EQ(sample_forward(x0, x1, 0.3, a).x_t, sample_forward(x0, x1, 0.3, b).x_t);
  }
}

}  // namespace
}  // namespace fsdd
