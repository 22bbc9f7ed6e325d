#include "fsdd/forward.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "fsdd/error.hpp"

namespace fsdd {

namespace {

// Gain of moving from a value with log-likelihood `from` to one with `to`.
// Leaving an impossible value is always preferred; impossible-to-impossible is neutral.
double log_gain(double from, double to) {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  if (from == -kInf) return to == -kInf ? 0.0 : kInf;
  return to - from;
}

}  // namespace

CountVector greedy_adjust(std::vector<int> x, int m,
                          const CoordinateLogLikelihood& log_likelihood) {
  if (x.empty()) throw ValidationError("greedy_adjust needs a non-empty vector");
  if (m < 0) throw ValidationError("greedy_adjust needs M >= 0");
  for (std::size_t j = 0; j < x.size(); ++j) {
    if (x[j] < 0 || x[j] > m) {
      throw ValidationError("greedy_adjust input " + std::to_string(x[j]) + " at index " +
                            std::to_string(j) + " outside [0, " + std::to_string(m) + "]");
    }
  }

  std::int64_t delta = total(x) - m;
  std::vector<std::size_t> candidates;
  std::vector<double> gain(x.size());
  while (delta != 0) {
    const int step = delta > 0 ? -1 : 1;
    candidates.clear();
    for (std::size_t j = 0; j < x.size(); ++j) {
      const int moved = x[j] + step;
      if (moved < 0 || moved > m) continue;
      gain[j] = log_gain(log_likelihood(j, x[j]), log_likelihood(j, moved));
      candidates.push_back(j);
    }
    // Any valid M admits a move: a sum above M has a positive entry, a sum below M an entry < M.
    if (candidates.empty()) throw std::logic_error("greedy_adjust: no adjustable index");

    const auto k = std::min<std::size_t>(static_cast<std::size_t>(std::llabs(delta)),
                                         candidates.size());
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(k),
                      candidates.end(), [&](std::size_t a, std::size_t b) {
                        if (gain[a] != gain[b]) return gain[a] > gain[b];
                        return a < b;
                      });
    for (std::size_t i = 0; i < k; ++i) x[candidates[i]] += step;
    delta += static_cast<std::int64_t>(step) * static_cast<std::int64_t>(k);
  }
  return CountVector(std::move(x), m);
}

CountVector greedy_adjust(std::vector<int> x_tilde, const GaussianParams& params, int m) {
  if (params.size() != x_tilde.size()) {
    throw ValidationError("greedy_adjust: parameter length does not match the sample");
  }
  const auto kernels = coordinate_kernels(params, m);
  return greedy_adjust(std::move(x_tilde), m,
                       [&](std::size_t j, int v) { return kernels[j].log_pmf(v); });
}

GaussianParams forward_params(const CountVector& x0, const CountVector& x1, double t) {
  if (x0.codebook_size() != x1.codebook_size() || x0.target_sum() != x1.target_sum()) {
    throw ValidationError("forward_params: x0 and x1 differ in C or M");
  }
  if (!(t >= 0.0 && t <= 1.0)) {
    throw ValidationError("forward_params: t must lie in [0, 1], got " + std::to_string(t));
  }
  const auto c = static_cast<std::size_t>(x0.codebook_size());
  std::vector<double> mu(c);
  std::vector<double> sigma(c);
  for (std::size_t j = 0; j < c; ++j) {
    mu[j] = x0[j] + t * (x1[j] - x0[j]);
    sigma[j] = std::abs(x1[j] - x0[j]) / 4.0;
  }
  return GaussianParams(std::move(mu), std::move(sigma));
}

std::vector<int> sample_forward_unadjusted(const CountVector& x0, const CountVector& x1,
                                           double t, RngStream& rng) {
  return sample_discretized_gaussian(forward_params(x0, x1, t), x0.target_sum(), rng);
}

NoisySample sample_forward(const CountVector& x0, const CountVector& x1, double t,
                           RngStream& rng) {
  auto params = forward_params(x0, x1, t);
  const int m = x0.target_sum();
  const auto kernels = coordinate_kernels(params, m);
  std::vector<int> x_tilde(kernels.size());
  for (std::size_t j = 0; j < kernels.size(); ++j) x_tilde[j] = kernels[j].sample(rng);
  auto x_t = greedy_adjust(std::move(x_tilde), m,
                           [&](std::size_t j, int v) { return kernels[j].log_pmf(v); });
  return NoisySample{std::move(x_t), t, std::move(params)};
}

}  // namespace fsdd
