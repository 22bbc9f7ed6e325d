#pragma once

#include <functional>
#include <vector>

#include "fsdd/multiset.hpp"
#include "fsdd/prob.hpp"
#include "fsdd/rng.hpp"

namespace fsdd {

/// log-likelihood of value v at coordinate j; -inf for impossible values.
using CoordinateLogLikelihood = std::function<double(std::size_t j, int v)>;

/// Repairs the sum of `x_tilde` to exactly m by unit steps.
///
/// With delta = sum - m and s = sign(delta), each round scores every index
/// whose value can move by -s without leaving {0..m} by the log-likelihood
/// gain log p_j(x_j - s) - log p_j(x_j), then moves the min(|delta|, eligible)
/// best-scoring distinct indices (ties: lower index) one unit each. Rounds
/// repeat until delta is zero. Each round therefore maximizes the product of
/// per-coordinate likelihoods over all ways to place its unit moves.
///
/// Throws ValidationError if an entry is outside {0..m} or the length is zero.
CountVector greedy_adjust(std::vector<int> x_tilde, int m,
                          const CoordinateLogLikelihood& log_likelihood);

/// Same, scoring with the process kernels of `params` (see coordinate_kernels).
CountVector greedy_adjust(std::vector<int> x_tilde, const GaussianParams& params, int m);

/// Interpolation parameters of the constrained forward process:
/// mu = t*x1 + (1-t)*x0 and sigma = |x1 - x0| / 4 per coordinate.
/// Throws ValidationError on mismatched C or M, or t outside [0, 1].
GaussianParams forward_params(const CountVector& x0, const CountVector& x1, double t);

struct NoisySample {
  CountVector x_t;
  double t;
  GaussianParams params;
};

/// Draw before adjustment; the expected sum equals M exactly.
std::vector<int> sample_forward_unadjusted(const CountVector& x0, const CountVector& x1,
                                           double t, RngStream& rng);

/// Draw from the forward process, then greedy_adjust to the fixed sum.
NoisySample sample_forward(const CountVector& x0, const CountVector& x1, double t,
                           RngStream& rng);

}  // namespace fsdd
