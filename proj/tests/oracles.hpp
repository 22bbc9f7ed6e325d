#pragma once

// Brute-force references shared by the unit and acceptance suites. Nothing
// here calls into the code paths it is used to check.

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

namespace fsdd::oracle {

using LogLik = std::function<double(std::size_t, int)>;

inline double log_likelihood(const std::vector<int>& x, const LogLik& ll) {
  double sum = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) sum += ll(j, x[j]);
  return sum;
}

inline void for_each_subset(const std::vector<std::size_t>& pool, std::size_t k,
                            const std::function<void(const std::vector<std::size_t>&)>& visit) {
  std::vector<std::size_t> pick;
  std::function<void(std::size_t)> rec = [&](std::size_t start) {
    if (pick.size() == k) {
      visit(pick);
      return;
    }
    for (std::size_t i = start; i < pool.size(); ++i) {
      pick.push_back(pool[i]);
      rec(i + 1);
      pick.pop_back();
    }
  };
  rec(0);
}

/// Largest total log-likelihood reachable by unit adjustment rounds, each
/// moving min(|delta|, eligible) distinct indices by one unit toward sum m.
inline double best_adjustment(const std::vector<int>& x, int m, const LogLik& ll) {
  std::int64_t delta = std::accumulate(x.begin(), x.end(), std::int64_t{0}) - m;
  if (delta == 0) return log_likelihood(x, ll);
  const int step = delta > 0 ? -1 : 1;
  std::vector<std::size_t> eligible;
  for (std::size_t j = 0; j < x.size(); ++j) {
    if (x[j] + step >= 0 && x[j] + step <= m) eligible.push_back(j);
  }
  const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(std::llabs(delta)),
                                              eligible.size());
  double best = -std::numeric_limits<double>::infinity();
  for_each_subset(eligible, k, [&](const std::vector<std::size_t>& pick) {
    auto y = x;
    for (auto j : pick) y[j] += step;
    best = std::max(best, best_adjustment(y, m, ll));
  });
  return best;
}

inline double binomial(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return std::round(r);
}

}  // namespace fsdd::oracle
