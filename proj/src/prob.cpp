#include "fsdd/prob.hpp"

#include <algorithm>
#include <cstdint>

#include <boost/math/tools/roots.hpp>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <string>

#include "fsdd/error.hpp"

namespace fsdd {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// log(1 - Phi(z)); asymptotic series where erfc underflows.
double log_upper_tail(double z) {
  const double x = z * kInvSqrt2;
  if (x < 25.0) return std::log(0.5 * std::erfc(x));
  // erfc(x) = exp(-x^2) / (x sqrt(pi)) * sum_k (-1)^k (2k-1)!! / (2x^2)^k
  const double inv = 1.0 / (2.0 * x * x);
  double term = 1.0;
  double series = 1.0;
  for (int k = 1; k <= 8; ++k) {
    term *= -(2.0 * k - 1.0) * inv;
    series += term;
  }
  return -x * x - std::log(x * std::sqrt(std::numbers::pi)) + std::log(series) - std::log(2.0);
}

// log of the tail that stays small: log Phi(z) for z <= 0, log(1 - Phi(z)) otherwise.
double log_natural_tail(double z) { return z <= 0.0 ? log_upper_tail(-z) : log_upper_tail(z); }

// log of the standard normal mass on [a, b] given the natural tails at both ends.
double log_mass_between(double a, double tail_a, double b, double tail_b) {
  if (a >= 0.0) return tail_b >= tail_a ? kNegInf : tail_a + std::log1p(-std::exp(tail_b - tail_a));
  if (b <= 0.0) return tail_a >= tail_b ? kNegInf : tail_b + std::log1p(-std::exp(tail_a - tail_b));
  return std::log1p(-std::exp(tail_b) - std::exp(tail_a));
}

double log_interval_mass(double a, double b) {
  return log_mass_between(a, log_natural_tail(a), b, log_natural_tail(b));
}

int clamp_round(double x, int m) {
  return static_cast<int>(std::clamp(std::round(x), 0.0, static_cast<double>(m)));
}

void check_support(int v, int m) {
  if (v < 0 || v > m) {
    throw ValidationError("value " + std::to_string(v) + " outside support {0.." +
                          std::to_string(m) + "}");
  }
}

// Bins farther than this many scales from the (clamped) location carry < 1e-21
// of the mass.
constexpr double kWindow = 10.0;

struct Window {
  int lo;
  int hi;
  std::vector<double> weight;  // unnormalized, weight[v - lo]; the largest is 1
  double total = 0.0;
};

Window window_weights(double location, double sigma, int m) {
  // Centered on the clamped location: past a support edge the conditional
  // mass decays from that edge at least as fast as the untruncated Gaussian.
  const double center = std::clamp(location, 0.0, static_cast<double>(m));
  Window w;
  w.lo = static_cast<int>(std::max(0.0, std::floor(center - kWindow * sigma)));
  w.hi = static_cast<int>(std::min(static_cast<double>(m), std::ceil(center + kWindow * sigma)));
  w.weight.resize(static_cast<std::size_t>(w.hi - w.lo + 1));
  double a = (w.lo - 0.5 - location) / sigma;
  double tail_a = log_natural_tail(a);
  double peak = kNegInf;
  for (int v = w.lo; v <= w.hi; ++v) {
    const double b = (v + 0.5 - location) / sigma;
    const double tail_b = log_natural_tail(b);
    const double lm = log_mass_between(a, tail_a, b, tail_b);
    w.weight[static_cast<std::size_t>(v - w.lo)] = lm;
    peak = std::max(peak, lm);
    a = b;
    tail_a = tail_b;
  }
  for (auto& x : w.weight) {
    x = peak == kNegInf ? 0.0 : std::exp(x - peak);
    w.total += x;
  }
  return w;
}


double window_mean(double location, double sigma, int m) {
  const Window w = window_weights(location, sigma, m);
  if (!(w.total > 0.0)) return static_cast<double>(clamp_round(location, m));
  double s1 = 0.0;
  for (int v = w.lo; v <= w.hi; ++v) s1 += w.weight[static_cast<std::size_t>(v - w.lo)] * v;
  return s1 / w.total;
}

}  // namespace

DiscretizedGaussian::DiscretizedGaussian(double location, double sigma, int m)
    : location_(location), sigma_(sigma), m_(m), log_norm_(kNegInf) {
  if (m < 0) throw ValidationError("support bound M must be non-negative");
  if (!std::isfinite(location) || !std::isfinite(sigma) || sigma < 0.0) {
    throw ValidationError("discretized Gaussian needs finite location and sigma >= 0");
  }
  if (sigma > 0.0) log_norm_ = log_interval_mass((-0.5 - location) / sigma, (m + 0.5 - location) / sigma);
  if (!std::isfinite(log_norm_)) point_ = clamp_round(location, m);
}

DiscretizedGaussian DiscretizedGaussian::from_location(double location, double sigma, int m) {
  return DiscretizedGaussian(location, sigma, m);
}

DiscretizedGaussian DiscretizedGaussian::with_mean(double mean, double sigma, int m) {
  if (!std::isfinite(mean)) throw ValidationError("discretized Gaussian mean must be finite");
  if (sigma == 0.0) return DiscretizedGaussian(mean, 0.0, m);
  if (mean <= 0.0) return DiscretizedGaussian(0.0, 0.0, m);
  if (mean >= m) return DiscretizedGaussian(static_cast<double>(m), 0.0, m);

  auto excess = [&](double location) { return window_mean(location, sigma, m) - mean; };

  // Bracket the root; the mean is increasing in the location.
  double lo = mean;
  double hi = mean;
  const double f_start = excess(mean);
  if (f_start == 0.0) return DiscretizedGaussian(mean, sigma, m);
  double step = std::max(sigma, 0.5);
  for (int i = 0; i < 64; ++i) {
    if (f_start > 0.0) {
      lo = mean - step;
      if (excess(lo) <= 0.0) break;
    } else {
      hi = mean + step;
      if (excess(hi) >= 0.0) break;
    }
    step *= 2.0;
  }
  if (excess(lo) > 0.0 || excess(hi) < 0.0) {
    throw ValidationError("cannot match mean " + std::to_string(mean) + " at sigma " +
                          std::to_string(sigma));
  }

  std::uintmax_t max_iter = 200;
  const auto [left, right] = boost::math::tools::toms748_solve(
      excess, lo, hi, boost::math::tools::eps_tolerance<double>(50), max_iter);
  const double location = 0.5 * (left + right);
  return DiscretizedGaussian(location, sigma, m);
}

double DiscretizedGaussian::log_pmf(int v) const {
  check_support(v, m_);
  if (is_point_mass()) return v == point_ ? 0.0 : kNegInf;
  return log_interval_mass((v - 0.5 - location_) / sigma_, (v + 0.5 - location_) / sigma_) -
         log_norm_;
}

double DiscretizedGaussian::pmf(int v) const { return std::exp(log_pmf(v)); }

double DiscretizedGaussian::mean() const {
  if (is_point_mass()) return point_;
  return window_mean(location_, sigma_, m_);
}

std::vector<double> DiscretizedGaussian::masses() const {
  std::vector<double> out(static_cast<std::size_t>(m_) + 1, 0.0);
  for (int v = 0; v <= m_; ++v) out[static_cast<std::size_t>(v)] = pmf(v);
  return out;
}

int DiscretizedGaussian::sample(RngStream& rng) const {
  // Exactly one draw per call keeps coordinate streams aligned.
  const double u = rng.uniform();
  if (is_point_mass()) return point_;
  const Window w = window_weights(location_, sigma_, m_);
  if (!(w.total > 0.0)) return clamp_round(location_, m_);
  const double target = u * w.total;
  double cumulative = 0.0;
  int last_positive = clamp_round(location_, m_);
  for (int v = w.lo; v <= w.hi; ++v) {
    const double weight = w.weight[static_cast<std::size_t>(v - w.lo)];
    if (weight <= 0.0) continue;
    cumulative += weight;
    last_positive = v;
    if (target < cumulative) return v;
  }
  return last_positive;
}

GaussianParams::GaussianParams(std::vector<double> mu_in, std::vector<double> sigma_in)
    : mu(std::move(mu_in)), sigma(std::move(sigma_in)) {
  if (mu.size() != sigma.size()) throw ValidationError("mu and sigma lengths differ");
  for (std::size_t j = 0; j < mu.size(); ++j) {
    if (!std::isfinite(mu[j]) || !std::isfinite(sigma[j]) || sigma[j] < 0.0) {
      throw ValidationError("invalid Gaussian parameters at index " + std::to_string(j));
    }
  }
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z * kInvSqrt2); }

double discretized_gaussian_pmf(double mu, double sigma, int v, int m) {
  return DiscretizedGaussian::from_location(mu, sigma, m).pmf(v);
}

double discretized_gaussian_log_pmf(double mu, double sigma, int v, int m) {
  return DiscretizedGaussian::from_location(mu, sigma, m).log_pmf(v);
}

std::vector<double> discretized_gaussian_masses(double mu, double sigma, int m) {
  return DiscretizedGaussian::from_location(mu, sigma, m).masses();
}

int sample_discretized_gaussian(double mu, double sigma, int m, RngStream& rng) {
  return DiscretizedGaussian::from_location(mu, sigma, m).sample(rng);
}

std::vector<DiscretizedGaussian> coordinate_kernels(const GaussianParams& params, int m) {
  std::vector<DiscretizedGaussian> out;
  out.reserve(params.size());
  for (std::size_t j = 0; j < params.size(); ++j) {
    out.push_back(DiscretizedGaussian::with_mean(params.mu[j], params.sigma[j], m));
  }
  return out;
}

std::vector<int> sample_discretized_gaussian(const GaussianParams& params, int m,
                                             RngStream& rng) {
  std::vector<int> out(params.size());
  const auto kernels = coordinate_kernels(params, m);
  for (std::size_t j = 0; j < kernels.size(); ++j) out[j] = kernels[j].sample(rng);
  return out;
}

CountVector sample_multinomial_noise(int c, int m, RngStream& rng) {
  if (c < 1) throw ValidationError("multinomial noise needs C >= 1");
  if (m < 0) throw ValidationError("multinomial noise needs M >= 0");
  std::vector<int> counts(static_cast<std::size_t>(c), 0);
  for (int i = 0; i < m; ++i) ++counts[rng.uniform_index(static_cast<std::uint64_t>(c))];
  return CountVector(std::move(counts), m);
}

std::vector<double> softmax(std::span<const double> scores) {
  std::vector<double> out(scores.size());
  if (scores.empty()) return out;
  const double peak = *std::max_element(scores.begin(), scores.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    out[i] = std::exp(scores[i] - peak);
    sum += out[i];
  }
  for (auto& p : out) p /= sum;
  return out;
}

std::vector<double> log_softmax(std::span<const double> scores) {
  std::vector<double> out(scores.size());
  if (scores.empty()) return out;
  const double peak = *std::max_element(scores.begin(), scores.end());
  double sum = 0.0;
  for (double s : scores) sum += std::exp(s - peak);
  const double log_z = peak + std::log(sum);
  for (std::size_t i = 0; i < scores.size(); ++i) out[i] = scores[i] - log_z;
  return out;
}

int sample_categorical(std::span<const double> weights, RngStream& rng) {
  const double sum = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (!(sum > 0.0)) throw ValidationError("categorical weights must have positive sum");
  const double target = rng.uniform() * sum;
  double cumulative = 0.0;
  int last_positive = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] <= 0.0) continue;
    cumulative += weights[i];
    last_positive = static_cast<int>(i);
    if (target < cumulative) return last_positive;
  }
  return last_positive;
}

std::vector<int> top_p_support(std::span<const double> probs, double p) {
  std::vector<int> order(probs.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return probs[a] > probs[b]; });
  // Slack absorbs rounding in softmax so that e.g. 0.5 + 0.3 reaches p = 0.8.
  constexpr double kSlack = 1e-12;
  double cumulative = 0.0;
  std::size_t keep = 0;
  while (keep < order.size()) {
    cumulative += probs[order[keep]];
    ++keep;
    if (cumulative >= p - kSlack) break;
  }
  order.resize(keep);
  return order;
}

int top_p_sample(std::span<const double> scores, double p, RngStream& rng) {
  if (!(p > 0.0 && p <= 1.0)) {
    throw ValidationError("top-p threshold must lie in (0, 1], got " + std::to_string(p));
  }
  if (scores.empty()) throw ValidationError("top-p sampling needs at least one score");
  for (double s : scores) {
    if (!std::isfinite(s)) throw ValidationError("top-p sampling needs finite scores");
  }
  const auto probs = softmax(scores);
  const auto kept = top_p_support(probs, p);
  std::vector<double> weights(kept.size());
  for (std::size_t i = 0; i < kept.size(); ++i) weights[i] = probs[kept[i]];
  return kept[sample_categorical(weights, rng)];
}

}  // namespace fsdd
