#pragma once

#include <span>
#include <vector>

#include "fsdd/multiset.hpp"
#include "fsdd/rng.hpp"

namespace fsdd {

/// Per-coordinate mean and scale of an element-wise discretized Gaussian.
struct GaussianParams {
  std::vector<double> mu;
  std::vector<double> sigma;

  GaussianParams() = default;
  /// Throws ValidationError on length mismatch, negative or non-finite values.
  GaussianParams(std::vector<double> mu, std::vector<double> sigma);

  std::size_t size() const noexcept { return mu.size(); }
};

/// Standard normal CDF.
double normal_cdf(double z);

/// Integer distribution on {0..m}: N(location, sigma^2) integrated over the
/// unit bins [v-0.5, v+0.5], truncated to the support and renormalized.
/// sigma == 0 (or a truncation mass that underflows) collapses to a point mass
/// at round(location), clamped into the support.
class DiscretizedGaussian {
 public:
  static DiscretizedGaussian from_location(double location, double sigma, int m);

  /// Member of the family whose mean equals `mean` exactly (to ~1e-12).
  ///
  /// Truncation to {0..m} shifts the mean of the plain discretization toward
  /// the interior, so the location is solved for numerically. A mean at or
  /// beyond the support ends gives the corresponding point mass; sigma == 0
  /// gives a point mass at round(mean).
  static DiscretizedGaussian with_mean(double mean, double sigma, int m);

  double location() const noexcept { return location_; }
  double sigma() const noexcept { return sigma_; }
  int support_max() const noexcept { return m_; }
  bool is_point_mass() const noexcept { return point_ >= 0; }

  double pmf(int v) const;
  double log_pmf(int v) const;
  double mean() const;
  std::vector<double> masses() const;
  int sample(RngStream& rng) const;

 private:
  DiscretizedGaussian(double location, double sigma, int m);

  double location_;
  double sigma_;
  int m_;
  double log_norm_;  // log truncation mass; unused for point masses
  int point_ = -1;  // >= 0 for point masses
};

/// Mass that N(mu, sigma^2) assigns to the integer v, i.e. to [v-0.5, v+0.5),
/// truncated to {0..m} and renormalized. sigma == 0 gives a point mass at
/// round(mu) (clamped into {0..m}). Throws ValidationError if v is outside {0..m}.
double discretized_gaussian_pmf(double mu, double sigma, int v, int m);

/// log of discretized_gaussian_pmf; -inf where the mass underflows.
double discretized_gaussian_log_pmf(double mu, double sigma, int v, int m);

/// Whole truncated pmf over {0..m}.
std::vector<double> discretized_gaussian_masses(double mu, double sigma, int m);

/// One draw from the truncated pmf by inverse-CDF walk.
int sample_discretized_gaussian(double mu, double sigma, int m, RngStream& rng);

/// Per-coordinate kernels for the forward and reverse processes: coordinate j
/// uses DiscretizedGaussian::with_mean(mu[j], sigma[j], m), so the expected
/// value of every coordinate is exactly mu[j].
std::vector<DiscretizedGaussian> coordinate_kernels(const GaussianParams& params, int m);

/// Independent draw per coordinate from coordinate_kernels; entries lie in [0, m].
std::vector<int> sample_discretized_gaussian(const GaussianParams& params, int m,
                                             RngStream& rng);

/// Tally of m uniform category draws over c categories.
CountVector sample_multinomial_noise(int c, int m, RngStream& rng);

/// Numerically stable softmax.
std::vector<double> softmax(std::span<const double> scores);

/// Log-softmax (log-sum-exp shifted).
std::vector<double> log_softmax(std::span<const double> scores);

/// Index drawn proportionally to non-negative weights (need not sum to one).
int sample_categorical(std::span<const double> weights, RngStream& rng);

/// Nucleus sampling over softmax(scores): the smallest prefix of outcomes in
/// descending probability (ties: lower index first) whose cumulative mass
/// reaches p is renormalized and sampled. Throws ValidationError unless
/// 0 < p <= 1 and every score is finite.
int top_p_sample(std::span<const double> scores, double p, RngStream& rng);

/// Indices kept by the nucleus of top_p_sample, in descending probability.
std::vector<int> top_p_support(std::span<const double> probs, double p);

}  // namespace fsdd
