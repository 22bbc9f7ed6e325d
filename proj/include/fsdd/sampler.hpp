#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "fsdd/denoiser.hpp"
#include "fsdd/multiset.hpp"
#include "fsdd/rng.hpp"

namespace fsdd {

/// Multiplier f on the posterior scale at time t.
enum class Schedule {
  linear,    ///< f(t) = t
  constant,  ///< f(t) = 1
  none,      ///< f(t) = 0
};

std::string_view to_string(Schedule s);
/// Throws ValidationError listing the accepted names.
Schedule parse_schedule(std::string_view name);
double schedule_value(Schedule s, double t);

struct SampleConfig {
  int num_steps = 25;
  double top_p = 0.9;
  double guidance_scale = 0.0;  ///< w; ignored for unconditional models
  Schedule schedule = Schedule::linear;
  std::uint64_t seed = 0;
  std::optional<int> class_label;
  /// Give sample i the label i mod num_classes (overrides class_label).
  bool cycle_classes = false;
  /// false disables every greedy adjustment (unconstrained baseline).
  bool fixed_sum = true;
  int threads = 1;  ///< 0 = hardware concurrency; output does not depend on it

  /// Throws ValidationError unless num_steps >= 1, top_p in (0, 1] and w >= 0.
  void validate() const;
};

/// cond + w * (cond - uncond), entry-wise; equals cond exactly when the two agree.
DenoiserLogits guided_logits(const DenoiserLogits& cond, const DenoiserLogits& uncond, double w);

/// Logits used for X_0 candidates: guided when the model is conditional,
/// a label is given and w > 0; the plain conditional logits otherwise.
DenoiserLogits sampling_logits(const Denoiser& model, std::span<const int> x_t, double t,
                               std::optional<int> label, double w);

/// One reverse transition t -> t - dt. Draws an X_0 candidate per position
/// with top-p sampling, adjusts it to the fixed sum (scored by the full
/// per-position log-softmax), forms mu = (1 - dt/t) x_t + (dt/t) x0 and
/// sigma = |x1 - x0| / 4 * f(t - dt), samples, and adjusts again. With
/// config.fixed_sum false both adjustments are skipped and the result is raw.
/// Throws ValidationError unless 0 < dt <= t <= 1 and shapes match the model.
std::vector<int> reverse_step(const Denoiser& model, std::span<const int> x_t, const CountVector& x1,
                              double t, double dt, std::optional<int> label,
                              const SampleConfig& config, RngStream& rng);

/// Called with (t, state) for the initial noise at t = 1 and after every step.
using TrajectoryObserver = std::function<void(double t, std::span<const int> state)>;

/// Full reverse trajectory on the grid t_k = (n - k) / n, dt = 1/n, starting
/// from multinomial noise. Sample `index` uses its own stream (seed, index).
std::vector<int> generate_raw(const Denoiser& model, const SampleConfig& config, std::uint64_t index = 0,
                              const TrajectoryObserver& observer = {});

/// Fixed-sum generation; config.fixed_sum must be true.
CountVector generate(const Denoiser& model, const SampleConfig& config, std::uint64_t index = 0,
                     const TrajectoryObserver& observer = {});

/// Label used for sample `index` under `config` (nullopt = unconditional).
std::optional<int> sample_label(const Denoiser& model, const SampleConfig& config, std::uint64_t index);

/// Samples 0..n-1, independent streams, in index order.
std::vector<std::vector<int>> generate_batch(const Denoiser& model, const SampleConfig& config, std::size_t n);

}  // namespace fsdd
