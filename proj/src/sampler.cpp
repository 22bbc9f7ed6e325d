#include "fsdd/sampler.hpp"

#include <cmath>
#include <string>

#include "fsdd/error.hpp"
#include "fsdd/forward.hpp"
#include "fsdd/prob.hpp"
#include "parallel.hpp"

namespace fsdd {

std::string_view to_string(Schedule s) {
  switch (s) {
    case Schedule::linear: return "linear";
    case Schedule::constant: return "constant";
    case Schedule::none: return "none";
  }
  return "?";
}

Schedule parse_schedule(std::string_view name) {
  for (auto s : {Schedule::linear, Schedule::constant, Schedule::none}) {
    if (name == to_string(s)) return s;
  }
  throw ValidationError("unknown schedule '" + std::string(name) + "' (expected linear, constant or none)");
}

double schedule_value(Schedule s, double t) {
  switch (s) {
    case Schedule::linear: return t;
    case Schedule::constant: return 1.0;
    case Schedule::none: return 0.0;
  }
  return 0.0;
}

void SampleConfig::validate() const {
  if (num_steps < 1) throw ValidationError("sample: steps must be at least 1");
  if (!(top_p > 0.0 && top_p <= 1.0)) throw ValidationError("sample: top_p must lie in (0, 1]");
  if (!(guidance_scale >= 0.0 && std::isfinite(guidance_scale))) {
    throw ValidationError("sample: guidance scale must be finite and non-negative");
  }
  if (threads < 0) throw ValidationError("sample: threads must be non-negative");
}

DenoiserLogits guided_logits(const DenoiserLogits& cond, const DenoiserLogits& uncond, double w) {
  if (cond.grid.rows() != uncond.grid.rows() || cond.grid.cols() != uncond.grid.cols()) {
    throw ValidationError("guided_logits: shape mismatch");
  }
  // cond + w (cond - uncond): equal to (1 + w) cond - w uncond, and exact when cond == uncond.
  return DenoiserLogits{cond.grid + w * (cond.grid - uncond.grid)};
}

DenoiserLogits sampling_logits(const Denoiser& model, std::span<const int> x_t, double t,
                               std::optional<int> label, double w) {
  auto cond = model.forward(x_t, t, label);
  if (!label || w == 0.0 || model.config().num_classes == 0) return cond;
  return guided_logits(cond, model.forward(x_t, t, std::nullopt), w);
}

std::vector<int> reverse_step(const Denoiser& model, std::span<const int> x_t, const CountVector& x1,
                              double t, double dt, std::optional<int> label,
                              const SampleConfig& config, RngStream& rng) {
  const int c = model.config().codebook_size;
  const int m = model.config().target_sum;
  if (!(dt > 0.0 && dt <= t && t <= 1.0)) {
    throw ValidationError("reverse_step needs 0 < dt <= t <= 1 (got t=" + std::to_string(t) +
                          ", dt=" + std::to_string(dt) + ")");
  }
  if (static_cast<int>(x_t.size()) != c || x1.codebook_size() != c || x1.target_sum() != m) {
    throw ValidationError("reverse_step: state shape does not match the model");
  }
  if (config.fixed_sum && !satisfies_fixed_sum(x_t, m)) {
    throw ValidationError("reverse_step: input state violates the fixed sum");
  }

  const auto logits = sampling_logits(model, x_t, t, label, config.guidance_scale);
  std::vector<int> x0(static_cast<std::size_t>(c));
  for (int j = 0; j < c; ++j) x0[static_cast<std::size_t>(j)] = top_p_sample(logits.row(j), config.top_p, rng);
  if (config.fixed_sum && !satisfies_fixed_sum(x0, m)) {
    std::vector<std::vector<double>> log_probs(static_cast<std::size_t>(c));
    for (int j = 0; j < c; ++j) log_probs[static_cast<std::size_t>(j)] = log_softmax(logits.row(j));
    x0 = greedy_adjust(std::move(x0), m, [&](std::size_t j, int v) {
           return log_probs[j][static_cast<std::size_t>(v)];
         }).to_vector();
  }

  const double ratio = dt / t;
  const double f = schedule_value(config.schedule, t - dt);
  std::vector<double> mu(static_cast<std::size_t>(c));
  std::vector<double> sigma(static_cast<std::size_t>(c));
  for (std::size_t j = 0; j < mu.size(); ++j) {
    // The last step has ratio exactly 1, so mu lands on x0 without rounding error.
    mu[j] = ratio == 1.0 ? x0[j] : (1.0 - ratio) * x_t[j] + ratio * x0[j];
    sigma[j] = std::abs(x1[j] - x0[j]) / 4.0 * f;
  }
  GaussianParams params(std::move(mu), std::move(sigma));
  auto next = sample_discretized_gaussian(params, m, rng);
  if (!config.fixed_sum) return next;
  return greedy_adjust(std::move(next), params, m).to_vector();
}

std::optional<int> sample_label(const Denoiser& model, const SampleConfig& config, std::uint64_t index) {
  const int k = model.config().num_classes;
  if (k == 0) {
    if (config.class_label) throw ValidationError("sample: class label given for an unconditional model");
    return std::nullopt;
  }
  if (config.cycle_classes) return static_cast<int>(index % static_cast<std::uint64_t>(k));
  if (config.class_label && (*config.class_label < 0 || *config.class_label >= k)) {
    throw ValidationError("sample: class " + std::to_string(*config.class_label) + " outside [0, " +
                          std::to_string(k) + ")");
  }
  return config.class_label;
}

std::vector<int> generate_raw(const Denoiser& model, const SampleConfig& config, std::uint64_t index,
                              const TrajectoryObserver& observer) {
  config.validate();
  const auto label = sample_label(model, config, index);
  RngStream rng(config.seed, index);
  const auto x1 = sample_multinomial_noise(model.config().codebook_size, model.config().target_sum, rng);
  std::vector<int> x = x1.to_vector();
  if (observer) observer(1.0, x);
  const int n = config.num_steps;
  const double dt = 1.0 / n;
  for (int k = 0; k < n; ++k) {
    const double t = static_cast<double>(n - k) / n;
    x = reverse_step(model, x, x1, t, dt, label, config, rng);
    if (observer) observer(static_cast<double>(n - k - 1) / n, x);
  }
  return x;
}

CountVector generate(const Denoiser& model, const SampleConfig& config, std::uint64_t index,
                     const TrajectoryObserver& observer) {
  if (!config.fixed_sum) throw ValidationError("generate: fixed_sum is off; use generate_raw");
  return CountVector(generate_raw(model, config, index, observer), model.config().target_sum);
}

std::vector<std::vector<int>> generate_batch(const Denoiser& model, const SampleConfig& config, std::size_t n) {
  config.validate();
  std::vector<std::vector<int>> out(n);
  detail::parallel_for(n, static_cast<std::size_t>(config.threads),
                       [&](std::size_t i) { out[i] = generate_raw(model, config, i); });
  return out;
}

}  // namespace fsdd
