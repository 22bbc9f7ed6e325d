#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "fsdd/checkpoint.hpp"
#include "fsdd/data.hpp"
#include "fsdd/denoiser.hpp"
#include "fsdd/error.hpp"

namespace fsdd {

struct TrainConfig {
  int steps = 2000;  ///< total optimizer steps, counted from initialization
  int batch_size = 64;
  double learning_rate = 1e-3;
  double weight_decay = 1e-4;
  double ema_decay = 0.999;
  std::uint64_t seed = 0;
  int eval_every = 100;       ///< log interval in steps; 0 logs only the last step
  int checkpoint_every = 0;   ///< 0 writes only the final checkpoint
  std::filesystem::path checkpoint_path;  ///< empty: no checkpoint files
  std::filesystem::path log_path;         ///< empty: no CSV log
  /// false trains the unconstrained baseline arm (no greedy adjustment of x_t).
  bool fixed_sum = true;
  int threads = 1;  ///< 0 = hardware concurrency; results do not depend on it

  /// Throws ValidationError unless steps >= 0, batch_size >= 1,
  /// learning_rate > 0 (or exactly 0), weight_decay >= 0 and ema_decay in [0, 1).
  void validate() const;
};

/// Raised when a step produces a non-finite loss.
class TrainingError : public Error {
 public:
  using Error::Error;
};

struct StepRecord {
  std::uint64_t step = 0;  ///< 1-based index of the step just taken
  double loss = 0.0;
  /// Loss of the EMA weights on the same noisy batch; NaN when not evaluated.
  double ema_loss = 0.0;
  double wall_ms = 0.0;
};

/// One corrupted training input.
struct TrainingExample {
  double t = 0.0;
  std::vector<int> x_t;  ///< sums to M whenever config.fixed_sum is set
  std::optional<int> label;  ///< after label dropout
};

/// Draws t ~ U(0,1), x1 from multinomial noise and x_t from the forward
/// process (greedy-adjusted unless config.fixed_sum is false), then applies
/// label dropout, all on the stream keyed by (config.seed, step, index).
TrainingExample draw_training_example(const DenoiserConfig& model, const TrainConfig& config,
                                      std::uint64_t step, std::size_t index, const CountVector& x0,
                                      std::optional<int> label);

/// Owns live parameters, EMA shadow and AdamW moments.
class Trainer {
 public:
  Trainer(Checkpoint state, TrainConfig config);

  /// One AdamW step on `batch` (labels empty or one per row); element i
  /// trains on draw_training_example(..., steps_taken(), i, ...).
  StepRecord step(std::span<const CountVector> batch, std::span<const int> labels,
                  bool evaluate_ema = false);

  std::uint64_t steps_taken() const noexcept { return step_; }
  const Denoiser& model() const noexcept { return model_; }
  const ParameterStore& ema() const noexcept { return ema_; }
  Checkpoint checkpoint() const;

 private:
  struct ShardResult;
  void run_shard(std::size_t shard, std::span<const CountVector> batch, std::span<const int> labels,
                 bool evaluate_ema, ShardResult& out) const;

  TrainConfig config_;
  Denoiser model_;
  ParameterStore ema_;
  ParameterStore adam_m_;
  ParameterStore adam_v_;
  std::uint64_t step_ = 0;
};

using StepObserver = std::function<void(const StepRecord&)>;

/// Runs the trainer to `config.steps` total steps with a fresh shuffle of
/// `data` per epoch. With `resume`, continues from its step and reproduces the
/// trajectory an uninterrupted run would have taken. Writes periodic and final
/// checkpoints and the CSV log when their paths are set.
Checkpoint fit(const Dataset& data, const DenoiserConfig& model_config, const TrainConfig& config,
               std::optional<Checkpoint> resume = std::nullopt, const StepObserver& observer = {});

/// Model shape implied by a dataset: C, M and class count copied, desk defaults elsewhere.
DenoiserConfig default_model_config(const Dataset& data);

}  // namespace fsdd
