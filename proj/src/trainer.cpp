#include "fsdd/trainer.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "fsdd/forward.hpp"
#include "fsdd/prob.hpp"
#include "fsdd/rng.hpp"
#include "parallel.hpp"

namespace fsdd {
namespace {

constexpr double kBeta1 = 0.9;
constexpr double kBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;
// Elements per gradient shard. Fixed so the reduction order never depends on
// the thread count.
constexpr std::size_t kShardSize = 8;

constexpr std::uint64_t kElementDomain = 0x7a11;
constexpr std::uint64_t kShuffleDomain = 0x5f1e;

std::uint64_t batch_hash(std::span<const CountVector> batch) {
  std::uint64_t h = 1469598103934665603ULL;
  for (const auto& x : batch) {
    for (int v : x.counts()) {
      h ^= static_cast<std::uint64_t>(static_cast<std::uint32_t>(v));
      h *= 1099511628211ULL;
    }
  }
  return h;
}

}  // namespace

void TrainConfig::validate() const {
  if (steps < 0) throw ValidationError("train: steps must be non-negative");
  if (batch_size < 1) throw ValidationError("train: batch_size must be at least 1");
  if (!(learning_rate >= 0.0 && std::isfinite(learning_rate))) {
    throw ValidationError("train: learning_rate must be finite and non-negative");
  }
  if (!(weight_decay >= 0.0 && std::isfinite(weight_decay))) {
    throw ValidationError("train: weight_decay must be finite and non-negative");
  }
  if (!(ema_decay >= 0.0 && ema_decay < 1.0)) throw ValidationError("train: ema_decay must lie in [0, 1)");
  if (eval_every < 0 || checkpoint_every < 0) {
    throw ValidationError("train: eval_every and checkpoint_every must be non-negative");
  }
  if (threads < 0) throw ValidationError("train: threads must be non-negative");
}

TrainingExample draw_training_example(const DenoiserConfig& model, const TrainConfig& config,
                                      std::uint64_t step, std::size_t index, const CountVector& x0,
                                      std::optional<int> label) {
  RngStream rng(config.seed, mix_stream_id(mix_stream_id(kElementDomain, step), index));
  TrainingExample ex;
  ex.t = rng.uniform();
  const auto x1 = sample_multinomial_noise(model.codebook_size, model.target_sum, rng);
  ex.x_t = config.fixed_sum ? sample_forward(x0, x1, ex.t, rng).x_t.to_vector()
                            : sample_forward_unadjusted(x0, x1, ex.t, rng);
  if (label) {
    ex.label = label;
    if (rng.uniform() < model.label_drop_prob) ex.label.reset();
  }
  return ex;
}

struct Trainer::ShardResult {
  ParameterStore grad;
  double loss = 0.0;
  double ema_loss = 0.0;
  std::vector<double> times;
};

Trainer::Trainer(Checkpoint state, TrainConfig config)
    : config_(std::move(config)),
      model_(state.config, std::move(state.params)),
      ema_(std::move(state.ema)),
      adam_m_(std::move(state.adam_m)),
      adam_v_(std::move(state.adam_v)),
      step_(state.step) {
  config_.validate();
  for (const auto* s : {&ema_, &adam_m_, &adam_v_}) {
    if (!s->same_layout(model_.params())) throw ValidationError("training state layouts disagree");
  }
}

Checkpoint Trainer::checkpoint() const {
  Checkpoint c;
  c.config = model_.config();
  c.step = step_;
  c.params = model_.params();
  c.ema = ema_;
  c.adam_m = adam_m_;
  c.adam_v = adam_v_;
  return c;
}

void Trainer::run_shard(std::size_t shard, std::span<const CountVector> batch,
                        std::span<const int> labels, bool evaluate_ema, ShardResult& out) const {
  const auto& cfg = model_.config();
  const std::size_t begin = shard * kShardSize;
  const std::size_t end = std::min(batch.size(), begin + kShardSize);
  const double weight = 1.0 / static_cast<double>(batch.size());
  std::optional<Denoiser> ema_model;
  if (evaluate_ema) ema_model.emplace(cfg, ema_);
  for (std::size_t i = begin; i < end; ++i) {
    const auto ex = draw_training_example(cfg, config_, step_, i, batch[i],
                                          labels.empty() ? std::nullopt : std::optional<int>(labels[i]));
    out.times.push_back(ex.t);
    out.loss += weight * model_.accumulate_gradient(ex.x_t, ex.t, ex.label, batch[i].counts(), out.grad, weight);
    if (ema_model) {
      out.ema_loss += weight * cross_entropy_loss(ema_model->forward(ex.x_t, ex.t, ex.label), batch[i].counts());
    }
  }
}

StepRecord Trainer::step(std::span<const CountVector> batch, std::span<const int> labels, bool evaluate_ema) {
  const auto started = std::chrono::steady_clock::now();
  const auto& cfg = model_.config();
  if (batch.empty()) throw ValidationError("train: empty batch");
  if (!labels.empty() && labels.size() != batch.size()) throw ValidationError("train: label count mismatch");
  if (labels.empty() != (cfg.num_classes == 0)) {
    throw ValidationError("train: labels must be given exactly when the model is class-conditional");
  }
  for (const auto& x : batch) {
    if (x.codebook_size() != cfg.codebook_size || x.target_sum() != cfg.target_sum) {
      throw ValidationError("train: batch entry does not match model C and M");
    }
  }

  const std::size_t shards = (batch.size() + kShardSize - 1) / kShardSize;
  std::vector<ShardResult> results(shards);
  for (auto& r : results) r.grad = model_.params().zeros_like();

  detail::parallel_for(shards, static_cast<std::size_t>(config_.threads), [&](std::size_t s) {
    run_shard(s, batch, labels, evaluate_ema, results[s]);
  });

  ParameterStore& grad = results[0].grad;
  double loss = results[0].loss;
  double ema_loss = results[0].ema_loss;
  for (std::size_t s = 1; s < shards; ++s) {
    grad.add_scaled(results[s].grad, 1.0);
    loss += results[s].loss;
    ema_loss += results[s].ema_loss;
  }

  if (!std::isfinite(loss)) {
    std::ostringstream msg;
    msg << "non-finite loss at step " << step_ + 1 << " (batch hash " << std::hex << batch_hash(batch)
        << std::dec << ", t =";
    for (const auto& r : results) {
      for (double t : r.times) msg << ' ' << t;
    }
    msg << ')';
    throw TrainingError(msg.str());
  }

  ++step_;
  const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(step_));
  const double lr = config_.learning_rate;
  const double wd = config_.weight_decay;
  const double decay = config_.ema_decay;
  auto params = model_.mutable_params().entries();
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto w = params[k].value.array();
    const auto g = grad.entries()[k].value.array();
    auto m = adam_m_.entries()[k].value.array();
    auto v = adam_v_.entries()[k].value.array();
    m = kBeta1 * m + (1.0 - kBeta1) * g;
    v = kBeta2 * v + (1.0 - kBeta2) * g.square();
    w -= lr * ((m / c1) / ((v / c2).sqrt() + kAdamEps) + wd * w);
    auto shadow = ema_.entries()[k].value.array();
    shadow = decay * shadow + (1.0 - decay) * w;
  }

  StepRecord rec;
  rec.step = step_;
  rec.loss = loss;
  rec.ema_loss = evaluate_ema ? ema_loss : std::numeric_limits<double>::quiet_NaN();
  rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
  return rec;
}

DenoiserConfig default_model_config(const Dataset& data) {
  DenoiserConfig c;
  c.codebook_size = data.codebook_size;
  c.target_sum = data.target_sum;
  c.num_classes = data.num_classes;
  return c;
}

namespace {

// Position p of the infinite epoch stream maps to row perm_e[p mod N] with
// e = p / N and perm_e drawn from its own stream, so any step can be
// reconstructed without replaying earlier epochs.
class EpochOrder {
 public:
  EpochOrder(std::size_t n, std::uint64_t seed) : n_(n), seed_(seed) {}

  std::size_t at(std::uint64_t position) {
    const std::uint64_t epoch = position / n_;
    if (epoch != epoch_ || perm_.empty()) {
      epoch_ = epoch;
      perm_.resize(n_);
      for (std::size_t i = 0; i < n_; ++i) perm_[i] = i;
      RngStream rng(seed_, mix_stream_id(kShuffleDomain, epoch));
      for (std::size_t i = n_; i > 1; --i) std::swap(perm_[i - 1], perm_[rng.uniform_index(i)]);
    }
    return perm_[position % n_];
  }

 private:
  std::size_t n_;
  std::uint64_t seed_;
  std::uint64_t epoch_ = 0;
  std::vector<std::size_t> perm_;
};

void write_checkpoint_if(const TrainConfig& cfg, const Checkpoint& c) {
  if (!cfg.checkpoint_path.empty()) save_checkpoint(cfg.checkpoint_path, c);
}

}  // namespace

Checkpoint fit(const Dataset& data, const DenoiserConfig& model_config, const TrainConfig& config,
               std::optional<Checkpoint> resume, const StepObserver& observer) {
  config.validate();
  data.validate();
  Checkpoint state = resume ? std::move(*resume)
                            : Checkpoint::from_model(Denoiser::initialize(model_config, config.seed));
  const auto& mc = state.config;
  if (mc.codebook_size != data.codebook_size || mc.target_sum != data.target_sum ||
      mc.num_classes != data.num_classes) {
    throw ValidationError("train: model expects C=" + std::to_string(mc.codebook_size) + " M=" +
                          std::to_string(mc.target_sum) + " classes=" + std::to_string(mc.num_classes) +
                          ", data has C=" + std::to_string(data.codebook_size) + " M=" +
                          std::to_string(data.target_sum) + " classes=" + std::to_string(data.num_classes));
  }
  if (state.step > static_cast<std::uint64_t>(config.steps)) {
    throw ValidationError("train: checkpoint is already at step " + std::to_string(state.step) +
                          ", beyond steps=" + std::to_string(config.steps));
  }

  std::ofstream log;
  if (!config.log_path.empty()) {
    const bool append = resume.has_value() && std::filesystem::exists(config.log_path);
    log.open(config.log_path, append ? std::ios::app : std::ios::trunc);
    if (!log) throw IoError("cannot open training log '" + config.log_path.string() + "'");
    if (!append) log << "step,loss,ema_loss,wall_ms\n";
  }

  Trainer trainer(std::move(state), config);
  if (trainer.steps_taken() == static_cast<std::uint64_t>(config.steps)) {
    auto c = trainer.checkpoint();
    write_checkpoint_if(config, c);
    return c;
  }

  EpochOrder order(data.size(), config.seed);
  const auto batch = static_cast<std::size_t>(config.batch_size);
  std::vector<CountVector> rows;
  std::vector<int> labels;
  double elapsed_ms = 0.0;
  while (trainer.steps_taken() < static_cast<std::uint64_t>(config.steps)) {
    const std::uint64_t s = trainer.steps_taken();
    rows.clear();
    labels.clear();
    for (std::size_t i = 0; i < batch; ++i) {
      const std::size_t row = order.at(s * batch + i);
      rows.push_back(data.rows[row]);
      if (data.labeled()) labels.push_back(data.labels[row]);
    }
    const std::uint64_t next = s + 1;
    const bool last = next == static_cast<std::uint64_t>(config.steps);
    const bool log_now = last || (config.eval_every > 0 && next % static_cast<std::uint64_t>(config.eval_every) == 0);
    auto rec = trainer.step(rows, labels, log_now && log.is_open());
    elapsed_ms += rec.wall_ms;
    if (log_now && log.is_open()) {
      log << rec.step << ',' << rec.loss << ',' << rec.ema_loss << ',' << static_cast<long long>(elapsed_ms) << '\n';
      log.flush();
      if (!log) throw IoError("write failed for training log '" + config.log_path.string() + "'");
    }
    if (observer) observer(rec);
    if (!last && config.checkpoint_every > 0 && next % static_cast<std::uint64_t>(config.checkpoint_every) == 0) {
      write_checkpoint_if(config, trainer.checkpoint());
    }
  }
  auto c = trainer.checkpoint();
  write_checkpoint_if(config, c);
  return c;
}

}  // namespace fsdd
