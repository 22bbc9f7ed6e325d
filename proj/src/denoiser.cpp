#include "fsdd/denoiser.hpp"

#include <cmath>
#include <utility>

#include "fsdd/error.hpp"

namespace fsdd {

void DenoiserConfig::validate() const {
  if (codebook_size < 1) throw ValidationError("denoiser: C must be positive");
  if (target_sum < 0) throw ValidationError("denoiser: M must be non-negative");
  if (num_classes < 0) throw ValidationError("denoiser: num_classes must be non-negative");
  if (embed_dim < 1 || num_layers < 1 || num_heads < 1) {
    throw ValidationError("denoiser: embed_dim, num_layers and num_heads must be positive");
  }
  if (embed_dim % num_heads != 0) {
    throw ValidationError("denoiser: embed_dim " + std::to_string(embed_dim) +
                          " is not divisible by num_heads " + std::to_string(num_heads));
  }
  if (!(label_drop_prob >= 0.0 && label_drop_prob < 1.0)) {
    throw ValidationError("denoiser: label_drop_prob must lie in [0, 1)");
  }
}

// ---- ParameterStore ---------------------------------------------------------

void ParameterStore::add(std::string name, Matrix value) {
  if (index_.contains(name)) throw ValidationError("duplicate parameter '" + name + "'");
  index_.emplace(name, entries_.size());
  entries_.push_back(Entry{std::move(name), std::move(value)});
}

bool ParameterStore::contains(std::string_view name) const {
  return index_.contains(std::string(name));
}

Matrix& ParameterStore::at(std::string_view name) {
  const auto it = index_.find(std::string(name));
  if (it == index_.end()) throw ValidationError("unknown parameter '" + std::string(name) + "'");
  return entries_[it->second].value;
}

const Matrix& ParameterStore::at(std::string_view name) const {
  return const_cast<ParameterStore*>(this)->at(name);
}

std::size_t ParameterStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += static_cast<std::size_t>(e.value.size());
  return n;
}

ParameterStore ParameterStore::zeros_like() const {
  ParameterStore out;
  for (const auto& e : entries_) out.add(e.name, Matrix::Zero(e.value.rows(), e.value.cols()));
  return out;
}

bool ParameterStore::same_layout(const ParameterStore& other) const {
  if (entries_.size() != other.entries_.size()) return false;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& a = entries_[i];
    const auto& b = other.entries_[i];
    if (a.name != b.name || a.value.rows() != b.value.rows() || a.value.cols() != b.value.cols()) {
      return false;
    }
  }
  return true;
}

void ParameterStore::set_zero() {
  for (auto& e : entries_) e.value.setZero();
}

void ParameterStore::add_scaled(const ParameterStore& other, double scale) {
  if (!same_layout(other)) throw ValidationError("parameter layouts differ");
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    entries_[i].value += scale * other.entries_[i].value;
  }
}

bool operator==(const ParameterStore& a, const ParameterStore& b) {
  if (!a.same_layout(b)) return false;
  for (std::size_t i = 0; i < a.entries_.size(); ++i) {
    if (a.entries_[i].value != b.entries_[i].value) return false;
  }
  return true;
}

// ---- loss -------------------------------------------------------------------

double cross_entropy_loss(const DenoiserLogits& logits, std::span<const int> x0) {
  if (static_cast<std::size_t>(logits.codebook_size()) != x0.size()) {
    throw ValidationError("cross_entropy_loss: target length does not match logits");
  }
  ad::Tape tape(false);
  const auto z = tape.constant(logits.grid);
  for (int v : x0) {
    if (v < 0 || v >= logits.num_values()) {
      throw ValidationError("cross_entropy_loss: target count outside {0..M}");
    }
  }
  return tape.value(ad::cross_entropy_rows(tape, z, x0))(0, 0);
}

// ---- network ----------------------------------------------------------------

Matrix timestep_embedding(double t, int dim) {
  const int half = (dim + 1) / 2;
  Matrix out(1, 2 * half);
  const double scaled = 1000.0 * t;
  for (int i = 0; i < half; ++i) {
    const double freq = std::exp(-std::log(10000.0) * i / half);
    out(0, i) = std::sin(scaled * freq);
    out(0, half + i) = std::cos(scaled * freq);
  }
  return out;
}

namespace {

std::string block_name(int layer, const char* leaf) {
  return "blocks." + std::to_string(layer) + "." + leaf;
}

}  // namespace

ParameterStore Denoiser::layout(const DenoiserConfig& c) {
  c.validate();
  const Eigen::Index d = c.embed_dim;
  const Eigen::Index values = c.target_sum + 1;
  const Eigen::Index time_in = 2 * ((c.embed_dim + 1) / 2);
  ParameterStore p;
  p.add("count_embed", Matrix::Zero(values, d));
  p.add("pos_embed", Matrix::Zero(c.codebook_size, d));
  p.add("time.w1", Matrix::Zero(time_in, d));
  p.add("time.b1", Matrix::Zero(1, d));
  p.add("time.w2", Matrix::Zero(d, d));
  p.add("time.b2", Matrix::Zero(1, d));
  if (c.num_classes > 0) p.add("class_embed", Matrix::Zero(c.num_classes + 1, d));
  for (int l = 0; l < c.num_layers; ++l) {
    p.add(block_name(l, "ln1.gain"), Matrix::Zero(1, d));
    p.add(block_name(l, "ln1.bias"), Matrix::Zero(1, d));
    p.add(block_name(l, "attn.wqkv"), Matrix::Zero(d, 3 * d));
    p.add(block_name(l, "attn.bqkv"), Matrix::Zero(1, 3 * d));
    p.add(block_name(l, "attn.wo"), Matrix::Zero(d, d));
    p.add(block_name(l, "attn.bo"), Matrix::Zero(1, d));
    p.add(block_name(l, "ln2.gain"), Matrix::Zero(1, d));
    p.add(block_name(l, "ln2.bias"), Matrix::Zero(1, d));
    p.add(block_name(l, "mlp.w1"), Matrix::Zero(d, 4 * d));
    p.add(block_name(l, "mlp.b1"), Matrix::Zero(1, 4 * d));
    p.add(block_name(l, "mlp.w2"), Matrix::Zero(4 * d, d));
    p.add(block_name(l, "mlp.b2"), Matrix::Zero(1, d));
  }
  p.add("final_ln.gain", Matrix::Zero(1, d));
  p.add("final_ln.bias", Matrix::Zero(1, d));
  p.add("head.w", Matrix::Zero(d, values));
  p.add("head.b", Matrix::Zero(1, values));
  return p;
}

Denoiser::Denoiser(DenoiserConfig config, ParameterStore params)
    : config_(config), params_(std::move(params)) {
  if (!params_.same_layout(layout(config_))) {
    throw ValidationError("parameter names or shapes do not match the denoiser config");
  }
}

Denoiser Denoiser::initialize(const DenoiserConfig& config, std::uint64_t seed) {
  ParameterStore p = layout(config);
  RngStream rng(seed, 0x1417);
  for (auto& e : p.entries()) {
    const std::string_view name = e.name;
    if (name.ends_with(".gain")) {
      e.value.setOnes();
    } else if (name.ends_with(".b1") || name.ends_with(".b2") || name.ends_with(".bias") ||
               name.ends_with(".bqkv") || name.ends_with(".bo") || name == "head.b") {
      e.value.setZero();
    } else {
      for (Eigen::Index i = 0; i < e.value.size(); ++i) e.value.data()[i] = 0.02 * rng.normal();
    }
  }
  return Denoiser(config, std::move(p));
}

void Denoiser::check_inputs(std::span<const int> x_t, double t, std::optional<int> label) const {
  if (static_cast<int>(x_t.size()) != config_.codebook_size) {
    throw ValidationError("denoiser input has length " + std::to_string(x_t.size()) +
                          ", expected C=" + std::to_string(config_.codebook_size));
  }
  for (int v : x_t) {
    if (v < 0 || v > config_.target_sum) {
      throw ValidationError("denoiser input count " + std::to_string(v) + " outside {0.." +
                            std::to_string(config_.target_sum) + "}");
    }
  }
  if (!(t >= 0.0 && t <= 1.0)) throw ValidationError("denoiser time must lie in [0, 1]");
  if (label && (*label < 0 || *label >= config_.num_classes)) {
    throw ValidationError("class label " + std::to_string(*label) + " outside [0, " +
                          std::to_string(config_.num_classes) + ")");
  }
}

ad::Var Denoiser::build(ad::Tape& tape, std::span<const int> x_t, double t,
                        std::optional<int> label, ParameterStore* grad_sink) const {
  using namespace ad;
  auto param = [&](const std::string& name) {
    return tape.parameter(params_.at(name), grad_sink ? &grad_sink->at(name) : nullptr);
  };
  const int d = config_.embed_dim;
  const int heads = config_.num_heads;
  const int head_dim = d / heads;

  // Conditioning vector shared by every position.
  Var cond = tape.constant(timestep_embedding(t, d));
  cond = add_row(tape, matmul(tape, cond, param("time.w1")), param("time.b1"));
  cond = silu(tape, cond);
  cond = add_row(tape, matmul(tape, cond, param("time.w2")), param("time.b2"));
  if (config_.num_classes > 0) {
    const int row = label ? *label : config_.num_classes;
    const int rows[] = {row};
    cond = add(tape, cond, gather_rows(tape, param("class_embed"), rows));
  }

  Var h = gather_rows(tape, param("count_embed"), x_t);
  h = add(tape, h, param("pos_embed"));
  h = add_row(tape, h, cond);

  const double attn_scale = 1.0 / std::sqrt(static_cast<double>(head_dim));
  for (int l = 0; l < config_.num_layers; ++l) {
    Var a = layer_norm(tape, h, param(block_name(l, "ln1.gain")), param(block_name(l, "ln1.bias")));
    Var qkv = add_row(tape, matmul(tape, a, param(block_name(l, "attn.wqkv"))),
                      param(block_name(l, "attn.bqkv")));
    std::vector<Var> outs;
    outs.reserve(static_cast<std::size_t>(heads));
    for (int k = 0; k < heads; ++k) {
      Var q = slice_cols(tape, qkv, k * head_dim, head_dim);
      Var key = slice_cols(tape, qkv, d + k * head_dim, head_dim);
      Var v = slice_cols(tape, qkv, 2 * d + k * head_dim, head_dim);
      Var weights = softmax_rows(tape, scale(tape, matmul_nt(tape, q, key), attn_scale));
      outs.push_back(matmul(tape, weights, v));
    }
    Var attn = heads == 1 ? outs.front() : concat_cols(tape, outs);
    attn = add_row(tape, matmul(tape, attn, param(block_name(l, "attn.wo"))),
                   param(block_name(l, "attn.bo")));
    h = add(tape, h, attn);

    Var b = layer_norm(tape, h, param(block_name(l, "ln2.gain")), param(block_name(l, "ln2.bias")));
    b = add_row(tape, matmul(tape, b, param(block_name(l, "mlp.w1"))), param(block_name(l, "mlp.b1")));
    b = gelu(tape, b);
    b = add_row(tape, matmul(tape, b, param(block_name(l, "mlp.w2"))), param(block_name(l, "mlp.b2")));
    h = add(tape, h, b);
  }
  h = layer_norm(tape, h, param("final_ln.gain"), param("final_ln.bias"));
  return add_row(tape, matmul(tape, h, param("head.w")), param("head.b"));
}

DenoiserLogits Denoiser::forward(std::span<const int> x_t, double t,
                                 std::optional<int> label) const {
  check_inputs(x_t, t, label);
  ad::Tape tape(false);
  const auto logits = build(tape, x_t, t, label, nullptr);
  return DenoiserLogits{tape.value(logits)};
}

double Denoiser::accumulate_gradient(std::span<const int> x_t, double t,
                                     std::optional<int> label, std::span<const int> x0,
                                     ParameterStore& grad, double weight) const {
  check_inputs(x_t, t, label);
  if (x0.size() != x_t.size()) throw ValidationError("target length does not match input");
  for (int v : x0) {
    if (v < 0 || v > config_.target_sum) throw ValidationError("target count outside {0..M}");
  }
  if (!grad.same_layout(params_)) throw ValidationError("gradient store layout mismatch");
  ad::Tape tape(true);
  const auto logits = build(tape, x_t, t, label, &grad);
  auto loss = ad::cross_entropy_rows(tape, logits, x0);
  const double value = tape.value(loss)(0, 0);
  if (weight != 1.0) loss = ad::scale(tape, loss, weight);
  tape.backward(loss);
  return value;
}

ParameterStore Denoiser::backward(std::span<const int> x_t, double t, std::optional<int> label,
                                  std::span<const int> x0) const {
  ParameterStore grad = params_.zeros_like();
  accumulate_gradient(x_t, t, label, x0, grad);
  return grad;
}

}  // namespace fsdd
