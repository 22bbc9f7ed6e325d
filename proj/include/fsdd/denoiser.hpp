#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "fsdd/ad.hpp"
#include "fsdd/rng.hpp"

namespace fsdd {

using ad::Matrix;

/// Shape of the denoiser. Desk-scale defaults: 64-wide, 2 layers, 4 heads.
struct DenoiserConfig {
  int codebook_size = 0;  ///< C, sequence length
  int target_sum = 0;     ///< M, so each position scores M+1 count values
  int num_classes = 0;    ///< 0 = unconditional
  int embed_dim = 64;
  int num_layers = 2;
  int num_heads = 4;
  double label_drop_prob = 0.1;

  /// Throws ValidationError on a non-positive dimension, embed_dim not divisible
  /// by num_heads, or label_drop_prob outside [0, 1).
  void validate() const;

  friend bool operator==(const DenoiserConfig&, const DenoiserConfig&) = default;
};

/// Named dense tensors in a fixed insertion order.
class ParameterStore {
 public:
  struct Entry {
    std::string name;
    Matrix value;
  };

  void add(std::string name, Matrix value);
  bool contains(std::string_view name) const;
  Matrix& at(std::string_view name);
  const Matrix& at(std::string_view name) const;

  std::span<Entry> entries() noexcept { return entries_; }
  std::span<const Entry> entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }
  std::size_t scalar_count() const;

  /// Same names and shapes, all zeros.
  ParameterStore zeros_like() const;
  /// True when names, order and shapes agree.
  bool same_layout(const ParameterStore& other) const;
  void set_zero();
  /// this += scale * other; layouts must agree.
  void add_scaled(const ParameterStore& other, double scale);

  friend bool operator==(const ParameterStore& a, const ParameterStore& b);

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// C x (M+1) grid; row j scores "count at codebook entry j equals v".
struct DenoiserLogits {
  Matrix grid;

  int codebook_size() const { return static_cast<int>(grid.rows()); }
  int num_values() const { return static_cast<int>(grid.cols()); }
  std::span<const double> row(int j) const {
    return {grid.data() + static_cast<std::ptrdiff_t>(j) * grid.cols(),
            static_cast<std::size_t>(grid.cols())};
  }
};

/// Mean over positions of -log softmax(row j)[x0[j]].
double cross_entropy_loss(const DenoiserLogits& logits, std::span<const int> x0);

/// Attention denoiser p(X_0 | X_t): count-value, positional and additive
/// time/class conditioning embeddings, pre-norm transformer blocks, and a
/// per-position head over count values.
class Denoiser {
 public:
  /// Checks names and shapes of `params` against the layout for `config`.
  Denoiser(DenoiserConfig config, ParameterStore params);

  /// Fresh parameters: N(0, 0.02^2) weights and embeddings, zero biases, unit norm gains.
  static Denoiser initialize(const DenoiserConfig& config, std::uint64_t seed);
  /// Parameter layout (zeros) for `config`.
  static ParameterStore layout(const DenoiserConfig& config);

  const DenoiserConfig& config() const noexcept { return config_; }
  const ParameterStore& params() const noexcept { return params_; }
  ParameterStore& mutable_params() noexcept { return params_; }

  /// Deterministic logits. `label` empty means the unconditional (null) class.
  /// Throws ValidationError if x_t has the wrong length, an entry outside
  /// {0..M}, t outside [0, 1], or an invalid label.
  DenoiserLogits forward(std::span<const int> x_t, double t, std::optional<int> label) const;

  /// Loss for one example; adds d(loss)/d(param) * weight into `grad`
  /// (which must have this model's layout).
  double accumulate_gradient(std::span<const int> x_t, double t, std::optional<int> label,
                             std::span<const int> x0, ParameterStore& grad,
                             double weight = 1.0) const;

  /// Exact gradient of cross_entropy_loss(forward(...), x0) for every parameter.
  ParameterStore backward(std::span<const int> x_t, double t, std::optional<int> label,
                          std::span<const int> x0) const;

 private:
  ad::Var build(ad::Tape& tape, std::span<const int> x_t, double t, std::optional<int> label,
                ParameterStore* grad_sink) const;
  void check_inputs(std::span<const int> x_t, double t, std::optional<int> label) const;

  DenoiserConfig config_;
  ParameterStore params_;
};

/// Sinusoidal embedding of t in [0, 1] (scaled by 1000), width 2*ceil(dim/2).
Matrix timestep_embedding(double t, int dim);

}  // namespace fsdd
