#pragma once

// Minimal reverse-mode differentiation over dense row-major matrices.
//
// A Tape records every intermediate value together with a closure that
// pushes its output gradient back to its inputs. Values live in the tape and
// are addressed by Var handles, so closures never hold references that a
// vector reallocation could invalidate. Backward runs the closures in reverse
// creation order, which is a valid topological order by construction.

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace fsdd::ad {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Var {
  std::size_t id;
};

class Tape {
 public:
  /// A tape that does not record closures can only run forward.
  explicit Tape(bool record = true) : record_(record) {}

  /// Input that never receives a gradient.
  Var constant(Matrix value);
  /// Leaf referring to `value`, which must outlive the tape. Its gradient is
  /// added into `*sink` (same shape) during backward().
  Var parameter(const Matrix& value, Matrix* sink);

  const Matrix& value(Var v) const {
    const Node& n = nodes_[v.id];
    return n.external != nullptr ? *n.external : n.value;
  }
  bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }

  /// Seeds d(root)/d(root) = 1 for a 1x1 root and propagates to all parameters.
  void backward(Var root);

  using Backward = std::function<void(Tape&, std::size_t self)>;
  /// Records an op result. `back` is only kept when some input requires grad.
  Var push(Matrix value, bool requires_grad, Backward back);

  /// Gradient of node `id`, valid while backward() is running.
  const Matrix& grad(std::size_t id) const { return nodes_[id].grad; }
  /// Adds `g` into the gradient of `v` if it requires one.
  void accumulate(Var v, const Matrix& g);

  bool recording() const noexcept { return record_; }
  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    const Matrix* external = nullptr;
    Matrix grad;
    Backward back;
    Matrix* sink = nullptr;
    bool requires_grad = false;
  };
  std::vector<Node> nodes_;
  bool record_;
};

// Ops. Shapes are checked with assertions; callers build well-formed graphs.
Var matmul(Tape& tape, Var a, Var b);     ///< a * b
Var matmul_nt(Tape& tape, Var a, Var b);  ///< a * b^T
Var add(Tape& tape, Var a, Var b);
Var add_row(Tape& tape, Var a, Var row);  ///< broadcasts a 1xN row over every row of a
Var scale(Tape& tape, Var a, double s);
Var gather_rows(Tape& tape, Var table, std::span<const int> rows);
Var layer_norm(Tape& tape, Var x, Var gain, Var bias, double eps = 1e-5);
Var gelu(Tape& tape, Var x);  ///< tanh approximation
Var silu(Tape& tape, Var x);
Var softmax_rows(Tape& tape, Var x);
Var slice_cols(Tape& tape, Var x, Eigen::Index start, Eigen::Index count);
Var concat_cols(Tape& tape, std::span<const Var> parts);
/// Mean over rows of -log softmax(row)[target]; returns a 1x1 node.
Var cross_entropy_rows(Tape& tape, Var logits, std::span<const int> targets);

}  // namespace fsdd::ad
