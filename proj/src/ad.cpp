#include "fsdd/ad.hpp"

#include <cassert>
#include <cmath>

namespace fsdd::ad {

Var Tape::constant(Matrix value) { return push(std::move(value), false, nullptr); }

Var Tape::parameter(const Matrix& value, Matrix* sink) {
  const Var v = push(Matrix(), record_ && sink != nullptr, nullptr);
  nodes_[v.id].external = &value;
  nodes_[v.id].sink = sink;
  return v;
}

Var Tape::push(Matrix value, bool requires_grad, Backward back) {
  Node node;
  node.value = std::move(value);
  node.requires_grad = record_ && requires_grad;
  if (node.requires_grad) node.back = std::move(back);
  nodes_.push_back(std::move(node));
  return Var{nodes_.size() - 1};
}

void Tape::accumulate(Var v, const Matrix& g) {
  Node& node = nodes_[v.id];
  if (!node.requires_grad) return;
  assert(g.rows() == value(v).rows() && g.cols() == value(v).cols());
  if (node.sink != nullptr) {
    // Leaves have no closure to run, so their gradient goes straight to the sink.
    *node.sink += g;
  } else if (node.grad.size() == 0) {
    node.grad = g;
  } else {
    node.grad += g;
  }
}

void Tape::backward(Var root) {
  assert(value(root).size() == 1);
  if (!nodes_[root.id].requires_grad) return;
  if (nodes_[root.id].sink != nullptr) {
    *nodes_[root.id].sink += Matrix::Ones(1, 1);
    return;
  }
  nodes_[root.id].grad = Matrix::Ones(1, 1);
  for (std::size_t i = root.id + 1; i-- > 0;) {
    Node& node = nodes_[i];
    if (!node.requires_grad || node.grad.size() == 0) continue;
    if (node.back) node.back(*this, i);
  }
}

namespace {

bool any_grad(const Tape& tape, std::initializer_list<Var> vars) {
  for (Var v : vars) {
    if (tape.requires_grad(v)) return true;
  }
  return false;
}

}  // namespace

Var matmul(Tape& tape, Var a, Var b) {
  assert(tape.value(a).cols() == tape.value(b).rows());
  Matrix out = tape.value(a) * tape.value(b);
  return tape.push(std::move(out), any_grad(tape, {a, b}), [a, b](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    if (t.requires_grad(a)) t.accumulate(a, g * t.value(b).transpose());
    if (t.requires_grad(b)) t.accumulate(b, t.value(a).transpose() * g);
  });
}

Var matmul_nt(Tape& tape, Var a, Var b) {
  assert(tape.value(a).cols() == tape.value(b).cols());
  Matrix out = tape.value(a) * tape.value(b).transpose();
  return tape.push(std::move(out), any_grad(tape, {a, b}), [a, b](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    if (t.requires_grad(a)) t.accumulate(a, g * t.value(b));
    if (t.requires_grad(b)) t.accumulate(b, g.transpose() * t.value(a));
  });
}

Var add(Tape& tape, Var a, Var b) {
  assert(tape.value(a).rows() == tape.value(b).rows());
  assert(tape.value(a).cols() == tape.value(b).cols());
  Matrix out = tape.value(a) + tape.value(b);
  return tape.push(std::move(out), any_grad(tape, {a, b}), [a, b](Tape& t, std::size_t self) {
    t.accumulate(a, t.grad(self));
    t.accumulate(b, t.grad(self));
  });
}

Var add_row(Tape& tape, Var a, Var row) {
  assert(tape.value(row).rows() == 1);
  assert(tape.value(a).cols() == tape.value(row).cols());
  Matrix out = tape.value(a).rowwise() + tape.value(row).row(0);
  return tape.push(std::move(out), any_grad(tape, {a, row}),
                   [a, row](Tape& t, std::size_t self) {
                     t.accumulate(a, t.grad(self));
                     if (t.requires_grad(row)) t.accumulate(row, t.grad(self).colwise().sum());
                   });
}

Var scale(Tape& tape, Var a, double s) {
  Matrix out = tape.value(a) * s;
  return tape.push(std::move(out), any_grad(tape, {a}), [a, s](Tape& t, std::size_t self) {
    t.accumulate(a, t.grad(self) * s);
  });
}

Var gather_rows(Tape& tape, Var table, std::span<const int> rows) {
  const Matrix& tab = tape.value(table);
  Matrix out(static_cast<Eigen::Index>(rows.size()), tab.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    assert(rows[i] >= 0 && rows[i] < tab.rows());
    out.row(static_cast<Eigen::Index>(i)) = tab.row(rows[i]);
  }
  std::vector<int> idx(rows.begin(), rows.end());
  return tape.push(std::move(out), any_grad(tape, {table}),
                   [table, idx = std::move(idx)](Tape& t, std::size_t self) {
                     const Matrix& g = t.grad(self);
                     Matrix dt = Matrix::Zero(t.value(table).rows(), t.value(table).cols());
                     for (std::size_t i = 0; i < idx.size(); ++i) {
                       dt.row(idx[i]) += g.row(static_cast<Eigen::Index>(i));
                     }
                     t.accumulate(table, dt);
                   });
}

Var layer_norm(Tape& tape, Var x, Var gain, Var bias, double eps) {
  const Matrix& in = tape.value(x);
  const Eigen::Index n = in.cols();
  Matrix xhat(in.rows(), n);
  Eigen::VectorXd inv_std(in.rows());
  for (Eigen::Index r = 0; r < in.rows(); ++r) {
    const double mean = in.row(r).mean();
    const double var = (in.row(r).array() - mean).square().mean();
    inv_std(r) = 1.0 / std::sqrt(var + eps);
    xhat.row(r) = (in.row(r).array() - mean) * inv_std(r);
  }
  Matrix out = (xhat.array().rowwise() * tape.value(gain).row(0).array()).matrix();
  out.rowwise() += tape.value(bias).row(0);
  return tape.push(
      std::move(out), any_grad(tape, {x, gain, bias}),
      [x, gain, bias, xhat = std::move(xhat), inv_std = std::move(inv_std)](Tape& t,
                                                                            std::size_t self) {
        const Matrix& g = t.grad(self);
        if (t.requires_grad(gain)) t.accumulate(gain, (g.array() * xhat.array()).colwise().sum());
        if (t.requires_grad(bias)) t.accumulate(bias, g.colwise().sum());
        if (!t.requires_grad(x)) return;
        const Matrix dxhat = (g.array().rowwise() * t.value(gain).row(0).array()).matrix();
        Matrix dx(g.rows(), g.cols());
        for (Eigen::Index r = 0; r < g.rows(); ++r) {
          const double mean_d = dxhat.row(r).mean();
          const double mean_dx = (dxhat.row(r).array() * xhat.row(r).array()).mean();
          dx.row(r) = inv_std(r) *
                      (dxhat.row(r).array() - mean_d - xhat.row(r).array() * mean_dx).matrix();
        }
        t.accumulate(x, dx);
      });
}

Var gelu(Tape& tape, Var x) {
  constexpr double kC = 0.79788456080286535588;  // sqrt(2/pi)
  constexpr double kA = 0.044715;
  const Matrix& in = tape.value(x);
  Matrix out(in.rows(), in.cols());
  Matrix deriv(in.rows(), in.cols());
  for (Eigen::Index i = 0; i < in.size(); ++i) {
    const double v = in.data()[i];
    const double u = kC * (v + kA * v * v * v);
    const double th = std::tanh(u);
    out.data()[i] = 0.5 * v * (1.0 + th);
    deriv.data()[i] = 0.5 * (1.0 + th) + 0.5 * v * (1.0 - th * th) * kC * (1.0 + 3.0 * kA * v * v);
  }
  return tape.push(std::move(out), any_grad(tape, {x}),
                   [x, deriv = std::move(deriv)](Tape& t, std::size_t self) {
                     t.accumulate(x, (t.grad(self).array() * deriv.array()).matrix());
                   });
}

Var silu(Tape& tape, Var x) {
  const Matrix& in = tape.value(x);
  Matrix out(in.rows(), in.cols());
  Matrix deriv(in.rows(), in.cols());
  for (Eigen::Index i = 0; i < in.size(); ++i) {
    const double v = in.data()[i];
    const double s = 1.0 / (1.0 + std::exp(-v));
    out.data()[i] = v * s;
    deriv.data()[i] = s * (1.0 + v * (1.0 - s));
  }
  return tape.push(std::move(out), any_grad(tape, {x}),
                   [x, deriv = std::move(deriv)](Tape& t, std::size_t self) {
                     t.accumulate(x, (t.grad(self).array() * deriv.array()).matrix());
                   });
}

Var softmax_rows(Tape& tape, Var x) {
  const Matrix& in = tape.value(x);
  Matrix out(in.rows(), in.cols());
  for (Eigen::Index r = 0; r < in.rows(); ++r) {
    const double peak = in.row(r).maxCoeff();
    out.row(r) = (in.row(r).array() - peak).exp().matrix();
    out.row(r) /= out.row(r).sum();
  }
  return tape.push(std::move(out), any_grad(tape, {x}), [x](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    const Matrix& y = t.value(Var{self});
    Matrix dx(g.rows(), g.cols());
    for (Eigen::Index r = 0; r < g.rows(); ++r) {
      const double dot = g.row(r).dot(y.row(r));
      dx.row(r) = (y.row(r).array() * (g.row(r).array() - dot)).matrix();
    }
    t.accumulate(x, dx);
  });
}

Var slice_cols(Tape& tape, Var x, Eigen::Index start, Eigen::Index count) {
  assert(start + count <= tape.value(x).cols());
  Matrix out = tape.value(x).middleCols(start, count);
  return tape.push(std::move(out), any_grad(tape, {x}),
                   [x, start, count](Tape& t, std::size_t self) {
                     Matrix dx = Matrix::Zero(t.value(x).rows(), t.value(x).cols());
                     dx.middleCols(start, count) = t.grad(self);
                     t.accumulate(x, dx);
                   });
}

Var concat_cols(Tape& tape, std::span<const Var> parts) {
  assert(!parts.empty());
  Eigen::Index cols = 0;
  bool needs = false;
  for (Var p : parts) {
    cols += tape.value(p).cols();
    needs = needs || tape.requires_grad(p);
  }
  Matrix out(tape.value(parts[0]).rows(), cols);
  Eigen::Index at = 0;
  for (Var p : parts) {
    out.middleCols(at, tape.value(p).cols()) = tape.value(p);
    at += tape.value(p).cols();
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return tape.push(std::move(out), needs, [inputs = std::move(inputs)](Tape& t, std::size_t self) {
    Eigen::Index offset = 0;
    for (Var p : inputs) {
      const Eigen::Index c = t.value(p).cols();
      if (t.requires_grad(p)) t.accumulate(p, t.grad(self).middleCols(offset, c));
      offset += c;
    }
  });
}

Var cross_entropy_rows(Tape& tape, Var logits, std::span<const int> targets) {
  const Matrix& z = tape.value(logits);
  assert(static_cast<std::size_t>(z.rows()) == targets.size());
  Matrix probs(z.rows(), z.cols());
  double loss = 0.0;
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    const double peak = z.row(r).maxCoeff();
    const double log_sum = std::log((z.row(r).array() - peak).exp().sum()) + peak;
    probs.row(r) = (z.row(r).array() - log_sum).exp().matrix();
    loss -= z(r, targets[static_cast<std::size_t>(r)]) - log_sum;
  }
  const double rows = static_cast<double>(z.rows());
  Matrix out(1, 1);
  out(0, 0) = loss / rows;
  std::vector<int> tgt(targets.begin(), targets.end());
  return tape.push(std::move(out), any_grad(tape, {logits}),
                   [logits, probs = std::move(probs), tgt = std::move(tgt), rows](
                       Tape& t, std::size_t self) {
                     Matrix d = probs;
                     for (std::size_t r = 0; r < tgt.size(); ++r) {
                       d(static_cast<Eigen::Index>(r), tgt[r]) -= 1.0;
                     }
                     t.accumulate(logits, d * (t.grad(self)(0, 0) / rows));
                   });
}

}  // namespace fsdd::ad
