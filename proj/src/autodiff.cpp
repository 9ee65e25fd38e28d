#include "tsctl/autodiff.hpp"

#include <cmath>

#include "tsctl/errors.hpp"

namespace tsctl::ad {

const Matrix& Var::value() const { return tape->value(id); }
const Matrix& Var::grad() const { return tape->grad(id); }

Var Tape::constant(Matrix value) {
  nodes_.push_back({std::move(value), {}, nullptr, false});
  return {this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::variable(Matrix value) {
  nodes_.push_back({std::move(value), {}, nullptr, true});
  return {this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::push(Matrix value, std::initializer_list<Var> inputs, Backward backward) {
  bool needs = false;
  for (const auto& in : inputs) {
    if (in.tape != this) throw UsageError("autodiff: operands recorded on different tapes");
    needs = needs || nodes_[in.id].needs_grad;
  }
  nodes_.push_back({std::move(value), {}, needs ? std::move(backward) : nullptr, needs});
  return {this, static_cast<int>(nodes_.size()) - 1};
}

void Tape::accumulate(int id, const Matrix& delta) {
  auto& node = nodes_[id];
  if (!node.needs_grad) return;
  if (node.grad.size() == 0) {
    node.grad = delta;
  } else {
    node.grad += delta;
  }
}

void Tape::backward(Var output) {
  if (output.tape != this) throw UsageError("autodiff: output belongs to another tape");
  if (nodes_[output.id].value.size() != 1) throw UsageError("autodiff: backward needs a scalar");
  for (auto& n : nodes_) n.grad.resize(0, 0);
  for (auto& n : nodes_) {
    if (n.needs_grad) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
  }
  if (!nodes_[output.id].needs_grad) return;
  nodes_[output.id].grad(0, 0) = 1.0;
  for (int i = output.id; i >= 0; --i) {
    auto& n = nodes_[i];
    if (n.backward) n.backward(*this, i);
  }
}

namespace {

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw UsageError(std::string("autodiff: shape mismatch in ") + op);
  }
}

}  // namespace

Var affine(Var x, Var w, Var b) {
  if (x.cols() != w.rows() || b.rows() != 1 || b.cols() != w.cols()) {
    throw UsageError("autodiff: shape mismatch in affine");
  }
  Matrix out = x.value() * w.value();
  out.rowwise() += b.value().row(0);
  return x.tape->push(std::move(out), {x, w, b}, [x, w, b](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    if (t.needs_grad(x.id)) t.accumulate(x.id, g * t.value(w.id).transpose());
    if (t.needs_grad(w.id)) t.accumulate(w.id, t.value(x.id).transpose() * g);
    if (t.needs_grad(b.id)) t.accumulate(b.id, g.colwise().sum());
  });
}

Var matmul(Var a, Var b) {
  if (a.cols() != b.rows()) throw UsageError("autodiff: shape mismatch in matmul");
  return a.tape->push(a.value() * b.value(), {a, b}, [a, b](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    if (t.needs_grad(a.id)) t.accumulate(a.id, g * t.value(b.id).transpose());
    if (t.needs_grad(b.id)) t.accumulate(b.id, t.value(a.id).transpose() * g);
  });
}

Var tanh(Var x) {
  Matrix out = x.value().array().tanh().matrix();
  return x.tape->push(std::move(out), {x}, [x](Tape& t, int self) {
    const auto& y = t.value(self).array();
    t.accumulate(x.id, (t.grad(self).array() * (1.0 - y * y)).matrix());
  });
}

Var relu(Var x) {
  Matrix out = x.value().cwiseMax(0.0);
  return x.tape->push(std::move(out), {x}, [x](Tape& t, int self) {
    Matrix mask = (t.value(x.id).array() > 0.0).cast<double>().matrix();
    t.accumulate(x.id, t.grad(self).cwiseProduct(mask));
  });
}

Var exp(Var x) {
  Matrix out = x.value().array().exp().matrix();
  return x.tape->push(std::move(out), {x}, [x](Tape& t, int self) {
    t.accumulate(x.id, t.grad(self).cwiseProduct(t.value(self)));
  });
}

Var square(Var x) {
  Matrix out = x.value().array().square().matrix();
  return x.tape->push(std::move(out), {x}, [x](Tape& t, int self) {
    t.accumulate(x.id, 2.0 * t.grad(self).cwiseProduct(t.value(x.id)));
  });
}

Var log_softmax(Var x, int group) {
  if (group < 1 || x.cols() % group != 0) {
    throw UsageError("autodiff: log_softmax group does not divide the column count");
  }
  const Matrix& in = x.value();
  Matrix out(in.rows(), in.cols());
  for (Eigen::Index g = 0; g < in.cols(); g += group) {
    auto block = in.middleCols(g, group);
    Eigen::VectorXd row_max = block.rowwise().maxCoeff();
    Matrix shifted = block.colwise() - row_max;
    Eigen::VectorXd lse = shifted.array().exp().rowwise().sum().log().matrix();
    out.middleCols(g, group) = shifted.colwise() - lse;
  }
  return x.tape->push(std::move(out), {x}, [x, group](Tape& t, int self) {
    const Matrix& y = t.value(self);
    const Matrix& g = t.grad(self);
    Matrix dx(y.rows(), y.cols());
    for (Eigen::Index c = 0; c < y.cols(); c += group) {
      auto gy = g.middleCols(c, group);
      Matrix p = y.middleCols(c, group).array().exp().matrix();
      Eigen::VectorXd gsum = gy.rowwise().sum();
      dx.middleCols(c, group) = gy - (p.array().colwise() * gsum.array()).matrix();
    }
    t.accumulate(x.id, dx);
  });
}

Var add(Var a, Var b) {
  require_same_shape(a, b, "add");
  return a.tape->push(a.value() + b.value(), {a, b}, [a, b](Tape& t, int self) {
    t.accumulate(a.id, t.grad(self));
    t.accumulate(b.id, t.grad(self));
  });
}

Var sub(Var a, Var b) {
  require_same_shape(a, b, "sub");
  return a.tape->push(a.value() - b.value(), {a, b}, [a, b](Tape& t, int self) {
    t.accumulate(a.id, t.grad(self));
    if (t.needs_grad(b.id)) t.accumulate(b.id, -t.grad(self));
  });
}

Var mul(Var a, Var b) {
  require_same_shape(a, b, "mul");
  return a.tape->push(a.value().cwiseProduct(b.value()), {a, b}, [a, b](Tape& t, int self) {
    if (t.needs_grad(a.id)) t.accumulate(a.id, t.grad(self).cwiseProduct(t.value(b.id)));
    if (t.needs_grad(b.id)) t.accumulate(b.id, t.grad(self).cwiseProduct(t.value(a.id)));
  });
}

Var scale(Var x, double factor) {
  return x.tape->push(x.value() * factor, {x}, [x, factor](Tape& t, int self) {
    t.accumulate(x.id, t.grad(self) * factor);
  });
}

Var minimum(Var a, Var b) {
  require_same_shape(a, b, "minimum");
  return a.tape->push(a.value().cwiseMin(b.value()), {a, b}, [a, b](Tape& t, int self) {
    // Ties route the gradient to the first operand.
    Matrix take_a = (t.value(a.id).array() <= t.value(b.id).array()).cast<double>().matrix();
    const Matrix& g = t.grad(self);
    if (t.needs_grad(a.id)) t.accumulate(a.id, g.cwiseProduct(take_a));
    if (t.needs_grad(b.id)) {
      t.accumulate(b.id, (g.array() * (1.0 - take_a.array())).matrix());
    }
  });
}

Var clamp(Var x, double lo, double hi) {
  Matrix out = x.value().cwiseMax(lo).cwiseMin(hi);
  return x.tape->push(std::move(out), {x}, [x, lo, hi](Tape& t, int self) {
    const auto& v = t.value(x.id).array();
    Matrix inside = ((v >= lo) && (v <= hi)).cast<double>().matrix();
    t.accumulate(x.id, t.grad(self).cwiseProduct(inside));
  });
}

Var row_sum(Var x) {
  Matrix out = x.value().rowwise().sum();
  return x.tape->push(std::move(out), {x}, [x](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    t.accumulate(x.id, g.replicate(1, t.value(x.id).cols()));
  });
}

Var sum(Var x) {
  Matrix out(1, 1);
  out(0, 0) = x.value().sum();
  return x.tape->push(std::move(out), {x}, [x](Tape& t, int self) {
    const auto& v = t.value(x.id);
    t.accumulate(x.id, Matrix::Constant(v.rows(), v.cols(), t.grad(self)(0, 0)));
  });
}

Var mean(Var x) {
  const double n = static_cast<double>(x.value().size());
  if (n == 0) throw UsageError("autodiff: mean of an empty matrix");
  Matrix out(1, 1);
  out(0, 0) = x.value().sum() / n;
  return x.tape->push(std::move(out), {x}, [x, n](Tape& t, int self) {
    const auto& v = t.value(x.id);
    t.accumulate(x.id, Matrix::Constant(v.rows(), v.cols(), t.grad(self)(0, 0) / n));
  });
}

}  // namespace tsctl::ad
