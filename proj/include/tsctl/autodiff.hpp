#pragma once

#include <functional>
#include <vector>

#include <Eigen/Dense>

namespace tsctl::ad {

using Matrix = Eigen::MatrixXd;

class Tape;

/// Handle to a node on a Tape. Cheap to copy; valid while the tape lives.
struct Var {
  Tape* tape = nullptr;
  int id = -1;

  const Matrix& value() const;
  const Matrix& grad() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
};

/// Records matrix-valued operations and replays them backwards.
///
/// Every node holds a dense matrix; batched losses keep the batch on the
/// row axis. Gradients only flow into nodes that depend on a `variable`.
class Tape {
 public:
  Var constant(Matrix value);
  Var variable(Matrix value);

  /// Seeds d(output)/d(output) = 1 for a 1x1 output and accumulates the
  /// gradient of every node reachable from it.
  void backward(Var output);

  const Matrix& value(int id) const { return nodes_[id].value; }
  const Matrix& grad(int id) const { return nodes_[id].grad; }
  std::size_t size() const { return nodes_.size(); }

  // Used by the op implementations.
  using Backward = std::function<void(Tape&, int self)>;
  Var push(Matrix value, std::initializer_list<Var> inputs, Backward backward);
  bool needs_grad(int id) const { return nodes_[id].needs_grad; }
  void accumulate(int id, const Matrix& delta);

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    Backward backward;
    bool needs_grad = false;
  };
  std::vector<Node> nodes_;
};

// Supported primitives. Shapes: x is (batch x k) unless noted.

/// x * w + 1 * b with w (k x m) and b (1 x m).
Var affine(Var x, Var w, Var b);
Var matmul(Var a, Var b);
Var tanh(Var x);
Var relu(Var x);
Var exp(Var x);
Var square(Var x);
/// Row-wise log-softmax over consecutive column groups of size `group`.
Var log_softmax(Var x, int group);
Var add(Var a, Var b);
Var sub(Var a, Var b);
/// Elementwise product.
Var mul(Var a, Var b);
Var scale(Var x, double factor);
Var minimum(Var a, Var b);
/// Elementwise clamp to [lo, hi]; zero gradient outside the interval.
Var clamp(Var x, double lo, double hi);
/// (batch x k) -> (batch x 1).
Var row_sum(Var x);
/// -> 1 x 1.
Var sum(Var x);
Var mean(Var x);

}  // namespace tsctl::ad
