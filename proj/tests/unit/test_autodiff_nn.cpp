#include "doctest.h"

#include <cmath>
#include <random>

#include "gradcheck.hpp"
#include "tsctl/errors.hpp"
#include "tsctl/nn.hpp"

using namespace tsctl;
using tsctl::testing::max_relative_error;
using tsctl::testing::random_matrix;

namespace {

/// Checks d(sum(w .* op(x)))/dx against central differences.
template <typename Op>
double primitive_error(const Matrix& x0, Op op, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ad::Tape probe;
  const Matrix weights = random_matrix(op(probe.constant(x0)).rows(),
                                       op(probe.constant(x0)).cols(), rng);
  auto build = [&](ad::Tape& tape, ad::Var x) {
    return ad::sum(ad::mul(op(x), tape.constant(weights)));
  };
  ad::Tape tape;
  ad::Var x = tape.variable(x0);
  tape.backward(build(tape, x));
  const Matrix g = x.grad();
  auto f = [&](const Vector& flat) {
    ad::Tape t;
    Matrix m = Eigen::Map<const Matrix>(flat.data(), x0.rows(), x0.cols());
    return build(t, t.variable(m)).value()(0, 0);
  };
  return max_relative_error(Eigen::Map<const Vector>(x0.data(), x0.size()), f,
                            Eigen::Map<const Vector>(g.data(), g.size()));
}

}  // namespace

TEST_CASE("autodiff primitives match finite differences") {
  std::mt19937_64 rng(3);
  const Matrix x = random_matrix(4, 6, rng);
  const Matrix w = random_matrix(6, 5, rng);
  const Matrix b = random_matrix(1, 5, rng);
  const Matrix other = random_matrix(4, 6, rng);
  const double tol = 1e-6;

  CHECK(primitive_error(x, [](ad::Var v) { return ad::tanh(v); }, 1) < tol);
  CHECK(primitive_error(x, [](ad::Var v) { return ad::exp(v); }, 2) < tol);
  CHECK(primitive_error(x, [](ad::Var v) { return ad::square(v); }, 3) < tol);
  CHECK(primitive_error(x, [](ad::Var v) { return ad::relu(v); }, 4) < tol);
  CHECK(primitive_error(x, [](ad::Var v) { return ad::log_softmax(v, 3); }, 5) < tol);
  CHECK(primitive_error(x, [](ad::Var v) { return ad::row_sum(v); }, 6) < tol);
  CHECK(primitive_error(x, [](ad::Var v) { return ad::scale(v, -2.5); }, 7) < tol);
  CHECK(primitive_error(x, [](ad::Var v) { return ad::mean(v); }, 8) < tol);
  CHECK(primitive_error(x, [&](ad::Var v) {
          return ad::affine(v, v.tape->constant(w), v.tape->constant(b));
        }, 9) < tol);
  CHECK(primitive_error(x, [&](ad::Var v) { return ad::matmul(v, v.tape->constant(w)); }, 10) <
        tol);
  CHECK(primitive_error(x, [&](ad::Var v) { return ad::mul(v, v.tape->constant(other)); }, 11) <
        tol);
  CHECK(primitive_error(x, [&](ad::Var v) { return ad::sub(v.tape->constant(other), v); }, 12) <
        tol);
  CHECK(primitive_error(x, [&](ad::Var v) { return ad::add(v, v.tape->constant(other)); }, 13) <
        tol);
  CHECK(primitive_error(x, [](ad::Var v) { return ad::clamp(v, -0.5, 0.5); }, 14) < tol);
  CHECK(primitive_error(x, [&](ad::Var v) { return ad::minimum(v, v.tape->constant(other)); },
                        15) < tol);
}

TEST_CASE("affine gradient reaches weights and bias") {
  std::mt19937_64 rng(5);
  const Matrix x = random_matrix(3, 4, rng);
  ad::Tape tape;
  auto w = tape.variable(random_matrix(4, 2, rng));
  auto b = tape.variable(random_matrix(1, 2, rng));
  tape.backward(ad::sum(ad::affine(tape.constant(x), w, b)));
  // d/dW sum(xW + b) = x^T 1, d/db = batch size.
  const Matrix expect_w = x.transpose() * Matrix::Ones(3, 2);
  CHECK((w.grad() - expect_w).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((b.grad().array() - 3.0).abs().maxCoeff() < 1e-12);
}

TEST_CASE("tape reuses a node feeding two consumers") {
  ad::Tape tape;
  auto x = tape.variable(Matrix::Constant(1, 1, 3.0));
  auto y = ad::add(ad::square(x), ad::scale(x, 2.0));
  tape.backward(y);
  CHECK(x.grad()(0, 0) == doctest::Approx(8.0));
}

TEST_CASE("network gradient matches finite differences for both activations") {
  for (Activation act : {Activation::tanh, Activation::relu}) {
    std::mt19937_64 rng(act == Activation::tanh ? 1 : 2);
    ParamSet p = tsctl::testing::random_params(5, {7, 6}, 4, rng);
    const Matrix x = random_matrix(9, 5, rng);
    const Matrix w = random_matrix(9, 4, rng);
    auto build = [&](ad::Tape& t, const std::vector<ad::Var>& v) {
      return ad::sum(ad::mul(mlp_forward(v, act, t.constant(x)), t.constant(w)));
    };
    auto [val, grads] = gradient(p, build);
    CHECK(val == doctest::Approx((mlp_forward(p, act, x).array() * w.array()).sum()));
    auto f = [&](const Vector& theta) {
      ParamSet q = p;
      q.unflatten(theta);
      return (mlp_forward(q, act, x).array() * w.array()).sum();
    };
    CHECK(max_relative_error(p.flatten(), f, grads.flatten()) < 1e-5);
  }
}

TEST_CASE("learner losses pass the gradient check") {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    for (const auto& c : tsctl::testing::check_all_losses(seed)) {
      INFO(c.name);
      CHECK(c.max_error <= 1e-4);
    }
  }
}

TEST_CASE("jvp matches finite differences of the forward pass") {
  std::mt19937_64 rng(8);
  ParamSet p = tsctl::testing::random_params(4, {6}, 3, rng);
  ParamSet dir = tsctl::testing::random_params(4, {6}, 3, rng);
  const Matrix x = random_matrix(5, 4, rng);
  auto [out, tangent] = mlp_jvp(p, Activation::tanh, x, dir);
  CHECK((out - mlp_forward(p, Activation::tanh, x)).cwiseAbs().maxCoeff() < 1e-14);
  const double h = 1e-6;
  ParamSet up = p, down = p;
  up.unflatten(p.flatten() + h * dir.flatten());
  down.unflatten(p.flatten() - h * dir.flatten());
  const Matrix numeric =
      (mlp_forward(up, Activation::tanh, x) - mlp_forward(down, Activation::tanh, x)) / (2 * h);
  CHECK((numeric - tangent).cwiseAbs().maxCoeff() < 1e-7);
}

TEST_CASE("param flatten round trip and shapes") {
  ParamSet p = init_mlp(5, {4, 3}, 6, 0.01, 9);
  REQUIRE(p.layers() == 3);
  CHECK(p.tensors[0].rows() == 5);
  CHECK(p.tensors[0].cols() == 4);
  CHECK(p.tensors[1].rows() == 1);
  CHECK(p.size() == 5 * 4 + 4 + 4 * 3 + 3 + 3 * 6 + 6);
  Vector flat = p.flatten();
  ParamSet q = p.zeros_like();
  CHECK(q.flatten().isZero());
  q.unflatten(flat);
  CHECK(q.flatten() == flat);
  CHECK_THROWS(q.unflatten(Vector::Zero(3)));
}

TEST_CASE("initialization is orthogonal, deterministic and scaled") {
  ParamSet a = init_mlp(8, {16, 16}, 6, 0.01, 42);
  ParamSet b = init_mlp(8, {16, 16}, 6, 0.01, 42);
  ParamSet c = init_mlp(8, {16, 16}, 6, 0.01, 43);
  CHECK(a.flatten() == b.flatten());
  CHECK(a.flatten() != c.flatten());
  // W0 is 8x16: its rows are orthogonal with norm sqrt(2).
  const Matrix gram = a.tensors[0] * a.tensors[0].transpose();
  CHECK((gram - 2.0 * Matrix::Identity(8, 8)).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(a.tensors[1].isZero());
  // Output layer 16x6: columns orthogonal with norm 0.01.
  const Matrix out_gram = a.tensors[4].transpose() * a.tensors[4];
  CHECK((out_gram - 1e-4 * Matrix::Identity(6, 6)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("mlp spec validation") {
  MlpSpec spec;
  spec.input_dim = 0;
  CHECK_THROWS_AS(spec.validate(), ConfigError);
  spec.input_dim = 4;
  spec.hidden = {};
  CHECK_THROWS_AS(spec.validate(), ConfigError);
  spec.hidden = {8};
  spec.n_assets = 0;
  CHECK_THROWS_AS(spec.validate(), ConfigError);
  spec.n_assets = 2;
  CHECK_NOTHROW(spec.validate());
  CHECK(spec.policy_output_dim() == 6);
  CHECK(init_policy(spec).tensors.back().cols() == 6);
  CHECK(init_value(spec).tensors.back().cols() == 1);
  CHECK_THROWS_AS(parse_activation("sigmoid"), ConfigError);
  CHECK(parse_activation("relu") == Activation::relu);
  CHECK(to_string(Activation::tanh) == "tanh");
}

TEST_CASE("policy distribution: entropy, mode, probabilities") {
  const Vector uniform = Vector::Zero(12);
  auto [lp, ent] = log_prob_entropy(uniform, {1, 0, -1, 0});
  CHECK(ent == doctest::Approx(4.0 * std::log(3.0)).epsilon(1e-12));
  CHECK(lp == doctest::Approx(-4.0 * std::log(3.0)).epsilon(1e-12));

  Vector logits(6);
  logits << 0.0, 1.0, 3.0, 2.0, 0.5, -1.0;
  CHECK(mode_action(logits) == Action{1, -1});
  Vector probs = action_probabilities(logits);
  CHECK(probs.head(3).sum() == doctest::Approx(1.0));
  CHECK(probs.tail(3).sum() == doctest::Approx(1.0));
  CHECK(probs[2] > probs[1]);
  // Ties go to the lower index.
  CHECK(mode_action(Vector::Zero(3)) == Action{-1});
  for (int c = 0; c < 3; ++c) CHECK(position_to_choice(choice_to_position(c)) == c);
}

TEST_CASE("sampling frequencies match probabilities") {
  Vector logits(6);
  logits << 0.2, -0.4, 1.0, -1.0, 0.3, 0.0;
  const Vector probs = action_probabilities(logits);
  std::mt19937_64 rng(17);
  const int n = 200000;
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(6);
  for (int i = 0; i < n; ++i) {
    auto s = sample_action(logits, rng);
    for (int a = 0; a < 2; ++a) counts[3 * a + position_to_choice(s.action[a])] += 1.0;
    if (i < 100) {
      CHECK(s.log_prob == doctest::Approx(log_prob_entropy(logits, s.action).first));
    }
  }
  for (int k = 0; k < 6; ++k) {
    const double p = probs[k];
    const double se = std::sqrt(p * (1 - p) / n);
    CHECK(std::abs(counts[k] / n - p) < 4.0 * se);
  }
}

TEST_CASE("adam first step moves each coordinate by lr against its gradient") {
  AdamState s;
  Vector theta = Vector::Zero(3);
  Vector g(3);
  g << 2.0, -0.5, 1e-3;
  adam_step(s, theta, g, 0.01);
  CHECK(theta[0] == doctest::Approx(-0.01).epsilon(1e-6));
  CHECK(theta[1] == doctest::Approx(0.01).epsilon(1e-6));
  CHECK(theta[2] == doctest::Approx(-0.01).epsilon(1e-4));
  CHECK(s.t == 1);
}

TEST_CASE("rmsprop with zero epsilon skips zero-gradient entries") {
  RmsPropState s;
  Vector theta = Vector::Ones(2);
  Vector g(2);
  g << 0.0, 4.0;
  rmsprop_step(s, theta, g, 0.1);
  CHECK(theta[0] == 1.0);
  // v = 0.01 * 16, step = 0.1 * 4 / 0.4 = 1.
  CHECK(theta[1] == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("global norm clipping") {
  Vector g(2);
  g << 3.0, 4.0;
  clip_global_norm(g, 1.0);
  CHECK(g.norm() == doctest::Approx(1.0));
  CHECK(g[0] / g[1] == doctest::Approx(0.75));
  Vector small(2);
  small << 0.1, 0.1;
  Vector copy = small;
  clip_global_norm(small, 1.0);
  CHECK(small == copy);
  clip_global_norm(g, 0.0);
  CHECK(g.norm() == doctest::Approx(1.0));
}

TEST_CASE("optimizer applies clipping before the update") {
  OptimizerConfig cfg;
  cfg.kind = OptimizerConfig::Kind::rmsprop;
  cfg.max_grad_clip = 0.5;
  Optimizer opt(cfg, 2);
  Vector theta = Vector::Zero(2);
  Vector g(2);
  g << 30.0, 40.0;
  opt.step(theta, g, 1.0);
  // RMSProp step is invariant to gradient scale; clipped direction kept.
  CHECK(theta[0] / theta[1] == doctest::Approx(1.0));
  CHECK(parse_optimizer_kind("adam") == OptimizerConfig::Kind::adam);
  CHECK_THROWS_AS(parse_optimizer_kind("sgd"), ConfigError);
}

TEST_CASE("check_finite names the offending network") {
  ParamSet p = init_mlp(2, {2}, 1, 1.0, 0);
  CHECK_NOTHROW(check_finite(p, "policy"));
  p.tensors[2](0, 0) = std::nan("");
  try {
    check_finite(p, "policy");
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("policy") != std::string::npos);
  }
}
