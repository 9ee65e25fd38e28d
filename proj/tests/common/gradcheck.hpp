#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

#include "tsctl/nn.hpp"
#include "tsctl/rl.hpp"

namespace tsctl::testing {

/// Largest |analytic - numeric| / max(|analytic|, |numeric|, 1e-6) over all
/// coordinates, with central differences of step h.
inline double max_relative_error(const Vector& theta, const std::function<double(const Vector&)>& f,
                                 const Vector& analytic, double h = 1e-5) {
  double worst = 0.0;
  Vector x = theta;
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    x[i] = theta[i] + h;
    const double up = f(x);
    x[i] = theta[i] - h;
    const double down = f(x);
    x[i] = theta[i];
    const double numeric = (up - down) / (2.0 * h);
    const double denom = std::max({std::abs(numeric), std::abs(analytic[i]), 1e-6});
    worst = std::max(worst, std::abs(numeric - analytic[i]) / denom);
  }
  return worst;
}

/// Random dense weights so every unit is active and logits are not tiny.
inline ParamSet random_params(std::size_t in, const std::vector<std::size_t>& hidden,
                              std::size_t out, std::mt19937_64& rng, double scale = 0.6) {
  ParamSet p = init_mlp(in, hidden, out, 1.0, rng());
  std::normal_distribution<double> g(0.0, scale);
  for (auto& t : p.tensors) {
    for (Eigen::Index k = 0; k < t.size(); ++k) t.data()[k] = g(rng);
  }
  return p;
}

inline Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng,
                            double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  Matrix m(rows, cols);
  for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = g(rng);
  return m;
}

/// Random one-hot action mask with `n_assets` groups.
inline Matrix random_action_mask(Eigen::Index rows, std::size_t n_assets, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> pick(0, kChoices - 1);
  Matrix m = Matrix::Zero(rows, static_cast<Eigen::Index>(kChoices * n_assets));
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (std::size_t a = 0; a < n_assets; ++a) {
      m(r, static_cast<Eigen::Index>(kChoices * a + pick(rng))) = 1.0;
    }
  }
  return m;
}

/// Row-wise log-softmax over groups of three (plain, for building fixtures).
inline Matrix log_softmax3(const Matrix& z) {
  Matrix out(z.rows(), z.cols());
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    for (Eigen::Index g = 0; g < z.cols(); g += kChoices) {
      const auto seg = z.row(r).segment(g, kChoices);
      const double m = seg.maxCoeff();
      out.row(r).segment(g, kChoices) = seg.array() - (m + std::log((seg.array() - m).exp().sum()));
    }
  }
  return out;
}

struct LossCheck {
  std::string name;
  double max_error = 0.0;
};

/// Gradient fidelity of every learner loss on one random network and batch.
inline std::vector<LossCheck> check_all_losses(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const std::size_t in = 6, n_assets = 2;
  const std::vector<std::size_t> hidden{8, 8};
  const Activation act = Activation::tanh;
  const Eigen::Index rows = 12;

  ActorCritic net;
  net.policy = random_params(in, hidden, kChoices * n_assets, rng);
  net.value = random_params(in, hidden, 1, rng);
  net.activation = act;
  net.input_dim = in;
  net.n_assets = n_assets;

  const Matrix x = random_matrix(rows, static_cast<Eigen::Index>(in), rng);
  const Matrix mask = random_action_mask(rows, n_assets, rng);
  const Matrix adv = random_matrix(rows, 1, rng);
  const Matrix ret = random_matrix(rows, 1, rng);
  const Matrix cur_lp = (log_softmax3(mlp_forward(net.policy, act, x)).array() * mask.array())
                            .rowwise().sum().matrix();
  // Ratios kept away from the clip edges (eps = 0.2) so the loss is smooth
  // inside the finite-difference stencil.
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix old_lp(rows, 1);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const double choices[] = {0.55, 0.7, 0.95, 1.05, 1.35, 1.6};
    const double ratio = choices[static_cast<int>(u(rng) * 6)] * (1.0 + 0.02 * (u(rng) - 0.5));
    old_lp(r, 0) = cur_lp(r, 0) - std::log(ratio);
  }
  const ParamSet other = random_params(in, hidden, kChoices * n_assets, rng);
  const Matrix old_policy = log_softmax3(mlp_forward(other, act, x));

  using Builder = std::function<ad::Var(ad::Tape&, const std::vector<ad::Var>&)>;
  auto policy_loss = [&](const std::string& name, const Builder& build) {
    auto [value, grads] = gradient(net.policy, build);
    (void)value;
    auto f = [&](const Vector& theta) {
      ParamSet p = net.policy;
      p.unflatten(theta);
      ad::Tape tape;
      return build(tape, record_params(tape, p)).value()(0, 0);
    };
    return LossCheck{name, max_relative_error(net.policy.flatten(), f, grads.flatten())};
  };
  auto log_policy = [&](ad::Tape& tape, const std::vector<ad::Var>& vars) {
    return ad::log_softmax(mlp_forward(vars, act, tape.constant(x)), kChoices);
  };

  std::vector<LossCheck> out;
  out.push_back(policy_loss("policy_gradient", [&](ad::Tape& t, const std::vector<ad::Var>& v) {
    return losses::policy_gradient(losses::action_log_probs(log_policy(t, v), mask), adv);
  }));
  out.push_back(policy_loss("ppo_clip", [&](ad::Tape& t, const std::vector<ad::Var>& v) {
    return losses::ppo_clip(losses::action_log_probs(log_policy(t, v), mask), old_lp, adv, 0.2);
  }));
  out.push_back(policy_loss("entropy", [&](ad::Tape& t, const std::vector<ad::Var>& v) {
    return losses::mean_entropy(log_policy(t, v));
  }));
  out.push_back(policy_loss("kl", [&](ad::Tape& t, const std::vector<ad::Var>& v) {
    return losses::mean_kl(old_policy, log_policy(t, v));
  }));
  out.push_back(policy_loss("trpo_surrogate", [&](ad::Tape& t, const std::vector<ad::Var>& v) {
    return losses::surrogate(losses::action_log_probs(log_policy(t, v), mask), old_lp, adv);
  }));

  {
    auto build = [&](ad::Tape& t, const std::vector<ad::Var>& v) {
      return losses::value_mse(mlp_forward(v, act, t.constant(x)), ret);
    };
    auto [value, grads] = gradient(net.value, build);
    (void)value;
    auto f = [&](const Vector& theta) {
      ParamSet p = net.value;
      p.unflatten(theta);
      ad::Tape tape;
      return build(tape, record_params(tape, p)).value()(0, 0);
    };
    out.push_back({"value_mse", max_relative_error(net.value.flatten(), f, grads.flatten())});
  }

  // Combined A2C and PPO objectives over the joint parameter vector.
  LossBatch batch;
  batch.observations = x;
  batch.action_mask = mask;
  batch.advantages = adv;
  batch.returns = ret;
  batch.old_log_probs = old_lp;
  for (Algorithm algo : {Algorithm::a2c, Algorithm::ppo}) {
    AlgoConfig cfg;
    cfg.algorithm = algo;
    cfg.clip_eps = 0.2;
    cfg.entropy_coef = 0.03;
    cfg.vf_coef = 4.6;
    const auto [loss, grad] = actor_critic_loss_gradient(net, batch, cfg);
    (void)loss;
    const auto np = static_cast<Eigen::Index>(net.policy.size());
    Vector theta(grad.size());
    theta << net.policy.flatten(), net.value.flatten();
    auto f = [&](const Vector& th) {
      ActorCritic n2 = net;
      n2.policy.unflatten(th.head(np));
      n2.value.unflatten(th.tail(th.size() - np));
      return actor_critic_loss_gradient(n2, batch, cfg).first;
    };
    out.push_back({algo == Algorithm::a2c ? "a2c_total" : "ppo_total",
                   max_relative_error(theta, f, grad)});
  }
  return out;
}

}  // namespace tsctl::testing
