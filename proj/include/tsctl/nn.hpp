#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "tsctl/autodiff.hpp"
#include "tsctl/env.hpp"

namespace tsctl {

using Matrix = Eigen::MatrixXd;

/// Number of discrete choices per asset: short, flat, long.
inline constexpr int kChoices = 3;

enum class Activation { tanh, relu };

/// Unknown names are rejected here, before any network is built.
Activation parse_activation(const std::string& name);
std::string to_string(Activation act);

struct MlpSpec {
  std::size_t input_dim = 0;
  std::vector<std::size_t> hidden{64, 64};
  Activation activation = Activation::tanh;
  std::size_t n_assets = 1;
  std::uint64_t seed = 0;

  std::size_t policy_output_dim() const { return kChoices * n_assets; }
  void validate() const;
};

/// Weights and biases of an MLP in layer order: W0 (in x h0), b0 (1 x h0),
/// W1, b1, ... Weights map rows (batch) to rows.
struct ParamSet {
  std::vector<Matrix> tensors;

  std::size_t layers() const { return tensors.size() / 2; }
  std::size_t size() const;
  Vector flatten() const;
  /// Overwrites the tensors in place from `flat`; sizes must match.
  void unflatten(const Vector& flat);
  ParamSet zeros_like() const;
};

/// Orthogonal initialization: gain sqrt(2) on hidden layers, `output_gain`
/// on the final layer, zero biases. Deterministic under `seed`.
ParamSet init_mlp(std::size_t input_dim, const std::vector<std::size_t>& hidden,
                  std::size_t output_dim, double output_gain, std::uint64_t seed);

/// Policy head: 3 logits per asset, output gain 0.01.
ParamSet init_policy(const MlpSpec& spec);
/// Value head: 1 output, output gain 1.
ParamSet init_value(const MlpSpec& spec);

/// Plain forward pass: rows of `x` are samples.
Matrix mlp_forward(const ParamSet& params, Activation act, const Matrix& x);
Vector forward_policy(const ParamSet& params, Activation act, const Vector& obs);
double forward_value(const ParamSet& params, Activation act, const Vector& obs);

/// Forward-mode pass: returns (outputs, directional derivative of the
/// outputs along `tangent`), where `tangent` is shaped like `params`.
std::pair<Matrix, Matrix> mlp_jvp(const ParamSet& params, Activation act, const Matrix& x,
                                  const ParamSet& tangent);

/// Same pass recorded on a tape. `params` are the tape handles of the
/// tensors in ParamSet order.
ad::Var mlp_forward(const std::vector<ad::Var>& params, Activation act, ad::Var x);
std::vector<ad::Var> record_params(ad::Tape& tape, const ParamSet& params);
ParamSet collect_grads(const std::vector<ad::Var>& params);

/// Gradient of a scalar loss built on a fresh tape from the parameter
/// handles. Returns (loss value, gradient aligned with `params`).
template <typename LossFn>
std::pair<double, ParamSet> gradient(const ParamSet& params, LossFn&& loss_fn) {
  ad::Tape tape;
  auto vars = record_params(tape, params);
  ad::Var loss = loss_fn(tape, vars);
  tape.backward(loss);
  return {loss.value()(0, 0), collect_grads(vars)};
}

// Factorized categorical policy: per asset, logits over {-1, 0, 1}.

int choice_to_position(int choice);
int position_to_choice(int position);

struct SampledAction {
  Action action;
  double log_prob = 0.0;
};

SampledAction sample_action(const Vector& logits, std::mt19937_64& rng);
/// Per-asset argmax (ties go to the lower choice index).
Action mode_action(const Vector& logits);
/// Joint log-probability and entropy (sums over assets).
std::pair<double, double> log_prob_entropy(const Vector& logits, const Action& action);
/// Per-asset probabilities, row-major (asset, choice).
Vector action_probabilities(const Vector& logits);

// Optimizers operate on flattened parameter vectors.

struct AdamState {
  Vector m;
  Vector v;
  std::int64_t t = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct RmsPropState {
  Vector v;
  double decay = 0.99;
  double eps = 0.0;
};

void adam_step(AdamState& state, Vector& params, const Vector& grads, double lr);
/// theta -= lr * g / (sqrt(v) + eps). Entries with a zero denominator are
/// left unchanged, which matters for eps = 0.
void rmsprop_step(RmsPropState& state, Vector& params, const Vector& grads, double lr);
/// Rescales `grads` so its L2 norm is at most `max_norm` (no-op if <= 0).
void clip_global_norm(Vector& grads, double max_norm);
/// Throws NumericError naming the first tensor that holds a NaN/Inf.
void check_finite(const ParamSet& grads, const std::string& net_name);

struct OptimizerConfig {
  enum class Kind { adam, rmsprop };
  Kind kind = Kind::adam;
  double max_grad_clip = 0.0;
  double rmsprop_eps = 0.0;
};

OptimizerConfig::Kind parse_optimizer_kind(const std::string& name);
std::string to_string(OptimizerConfig::Kind kind);

class Optimizer {
 public:
  Optimizer() = default;
  Optimizer(OptimizerConfig cfg, std::size_t n_params);

  /// Clips (if configured) and applies one update.
  void step(Vector& params, Vector grads, double lr);
  const OptimizerConfig& config() const { return cfg_; }

 private:
  OptimizerConfig cfg_;
  AdamState adam_;
  RmsPropState rms_;
};

}  // namespace tsctl
