#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "tsctl/autodiff.hpp"
#include "tsctl/env.hpp"
#include "tsctl/nn.hpp"
#include "tsctl/smoothing.hpp"

namespace tsctl {

enum class Algorithm { a2c, ppo, trpo };

Algorithm parse_algorithm(const std::string& name);
std::string to_string(Algorithm algo);

/// Every learner hyperparameter. Fields that do not apply to the selected
/// algorithm are ignored.
struct AlgoConfig {
  Algorithm algorithm = Algorithm::ppo;

  double lr = 1e-4;
  int steps_per_update = 292;
  double gamma = 0.956;
  double gae_lambda = 0.94;
  double entropy_coef = 0.0;
  double vf_coef = 0.5;
  bool normalize_advantages = true;

  // PPO
  double clip_eps = 0.2;
  int epochs = 10;
  int partition_factor = 1;

  // TRPO
  int cg_max_steps = 15;
  double hessian_damping = 0.1;
  double line_search_reduction = 0.8;
  int line_search_max_iter = 10;
  int critic_updates = 10;
  double target_kl = 0.01;
  int subsample_factor = 1;
  /// Accepted steps may reach kl_slack * target_kl.
  double kl_slack = 1.5;

  OptimizerConfig opt;
  std::vector<std::size_t> hidden{64, 64};
  Activation activation = Activation::tanh;

  void validate() const;
};

/// Tuned hyperparameter profiles: "ds1" (Macro-ETF style, gross limit 1)
/// and "ds2" (commodity-futures style, gross limit 2).
struct Profile {
  AlgoConfig algo;
  EnvConfig env;
};
Profile load_profile(const std::string& name, Algorithm algorithm);

/// Policy (3 logits per asset) and value networks.
struct ActorCritic {
  ParamSet policy;
  ParamSet value;
  Activation activation = Activation::tanh;
  std::size_t input_dim = 0;
  std::size_t n_assets = 0;

  static ActorCritic create(const MlpSpec& spec);

  Vector logits(const Vector& obs) const { return forward_policy(policy, activation, obs); }
  double state_value(const Vector& obs) const { return forward_value(value, activation, obs); }
  Action greedy_action(const Vector& obs) const { return mode_action(logits(obs)); }
};

struct RolloutBuffer {
  Matrix observations;  // steps x obs_dim
  std::vector<Action> actions;
  Vector rewards;
  Vector log_probs;
  Vector values;
  std::vector<std::uint8_t> dones;
  /// V(s_n) for the state after the last step, zero if that step ended
  /// an episode.
  double bootstrap_value = 0.0;
  Vector advantages;
  Vector returns;
  bool has_advantages = false;

  std::size_t size() const { return actions.size(); }
  void resize(std::size_t steps, std::size_t obs_dim);
};

/// Keeps an environment and its current observation between rollouts.
/// Episodes are reset automatically when they end.
class RolloutCollector {
 public:
  explicit RolloutCollector(PortfolioEnv env);

  RolloutBuffer collect(const ActorCritic& net, std::size_t steps, std::mt19937_64& rng);
  /// Swaps in a new environment (curriculum stage change) and resets it.
  void replace_env(PortfolioEnv env);
  const PortfolioEnv& env() const { return env_; }

 private:
  PortfolioEnv env_;
  Vector obs_;
};

RolloutBuffer collect_rollout(PortfolioEnv& env, Vector& obs, const ActorCritic& net,
                              std::size_t steps, std::mt19937_64& rng);

/// Backward GAE recursion. Returns are A + V before advantage
/// normalization; advantages are normalized to zero mean / unit
/// (population) std when `normalize` is set and the std is positive.
void compute_gae(RolloutBuffer& buffer, double gamma, double lambda, bool normalize = true);

/// Minibatch view used by the loss builders.
struct LossBatch {
  Matrix observations;
  Matrix action_mask;  // one-hot, steps x 3N
  Matrix advantages;   // steps x 1
  Matrix returns;      // steps x 1
  Matrix old_log_probs;  // steps x 1
  Matrix old_log_policy;  // steps x 3N, log-probabilities of the behaviour policy

  static LossBatch from_buffer(const RolloutBuffer& buffer, const std::vector<std::size_t>& rows,
                               const ActorCritic* behaviour = nullptr);
};

namespace losses {

/// log pi(a|s) per row, (steps x 1).
ad::Var action_log_probs(ad::Var log_policy, const Matrix& action_mask);
/// Mean per-row entropy of the factorized categorical.
ad::Var mean_entropy(ad::Var log_policy);
/// -mean(log pi * A)
ad::Var policy_gradient(ad::Var log_probs, const Matrix& advantages);
/// -mean(min(rho A, clip(rho, 1 - eps, 1 + eps) A)), rho = exp(logp - old)
ad::Var ppo_clip(ad::Var log_probs, const Matrix& old_log_probs, const Matrix& advantages,
                 double clip_eps);
/// mean((V - R)^2)
ad::Var value_mse(ad::Var values, const Matrix& returns);
/// mean over rows of KL(old || new) summed across assets.
ad::Var mean_kl(const Matrix& old_log_policy, ad::Var log_policy);
/// mean(exp(logp - old) * A), the TRPO surrogate (to be maximized).
ad::Var surrogate(ad::Var log_probs, const Matrix& old_log_probs, const Matrix& advantages);

}  // namespace losses

/// Loss value and joint gradient ([policy, value] flattened) of the A2C or
/// PPO objective on one batch.
std::pair<double, Vector> actor_critic_loss_gradient(const ActorCritic& net,
                                                     const LossBatch& batch,
                                                     const AlgoConfig& cfg);

/// Mutable optimizer state carried across updates of one training run.
struct LearnerState {
  Optimizer joint;  // A2C / PPO: policy and value together
  Optimizer critic;  // TRPO value network
  std::mt19937_64 shuffle_rng;

  // Diagnostics of the last update.
  double last_loss = 0.0;
  double last_kl = 0.0;
  bool last_step_accepted = false;

  LearnerState(const ActorCritic& net, const AlgoConfig& cfg, std::uint64_t seed);
};

void a2c_update(ActorCritic& net, const RolloutBuffer& buffer, const AlgoConfig& cfg,
                LearnerState& state);
void ppo_update(ActorCritic& net, const RolloutBuffer& buffer, const AlgoConfig& cfg,
                LearnerState& state);
void trpo_update(ActorCritic& net, const RolloutBuffer& buffer, const AlgoConfig& cfg,
                 LearnerState& state);
void update(ActorCritic& net, const RolloutBuffer& buffer, const AlgoConfig& cfg,
            LearnerState& state);

struct CgResult {
  Vector x;
  int iterations = 0;
  double residual_norm = 0.0;
};

/// Conjugate gradient on A x = b for symmetric positive definite A given
/// as a matrix-vector product.
template <typename MatVec>
CgResult conjugate_gradient(MatVec&& apply, const Vector& b, int max_steps,
                            double tolerance = 1e-10);

/// Fisher-vector product of the factorized categorical policy on
/// `observations`, averaged over rows: J^T M J v, where J is the Jacobian
/// of the logits and M the per-asset softmax covariance.
Vector fisher_vector_product(const ParamSet& policy, Activation act, const Matrix& observations,
                             const Vector& direction);

struct TrainSpec {
  /// The training frame; episodes run over `range` of it (empty range
  /// means the whole frame).
  std::shared_ptr<const ProcessedSeries> series;
  IndexRange range;
  EnvConfig env;
  RewardHook reward;
  AlgoConfig algo;
  std::optional<CurriculumSchedule> curriculum;
};

struct TrainedModel {
  ActorCritic net;
  AlgoConfig algo;
  EnvConfig env;
  std::uint64_t seed = 0;
  std::int64_t steps_trained = 0;
};

/// Collect -> GAE -> update until `total_steps` environment steps have been
/// taken. In staged curriculum mode the training frame is swapped for its
/// EMA-smoothed variant at each stage boundary. Deterministic in `seed`.
TrainedModel train(const TrainSpec& spec, std::int64_t total_steps, std::uint64_t seed);

struct EpisodeResult {
  std::vector<double> log_returns;
  double cumulative_return_pct = 0.0;
};

/// One greedy (mode-action) traversal of `env`.
EpisodeResult run_greedy(const ActorCritic& net, PortfolioEnv env);

/// Stream-splitting seed derivation (splitmix64).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

// Template definition.

template <typename MatVec>
CgResult conjugate_gradient(MatVec&& apply, const Vector& b, int max_steps, double tolerance) {
  CgResult out;
  out.x = Vector::Zero(b.size());
  Vector r = b;
  Vector p = r;
  double rr = r.squaredNorm();
  out.residual_norm = std::sqrt(rr);
  for (int k = 0; k < max_steps && out.residual_norm > tolerance; ++k) {
    const Vector ap = apply(p);
    const double pap = p.dot(ap);
    if (!(pap > 0.0) || !std::isfinite(pap)) break;
    const double alpha = rr / pap;
    out.x += alpha * p;
    r -= alpha * ap;
    const double rr_new = r.squaredNorm();
    out.iterations = k + 1;
    out.residual_norm = std::sqrt(rr_new);
    p = r + (rr_new / rr) * p;
    rr = rr_new;
  }
  return out;
}

}  // namespace tsctl
