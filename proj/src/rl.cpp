#include "tsctl/rl.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "tsctl/errors.hpp"
#include "tsctl/stats.hpp"

namespace tsctl {

Algorithm parse_algorithm(const std::string& name) {
  if (name == "a2c") return Algorithm::a2c;
  if (name == "ppo") return Algorithm::ppo;
  if (name == "trpo") return Algorithm::trpo;
  throw ConfigError("unknown algorithm '" + name + "' (expected a2c, ppo or trpo)");
}

std::string to_string(Algorithm algo) {
  switch (algo) {
    case Algorithm::a2c: return "a2c";
    case Algorithm::ppo: return "ppo";
    case Algorithm::trpo: return "trpo";
  }
  return "?";
}

void AlgoConfig::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError("algo." + what); };
  if (!(lr >= 0.0) || !std::isfinite(lr)) fail("lr must be finite and non-negative");
  if (steps_per_update < 1) fail("steps_per_update must be at least 1");
  if (!(gamma > 0.0 && gamma <= 1.0)) fail("gamma must lie in (0, 1]");
  if (!(gae_lambda > 0.0 && gae_lambda <= 1.0)) fail("gae_lambda must lie in (0, 1]");
  if (!(entropy_coef >= 0.0)) fail("entropy_coef must be non-negative");
  if (!(vf_coef >= 0.0)) fail("vf_coef must be non-negative");
  if (!(clip_eps > 0.0)) fail("clip_eps must be positive");
  if (epochs < 1) fail("epochs must be at least 1");
  if (partition_factor < 1 || partition_factor > steps_per_update) {
    fail("partition_factor must give minibatches of at least one step");
  }
  if (cg_max_steps < 1) fail("cg_max_steps must be at least 1");
  if (!(hessian_damping >= 0.0)) fail("hessian_damping must be non-negative");
  if (!(line_search_reduction > 0.0 && line_search_reduction < 1.0)) {
    fail("line_search_reduction must lie in (0, 1)");
  }
  if (line_search_max_iter < 1) fail("line_search_max_iter must be at least 1");
  if (critic_updates < 0) fail("critic_updates must be non-negative");
  if (!(target_kl > 0.0)) fail("target_kl must be positive");
  if (subsample_factor < 1) fail("subsample_factor must be at least 1");
  if (!(kl_slack >= 1.0)) fail("kl_slack must be at least 1");
  if (hidden.empty()) fail("hidden must name at least one layer");
  for (auto h : hidden) {
    if (h == 0) fail("hidden layer widths must be positive");
  }
}

Profile load_profile(const std::string& name, Algorithm algorithm) {
  Profile p;
  AlgoConfig& a = p.algo;
  a.algorithm = algorithm;
  if (name == "ds1") {
    a.lr = 1e-4;
    a.steps_per_update = 292;
    a.partition_factor = 4;
    a.epochs = 8;
    a.gamma = 0.956;
    a.gae_lambda = 0.94;
    a.clip_eps = 0.6;
    a.entropy_coef = 0.03;
    a.vf_coef = 4.6;
    p.env.state_lag = 10;
    p.env.gross_limit = 1.0;
  } else if (name == "ds2") {
    a.lr = 0.01;
    a.steps_per_update = 73;
    a.partition_factor = 2;
    a.epochs = 11;
    a.gamma = 0.908;
    a.gae_lambda = 0.94;
    a.clip_eps = 0.35;
    a.entropy_coef = 0.02;
    a.vf_coef = 0.5;
    p.env.state_lag = 45;
    p.env.gross_limit = 2.0;
  } else {
    throw ConfigError("unknown profile '" + name + "' (expected ds1 or ds2)");
  }
  a.cg_max_steps = 15;
  a.hessian_damping = 0.1;
  a.line_search_reduction = 0.8;
  a.line_search_max_iter = 10;
  a.critic_updates = 10;
  a.target_kl = 0.01;
  a.subsample_factor = 1;
  // A2C columns carry gradient clipping and an RMSProp epsilon; the
  // optimizer itself stays Adam unless opt.kind selects rmsprop.
  a.opt.kind = OptimizerConfig::Kind::adam;
  a.opt.rmsprop_eps = 0.0;
  a.opt.max_grad_clip = algorithm == Algorithm::a2c ? 0.6 : 0.0;
  return p;
}

ActorCritic ActorCritic::create(const MlpSpec& spec) {
  spec.validate();
  ActorCritic net;
  net.policy = init_policy(spec);
  net.value = init_value(spec);
  net.activation = spec.activation;
  net.input_dim = spec.input_dim;
  net.n_assets = spec.n_assets;
  return net;
}

void RolloutBuffer::resize(std::size_t steps, std::size_t obs_dim) {
  const auto n = static_cast<Eigen::Index>(steps);
  observations.resize(n, static_cast<Eigen::Index>(obs_dim));
  actions.assign(steps, {});
  rewards.resize(n);
  log_probs.resize(n);
  values.resize(n);
  dones.assign(steps, 0);
  advantages.resize(0);
  returns.resize(0);
  has_advantages = false;
  bootstrap_value = 0.0;
}

RolloutCollector::RolloutCollector(PortfolioEnv env) : env_(std::move(env)) { obs_ = env_.reset(); }

void RolloutCollector::replace_env(PortfolioEnv env) {
  env_ = std::move(env);
  obs_ = env_.reset();
}

RolloutBuffer RolloutCollector::collect(const ActorCritic& net, std::size_t steps,
                                        std::mt19937_64& rng) {
  return collect_rollout(env_, obs_, net, steps, rng);
}

RolloutBuffer collect_rollout(PortfolioEnv& env, Vector& obs, const ActorCritic& net,
                              std::size_t steps, std::mt19937_64& rng) {
  if (steps == 0) throw UsageError("rollout needs at least one step");
  if (static_cast<std::size_t>(obs.size()) != net.input_dim) {
    throw UsageError("observation size " + std::to_string(obs.size()) +
                     " differs from network input " + std::to_string(net.input_dim));
  }
  RolloutBuffer buf;
  buf.resize(steps, net.input_dim);
  for (std::size_t k = 0; k < steps; ++k) {
    const auto row = static_cast<Eigen::Index>(k);
    buf.observations.row(row) = obs.transpose();
    const Vector logits = net.logits(obs);
    auto sampled = sample_action(logits, rng);
    buf.values[row] = net.state_value(obs);
    StepOutcome out;
    try {
      out = env.step(sampled.action);
    } catch (const RuinError& e) {
      throw RuinError(std::string(e.what()) + " (rollout step " + std::to_string(k) +
                      ", series row " + std::to_string(env.time()) + ")");
    }
    buf.actions[k] = std::move(sampled.action);
    buf.log_probs[row] = sampled.log_prob;
    buf.rewards[row] = out.reward;
    buf.dones[k] = out.done ? 1 : 0;
    obs = out.done ? env.reset() : std::move(out.next_observation);
  }
  buf.bootstrap_value = buf.dones.back() ? 0.0 : net.state_value(obs);
  return buf;
}

void compute_gae(RolloutBuffer& buffer, double gamma, double lambda, bool normalize) {
  const auto n = static_cast<Eigen::Index>(buffer.size());
  buffer.advantages.resize(n);
  double last = 0.0;
  for (Eigen::Index t = n - 1; t >= 0; --t) {
    const double next_value = t == n - 1 ? buffer.bootstrap_value : buffer.values[t + 1];
    const double live = buffer.dones[static_cast<std::size_t>(t)] ? 0.0 : 1.0;
    const double delta = buffer.rewards[t] + gamma * next_value * live - buffer.values[t];
    last = delta + gamma * lambda * live * last;
    buffer.advantages[t] = last;
  }
  buffer.returns = buffer.advantages + buffer.values;
  if (normalize && n > 0) {
    const double mean = buffer.advantages.mean();
    const double std = std::sqrt((buffer.advantages.array() - mean).square().mean());
    buffer.advantages.array() -= mean;
    if (std > 0.0) buffer.advantages /= std;
  }
  buffer.has_advantages = true;
}

namespace {

/// Row-wise log-softmax over groups of kChoices columns.
Matrix log_softmax_plain(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    for (Eigen::Index g = 0; g < logits.cols(); g += kChoices) {
      const auto seg = logits.row(r).segment(g, kChoices);
      const double m = seg.maxCoeff();
      const double lse = m + std::log((seg.array() - m).exp().sum());
      out.row(r).segment(g, kChoices) = seg.array() - lse;
    }
  }
  return out;
}

Vector joint_flatten(const ActorCritic& net) {
  Vector p = net.policy.flatten();
  Vector v = net.value.flatten();
  Vector out(p.size() + v.size());
  out << p, v;
  return out;
}

void joint_unflatten(ActorCritic& net, const Vector& flat) {
  const auto np = static_cast<Eigen::Index>(net.policy.size());
  net.policy.unflatten(flat.head(np));
  net.value.unflatten(flat.tail(flat.size() - np));
}

std::vector<std::size_t> all_rows(std::size_t n) {
  std::vector<std::size_t> rows(n);
  std::iota(rows.begin(), rows.end(), 0);
  return rows;
}

/// Splits a shuffled index list into `parts` nearly equal chunks.
std::vector<std::vector<std::size_t>> partition(std::vector<std::size_t> rows, int parts,
                                                std::mt19937_64& rng) {
  std::shuffle(rows.begin(), rows.end(), rng);
  const std::size_t n = rows.size();
  const auto k = std::min<std::size_t>(static_cast<std::size_t>(parts), n);
  std::vector<std::vector<std::size_t>> out;
  std::size_t pos = 0;
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t len = n / k + (i < n % k ? 1 : 0);
    out.emplace_back(rows.begin() + static_cast<std::ptrdiff_t>(pos),
                     rows.begin() + static_cast<std::ptrdiff_t>(pos + len));
    pos += len;
  }
  return out;
}

}  // namespace

LossBatch LossBatch::from_buffer(const RolloutBuffer& buffer, const std::vector<std::size_t>& rows,
                                 const ActorCritic* behaviour) {
  if (!buffer.has_advantages) throw UsageError("compute_gae must run before building a loss batch");
  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto dim = buffer.observations.cols();
  const std::size_t n_assets = buffer.actions.empty() ? 0 : buffer.actions.front().size();
  LossBatch b;
  b.observations.resize(n, dim);
  b.action_mask = Matrix::Zero(n, static_cast<Eigen::Index>(kChoices * n_assets));
  b.advantages.resize(n, 1);
  b.returns.resize(n, 1);
  b.old_log_probs.resize(n, 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto r = static_cast<Eigen::Index>(rows[static_cast<std::size_t>(i)]);
    b.observations.row(i) = buffer.observations.row(r);
    const auto& a = buffer.actions[static_cast<std::size_t>(r)];
    for (std::size_t j = 0; j < a.size(); ++j) {
      b.action_mask(i, static_cast<Eigen::Index>(kChoices * j + position_to_choice(a[j]))) = 1.0;
    }
    b.advantages(i, 0) = buffer.advantages[r];
    b.returns(i, 0) = buffer.returns[r];
    b.old_log_probs(i, 0) = buffer.log_probs[r];
  }
  if (behaviour) {
    b.old_log_policy =
        log_softmax_plain(mlp_forward(behaviour->policy, behaviour->activation, b.observations));
  }
  return b;
}

namespace losses {

ad::Var action_log_probs(ad::Var log_policy, const Matrix& action_mask) {
  return ad::row_sum(ad::mul(log_policy, log_policy.tape->constant(action_mask)));
}

ad::Var mean_entropy(ad::Var log_policy) {
  const double n = static_cast<double>(log_policy.rows());
  return ad::scale(ad::sum(ad::mul(ad::exp(log_policy), log_policy)), -1.0 / n);
}

ad::Var policy_gradient(ad::Var log_probs, const Matrix& advantages) {
  return ad::scale(ad::mean(ad::mul(log_probs, log_probs.tape->constant(advantages))), -1.0);
}

ad::Var ppo_clip(ad::Var log_probs, const Matrix& old_log_probs, const Matrix& advantages,
                 double clip_eps) {
  ad::Tape& tape = *log_probs.tape;
  const ad::Var adv = tape.constant(advantages);
  const ad::Var ratio = ad::exp(ad::sub(log_probs, tape.constant(old_log_probs)));
  const ad::Var unclipped = ad::mul(ratio, adv);
  const ad::Var clipped = ad::mul(ad::clamp(ratio, 1.0 - clip_eps, 1.0 + clip_eps), adv);
  return ad::scale(ad::mean(ad::minimum(unclipped, clipped)), -1.0);
}

ad::Var value_mse(ad::Var values, const Matrix& returns) {
  return ad::mean(ad::square(ad::sub(values, values.tape->constant(returns))));
}

ad::Var mean_kl(const Matrix& old_log_policy, ad::Var log_policy) {
  ad::Tape& tape = *log_policy.tape;
  const double n = static_cast<double>(old_log_policy.rows());
  const Matrix old_p = old_log_policy.array().exp().matrix();
  const ad::Var diff = ad::sub(tape.constant(old_log_policy), log_policy);
  return ad::scale(ad::sum(ad::mul(tape.constant(old_p), diff)), 1.0 / n);
}

ad::Var surrogate(ad::Var log_probs, const Matrix& old_log_probs, const Matrix& advantages) {
  ad::Tape& tape = *log_probs.tape;
  const ad::Var ratio = ad::exp(ad::sub(log_probs, tape.constant(old_log_probs)));
  return ad::mean(ad::mul(ratio, tape.constant(advantages)));
}

}  // namespace losses

std::pair<double, Vector> actor_critic_loss_gradient(const ActorCritic& net,
                                                     const LossBatch& batch,
                                                     const AlgoConfig& cfg) {
  ad::Tape tape;
  auto pvars = record_params(tape, net.policy);
  auto vvars = record_params(tape, net.value);
  const ad::Var x = tape.constant(batch.observations);
  const ad::Var log_policy = ad::log_softmax(mlp_forward(pvars, net.activation, x), kChoices);
  const ad::Var logp = losses::action_log_probs(log_policy, batch.action_mask);
  const ad::Var pg = cfg.algorithm == Algorithm::a2c
                         ? losses::policy_gradient(logp, batch.advantages)
                         : losses::ppo_clip(logp, batch.old_log_probs, batch.advantages,
                                            cfg.clip_eps);
  const ad::Var vloss = losses::value_mse(mlp_forward(vvars, net.activation, x), batch.returns);
  const ad::Var ent = losses::mean_entropy(log_policy);
  const ad::Var loss =
      ad::sub(ad::add(pg, ad::scale(vloss, cfg.vf_coef)), ad::scale(ent, cfg.entropy_coef));
  const double value = loss.value()(0, 0);
  if (!std::isfinite(value)) throw NumericError("non-finite actor-critic loss");
  tape.backward(loss);
  const ParamSet pg_grads = collect_grads(pvars);
  const ParamSet v_grads = collect_grads(vvars);
  check_finite(pg_grads, "policy");
  check_finite(v_grads, "value");
  Vector gp = pg_grads.flatten();
  Vector gv = v_grads.flatten();
  Vector g(gp.size() + gv.size());
  g << gp, gv;
  return {value, g};
}

LearnerState::LearnerState(const ActorCritic& net, const AlgoConfig& cfg, std::uint64_t seed)
    : joint(cfg.opt, net.policy.size() + net.value.size()),
      critic(OptimizerConfig{OptimizerConfig::Kind::adam, cfg.opt.max_grad_clip, 0.0},
             net.value.size()),
      shuffle_rng(seed) {}

namespace {

void joint_step(ActorCritic& net, const LossBatch& batch, const AlgoConfig& cfg,
                LearnerState& state) {
  auto [loss, grad] = actor_critic_loss_gradient(net, batch, cfg);
  Vector flat = joint_flatten(net);
  state.joint.step(flat, std::move(grad), cfg.lr);
  joint_unflatten(net, flat);
  state.last_loss = loss;
}

}  // namespace

void a2c_update(ActorCritic& net, const RolloutBuffer& buffer, const AlgoConfig& cfg,
                LearnerState& state) {
  AlgoConfig a2c = cfg;
  a2c.algorithm = Algorithm::a2c;
  joint_step(net, LossBatch::from_buffer(buffer, all_rows(buffer.size())), a2c, state);
}

void ppo_update(ActorCritic& net, const RolloutBuffer& buffer, const AlgoConfig& cfg,
                LearnerState& state) {
  AlgoConfig ppo = cfg;
  ppo.algorithm = Algorithm::ppo;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (const auto& rows : partition(all_rows(buffer.size()), cfg.partition_factor,
                                      state.shuffle_rng)) {
      joint_step(net, LossBatch::from_buffer(buffer, rows), ppo, state);
    }
  }
}

Vector fisher_vector_product(const ParamSet& policy, Activation act, const Matrix& observations,
                             const Vector& direction) {
  ParamSet tangent = policy.zeros_like();
  tangent.unflatten(direction);
  const auto [z, dz] = mlp_jvp(policy, act, observations, tangent);
  const Matrix p = log_softmax_plain(z).array().exp().matrix();
  // u = M (J v): per-group softmax covariance applied to the logit tangent.
  Matrix u(z.rows(), z.cols());
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    for (Eigen::Index g = 0; g < z.cols(); g += kChoices) {
      const auto pg = p.row(r).segment(g, kChoices).array();
      const auto dg = dz.row(r).segment(g, kChoices).array();
      const double avg = (pg * dg).sum();
      u.row(r).segment(g, kChoices) = pg * (dg - avg);
    }
  }
  const double inv_n = 1.0 / static_cast<double>(observations.rows());
  auto [unused, grads] = gradient(policy, [&](ad::Tape& tape, const std::vector<ad::Var>& vars) {
    const ad::Var logits = mlp_forward(vars, act, tape.constant(observations));
    return ad::scale(ad::sum(ad::mul(logits, tape.constant(u))), inv_n);
  });
  (void)unused;
  return grads.flatten();
}

void trpo_update(ActorCritic& net, const RolloutBuffer& buffer, const AlgoConfig& cfg,
                 LearnerState& state) {
  const LossBatch batch = LossBatch::from_buffer(buffer, all_rows(buffer.size()), &net);
  const Activation act = net.activation;

  auto [surr_old, grads] = gradient(net.policy, [&](ad::Tape& tape,
                                                    const std::vector<ad::Var>& vars) {
    const ad::Var lp =
        ad::log_softmax(mlp_forward(vars, act, tape.constant(batch.observations)), kChoices);
    return losses::surrogate(losses::action_log_probs(lp, batch.action_mask),
                             batch.old_log_probs, batch.advantages);
  });
  check_finite(grads, "policy");
  const Vector g = grads.flatten();

  Matrix sub_obs = batch.observations;
  if (cfg.subsample_factor > 1) {
    const Eigen::Index n = batch.observations.rows();
    const Eigen::Index m = (n + cfg.subsample_factor - 1) / cfg.subsample_factor;
    sub_obs.resize(m, batch.observations.cols());
    for (Eigen::Index i = 0; i < m; ++i) sub_obs.row(i) = batch.observations.row(i * cfg.subsample_factor);
  }
  auto fvp = [&](const Vector& v) -> Vector {
    return fisher_vector_product(net.policy, act, sub_obs, v) + cfg.hessian_damping * v;
  };

  state.last_step_accepted = false;
  state.last_kl = 0.0;
  if (g.squaredNorm() > 0.0) {
    const CgResult cg = conjugate_gradient(fvp, g, cfg.cg_max_steps);
    if (!cg.x.allFinite()) throw NumericError("conjugate gradient produced a non-finite direction");
    const double xfx = cg.x.dot(fvp(cg.x));
    if (!std::isfinite(xfx)) throw NumericError("non-finite curvature along the TRPO direction");
    if (xfx > 0.0) {
      const Vector full_step = std::sqrt(2.0 * cfg.target_kl / xfx) * cg.x;
      const Vector theta0 = net.policy.flatten();
      double coef = 1.0;
      for (int it = 0; it < cfg.line_search_max_iter; ++it, coef *= cfg.line_search_reduction) {
        net.policy.unflatten(theta0 + coef * full_step);
        const Matrix lp = log_softmax_plain(mlp_forward(net.policy, act, batch.observations));
        const Matrix logp = (lp.array() * batch.action_mask.array()).rowwise().sum().matrix();
        const double surr = ((logp - batch.old_log_probs).array().exp() *
                             batch.advantages.array()).mean();
        const double kl = (batch.old_log_policy.array().exp() *
                           (batch.old_log_policy - lp).array()).sum() /
                          static_cast<double>(lp.rows());
        if (std::isfinite(surr) && std::isfinite(kl) && kl <= cfg.kl_slack * cfg.target_kl &&
            surr > surr_old) {
          state.last_step_accepted = true;
          state.last_kl = kl;
          state.last_loss = -surr;
          break;
        }
      }
      if (!state.last_step_accepted) net.policy.unflatten(theta0);
    }
  }

  // Critic regression.
  for (int k = 0; k < cfg.critic_updates; ++k) {
    for (const auto& rows : partition(all_rows(buffer.size()), cfg.partition_factor,
                                      state.shuffle_rng)) {
      Matrix obs(static_cast<Eigen::Index>(rows.size()), batch.observations.cols());
      Matrix ret(static_cast<Eigen::Index>(rows.size()), 1);
      for (std::size_t i = 0; i < rows.size(); ++i) {
        obs.row(static_cast<Eigen::Index>(i)) =
            batch.observations.row(static_cast<Eigen::Index>(rows[i]));
        ret(static_cast<Eigen::Index>(i), 0) = batch.returns(static_cast<Eigen::Index>(rows[i]), 0);
      }
      auto [loss, vg] = gradient(net.value, [&](ad::Tape& tape, const std::vector<ad::Var>& vars) {
        return losses::value_mse(mlp_forward(vars, act, tape.constant(obs)), ret);
      });
      if (!std::isfinite(loss)) throw NumericError("non-finite critic loss");
      check_finite(vg, "value");
      Vector flat = net.value.flatten();
      state.critic.step(flat, vg.flatten(), cfg.lr);
      net.value.unflatten(flat);
    }
  }
}

void update(ActorCritic& net, const RolloutBuffer& buffer, const AlgoConfig& cfg,
            LearnerState& state) {
  switch (cfg.algorithm) {
    case Algorithm::a2c: a2c_update(net, buffer, cfg, state); return;
    case Algorithm::ppo: ppo_update(net, buffer, cfg, state); return;
    case Algorithm::trpo: trpo_update(net, buffer, cfg, state); return;
  }
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

TrainedModel train(const TrainSpec& spec, std::int64_t total_steps, std::uint64_t seed) {
  if (!spec.series) throw UsageError("training needs a series");
  if (total_steps < 0) throw DomainError("total_steps must be non-negative");
  spec.algo.validate();
  spec.env.validate();
  const IndexRange range =
      spec.range.size() == 0 ? IndexRange{0, spec.series->rows()} : spec.range;

  std::shared_ptr<const ProcessedSeries> base = spec.series;
  std::vector<Stage> stages{{1, 0}};
  const std::int64_t spu = spec.algo.steps_per_update;
  const std::int64_t n_updates = (total_steps + spu - 1) / spu;
  if (spec.curriculum) {
    spec.curriculum->validate();
    if (spec.curriculum->mode == CurriculumSchedule::Mode::positional) {
      base = std::make_shared<const ProcessedSeries>(
          inverse_smooth_positional(spec.series->slice(range), spec.curriculum->stages));
    }
  }
  const IndexRange env_range =
      base == spec.series ? range : IndexRange{0, base->rows()};
  if (spec.curriculum && spec.curriculum->mode == CurriculumSchedule::Mode::staged &&
      n_updates > 0) {
    stages = stage_schedule(spec.curriculum->stages, n_updates);
  } else {
    stages.front().budget = n_updates;
  }

  MlpSpec ms;
  ms.input_dim = observation_dim(*base, spec.env);
  ms.hidden = spec.algo.hidden;
  ms.activation = spec.algo.activation;
  ms.n_assets = base->n_assets();
  ms.seed = derive_seed(seed, 1);

  TrainedModel model;
  model.net = ActorCritic::create(ms);
  model.algo = spec.algo;
  model.env = spec.env;
  model.seed = seed;
  if (total_steps == 0) return model;

  LearnerState state(model.net, spec.algo, derive_seed(seed, 2));
  std::mt19937_64 rng(derive_seed(seed, 3));
  std::optional<RolloutCollector> collector;
  std::int64_t remaining = total_steps;
  for (const Stage& stage : stages) {
    std::shared_ptr<const ProcessedSeries> frame = base;
    if (stage.window > 1) {
      auto sub = std::make_shared<ProcessedSeries>(
          apply_smoothing(base->slice(env_range), SmoothingMethod::ema(stage.window)));
      frame = sub;
    }
    const IndexRange r = frame == base ? env_range : IndexRange{0, frame->rows()};
    PortfolioEnv env(frame, r, spec.env, spec.reward);
    if (collector) {
      collector->replace_env(std::move(env));
    } else {
      collector.emplace(std::move(env));
    }
    for (std::int64_t u = 0; u < stage.budget && remaining > 0; ++u) {
      const std::int64_t n = std::min(spu, remaining);
      RolloutBuffer buf = collector->collect(model.net, static_cast<std::size_t>(n), rng);
      compute_gae(buf, spec.algo.gamma, spec.algo.gae_lambda, spec.algo.normalize_advantages);
      update(model.net, buf, spec.algo, state);
      remaining -= n;
      model.steps_trained += n;
    }
  }
  return model;
}

EpisodeResult run_greedy(const ActorCritic& net, PortfolioEnv env) {
  EpisodeResult out;
  Vector obs = env.reset();
  out.log_returns.reserve(env.episode_length());
  while (true) {
    StepOutcome step = env.step(net.greedy_action(obs));
    out.log_returns.push_back(step.info.log_return);
    if (step.done) break;
    obs = std::move(step.next_observation);
  }
  out.cumulative_return_pct = cumulative_return(out.log_returns);
  return out;
}

}  // namespace tsctl
