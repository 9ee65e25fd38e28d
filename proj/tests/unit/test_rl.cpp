#include "doctest.h"

#include <cmath>
#include <random>

#include "gae_oracle.hpp"
#include "gradcheck.hpp"
#include "tsctl/errors.hpp"
#include "tsctl/rl.hpp"

using namespace tsctl;

namespace {

std::shared_ptr<const ProcessedSeries> small_market(std::size_t n_assets = 2,
                                                    std::size_t length = 200) {
  SyntheticSpec s;
  s.n_assets = n_assets;
  s.length = length;
  s.noise_scale = 0.01;
  s.seed = 21;
  return std::make_shared<const ProcessedSeries>(generate_synthetic(s).first);
}

struct Fixture {
  std::shared_ptr<const ProcessedSeries> series = small_market();
  EnvConfig env;
  AlgoConfig algo;
  ActorCritic net;

  Fixture() {
    env.state_lag = 5;
    algo.steps_per_update = 64;
    algo.hidden = {16, 16};
    MlpSpec ms;
    ms.input_dim = observation_dim(*series, env);
    ms.hidden = algo.hidden;
    ms.n_assets = series->n_assets();
    ms.seed = 4;
    net = ActorCritic::create(ms);
  }

  RolloutBuffer rollout(std::size_t steps, std::uint64_t seed) const {
    PortfolioEnv e(series, {0, series->rows()}, env);
    Vector obs = e.reset();
    std::mt19937_64 rng(seed);
    RolloutBuffer b = collect_rollout(e, obs, net, steps, rng);
    compute_gae(b, algo.gamma, algo.gae_lambda, true);
    return b;
  }
};

}  // namespace

TEST_CASE("GAE two-step hand case") {
  RolloutBuffer b;
  b.resize(2, 1);
  b.rewards << 1.0, 0.0;
  b.values << 0.5, 0.5;
  b.bootstrap_value = 0.5;
  compute_gae(b, 0.9, 0.8, false);
  // delta = [0.95, -0.05], A0 = 0.95 + 0.72 * -0.05.
  CHECK(b.advantages[0] == doctest::Approx(0.914).epsilon(1e-14));
  CHECK(b.advantages[1] == doctest::Approx(-0.05).epsilon(1e-14));
  CHECK(b.returns[0] == doctest::Approx(1.414).epsilon(1e-14));

  // Same buffer ending an episode: no bootstrap.
  b.dones[1] = 1;
  b.bootstrap_value = 0.0;
  compute_gae(b, 0.9, 0.8, false);
  CHECK(b.advantages[1] == doctest::Approx(-0.5).epsilon(1e-14));
  CHECK(b.advantages[0] == doctest::Approx(0.95 + 0.72 * -0.5).epsilon(1e-14));
}

TEST_CASE("GAE recursion equals the brute-force sum") {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(0.5, 1.0);
  for (int k = 0; k < 100; ++k) {
    RolloutBuffer b = tsctl::testing::random_buffer(64, rng, 0.08);
    const double gamma = u(rng), lambda = u(rng);
    const Vector expect = tsctl::testing::brute_force_gae(b, gamma, lambda);
    compute_gae(b, gamma, lambda, false);
    CHECK((b.advantages - expect).cwiseAbs().maxCoeff() <= 1e-10);
    CHECK((b.returns - (expect + b.values)).cwiseAbs().maxCoeff() <= 1e-10);
  }
}

TEST_CASE("GAE normalization") {
  std::mt19937_64 rng(3);
  RolloutBuffer b = tsctl::testing::random_buffer(50, rng);
  compute_gae(b, 0.95, 0.9, true);
  const double mean = b.advantages.mean();
  const double var = (b.advantages.array() - mean).square().mean();
  CHECK(std::abs(mean) < 1e-12);
  CHECK(var == doctest::Approx(1.0).epsilon(1e-12));

  RolloutBuffer flat;
  flat.resize(3, 1);
  flat.rewards.setZero();
  flat.values.setZero();
  compute_gae(flat, 0.9, 0.9, true);
  CHECK(flat.advantages.isZero());
}

TEST_CASE("rollout bookkeeping") {
  Fixture f;
  PortfolioEnv e(f.series, {0, 40}, f.env);
  Vector obs = e.reset();
  std::mt19937_64 rng(1);
  // Episode length is 35; 80 steps cross two resets.
  RolloutBuffer b = collect_rollout(e, obs, f.net, 80, rng);
  CHECK(b.size() == 80);
  CHECK(b.dones[34] == 1);
  CHECK(b.dones[69] == 1);
  CHECK(b.dones[33] == 0);
  for (std::size_t t = 0; t < b.size(); ++t) {
    const Vector o = b.observations.row(static_cast<Eigen::Index>(t)).transpose();
    CHECK(b.log_probs[static_cast<Eigen::Index>(t)] ==
          doctest::Approx(log_prob_entropy(f.net.logits(o), b.actions[t]).first));
    CHECK(b.values[static_cast<Eigen::Index>(t)] == doctest::Approx(f.net.state_value(o)));
  }
  CHECK(b.bootstrap_value == doctest::Approx(f.net.state_value(obs)));
  CHECK_THROWS_AS(LossBatch::from_buffer(b, {0}), UsageError);
}

TEST_CASE("loss batch one-hot mask") {
  Fixture f;
  RolloutBuffer b = f.rollout(10, 2);
  LossBatch batch = LossBatch::from_buffer(b, {3, 7});
  CHECK(batch.action_mask.rows() == 2);
  CHECK(batch.action_mask.cols() == 6);
  for (Eigen::Index r = 0; r < 2; ++r) {
    CHECK(batch.action_mask.row(r).sum() == 2.0);
  }
  const Action& a = b.actions[7];
  CHECK(batch.action_mask(1, 3 + position_to_choice(a[1])) == 1.0);
  CHECK(batch.advantages(0, 0) == b.advantages[3]);
}

TEST_CASE("PPO with unbounded clipping and one minibatch equals A2C") {
  Fixture f;
  RolloutBuffer b = f.rollout(64, 5);
  AlgoConfig cfg = f.algo;
  cfg.clip_eps = std::numeric_limits<double>::infinity();
  cfg.epochs = 1;
  cfg.partition_factor = 1;
  cfg.lr = 3e-3;
  cfg.entropy_coef = 0.01;

  ActorCritic a = f.net, p = f.net;
  LearnerState sa(a, cfg, 1), sp(p, cfg, 1);
  a2c_update(a, b, cfg, sa);
  ppo_update(p, b, cfg, sp);
  CHECK((a.policy.flatten() - p.policy.flatten()).cwiseAbs().maxCoeff() <= 1e-10);
  CHECK((a.value.flatten() - p.value.flatten()).cwiseAbs().maxCoeff() <= 1e-10);
  CHECK((a.policy.flatten() - f.net.policy.flatten()).norm() > 0.0);
}

TEST_CASE("conjugate gradient solves a small SPD system") {
  std::mt19937_64 rng(8);
  const Matrix m = tsctl::testing::random_matrix(5, 5, rng);
  const Matrix a = m * m.transpose() + 0.5 * Matrix::Identity(5, 5);
  const Vector b = tsctl::testing::random_matrix(5, 1, rng);
  auto res = conjugate_gradient([&](const Vector& v) -> Vector { return a * v; }, b, 15);
  CHECK(res.iterations <= 15);
  CHECK((a * res.x - b).norm() <= 1e-8);
  CHECK((res.x - a.ldlt().solve(b)).norm() <= 1e-8);
}

TEST_CASE("Fisher-vector product equals the Hessian of KL at the current policy") {
  std::mt19937_64 rng(31);
  ParamSet p = tsctl::testing::random_params(4, {6}, 6, rng, 0.5);
  const Matrix obs = tsctl::testing::random_matrix(7, 4, rng);
  const Vector v = tsctl::testing::random_matrix(static_cast<Eigen::Index>(p.size()), 1, rng);
  const Matrix old = tsctl::testing::log_softmax3(mlp_forward(p, Activation::tanh, obs));

  auto kl_grad = [&](const Vector& theta) {
    ParamSet q = p;
    q.unflatten(theta);
    return gradient(q, [&](ad::Tape& t, const std::vector<ad::Var>& vars) {
             return losses::mean_kl(
                 old, ad::log_softmax(mlp_forward(vars, Activation::tanh, t.constant(obs)), 3));
           }).second.flatten();
  };
  const double h = 1e-5;
  const Vector theta = p.flatten();
  const Vector numeric = (kl_grad(theta + h * v) - kl_grad(theta - h * v)) / (2 * h);
  const Vector fvp = fisher_vector_product(p, Activation::tanh, obs, v);
  CHECK((fvp - numeric).norm() / numeric.norm() < 1e-6);
  // Symmetric positive semi-definite.
  const Vector w = tsctl::testing::random_matrix(v.size(), 1, rng);
  CHECK(w.dot(fisher_vector_product(p, Activation::tanh, obs, v)) ==
        doctest::Approx(v.dot(fisher_vector_product(p, Activation::tanh, obs, w))));
  CHECK(v.dot(fvp) >= 0.0);
}

TEST_CASE("TRPO step respects the trust region") {
  Fixture f;
  f.algo.algorithm = Algorithm::trpo;
  f.algo.lr = 1e-3;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    RolloutBuffer b = f.rollout(64, seed);
    ActorCritic net = f.net;
    LearnerState st(net, f.algo, seed);
    trpo_update(net, b, f.algo, st);
    const Matrix old = tsctl::testing::log_softmax3(
        mlp_forward(f.net.policy, f.net.activation, b.observations));
    const Matrix now = tsctl::testing::log_softmax3(
        mlp_forward(net.policy, net.activation, b.observations));
    const double kl = (old.array().exp() * (old - now).array()).sum() / old.rows();
    CHECK(kl <= 1.5 * f.algo.target_kl);
    if (st.last_step_accepted) {
      CHECK(kl == doctest::Approx(st.last_kl));
      CHECK(kl > 0.0);
    } else {
      CHECK(net.policy.flatten() == f.net.policy.flatten());
    }
    CHECK(net.value.flatten() != f.net.value.flatten());
  }
}

TEST_CASE("TRPO leaves the policy alone when the surrogate gradient vanishes") {
  Fixture f;
  f.algo.algorithm = Algorithm::trpo;
  RolloutBuffer b = f.rollout(32, 9);
  b.advantages.setZero();
  ActorCritic net = f.net;
  LearnerState st(net, f.algo, 0);
  trpo_update(net, b, f.algo, st);
  CHECK(net.policy.flatten() == f.net.policy.flatten());
  CHECK_FALSE(st.last_step_accepted);
}

TEST_CASE("zero learning rate leaves A2C and PPO weights unchanged") {
  Fixture f;
  f.algo.lr = 0.0;
  RolloutBuffer b = f.rollout(32, 1);
  for (Algorithm algo : {Algorithm::a2c, Algorithm::ppo}) {
    f.algo.algorithm = algo;
    ActorCritic net = f.net;
    LearnerState st(net, f.algo, 0);
    update(net, b, f.algo, st);
    CHECK(net.policy.flatten() == f.net.policy.flatten());
  }
}

TEST_CASE("training is deterministic and counts steps") {
  Fixture f;
  TrainSpec spec;
  spec.series = f.series;
  spec.env = f.env;
  spec.algo = f.algo;
  for (Algorithm algo : {Algorithm::a2c, Algorithm::ppo, Algorithm::trpo}) {
    spec.algo.algorithm = algo;
    spec.algo.epochs = 2;
    auto a = train(spec, 150, 11);
    auto b = train(spec, 150, 11);
    auto c = train(spec, 150, 12);
    CHECK(a.steps_trained == 150);
    CHECK(a.net.policy.flatten() == b.net.policy.flatten());
    CHECK(a.net.value.flatten() == b.net.value.flatten());
    CHECK(a.net.policy.flatten() != c.net.policy.flatten());
  }
  auto zero = train(spec, 0, 11);
  CHECK(zero.steps_trained == 0);
  MlpSpec ms;
  ms.input_dim = observation_dim(*f.series, f.env);
  ms.hidden = spec.algo.hidden;
  ms.n_assets = 2;
  ms.seed = derive_seed(11, 1);
  CHECK(zero.net.policy.flatten() == ActorCritic::create(ms).policy.flatten());
  CHECK_THROWS_AS(train(spec, -1, 0), DomainError);
}

TEST_CASE("curriculum training runs in both modes") {
  Fixture f;
  TrainSpec spec;
  spec.series = f.series;
  spec.env = f.env;
  spec.algo = f.algo;
  for (auto mode : {CurriculumSchedule::Mode::staged, CurriculumSchedule::Mode::positional}) {
    CurriculumSchedule cs;
    cs.mode = mode;
    cs.stages = 3;
    spec.curriculum = cs;
    auto m = train(spec, 200, 3);
    CHECK(m.steps_trained == 200);
    CHECK(m.net.policy.flatten().allFinite());
  }
}

TEST_CASE("greedy evaluation") {
  Fixture f;
  PortfolioEnv env(f.series, {100, 150}, f.env);
  auto res = run_greedy(f.net, env);
  CHECK(res.log_returns.size() == 45);
  double sum = 0.0;
  for (double x : res.log_returns) sum += x;
  CHECK(res.cumulative_return_pct == doctest::Approx(std::expm1(sum) * 100.0));
}

TEST_CASE("config validation and profiles") {
  AlgoConfig c;
  CHECK_NOTHROW(c.validate());
  c.gamma = 1.5;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = AlgoConfig{};
  c.partition_factor = c.steps_per_update + 1;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK_THROWS_AS(parse_algorithm("dqn"), ConfigError);
  CHECK(to_string(parse_algorithm("trpo")) == "trpo");

  auto ds1 = load_profile("ds1", Algorithm::ppo);
  auto ds2 = load_profile("ds2", Algorithm::ppo);
  CHECK(ds1.env.gross_limit == 1.0);
  CHECK(ds2.env.gross_limit == 2.0);
  CHECK_NOTHROW(ds1.algo.validate());
  CHECK_NOTHROW(load_profile("ds2", Algorithm::a2c).algo.validate());
  CHECK_NOTHROW(load_profile("ds1", Algorithm::trpo).algo.validate());
  CHECK_THROWS_AS(load_profile("ds3", Algorithm::ppo), ConfigError);
}

TEST_CASE("seed derivation") {
  CHECK(derive_seed(1, 2) == derive_seed(1, 2));
  CHECK(derive_seed(1, 2) != derive_seed(1, 3));
  CHECK(derive_seed(1, 2) != derive_seed(2, 2));
}
