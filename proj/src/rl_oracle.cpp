#include "tsctl/imitation.hpp"
#include "tsctl/rl.hpp"

namespace tsctl {

OracleTrajectory rl_oracle(std::shared_ptr<const ProcessedSeries> series, IndexRange range,
                           double gross_limit, const AlgoConfig& algo, std::int64_t steps,
                           std::uint64_t seed) {
  TrainSpec spec;
  spec.series = series;
  spec.range = range;
  spec.env.gross_limit = gross_limit;
  spec.env.observation = EnvConfig::Observation::lookahead;
  spec.algo = algo;
  const TrainedModel model = train(spec, steps, seed);

  OracleTrajectory out;
  out.begin = range.begin;
  PortfolioEnv env(series, range, spec.env);
  Vector obs = env.reset();
  while (true) {
    const Action a = model.net.greedy_action(obs);
    out.actions.emplace_back(a.begin(), a.end());
    StepOutcome step = env.step(a);
    if (step.done) break;
    obs = std::move(step.next_observation);
  }
  return out;
}

}  // namespace tsctl
