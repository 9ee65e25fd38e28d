#pragma once

#include <cmath>
#include <random>

#include "tsctl/rl.hpp"

namespace tsctl::testing {

/// A_t = sum_k (gamma lambda)^k delta_{t+k}, stopping after the first step
/// that ends an episode. Computed term by term, no recursion.
inline Vector brute_force_gae(const RolloutBuffer& b, double gamma, double lambda) {
  const std::size_t n = b.size();
  auto delta = [&](std::size_t t) {
    const double next = t + 1 == n ? b.bootstrap_value : b.values[static_cast<Eigen::Index>(t + 1)];
    const double live = b.dones[t] ? 0.0 : 1.0;
    return b.rewards[static_cast<Eigen::Index>(t)] + gamma * next * live -
           b.values[static_cast<Eigen::Index>(t)];
  };
  Vector a(static_cast<Eigen::Index>(n));
  for (std::size_t t = 0; t < n; ++t) {
    double sum = 0.0;
    for (std::size_t k = 0; t + k < n; ++k) {
      sum += std::pow(gamma * lambda, static_cast<double>(k)) * delta(t + k);
      if (b.dones[t + k]) break;
    }
    a[static_cast<Eigen::Index>(t)] = sum;
  }
  return a;
}

/// Random rewards, values, done flags and bootstrap.
inline RolloutBuffer random_buffer(std::size_t steps, std::mt19937_64& rng, double done_prob = 0.1) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::bernoulli_distribution done(done_prob);
  RolloutBuffer b;
  b.resize(steps, 1);
  for (std::size_t t = 0; t < steps; ++t) {
    b.rewards[static_cast<Eigen::Index>(t)] = g(rng);
    b.values[static_cast<Eigen::Index>(t)] = g(rng);
    b.dones[t] = done(rng) ? 1 : 0;
    b.actions[t] = {0};
  }
  b.bootstrap_value = b.dones.back() ? 0.0 : g(rng);
  return b;
}

}  // namespace tsctl::testing
