#pragma once

#include <cstdint>
#include <vector>

#include "omar/env.hpp"
#include "omar/nn.hpp"

namespace omar::algo {

struct EvalStats {
  double mean = 0.0;
  double stddev = 0.0;  // over episodes
  std::vector<double> episode_returns;
};

// Deterministic-policy episodes (no exploration noise). The episode return
// is the per-step reward averaged over agents, summed over the episode; in
// cooperative variants every agent holds the same reward so this is the
// shared return.
EvalStats evaluate_policy(const env::EnvConfig& env_cfg,
                          const std::vector<nn::MlpParams>& actors,
                          int episodes, std::uint64_t seed);

}  // namespace omar::algo
