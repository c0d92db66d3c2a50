#include "omar/evaluate.hpp"

#include <cmath>

#include "omar/errors.hpp"

namespace omar::algo {

EvalStats evaluate_policy(const env::EnvConfig& env_cfg,
                          const std::vector<nn::MlpParams>& actors,
                          int episodes, std::uint64_t seed) {
  contract_check(static_cast<int>(actors.size()) == env_cfg.n_agents,
                 "evaluate_policy: one actor per agent required");
  contract_check(episodes >= 1, "evaluate_policy: episodes must be >= 1");
  for (const auto& a : actors)
    contract_check(a.spec.input_dim == env_cfg.obs_dim() &&
                       a.spec.output_dim == env_cfg.action_dim(),
                   "evaluate_policy: actor spec does not match environment");

  EvalStats stats;
  stats.episode_returns.reserve(static_cast<std::size_t>(episodes));
  auto [state, obs] = env::reset(env_cfg, seed);
  for (int ep = 0; ep < episodes; ++ep) {
    if (ep > 0) obs = env::reset_next(env_cfg, state);
    double ret = 0.0;
    bool done = false;
    while (!done) {
      std::vector<Eigen::VectorXd> actions(static_cast<std::size_t>(env_cfg.n_agents));
      for (int i = 0; i < env_cfg.n_agents; ++i)
        actions[static_cast<std::size_t>(i)] =
            nn::mlp_forward(actors[static_cast<std::size_t>(i)],
                            obs[static_cast<std::size_t>(i)]);
      const auto res = env::step(env_cfg, state, actions);
      ret += res.rewards.mean();
      obs = res.observations;
      done = res.done;
    }
    stats.episode_returns.push_back(ret);
  }
  double sum = 0.0;
  for (double r : stats.episode_returns) sum += r;
  stats.mean = sum / static_cast<double>(episodes);
  double sq = 0.0;
  for (double r : stats.episode_returns) sq += (r - stats.mean) * (r - stats.mean);
  stats.stddev = episodes > 1 ? std::sqrt(sq / static_cast<double>(episodes - 1)) : 0.0;
  return stats;
}

}  // namespace omar::algo
