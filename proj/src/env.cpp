#include "omar/env.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "omar/errors.hpp"

namespace omar::env {

namespace {

// 2-D point dynamics constants (velocity damping per tick and force gain).
constexpr double kDamping = 0.25;
constexpr double kAccelGain = 3.0;

Eigen::MatrixXd draw_positions(const EnvConfig& config, Rng& rng) {
  Eigen::MatrixXd p(config.space_dim(), config.n_agents);
  for (Eigen::Index j = 0; j < p.cols(); ++j)
    for (Eigen::Index i = 0; i < p.rows(); ++i)
      p(i, j) = rng.uniform(-config.world_halfwidth, config.world_halfwidth);
  return p;
}

std::vector<Eigen::VectorXd> observe_all(const EnvConfig& config,
                                         const EnvState& state) {
  std::vector<Eigen::VectorXd> obs;
  obs.reserve(static_cast<std::size_t>(config.n_agents));
  for (int i = 0; i < config.n_agents; ++i) obs.push_back(observe(config, state, i));
  return obs;
}

}  // namespace

std::string variant_name(EnvVariant v) {
  switch (v) {
    case EnvVariant::kSpread1dCoop:
      return "spread1d_coop";
    case EnvVariant::kSpread1dIndependent:
      return "spread1d_independent";
    case EnvVariant::kCoopNav2d:
      return "coopnav2d";
  }
  throw ContractError("unknown env variant");
}

EnvVariant variant_from_name(const std::string& name) {
  if (name == "spread1d_coop") return EnvVariant::kSpread1dCoop;
  if (name == "spread1d_independent") return EnvVariant::kSpread1dIndependent;
  if (name == "coopnav2d") return EnvVariant::kCoopNav2d;
  throw ConfigError("unknown env variant: " + name);
}

int EnvConfig::obs_dim() const {
  const int d = space_dim();
  const int own = d + (variant == EnvVariant::kCoopNav2d ? d : 0);
  return own + d * n_agents + d * (n_agents - 1);
}

void EnvConfig::validate() const {
  contract_check(n_agents >= 1, "EnvConfig: n_agents must be >= 1");
  contract_check(episode_len >= 1, "EnvConfig: episode_len must be >= 1");
  contract_check(collision_radius > 0.0, "EnvConfig: collision_radius must be > 0");
  contract_check(world_halfwidth > 0.0, "EnvConfig: world_halfwidth must be > 0");
  contract_check(max_speed > 0.0 && dt > 0.0, "EnvConfig: max_speed and dt must be > 0");
}

std::pair<EnvState, std::vector<Eigen::VectorXd>> reset(const EnvConfig& config,
                                                        std::uint64_t seed) {
  config.validate();
  EnvState state;
  state.rng = Rng::stream(seed, rng_tag::kEnvReset);
  state.agent_pos = draw_positions(config, state.rng);
  state.landmark_pos = draw_positions(config, state.rng);
  state.agent_vel = Eigen::MatrixXd::Zero(config.space_dim(), config.n_agents);
  state.timestep = 0;
  return {state, observe_all(config, state)};
}

std::vector<Eigen::VectorXd> reset_next(const EnvConfig& config, EnvState& state) {
  state.agent_pos = draw_positions(config, state.rng);
  state.landmark_pos = draw_positions(config, state.rng);
  state.agent_vel.setZero();
  state.timestep = 0;
  return observe_all(config, state);
}

Eigen::VectorXd compute_rewards(const EnvConfig& config, const EnvState& state) {
  const int n = config.n_agents;
  Eigen::VectorXd rewards(n);
  if (config.variant == EnvVariant::kSpread1dIndependent) {
    for (int i = 0; i < n; ++i)
      rewards(i) = -(state.agent_pos.col(i) - state.landmark_pos.col(i)).norm();
    return rewards;
  }
  double r = 0.0;
  for (int j = 0; j < n; ++j) {
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) {
      const double d = (state.agent_pos.col(i) - state.landmark_pos.col(j)).norm();
      if (d < best) best = d;
    }
    r -= best;
  }
  for (int i = 0; i < n; ++i)
    for (int k = i + 1; k < n; ++k)
      if ((state.agent_pos.col(i) - state.agent_pos.col(k)).norm() <
          config.collision_radius)
        r -= config.collision_penalty;
  rewards.setConstant(r);
  return rewards;
}

StepResult step(const EnvConfig& config, EnvState& state,
                const std::vector<Eigen::VectorXd>& actions) {
  contract_check(static_cast<int>(actions.size()) == config.n_agents,
                 "step: one action per agent required");
  contract_check(state.timestep < config.episode_len,
                 "step: episode already done");
  const int d = config.space_dim();
  for (const auto& a : actions)
    contract_check(a.size() == d, "step: action dimension mismatch");

  for (int i = 0; i < config.n_agents; ++i) {
    Eigen::VectorXd a = actions[static_cast<std::size_t>(i)];
    for (Eigen::Index c = 0; c < a.size(); ++c) {
      if (a(c) < -1.0 || a(c) > 1.0) {
        if (config.strict_actions)
          throw ContractError("step: action out of [-1,1] in strict mode");
        a(c) = std::clamp(a(c), -1.0, 1.0);
      }
    }
    if (config.variant == EnvVariant::kCoopNav2d) {
      Eigen::VectorXd v = (1.0 - kDamping) * state.agent_vel.col(i) +
                          kAccelGain * config.dt * a;
      const double speed = v.norm();
      if (speed > config.max_speed) v *= config.max_speed / speed;
      state.agent_vel.col(i) = v;
      state.agent_pos.col(i) += config.dt * v;
    } else {
      state.agent_pos.col(i) += config.dt * config.max_speed * a;
    }
    for (Eigen::Index c = 0; c < d; ++c)
      state.agent_pos(c, i) = std::clamp(state.agent_pos(c, i),
                                         -config.world_halfwidth,
                                         config.world_halfwidth);
  }
  state.timestep += 1;

  StepResult res;
  res.rewards = compute_rewards(config, state);
  res.observations = observe_all(config, state);
  res.done = state.timestep == config.episode_len;
  return res;
}

Eigen::VectorXd observe(const EnvConfig& config, const EnvState& state,
                        int agent) {
  contract_check(agent >= 0 && agent < config.n_agents, "observe: bad agent index");
  const int d = config.space_dim();
  Eigen::VectorXd obs(config.obs_dim());
  Eigen::Index at = 0;
  obs.segment(at, d) = state.agent_pos.col(agent);
  at += d;
  if (config.variant == EnvVariant::kCoopNav2d) {
    obs.segment(at, d) = state.agent_vel.col(agent);
    at += d;
  }
  for (int j = 0; j < config.n_agents; ++j) {
    obs.segment(at, d) = state.landmark_pos.col(j) - state.agent_pos.col(agent);
    at += d;
  }
  for (int k = 0; k < config.n_agents; ++k) {
    if (k == agent) continue;
    obs.segment(at, d) = state.agent_pos.col(k) - state.agent_pos.col(agent);
    at += d;
  }
  return obs;
}

}  // namespace omar::env
