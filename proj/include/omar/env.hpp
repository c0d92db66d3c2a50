#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "omar/rng.hpp"

namespace omar::env {

enum class EnvVariant { kSpread1dCoop, kSpread1dIndependent, kCoopNav2d };

std::string variant_name(EnvVariant v);
EnvVariant variant_from_name(const std::string& name);

struct EnvConfig {
  EnvVariant variant = EnvVariant::kSpread1dCoop;
  int n_agents = 2;  // also the number of landmarks
  int episode_len = 25;
  double world_halfwidth = 1.0;
  double collision_radius = 0.1;
  double collision_penalty = 1.0;
  double max_speed = 1.0;
  double dt = 0.1;
  bool strict_actions = false;  // error on out-of-range actions instead of clamping

  int space_dim() const { return variant == EnvVariant::kCoopNav2d ? 2 : 1; }
  int action_dim() const { return space_dim(); }
  // Observation layout: own position (and own velocity in 2-D), then all
  // landmark positions relative to self, then other agents' positions
  // relative to self, in agent-index order.
  int obs_dim() const;
  bool cooperative() const { return variant != EnvVariant::kSpread1dIndependent; }
  void validate() const;
  bool operator==(const EnvConfig&) const = default;
};

struct EnvState {
  Eigen::MatrixXd agent_pos;     // space_dim x n_agents
  Eigen::MatrixXd agent_vel;     // space_dim x n_agents (zero for 1-D variants)
  Eigen::MatrixXd landmark_pos;  // space_dim x n_agents
  int timestep = 0;
  Rng rng{0};  // reset randomization for follow-on episodes
};

struct StepResult {
  std::vector<Eigen::VectorXd> observations;  // one per agent
  Eigen::VectorXd rewards;                    // one per agent
  bool done = false;
};

// Fresh episode with positions drawn uniformly in the world box.
std::pair<EnvState, std::vector<Eigen::VectorXd>> reset(const EnvConfig& config,
                                                        std::uint64_t seed);

// Next episode in a rollout, drawn from the state's carried generator.
std::vector<Eigen::VectorXd> reset_next(const EnvConfig& config, EnvState& state);

// Advances one tick. Actions are per-agent vectors in [-1, 1]^d; out-of-range
// coordinates are clamped (or rejected when config.strict_actions).
StepResult step(const EnvConfig& config, EnvState& state,
                const std::vector<Eigen::VectorXd>& actions);

Eigen::VectorXd observe(const EnvConfig& config, const EnvState& state,
                        int agent);

// Cooperative reward: -(sum over landmarks of min agent distance)
//                     - collision_penalty * (number of colliding unordered pairs).
// Shared by every agent. The independent variant pays each agent
// -distance(agent_i, landmark_i) with no collision term.
Eigen::VectorXd compute_rewards(const EnvConfig& config, const EnvState& state);

}  // namespace omar::env
