#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "omar/env.hpp"
#include "omar/nn.hpp"
#include "omar/rng.hpp"

namespace omar::data {

enum class QualityTier { kRandom, kMedium, kMediumReplay, kExpert };

std::string tier_name(QualityTier t);
QualityTier tier_from_name(const std::string& name);

// One joint experience record across all agents.
struct Transition {
  std::vector<Eigen::VectorXd> obs;       // per agent
  std::vector<Eigen::VectorXd> act;       // per agent (the joint action)
  Eigen::VectorXd rew;                    // per agent
  std::vector<Eigen::VectorXd> next_obs;  // per agent
  bool done = false;                      // time-limit expiry only
};

struct DatasetMeta {
  env::EnvConfig env;
  QualityTier tier = QualityTier::kRandom;
  std::string behavior;  // free-form description of the generating policy
  std::uint64_t sample_count = 0;
  std::uint64_t seed = 0;
  // Mean episode return of the episodes stored in the dataset (behavior
  // policy performance, used for improvement-over-behavior reporting).
  double behavior_return = 0.0;
  bool joint_actions = true;
};

// Columnar store: column t of every block is transition t. All agents of a
// transition share the same column index, so joint actions are available
// whenever joint_actions is set.
struct Dataset {
  DatasetMeta meta;
  std::vector<Eigen::MatrixXd> obs;       // [agent] obs_dim x T
  std::vector<Eigen::MatrixXd> act;       // [agent] act_dim x T
  std::vector<Eigen::VectorXd> rew;       // [agent] T
  std::vector<Eigen::MatrixXd> next_obs;  // [agent] obs_dim x T
  Eigen::VectorXd done;                   // T, 0/1

  std::int64_t size() const { return done.size(); }
  int n_agents() const { return static_cast<int>(obs.size()); }
  int obs_dim() const { return static_cast<int>(obs.at(0).rows()); }
  int act_dim() const { return static_cast<int>(act.at(0).rows()); }
  void validate() const;
};

struct ScoreTable {
  double s_random = 0.0;
  double s_expert = 0.0;
};

// 100 * (s - s_random) / (s_expert - s_random); unclamped affine map.
double normalized_score(double s, const ScoreTable& table);

// Deterministic actors plus exploration noise; the behavior policy used for
// the rollout-based tiers.
struct BehaviorPolicy {
  std::vector<nn::MlpParams> actors;  // one per agent
  double noise_std = 0.1;
};

// Insertion-ordered record of an online run's replay stream.
struct ReplayRecording {
  std::vector<Transition> stream;
  std::vector<double> episode_returns;   // per completed episode, in order
  std::int64_t medium_cross_transition = -1;  // stream index at the first
                                              // evaluation >= medium threshold
};

// Which inputs generate_dataset consumes per tier:
//   random        -> nothing (a fresh untrained policy is built from the seed)
//   medium/expert -> `policy` (checkpoint snapshot)
//   medium_replay -> `recording` (replay stream of an online run)
struct BehaviorSource {
  std::optional<BehaviorPolicy> policy;
  const ReplayRecording* recording = nullptr;
};

Dataset generate_dataset(const env::EnvConfig& env_cfg, QualityTier tier,
                         std::int64_t n_samples, std::uint64_t seed,
                         const BehaviorSource& behavior);

// Uniform sample without replacement; metadata updated.
Dataset subsample(const Dataset& d, double fraction, std::uint64_t seed);

// File format (little-endian):
//   magic "OMDS", u32 version = 1,
//   u32 n_pairs, n_pairs x (length-prefixed key, length-prefixed value),
//   per agent: blocks obs / act / rew / next_obs, then the shared done block;
//   each block is u32 tag ('O','A','R','N','D'), u64 value count, f64 values;
//   footer: u64 sample count (truncation check).
void save_dataset(const Dataset& d, const std::string& path);
Dataset load_dataset(const std::string& path);
std::string encode_dataset(const Dataset& d);
Dataset decode_dataset(const std::string& bytes);

}  // namespace omar::data
