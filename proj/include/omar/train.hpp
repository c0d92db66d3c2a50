#pragma once

#include <cstdint>
#include <vector>

#include "omar/dataset.hpp"
#include "omar/evaluate.hpp"
#include "omar/learner.hpp"

namespace omar::algo {

struct TrainMetricsRow {
  std::int64_t step = 0;
  double critic_loss = 0;   // mean twin loss over the interval
  double cql_penalty = 0;   // conservative penalty term (without alpha)
  double actor_loss = 0;
  double rect_dist = 0;     // mean ||pi(o) - a_hat||^2
  double cand_improve = 0;  // mean Q(o, a_hat) - Q(o, pi(o)), >= 0
  double eval_mean = 0;
  double eval_std = 0;
};

struct TrainResult {
  std::vector<AgentLearner> learners;
  std::vector<TrainMetricsRow> metrics;
  double ms_per_update = 0.0;
  double total_seconds = 0.0;
};

// Offline training: per step and agent, sample a minibatch, regress both
// critics on the conservative loss, rectify/update the actor, then Polyak-
// update all targets. Bit-reproducible for a fixed (dataset, config, seed).
TrainResult train_run(const data::Dataset& dataset, const TrainConfig& cfg,
                      std::uint64_t seed);

// FIFO replay over joint transitions with preallocated columnar storage.
class ReplayBuffer {
 public:
  ReplayBuffer(const env::EnvConfig& env_cfg, std::int64_t capacity);

  void add(const data::Transition& t);
  std::int64_t size() const { return size_; }
  std::int64_t inserted() const { return inserted_; }

  Batch gather(const std::vector<std::int64_t>& indices, int agent,
               CriticMode mode) const;

 private:
  data::Dataset store_;
  std::int64_t capacity_ = 0;
  std::int64_t size_ = 0;
  std::int64_t next_ = 0;
  std::int64_t inserted_ = 0;
};

struct EvalPoint {
  std::int64_t step = 0;
  double mean_return = 0.0;
};

struct OnlineRunResult {
  std::vector<nn::MlpParams> init_actors;    // untrained snapshot (random tier)
  std::vector<nn::MlpParams> medium_actors;  // empty if never reached
  std::vector<nn::MlpParams> expert_actors;  // final policy
  std::vector<EvalPoint> eval_trace;
  data::ReplayRecording recording;  // filled when record_replay
  double s_random = 0.0;
  double s_medium = 0.0;
  double s_expert = 0.0;
  std::int64_t medium_snapshot_step = -1;

  data::ScoreTable score_table() const { return {s_random, s_expert}; }
  bool has_medium() const { return medium_snapshot_step >= 0; }
};

// Online twin-critic training (decentralized or centralized critics) used to
// manufacture behavior policies. Evaluates every cfg.eval_interval env steps;
// snapshots actors at each evaluation. After the run:
//   - the medium snapshot is the first evaluation whose progress
//     (return - s_random) / (s_expert - s_random) lies in [0.4, 0.6], falling
//     back to the first evaluation at or above 0.4;
//   - the replay recording's medium crossing is the first evaluation at or
//     above 0.5 progress.
// cfg.total_steps counts environment steps; cfg.actor_mode must be kOnline.
OnlineRunResult online_train_run(const env::EnvConfig& env_cfg,
                                 const TrainConfig& cfg, std::uint64_t seed,
                                 bool record_replay);

}  // namespace omar::algo
