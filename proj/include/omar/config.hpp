#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "omar/dataset.hpp"
#include "omar/env.hpp"
#include "omar/learner.hpp"

namespace omar::cfg {

// Knobs for the online behavior-policy run that backs dataset generation.
struct OnlineSection {
  std::int64_t steps = 100000;
  int update_every = 1;
  double lr = 0.01;
  double explore_noise = 0.1;
  std::int64_t eval_interval = 1000;
  int batch_size = 256;
  std::vector<int> hidden_dims = {64, 64};
};

struct DatasetSection {
  data::QualityTier tier = data::QualityTier::kMediumReplay;
  std::int64_t size = 100000;
  // May contain "{tier}" and "{n}" placeholders, substituted with the tier
  // name and the agent count.
  std::string path;
  std::uint64_t gen_seed = 0;
  double rollout_noise = 0.1;  // action noise for rollout-based tiers
  OnlineSection online;
};

struct RunConfig {
  env::EnvConfig env;
  DatasetSection dataset;
  algo::TrainConfig train;  // train.sampler mirrors the sampler section
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};
  std::string output_dir;
  int workers = 1;

  std::string dataset_path() const;  // placeholders resolved
};

// Strict parser: unknown keys anywhere are rejected. When train.tau is
// omitted it defaults by dataset tier (random/medium-replay 0.5, medium 0.7,
// expert 0.9).
RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::string& path);

// Full round-trip serialization of the resolved configuration.
std::string resolved_config_json(const RunConfig& cfg);

double tier_default_tau(data::QualityTier tier);

}  // namespace omar::cfg
