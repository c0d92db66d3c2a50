#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "omar/config.hpp"
#include "omar/dataset.hpp"
#include "omar/train.hpp"

namespace omar::harness {

// Resolved output directory: explicit override, then the config value, then
// $OMAR_OUT_ROOT/run, then ./omar_runs/run.
std::string resolve_output_dir(const cfg::RunConfig& rc,
                               const std::string& override_dir = "");

struct GenDataOutcome {
  std::map<data::QualityTier, std::string> dataset_files;
  std::string manifest_path;
  data::ScoreTable score_table{0.0, 0.0};
  bool has_score_table = false;
  double s_medium = 0.0;
};

// Manufactures the requested tiers. Tiers other than `random` run one online
// behavior-training pass (with replay recording when medium_replay is
// requested); the run's snapshots, scores and thresholds land in the
// manifest together with the dataset paths.
GenDataOutcome gen_data(const cfg::RunConfig& rc,
                        const std::vector<data::QualityTier>& tiers,
                        const std::string& out_override = "");

struct SeedRunOutcome {
  std::uint64_t seed = 0;
  std::string dir;
  double final_eval_mean = 0.0;
  double final_eval_std = 0.0;
  double ms_per_update = 0.0;
};

// One offline training run with its artifacts: resolved config, metrics CSV,
// checkpoints plus manifest, summary JSON.
SeedRunOutcome train_one_seed(const cfg::RunConfig& rc, std::uint64_t seed,
                              const data::Dataset& dataset,
                              const std::string& run_dir);

// All configured seeds, up to rc.workers in parallel.
std::vector<SeedRunOutcome> train_command(const cfg::RunConfig& rc,
                                          const std::string& out_override = "");

void write_checkpoints(const std::vector<algo::AgentLearner>& learners,
                       const env::EnvConfig& env_cfg, const std::string& dir);
std::pair<std::vector<nn::MlpParams>, env::EnvConfig> load_actor_checkpoints(
    const std::string& manifest_path);

struct EvalOptions {
  std::string manifest_path;
  int episodes = 10;
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};
  std::optional<data::ScoreTable> score_table;
  std::optional<double> behavior_return;
  std::string out_dir;
};

struct EvalOutcome {
  std::vector<double> per_seed_returns;
  double mean = 0.0;
  double stddev = 0.0;  // over seeds
  std::vector<double> normalized_scores;
  double normalized_mean = 0.0;
  double improvement_pct = 0.0;
  bool has_scores = false;
  bool has_improvement = false;
  double wall_seconds = 0.0;
};

EvalOutcome eval_command(const EvalOptions& opts);

struct SweepOptions {
  std::string axis;  // n_agents | tau | sampler_variant | dataset_fraction |
                     // actor_lr | actor_updates
  std::vector<std::string> values;
};

struct SweepRow {
  std::string value;
  std::uint64_t seed = 0;
  double ret = 0.0;
  double improvement_pct = 0.0;
  bool ok = false;
  std::string status;
};

struct SweepOutcome {
  std::vector<SweepRow> rows;
  std::string runs_csv;
  std::string aggregate_csv;
  bool all_ok = true;
};

// One full train+eval per (value, seed); sub-run failures are recorded and
// the sweep continues.
SweepOutcome sweep_command(const cfg::RunConfig& rc, const SweepOptions& opts,
                           const std::string& out_override = "");

// Applies the normalized score rowwise to the CSV's `return` column.
void score_command(const std::string& returns_csv_path,
                   const data::ScoreTable& table, const std::string& out_path);

data::ScoreTable load_score_table(const std::string& path);
void save_score_table(const data::ScoreTable& table, const std::string& path);

}  // namespace omar::harness
