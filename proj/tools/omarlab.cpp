// Command-line front end: dataset generation, offline training, evaluation,
// sweeps and score normalization for the particle-environment lab.
#include <CLI11.hpp>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "omar/config.hpp"
#include "omar/errors.hpp"
#include "omar/harness.hpp"

namespace {

std::vector<omar::data::QualityTier> parse_tiers(const std::string& arg) {
  std::vector<omar::data::QualityTier> tiers;
  if (arg == "all") {
    return {omar::data::QualityTier::kRandom, omar::data::QualityTier::kMediumReplay,
            omar::data::QualityTier::kMedium, omar::data::QualityTier::kExpert};
  }
  std::size_t start = 0;
  while (start <= arg.size()) {
    const auto comma = arg.find(',', start);
    const std::string name = arg.substr(
        start, comma == std::string::npos ? std::string::npos : comma - start);
    if (!name.empty()) tiers.push_back(omar::data::tier_from_name(name));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  if (tiers.empty()) throw omar::ConfigError("gen-data: no tiers given");
  return tiers;
}

std::vector<std::string> split_csv_list(const std::string& arg) {
  std::vector<std::string> vals;
  std::size_t start = 0;
  while (start <= arg.size()) {
    const auto comma = arg.find(',', start);
    const std::string item = arg.substr(
        start, comma == std::string::npos ? std::string::npos : comma - start);
    if (!item.empty()) vals.push_back(item);
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return vals;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Offline multi-agent RL lab (OMAR, MA-CQL, MA-TD3+BC)"};
  app.require_subcommand(1);

  std::string config_path, out_dir, tiers_arg = "all", seeds_arg, values_arg;
  std::string manifest_path, score_table_path, returns_csv, out_file, axis;
  int episodes = 10;
  int workers = 0;
  bool strict_actions = false;
  std::optional<double> behavior_return;

  auto* gen = app.add_subcommand("gen-data", "Manufacture offline datasets");
  gen->add_option("--config", config_path, "Run config JSON")->required();
  gen->add_option("--tier", tiers_arg, "Tier list (comma separated) or 'all'");
  gen->add_option("--out", out_dir, "Output directory");
  gen->add_flag("--strict-actions", strict_actions, "Error on out-of-range actions");

  auto* train = app.add_subcommand("train", "Offline training over the seed list");
  train->add_option("--config", config_path, "Run config JSON")->required();
  train->add_option("--seeds", seeds_arg, "Override seed list, e.g. 0,1,2");
  train->add_option("--out", out_dir, "Output directory");
  train->add_option("--workers", workers, "Parallel sub-runs");
  train->add_flag("--strict-actions", strict_actions, "Error on out-of-range actions");

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
  eval->add_option("--checkpoint", manifest_path, "checkpoint_manifest.json path")
      ->required();
  eval->add_option("--episodes", episodes, "Episodes per seed");
  eval->add_option("--seeds", seeds_arg, "Seed list, e.g. 0,1,2");
  eval->add_option("--score-table", score_table_path, "Score table JSON");
  eval->add_option("--behavior-return", behavior_return,
                   "Behavior policy return for improvement percentage");
  eval->add_option("--out", out_dir, "Output directory for the report");

  auto* sweep = app.add_subcommand("sweep", "Train+eval across one axis");
  sweep->add_option("--config", config_path, "Run config JSON")->required();
  sweep->add_option("--axis", axis,
                    "n_agents|tau|sampler_variant|dataset_fraction|actor_lr|"
                    "actor_updates")
      ->required();
  sweep->add_option("--values", values_arg, "Axis values, comma separated")
      ->required();
  sweep->add_option("--seeds", seeds_arg, "Override seed list");
  sweep->add_option("--out", out_dir, "Output directory");
  sweep->add_option("--workers", workers, "Parallel sub-runs");
  sweep->add_flag("--strict-actions", strict_actions, "Error on out-of-range actions");

  auto* score = app.add_subcommand("score", "Normalize a returns CSV");
  score->add_option("--returns", returns_csv, "CSV with a 'return' column")
      ->required();
  score->add_option("--score-table", score_table_path, "Score table JSON")
      ->required();
  score->add_option("--out", out_file, "Output CSV path")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    const auto load_cfg = [&]() {
      omar::cfg::RunConfig rc = omar::cfg::load_run_config(config_path);
      if (!seeds_arg.empty()) {
        rc.seeds.clear();
        for (const auto& s : split_csv_list(seeds_arg))
          rc.seeds.push_back(std::stoull(s));
      }
      if (workers > 0) rc.workers = workers;
      if (strict_actions) rc.env.strict_actions = true;
      return rc;
    };

    if (gen->parsed()) {
      const auto outcome =
          omar::harness::gen_data(load_cfg(), parse_tiers(tiers_arg), out_dir);
      std::cout << "wrote " << outcome.dataset_files.size() << " dataset(s); manifest "
                << outcome.manifest_path << "\n";
    } else if (train->parsed()) {
      const auto outcomes = omar::harness::train_command(load_cfg(), out_dir);
      for (const auto& o : outcomes)
        std::cout << "seed " << o.seed << ": final eval " << o.final_eval_mean
                  << " (" << o.dir << ")\n";
    } else if (eval->parsed()) {
      omar::harness::EvalOptions opts;
      opts.manifest_path = manifest_path;
      opts.episodes = episodes;
      if (!seeds_arg.empty()) {
        opts.seeds.clear();
        for (const auto& s : split_csv_list(seeds_arg))
          opts.seeds.push_back(std::stoull(s));
      }
      if (!score_table_path.empty())
        opts.score_table = omar::harness::load_score_table(score_table_path);
      opts.behavior_return = behavior_return;
      opts.out_dir = out_dir;
      const auto report = omar::harness::eval_command(opts);
      std::cout << "return mean " << report.mean << " std " << report.stddev;
      if (report.has_scores) std::cout << " normalized " << report.normalized_mean;
      if (report.has_improvement)
        std::cout << " improvement% " << report.improvement_pct;
      std::cout << "\n";
    } else if (sweep->parsed()) {
      omar::harness::SweepOptions opts;
      opts.axis = axis;
      opts.values = split_csv_list(values_arg);
      const auto outcome = omar::harness::sweep_command(load_cfg(), opts, out_dir);
      std::cout << "sweep rows: " << outcome.rows.size() << "; aggregate "
                << outcome.aggregate_csv << "\n";
      if (!outcome.all_ok) {
        std::cerr << "sweep: some sub-runs failed\n";
        return 2;
      }
    } else if (score->parsed()) {
      omar::harness::score_command(
          returns_csv, omar::harness::load_score_table(score_table_path), out_file);
      std::cout << "wrote " << out_file << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
