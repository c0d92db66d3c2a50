#include "omar/harness.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <json.hpp>
#include <memory>
#include <thread>

#include "omar/errors.hpp"
#include "omar/evaluate.hpp"
#include "omar/io_util.hpp"

namespace omar::harness {

namespace {

using nlohmann::json;

namespace fs = std::filesystem;

std::string join(const std::string& a, const std::string& b) {
  return (fs::path(a) / b).string();
}

double sample_std(const std::vector<double>& xs, double mean) {
  if (xs.size() < 2) return 0.0;
  double sq = 0.0;
  for (double x : xs) sq += (x - mean) * (x - mean);
  return std::sqrt(sq / static_cast<double>(xs.size() - 1));
}

double mean_of(const std::vector<double>& xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return xs.empty() ? 0.0 : s / static_cast<double>(xs.size());
}

algo::TrainConfig online_config(const cfg::RunConfig& rc) {
  algo::TrainConfig t = rc.train;
  t.actor_mode = algo::ActorMode::kOnline;
  t.alpha = 0.0;
  t.tau = 0.0;
  t.lr = rc.dataset.online.lr;
  t.actor_lr = 0.0;
  t.batch_size = rc.dataset.online.batch_size;
  t.total_steps = rc.dataset.online.steps;
  t.eval_interval = rc.dataset.online.eval_interval;
  t.update_every = rc.dataset.online.update_every;
  t.explore_noise_std = rc.dataset.online.explore_noise;
  t.hidden_dims = rc.dataset.online.hidden_dims;
  return t;
}

// Runs fn(i) for i in [0, count) on up to `workers` threads. Exceptions are
// captured per index and reported back as messages.
std::vector<std::string> parallel_for(int count, int workers,
                                      const std::function<void(int)>& fn) {
  std::vector<std::string> errors(static_cast<std::size_t>(count));
  if (workers <= 1) {
    for (int i = 0; i < count; ++i) {
      try {
        fn(i);
      } catch (const std::exception& e) {
        errors[static_cast<std::size_t>(i)] = e.what();
      }
    }
    return errors;
  }
  std::atomic<int> next{0};
  auto worker = [&]() {
    while (true) {
      const int i = next.fetch_add(1);
      if (i >= count) return;
      try {
        fn(i);
      } catch (const std::exception& e) {
        errors[static_cast<std::size_t>(i)] = e.what();
      }
    }
  };
  std::vector<std::thread> pool;
  const int n_threads = std::min(workers, count);
  pool.reserve(static_cast<std::size_t>(n_threads));
  for (int w = 0; w < n_threads; ++w) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  return errors;
}

std::string metrics_csv_text(const std::vector<algo::TrainMetricsRow>& rows) {
  std::string text = io::csv_row({"step", "critic_loss", "cql_penalty",
                                  "actor_loss", "rect_dist", "cand_improve",
                                  "eval_mean", "eval_std"});
  for (const auto& r : rows)
    text += io::csv_row({std::to_string(r.step), io::format_double(r.critic_loss),
                         io::format_double(r.cql_penalty),
                         io::format_double(r.actor_loss),
                         io::format_double(r.rect_dist),
                         io::format_double(r.cand_improve),
                         io::format_double(r.eval_mean),
                         io::format_double(r.eval_std)});
  return text;
}

}  // namespace

std::string resolve_output_dir(const cfg::RunConfig& rc,
                               const std::string& override_dir) {
  if (!override_dir.empty()) return override_dir;
  if (!rc.output_dir.empty()) return rc.output_dir;
  if (const char* root = std::getenv("OMAR_OUT_ROOT")) return join(root, "run");
  return "omar_runs/run";
}

GenDataOutcome gen_data(const cfg::RunConfig& rc,
                        const std::vector<data::QualityTier>& tiers,
                        const std::string& out_override) {
  if (tiers.empty()) throw ConfigError("gen-data: no tiers requested");
  if (rc.dataset.path.empty())
    throw ConfigError("gen-data: dataset.path must be set");
  if (tiers.size() > 1 && rc.dataset.path.find("{tier}") == std::string::npos)
    throw ConfigError(
        "gen-data: dataset.path needs a {tier} placeholder for multiple tiers");
  const std::string out_dir = resolve_output_dir(rc, out_override);

  bool needs_online = false;
  bool needs_recording = false;
  for (auto tier : tiers) {
    if (tier != data::QualityTier::kRandom) needs_online = true;
    if (tier == data::QualityTier::kMediumReplay) needs_recording = true;
  }

  GenDataOutcome out;
  json manifest;
  manifest["gen_seed"] = rc.dataset.gen_seed;
  manifest["env_variant"] = env::variant_name(rc.env.variant);
  manifest["n_agents"] = rc.env.n_agents;
  manifest["medium_band"] = {0.4, 0.6};
  manifest["medium_replay_crossing"] = 0.5;

  std::optional<algo::OnlineRunResult> run;
  if (needs_online) {
    run = algo::online_train_run(rc.env, online_config(rc), rc.dataset.gen_seed,
                                 needs_recording);
    out.score_table = run->score_table();
    out.has_score_table = true;
    out.s_medium = run->s_medium;
    manifest["scores"] = {{"s_random", run->s_random},
                          {"s_medium", run->s_medium},
                          {"s_expert", run->s_expert}};
    manifest["medium_snapshot_step"] = run->medium_snapshot_step;
    manifest["medium_cross_transition"] = run->recording.medium_cross_transition;
    json trace = json::array();
    for (const auto& p : run->eval_trace)
      trace.push_back({{"step", p.step}, {"return", p.mean_return}});
    manifest["online_eval_trace"] = trace;
    save_score_table(out.score_table, join(out_dir, "score_table.json"));
    manifest["score_table_file"] = "score_table.json";

    // Persist the behavior snapshots used by the rollout tiers.
    json checkpoints = json::object();
    const auto save_actors = [&](const std::string& name,
                                 const std::vector<nn::MlpParams>& actors) {
      json files = json::array();
      for (std::size_t i = 0; i < actors.size(); ++i) {
        const std::string rel =
            "behavior/" + name + "_actor" + std::to_string(i) + ".omlp";
        nn::save_params(actors[i], join(out_dir, rel));
        files.push_back(rel);
      }
      checkpoints[name] = files;
    };
    save_actors("random", run->init_actors);
    save_actors("expert", run->expert_actors);
    if (run->has_medium()) save_actors("medium", run->medium_actors);
    manifest["behavior_checkpoints"] = checkpoints;
  }

  json files = json::object();
  for (auto tier : tiers) {
    data::BehaviorSource src;
    switch (tier) {
      case data::QualityTier::kRandom:
        break;
      case data::QualityTier::kMedium:
        if (!run->has_medium())
          throw ConfigError(
              "gen-data: the online run never reached the medium band; raise "
              "dataset.online.steps or adjust dataset.online.lr");
        src.policy = data::BehaviorPolicy{run->medium_actors, rc.dataset.rollout_noise};
        break;
      case data::QualityTier::kExpert:
        src.policy = data::BehaviorPolicy{run->expert_actors, rc.dataset.rollout_noise};
        break;
      case data::QualityTier::kMediumReplay:
        src.recording = &run->recording;
        break;
    }
    cfg::RunConfig tier_rc = rc;
    tier_rc.dataset.tier = tier;
    const std::string path = tier_rc.dataset_path();
    const data::Dataset d = data::generate_dataset(rc.env, tier, rc.dataset.size,
                                                   rc.dataset.gen_seed, src);
    data::save_dataset(d, path);
    out.dataset_files[tier] = path;
    files[data::tier_name(tier)] = {{"path", path},
                                    {"samples", d.meta.sample_count},
                                    {"behavior_return", d.meta.behavior_return},
                                    {"behavior", d.meta.behavior}};
  }
  manifest["datasets"] = files;

  out.manifest_path = join(out_dir, "gen_manifest.json");
  io::write_file_atomic(out.manifest_path, manifest.dump(2) + "\n");
  return out;
}

void write_checkpoints(const std::vector<algo::AgentLearner>& learners,
                       const env::EnvConfig& env_cfg, const std::string& dir) {
  json manifest;
  manifest["env"] = {{"variant", env::variant_name(env_cfg.variant)},
                     {"n_agents", env_cfg.n_agents},
                     {"episode_len", env_cfg.episode_len},
                     {"world_halfwidth", env_cfg.world_halfwidth},
                     {"collision_radius", env_cfg.collision_radius},
                     {"collision_penalty", env_cfg.collision_penalty},
                     {"max_speed", env_cfg.max_speed},
                     {"dt", env_cfg.dt}};
  json networks = json::array();
  for (std::size_t i = 0; i < learners.size(); ++i) {
    const auto save = [&](const std::string& role, const nn::MlpParams& p) {
      const std::string rel = role + "_agent" + std::to_string(i) + ".omlp";
      nn::save_params(p, join(dir, rel));
      networks.push_back({{"agent", i}, {"role", role}, {"file", rel}});
    };
    save("actor", learners[i].actor);
    save("critic1", learners[i].critic1);
    save("critic2", learners[i].critic2);
  }
  manifest["networks"] = networks;
  io::write_file_atomic(join(dir, "checkpoint_manifest.json"),
                        manifest.dump(2) + "\n");
}

std::pair<std::vector<nn::MlpParams>, env::EnvConfig> load_actor_checkpoints(
    const std::string& manifest_path) {
  json manifest;
  try {
    manifest = json::parse(io::read_file(manifest_path));
  } catch (const json::parse_error& e) {
    throw IoError("checkpoint manifest: invalid JSON: " + std::string(e.what()));
  }
  env::EnvConfig env_cfg;
  const auto& e = manifest.at("env");
  env_cfg.variant = env::variant_from_name(e.at("variant").get<std::string>());
  env_cfg.n_agents = e.at("n_agents").get<int>();
  env_cfg.episode_len = e.at("episode_len").get<int>();
  env_cfg.world_halfwidth = e.at("world_halfwidth").get<double>();
  env_cfg.collision_radius = e.at("collision_radius").get<double>();
  env_cfg.collision_penalty = e.at("collision_penalty").get<double>();
  env_cfg.max_speed = e.at("max_speed").get<double>();
  env_cfg.dt = e.at("dt").get<double>();

  const std::string dir = fs::path(manifest_path).parent_path().string();
  std::vector<nn::MlpParams> actors(static_cast<std::size_t>(env_cfg.n_agents),
                                    nn::MlpParams{});
  int found = 0;
  for (const auto& net : manifest.at("networks")) {
    if (net.at("role").get<std::string>() != "actor") continue;
    const auto agent = net.at("agent").get<std::size_t>();
    if (agent >= actors.size())
      throw IoError("checkpoint manifest: agent index out of range");
    actors[agent] = nn::load_params(join(dir, net.at("file").get<std::string>()));
    ++found;
  }
  if (found != env_cfg.n_agents)
    throw IoError("checkpoint manifest: expected " +
                  std::to_string(env_cfg.n_agents) + " actors, found " +
                  std::to_string(found));
  return {std::move(actors), env_cfg};
}

SeedRunOutcome train_one_seed(const cfg::RunConfig& rc, std::uint64_t seed,
                              const data::Dataset& dataset,
                              const std::string& run_dir) {
  cfg::RunConfig resolved = rc;
  resolved.seeds = {seed};
  resolved.output_dir = run_dir;
  io::write_file_atomic(join(run_dir, "resolved_config.json"),
                        cfg::resolved_config_json(resolved));

  const algo::TrainResult result = algo::train_run(dataset, rc.train, seed);
  io::write_file_atomic(join(run_dir, "metrics.csv"),
                        metrics_csv_text(result.metrics));
  write_checkpoints(result.learners, dataset.meta.env, run_dir);

  SeedRunOutcome out;
  out.seed = seed;
  out.dir = run_dir;
  out.ms_per_update = result.ms_per_update;
  if (!result.metrics.empty()) {
    out.final_eval_mean = result.metrics.back().eval_mean;
    out.final_eval_std = result.metrics.back().eval_std;
  }
  // Wall-clock figures stay out of the CSVs so reruns stay byte-identical.
  json summary;
  summary["seed"] = seed;
  summary["ms_per_update"] = result.ms_per_update;
  summary["total_seconds"] = result.total_seconds;
  summary["final_eval_mean"] = out.final_eval_mean;
  summary["final_eval_std"] = out.final_eval_std;
  io::write_file_atomic(join(run_dir, "summary.json"), summary.dump(2) + "\n");
  return out;
}

std::vector<SeedRunOutcome> train_command(const cfg::RunConfig& rc,
                                          const std::string& out_override) {
  const std::string out_dir = resolve_output_dir(rc, out_override);
  const data::Dataset dataset = data::load_dataset(rc.dataset_path());
  if (rc.train.batch_size > dataset.size())
    throw ConfigError("train: batch_size exceeds dataset size");

  std::vector<SeedRunOutcome> outcomes(rc.seeds.size());
  const auto errors = parallel_for(
      static_cast<int>(rc.seeds.size()), rc.workers, [&](int i) {
        const std::uint64_t seed = rc.seeds[static_cast<std::size_t>(i)];
        const std::string dir = join(out_dir, "seed_" + std::to_string(seed));
        outcomes[static_cast<std::size_t>(i)] =
            train_one_seed(rc, seed, dataset, dir);
      });
  for (std::size_t i = 0; i < errors.size(); ++i)
    if (!errors[i].empty())
      throw ConfigError("train: seed " + std::to_string(rc.seeds[i]) +
                        " failed: " + errors[i]);
  return outcomes;
}

EvalOutcome eval_command(const EvalOptions& opts) {
  if (opts.seeds.empty()) throw ConfigError("eval: at least one seed required");
  const auto start = std::chrono::steady_clock::now();
  auto [actors, env_cfg] = load_actor_checkpoints(opts.manifest_path);

  EvalOutcome out;
  for (const auto seed : opts.seeds) {
    const auto stats = algo::evaluate_policy(env_cfg, actors, opts.episodes, seed);
    out.per_seed_returns.push_back(stats.mean);
  }
  out.mean = mean_of(out.per_seed_returns);
  out.stddev = sample_std(out.per_seed_returns, out.mean);
  if (opts.score_table.has_value()) {
    out.has_scores = true;
    for (double r : out.per_seed_returns)
      out.normalized_scores.push_back(data::normalized_score(r, *opts.score_table));
    out.normalized_mean = mean_of(out.normalized_scores);
  }
  if (opts.behavior_return.has_value()) {
    out.has_improvement = true;
    const double b = *opts.behavior_return;
    if (b == 0.0) throw ConfigError("eval: behavior return of zero is degenerate");
    out.improvement_pct = 100.0 * (out.mean - b) / std::abs(b);
  }
  out.wall_seconds = std::chrono::duration<double>(
                         std::chrono::steady_clock::now() - start)
                         .count();

  if (!opts.out_dir.empty()) {
    std::string csv = io::csv_row({"seed", "return", "normalized_score"});
    for (std::size_t i = 0; i < out.per_seed_returns.size(); ++i)
      csv += io::csv_row(
          {std::to_string(opts.seeds[i]), io::format_double(out.per_seed_returns[i]),
           out.has_scores ? io::format_double(out.normalized_scores[i]) : ""});
    io::write_file_atomic(join(opts.out_dir, "eval_report.csv"), csv);

    json report;
    report["episodes_per_seed"] = opts.episodes;
    report["seeds"] = opts.seeds;
    report["per_seed_returns"] = out.per_seed_returns;
    report["mean"] = out.mean;
    report["std_over_seeds"] = out.stddev;
    if (out.has_scores) {
      report["normalized_scores"] = out.normalized_scores;
      report["normalized_mean"] = out.normalized_mean;
    }
    if (out.has_improvement) report["improvement_pct"] = out.improvement_pct;
    report["wall_seconds"] = out.wall_seconds;
    io::write_file_atomic(join(opts.out_dir, "eval_report.json"),
                          report.dump(2) + "\n");
  }
  return out;
}

namespace {

cfg::RunConfig apply_axis(const cfg::RunConfig& base, const std::string& axis,
                          const std::string& value) {
  cfg::RunConfig rc = base;
  if (axis == "n_agents") {
    rc.env.n_agents = std::stoi(value);
  } else if (axis == "tau") {
    rc.train.tau = std::stod(value);
  } else if (axis == "sampler_variant") {
    rc.train.sampler.variant = sampler::variant_from_name(value);
  } else if (axis == "dataset_fraction") {
    // handled at dataset-load time
  } else if (axis == "actor_lr") {
    rc.train.actor_lr = std::stod(value);
  } else if (axis == "actor_updates") {
    rc.train.actor_updates = std::stoi(value);
  } else {
    throw ConfigError("sweep: unknown axis '" + axis + "'");
  }
  rc.env.validate();
  rc.train.validate();
  return rc;
}

}  // namespace

SweepOutcome sweep_command(const cfg::RunConfig& rc, const SweepOptions& opts,
                           const std::string& out_override) {
  if (opts.values.empty()) throw ConfigError("sweep: no axis values given");
  const std::string out_dir = resolve_output_dir(rc, out_override);

  struct Job {
    std::string value;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (const auto& v : opts.values)
    for (const auto s : rc.seeds) jobs.push_back({v, s});

  // Datasets per axis value (shared across seeds). n_agents sweeps generate
  // missing per-n datasets on demand; dataset_fraction subsamples one base.
  // A failing value marks all of its sub-runs failed; the sweep continues.
  std::map<std::string, std::shared_ptr<const data::Dataset>> datasets;
  std::map<std::string, std::string> value_errors;
  std::shared_ptr<const data::Dataset> base_dataset;
  if (opts.axis != "n_agents") {
    base_dataset =
        std::make_shared<data::Dataset>(data::load_dataset(rc.dataset_path()));
  }
  for (const auto& v : opts.values) {
    try {
      if (opts.axis == "n_agents") {
        cfg::RunConfig vrc = apply_axis(rc, opts.axis, v);
        const std::string path = vrc.dataset_path();
        if (!fs::exists(path))
          gen_data(vrc, {vrc.dataset.tier}, join(out_dir, "gen_n" + v));
        datasets[v] =
            std::make_shared<data::Dataset>(data::load_dataset(path));
      } else if (opts.axis == "dataset_fraction") {
        datasets[v] = std::make_shared<data::Dataset>(
            data::subsample(*base_dataset, std::stod(v), rc.dataset.gen_seed));
      } else {
        datasets[v] = base_dataset;
      }
    } catch (const std::exception& e) {
      value_errors[v] = e.what();
    }
  }

  SweepOutcome out;
  out.rows.resize(jobs.size());
  const auto errors = parallel_for(
      static_cast<int>(jobs.size()), rc.workers, [&](int i) {
        const Job& job = jobs[static_cast<std::size_t>(i)];
        SweepRow& row = out.rows[static_cast<std::size_t>(i)];
        row.value = job.value;
        row.seed = job.seed;
        if (auto it = value_errors.find(job.value); it != value_errors.end())
          throw ConfigError(it->second);
        const cfg::RunConfig vrc = apply_axis(rc, opts.axis, job.value);
        const auto& d = datasets.at(job.value);
        const std::string dir =
            join(out_dir, opts.axis + "_" + job.value + "/seed_" +
                              std::to_string(job.seed));
        const SeedRunOutcome run = train_one_seed(vrc, job.seed, *d, dir);
        row.ret = run.final_eval_mean;
        const double b = d->meta.behavior_return;
        row.improvement_pct =
            b != 0.0 ? 100.0 * (run.final_eval_mean - b) / std::abs(b) : 0.0;
        row.ok = true;
        row.status = "ok";
      });
  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (!errors[i].empty()) {
      out.rows[i].ok = false;
      out.rows[i].status = "error: " + errors[i];
      out.all_ok = false;
    }
  }

  std::string runs_csv = io::csv_row(
      {"axis", "value", "seed", "return", "improvement_pct", "status"});
  for (const auto& row : out.rows)
    runs_csv += io::csv_row({opts.axis, row.value, std::to_string(row.seed),
                             row.ok ? io::format_double(row.ret) : "",
                             row.ok ? io::format_double(row.improvement_pct) : "",
                             row.status});
  out.runs_csv = join(out_dir, "sweep_runs.csv");
  io::write_file_atomic(out.runs_csv, runs_csv);

  std::string agg_csv = io::csv_row({"axis", "value", "mean_return", "std_return",
                                     "mean_improvement_pct", "n_ok"});
  for (const auto& v : opts.values) {
    std::vector<double> rets, imps;
    for (const auto& row : out.rows)
      if (row.ok && row.value == v) {
        rets.push_back(row.ret);
        imps.push_back(row.improvement_pct);
      }
    const double m = mean_of(rets);
    agg_csv += io::csv_row({opts.axis, v, io::format_double(m),
                            io::format_double(sample_std(rets, m)),
                            io::format_double(mean_of(imps)),
                            std::to_string(rets.size())});
  }
  out.aggregate_csv = join(out_dir, "sweep_aggregate.csv");
  io::write_file_atomic(out.aggregate_csv, agg_csv);
  return out;
}

void score_command(const std::string& returns_csv_path,
                   const data::ScoreTable& table, const std::string& out_path) {
  if (table.s_expert == table.s_random)
    throw ConfigError("score: degenerate score table (s_expert == s_random)");
  const auto rows = io::parse_csv(io::read_file(returns_csv_path));
  if (rows.empty()) throw ConfigError("score: empty returns CSV");
  std::size_t col = rows[0].size();
  for (std::size_t c = 0; c < rows[0].size(); ++c)
    if (rows[0][c] == "return") col = c;
  if (col == rows[0].size())
    throw ConfigError("score: returns CSV needs a 'return' column");

  std::string out_text;
  {
    auto header = rows[0];
    header.push_back("normalized_score");
    out_text += io::csv_row(header);
  }
  for (std::size_t r = 1; r < rows.size(); ++r) {
    auto row = rows[r];
    if (col >= row.size() || row[col].empty())
      throw ConfigError("score: row " + std::to_string(r) + " lacks a return");
    row.push_back(io::format_double(
        data::normalized_score(std::stod(row[col]), table)));
    out_text += io::csv_row(row);
  }
  io::write_file_atomic(out_path, out_text);
}

data::ScoreTable load_score_table(const std::string& path) {
  json j;
  try {
    j = json::parse(io::read_file(path));
  } catch (const json::parse_error& e) {
    throw IoError("score table: invalid JSON: " + std::string(e.what()));
  }
  data::ScoreTable t;
  t.s_random = j.at("s_random").get<double>();
  t.s_expert = j.at("s_expert").get<double>();
  return t;
}

void save_score_table(const data::ScoreTable& table, const std::string& path) {
  json j;
  j["s_random"] = table.s_random;
  j["s_expert"] = table.s_expert;
  io::write_file_atomic(path, j.dump(2) + "\n");
}

}  // namespace omar::harness
