#include <doctest.h>

#include <filesystem>

#include "omar/config.hpp"
#include "omar/errors.hpp"
#include "omar/harness.hpp"
#include "omar/io_util.hpp"

using namespace omar;
namespace fs = std::filesystem;

namespace {

// Scratch space under the system temp dir, wiped per test case.
std::string scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "omar_harness" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir.string();
}

std::string tiny_config_json(const std::string& dir, const std::string& extra_train,
                             const std::string& dataset_tier = "random") {
  return std::string("{\n") +
         R"(  "env": {"variant": "spread1d_coop", "n_agents": 2},)" + "\n" +
         R"(  "dataset": {"tier": ")" + dataset_tier + R"(", "size": 300,)" +
         R"( "path": ")" + dir + R"(/data_{tier}.omds", "gen_seed": 11},)" + "\n" +
         R"(  "train": {"total_steps": 6, "batch_size": 16, "hidden_dims": [8],)" +
         R"( "ood_samples": 2, "eval_interval": 3, "eval_episodes": 2)" +
         extra_train + "},\n" +
         R"(  "sampler": {"population": 4},)" + "\n" +
         R"(  "seeds": [0],)" + "\n" +
         R"(  "output_dir": ")" + dir + R"(/out",)" + "\n" +
         R"(  "workers": 1)" + "\n}\n";
}

}  // namespace

TEST_CASE("config parsing is strict about unknown keys") {
  CHECK_THROWS_WITH_AS(cfg::parse_run_config(R"({"nope": 1})"),
                       doctest::Contains("unknown key 'nope'"), ConfigError);
  CHECK_THROWS_WITH_AS(
      cfg::parse_run_config(R"({"env": {"variannt": "spread1d_coop"}})"),
      doctest::Contains("unknown key 'variannt'"), ConfigError);
  CHECK_THROWS_WITH_AS(
      cfg::parse_run_config(R"({"train": {"momentum": 0.9}})"),
      doctest::Contains("unknown key 'momentum'"), ConfigError);
  CHECK_THROWS_AS(cfg::parse_run_config("not json"), ConfigError);
}

TEST_CASE("tau defaults follow the dataset tier unless given") {
  const auto by_tier = [](const std::string& tier) {
    return cfg::parse_run_config(R"({"dataset": {"tier": ")" + tier + R"("}})")
        .train.tau;
  };
  CHECK(by_tier("random") == 0.5);
  CHECK(by_tier("medium_replay") == 0.5);
  CHECK(by_tier("medium") == 0.7);
  CHECK(by_tier("expert") == 0.9);
  const auto rc = cfg::parse_run_config(
      R"({"dataset": {"tier": "expert"}, "train": {"tau": 0.25}})");
  CHECK(rc.train.tau == 0.25);
}

TEST_CASE("resolved config echo round-trips") {
  const auto dir = scratch("echo");
  const auto rc = cfg::parse_run_config(tiny_config_json(dir, ""));
  const std::string echoed = cfg::resolved_config_json(rc);
  const auto back = cfg::parse_run_config(echoed);
  CHECK(cfg::resolved_config_json(back) == echoed);
  CHECK(back.train.tau == rc.train.tau);
  CHECK(back.env.n_agents == 2);
}

TEST_CASE("dataset path placeholders resolve") {
  auto rc = cfg::parse_run_config(
      R"({"env": {"n_agents": 3}, "dataset": {"tier": "expert", "path": "d/{tier}_{n}.omds"}})");
  CHECK(rc.dataset_path() == "d/expert_3.omds");
}

TEST_CASE("gen-data for the random tier is idempotent and checkpoint-free") {
  const auto dir = scratch("gen_random");
  const auto rc = cfg::parse_run_config(tiny_config_json(dir, ""));
  const auto out1 = harness::gen_data(rc, {data::QualityTier::kRandom});
  REQUIRE(out1.dataset_files.count(data::QualityTier::kRandom) == 1);
  const std::string path = out1.dataset_files.at(data::QualityTier::kRandom);
  CHECK(fs::exists(path));
  const std::string bytes1 = io::read_file(path);
  const std::string manifest = io::read_file(out1.manifest_path);
  CHECK(manifest.find("behavior_checkpoints") == std::string::npos);
  CHECK(!out1.has_score_table);

  const auto out2 = harness::gen_data(rc, {data::QualityTier::kRandom});
  CHECK(io::read_file(path) == bytes1);
  CHECK(io::read_file(out2.manifest_path) == manifest);
}

TEST_CASE("train with zero steps checkpoints the initialization") {
  const auto dir = scratch("train_zero");
  auto rc = cfg::parse_run_config(tiny_config_json(dir, R"(, "total_steps": 0)"));
  harness::gen_data(rc, {data::QualityTier::kRandom});
  const auto outcomes = harness::train_command(rc);
  REQUIRE(outcomes.size() == 1);
  auto [actors, env_cfg] = harness::load_actor_checkpoints(
      outcomes[0].dir + "/checkpoint_manifest.json");
  Rng init = Rng::stream(0, rng_tag::kInit);
  const auto fresh = algo::AgentLearner::init(
      env_cfg.obs_dim(), env_cfg.action_dim(),
      env_cfg.obs_dim() + env_cfg.action_dim(), rc.train.hidden_dims, init);
  CHECK((actors[0].flat - fresh.actor.flat).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("macql and omar at tau 0 emit identical metrics CSVs") {
  const auto dir = scratch("tau_zero");
  auto rc = cfg::parse_run_config(
      tiny_config_json(dir, R"(, "actor_mode": "omar", "tau": 0.0)"));
  harness::gen_data(rc, {data::QualityTier::kRandom});
  harness::train_command(rc, dir + "/omar");
  auto rc2 = rc;
  rc2.train.actor_mode = algo::ActorMode::kMacql;
  harness::train_command(rc2, dir + "/macql");
  CHECK(io::read_file(dir + "/omar/seed_0/metrics.csv") ==
        io::read_file(dir + "/macql/seed_0/metrics.csv"));
  CHECK(io::read_file(dir + "/omar/seed_0/actor_agent0.omlp") ==
        io::read_file(dir + "/macql/seed_0/actor_agent0.omlp"));
}

TEST_CASE("eval reports are deterministic and detect env mismatch") {
  const auto dir = scratch("eval");
  auto rc = cfg::parse_run_config(tiny_config_json(dir, ""));
  harness::gen_data(rc, {data::QualityTier::kRandom});
  const auto outcomes = harness::train_command(rc);

  harness::EvalOptions opts;
  opts.manifest_path = outcomes[0].dir + "/checkpoint_manifest.json";
  opts.episodes = 3;
  opts.seeds = {0, 1};
  opts.out_dir = dir + "/eval1";
  const auto a = harness::eval_command(opts);
  opts.out_dir = dir + "/eval2";
  const auto b = harness::eval_command(opts);
  CHECK(a.per_seed_returns == b.per_seed_returns);
  CHECK(io::read_file(dir + "/eval1/eval_report.csv") ==
        io::read_file(dir + "/eval2/eval_report.csv"));

  // normalized scores ride along when a table is given
  opts.score_table = data::ScoreTable{-40.0, -10.0};
  opts.out_dir = dir + "/eval3";
  const auto c = harness::eval_command(opts);
  CHECK(c.has_scores);
  CHECK(c.normalized_scores.size() == 2);
}

TEST_CASE("a single-value sweep reproduces a plain train run") {
  const auto dir = scratch("sweep_single");
  auto rc = cfg::parse_run_config(tiny_config_json(dir, R"(, "tau": 0.5)"));
  harness::gen_data(rc, {data::QualityTier::kRandom});
  const auto train_out = harness::train_command(rc, dir + "/plain");

  harness::SweepOptions opts;
  opts.axis = "tau";
  opts.values = {"0.5"};
  const auto sweep_out = harness::sweep_command(rc, opts, dir + "/sweep");
  REQUIRE(sweep_out.rows.size() == 1);
  CHECK(sweep_out.rows[0].ok);
  CHECK(sweep_out.rows[0].ret == train_out[0].final_eval_mean);
  CHECK(io::read_file(dir + "/plain/seed_0/metrics.csv") ==
        io::read_file(dir + "/sweep/tau_0.5/seed_0/metrics.csv"));
}

TEST_CASE("tau sweep endpoint matches a separate macql run") {
  const auto dir = scratch("sweep_tau");
  auto rc = cfg::parse_run_config(tiny_config_json(dir, ""));
  harness::gen_data(rc, {data::QualityTier::kRandom});

  harness::SweepOptions opts;
  opts.axis = "tau";
  opts.values = {"0", "1"};
  const auto sweep_out = harness::sweep_command(rc, opts, dir + "/sweep");

  auto macql_rc = rc;
  macql_rc.train.actor_mode = algo::ActorMode::kMacql;
  macql_rc.train.tau = 0.0;
  const auto macql_out = harness::train_command(macql_rc, dir + "/macql");
  REQUIRE(sweep_out.rows.size() == 2);
  CHECK(sweep_out.rows[0].value == "0");
  CHECK(sweep_out.rows[0].ret == macql_out[0].final_eval_mean);
}

TEST_CASE("sweep aggregate matches a recomputation from the per-run CSV") {
  const auto dir = scratch("sweep_agg");
  auto rc = cfg::parse_run_config(tiny_config_json(dir, ""));
  rc.seeds = {0, 1, 2};
  harness::gen_data(rc, {data::QualityTier::kRandom});
  harness::SweepOptions opts;
  opts.axis = "tau";
  opts.values = {"0.25", "0.75"};
  const auto out = harness::sweep_command(rc, opts, dir + "/sweep");

  const auto runs = io::parse_csv(io::read_file(out.runs_csv));
  const auto agg = io::parse_csv(io::read_file(out.aggregate_csv));
  REQUIRE(agg.size() == 3);  // header + two values
  for (std::size_t row = 1; row < agg.size(); ++row) {
    const std::string value = agg[row][1];
    std::vector<double> rets;
    for (std::size_t r = 1; r < runs.size(); ++r)
      if (runs[r][1] == value && runs[r][5] == "ok")
        rets.push_back(std::stod(runs[r][3]));
    double mean = 0.0;
    for (double x : rets) mean += x;
    mean /= static_cast<double>(rets.size());
    double sq = 0.0;
    for (double x : rets) sq += (x - mean) * (x - mean);
    const double stddev =
        rets.size() > 1 ? std::sqrt(sq / static_cast<double>(rets.size() - 1)) : 0.0;
    CHECK(std::abs(std::stod(agg[row][2]) - mean) <= 1e-9);
    CHECK(std::abs(std::stod(agg[row][3]) - stddev) <= 1e-9);
    CHECK(std::stoi(agg[row][5]) == 3);
  }
}

TEST_CASE("sweep records sub-run failures and keeps going") {
  const auto dir = scratch("sweep_fail");
  auto rc = cfg::parse_run_config(tiny_config_json(dir, ""));
  harness::gen_data(rc, {data::QualityTier::kRandom});
  harness::SweepOptions opts;
  opts.axis = "dataset_fraction";
  // the tiny fraction yields zero samples and must fail its sub-runs
  opts.values = {"0.5", "0.0001"};
  const auto out = harness::sweep_command(rc, opts, dir + "/sweep");
  CHECK(!out.all_ok);
  REQUIRE(out.rows.size() == 2);
  CHECK(out.rows[0].ok);
  CHECK(!out.rows[1].ok);
  CHECK(out.rows[1].status.find("error") == 0);
  // the aggregate still lists both values
  const auto agg = io::parse_csv(io::read_file(out.aggregate_csv));
  REQUIRE(agg.size() == 3);
  CHECK(agg[2][5] == "0");
}

TEST_CASE("score command normalizes rowwise against the table") {
  const auto dir = scratch("score");
  const std::string returns_csv = dir + "/returns.csv";
  io::write_file_atomic(returns_csv,
                        "seed,return\n0,516.8\n1,159.8\n2,338.3\n");
  const std::string out_csv = dir + "/scored.csv";
  harness::score_command(returns_csv, data::ScoreTable{159.8, 516.8}, out_csv);
  const auto rows = io::parse_csv(io::read_file(out_csv));
  REQUIRE(rows.size() == 4);
  CHECK(rows[0].back() == "normalized_score");
  CHECK(std::stod(rows[1].back()) == doctest::Approx(100.0).epsilon(1e-12));
  CHECK(std::stod(rows[2].back()) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(std::abs(std::stod(rows[3].back()) - 50.0) <= 1e-9);

  CHECK_THROWS_AS(
      harness::score_command(returns_csv, data::ScoreTable{5.0, 5.0}, out_csv),
      ConfigError);
}

TEST_CASE("score table JSON round trip") {
  const auto dir = scratch("score_table");
  const data::ScoreTable t{159.8, 516.8};
  harness::save_score_table(t, dir + "/st.json");
  const auto back = harness::load_score_table(dir + "/st.json");
  CHECK(back.s_random == t.s_random);
  CHECK(back.s_expert == t.s_expert);
}
