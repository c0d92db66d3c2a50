#include <doctest.h>

#include <algorithm>
#include <filesystem>

#include "omar/dataset.hpp"
#include "omar/errors.hpp"
#include "omar/io_util.hpp"

using namespace omar;
using data::BehaviorSource;
using data::Dataset;
using data::QualityTier;
using data::ScoreTable;

namespace {

env::EnvConfig spread2() {
  env::EnvConfig c;
  c.variant = env::EnvVariant::kSpread1dCoop;
  c.n_agents = 2;
  return c;
}

// Hand-built three-step recording with a known crossing point.
data::ReplayRecording tiny_recording(const env::EnvConfig& c, int steps) {
  data::ReplayRecording rec;
  auto [state, obs] = env::reset(c, 31);
  for (int t = 0; t < steps; ++t) {
    std::vector<Eigen::VectorXd> act(static_cast<std::size_t>(c.n_agents));
    for (auto& a : act)
      a = Eigen::VectorXd::Constant(c.action_dim(), t % 2 == 0 ? 0.5 : -0.5);
    const auto res = env::step(c, state, act);
    data::Transition tr;
    tr.obs = obs;
    tr.act = act;
    tr.rew = res.rewards;
    tr.next_obs = res.observations;
    tr.done = res.done;
    rec.stream.push_back(tr);
    obs = res.done ? env::reset_next(c, state) : res.observations;
  }
  rec.medium_cross_transition = steps;
  return rec;
}

}  // namespace

TEST_CASE("normalized_score endpoints and monotonicity") {
  const ScoreTable t{159.8, 516.8};
  CHECK(data::normalized_score(516.8, t) == doctest::Approx(100.0).epsilon(1e-12));
  CHECK(data::normalized_score(159.8, t) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(std::abs(data::normalized_score(338.3, t) - 50.0) <= 1e-9);
  // strictly increasing in S when s_expert > s_random, and unclamped
  CHECK(data::normalized_score(600.0, t) > 100.0);
  double prev = data::normalized_score(0.0, t);
  for (double s = 10.0; s <= 700.0; s += 10.0) {
    const double cur = data::normalized_score(s, t);
    CHECK(cur > prev);
    prev = cur;
  }
  CHECK_THROWS_AS(data::normalized_score(1.0, ScoreTable{5.0, 5.0}), ConfigError);
}

TEST_CASE("random tier has exact cardinality and bounded actions") {
  const auto d = data::generate_dataset(spread2(), QualityTier::kRandom, 1000, 3,
                                        BehaviorSource{});
  CHECK(d.size() == 1000);
  CHECK(d.meta.sample_count == 1000);
  for (int i = 0; i < d.n_agents(); ++i) {
    CHECK(d.act[i].maxCoeff() <= 1.0);
    CHECK(d.act[i].minCoeff() >= -1.0);
  }
  // episode boundaries every episode_len steps
  for (Eigen::Index t = 0; t < d.size(); ++t)
    CHECK(d.done(t) == ((t + 1) % 25 == 0 ? 1.0 : 0.0));
}

TEST_CASE("generation is deterministic: identical bytes for identical inputs") {
  const auto a = data::generate_dataset(spread2(), QualityTier::kRandom, 500, 7,
                                        BehaviorSource{});
  const auto b = data::generate_dataset(spread2(), QualityTier::kRandom, 500, 7,
                                        BehaviorSource{});
  CHECK(data::encode_dataset(a) == data::encode_dataset(b));
  const auto c = data::generate_dataset(spread2(), QualityTier::kRandom, 500, 8,
                                        BehaviorSource{});
  CHECK(data::encode_dataset(a) != data::encode_dataset(c));
}

TEST_CASE("tiers that need inputs reject missing ones") {
  CHECK_THROWS_AS(data::generate_dataset(spread2(), QualityTier::kMedium, 100, 0,
                                         BehaviorSource{}),
                  ConfigError);
  CHECK_THROWS_AS(data::generate_dataset(spread2(), QualityTier::kExpert, 100, 0,
                                         BehaviorSource{}),
                  ConfigError);
  CHECK_THROWS_AS(data::generate_dataset(spread2(), QualityTier::kMediumReplay,
                                         100, 0, BehaviorSource{}),
                  ConfigError);
  // a recording that never crossed the medium threshold is rejected
  auto rec = tiny_recording(spread2(), 10);
  rec.medium_cross_transition = -1;
  BehaviorSource src;
  src.recording = &rec;
  CHECK_THROWS_AS(data::generate_dataset(spread2(), QualityTier::kMediumReplay,
                                         100, 0, src),
                  ConfigError);
}

TEST_CASE("medium_replay takes the stream prefix up to the crossing") {
  const auto rec = tiny_recording(spread2(), 60);
  BehaviorSource src;
  src.recording = &rec;
  auto cut = rec;
  cut.medium_cross_transition = 40;
  src.recording = &cut;
  const auto d = data::generate_dataset(spread2(), QualityTier::kMediumReplay,
                                        1000, 0, src);
  CHECK(d.size() == 40);
  // n_samples caps the prefix
  const auto capped = data::generate_dataset(spread2(), QualityTier::kMediumReplay,
                                             25, 0, src);
  CHECK(capped.size() == 25);
  for (Eigen::Index t = 0; t < 25; ++t)
    CHECK(d.act[0](0, t) == cut.stream[static_cast<std::size_t>(t)].act[0](0));
}

TEST_CASE("save/load round trip is the identity") {
  const auto d = data::generate_dataset(spread2(), QualityTier::kRandom, 3, 5,
                                        BehaviorSource{});
  const auto dir = std::filesystem::temp_directory_path() / "omar_ds_test";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "tiny.omds").string();
  data::save_dataset(d, path);
  const auto back = data::load_dataset(path);
  CHECK(back.meta.env == d.meta.env);
  CHECK(back.meta.tier == d.meta.tier);
  CHECK(back.meta.behavior == d.meta.behavior);
  CHECK(back.meta.sample_count == d.meta.sample_count);
  CHECK(back.meta.seed == d.meta.seed);
  CHECK(back.meta.behavior_return == d.meta.behavior_return);
  for (int i = 0; i < d.n_agents(); ++i) {
    CHECK((back.obs[i] - d.obs[i]).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back.act[i] - d.act[i]).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back.rew[i] - d.rew[i]).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back.next_obs[i] - d.next_obs[i]).cwiseAbs().maxCoeff() == 0.0);
  }
  CHECK((back.done - d.done).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("truncated or corrupted dataset files fail loudly") {
  const auto d = data::generate_dataset(spread2(), QualityTier::kRandom, 50, 5,
                                        BehaviorSource{});
  const std::string bytes = data::encode_dataset(d);

  CHECK_THROWS_WITH_AS(data::decode_dataset(bytes.substr(0, bytes.size() / 2)),
                       doctest::Contains("truncated"), IoError);
  std::string bad_magic = bytes;
  bad_magic[0] = 'Z';
  CHECK_THROWS_AS(data::decode_dataset(bad_magic), IoError);
  // clipping the footer changes the trailing count
  CHECK_THROWS_AS(data::decode_dataset(bytes.substr(0, bytes.size() - 8)), IoError);
  CHECK_THROWS_AS(data::decode_dataset(bytes + "x"), IoError);
}

TEST_CASE("large round trip re-serializes to identical bytes") {
  const auto d = data::generate_dataset(spread2(), QualityTier::kRandom, 10000, 9,
                                        BehaviorSource{});
  const std::string bytes = data::encode_dataset(d);
  const auto back = data::decode_dataset(bytes);
  CHECK(data::encode_dataset(back) == bytes);
}

TEST_CASE("subsample fraction 1.0 is a permutation of the original") {
  const auto d = data::generate_dataset(spread2(), QualityTier::kRandom, 200, 1,
                                        BehaviorSource{});
  const auto s = data::subsample(d, 1.0, 4);
  REQUIRE(s.size() == d.size());
  std::vector<double> a(d.rew[0].data(), d.rew[0].data() + d.size());
  std::vector<double> b(s.rew[0].data(), s.rew[0].data() + s.size());
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  CHECK(a == b);
}

TEST_CASE("subsample cardinality and seed sensitivity") {
  const auto d = data::generate_dataset(spread2(), QualityTier::kRandom, 100, 2,
                                        BehaviorSource{});
  const auto s = data::subsample(d, 0.5, 0);
  CHECK(s.size() == 50);
  // ten thousand samples, two seeds: identical picks are overwhelmingly unlikely
  const auto big = data::generate_dataset(spread2(), QualityTier::kRandom, 10000, 2,
                                          BehaviorSource{});
  const auto s1 = data::subsample(big, 0.2, 1);
  const auto s2 = data::subsample(big, 0.2, 2);
  CHECK((s1.rew[0] - s2.rew[0]).cwiseAbs().maxCoeff() > 0.0);
  CHECK_THROWS_AS(data::subsample(d, 0.0001, 0), ConfigError);
  CHECK_THROWS_AS(data::subsample(d, 1.5, 0), ContractError);
}

TEST_CASE("dataset validation rejects inconsistent columns") {
  auto d = data::generate_dataset(spread2(), QualityTier::kRandom, 10, 0,
                                  BehaviorSource{});
  d.meta.sample_count = 11;
  CHECK_THROWS_AS(d.validate(), ContractError);
  d.meta.sample_count = 10;
  d.act[0](0, 0) = 1.5;
  CHECK_THROWS_AS(d.validate(), ContractError);
}
