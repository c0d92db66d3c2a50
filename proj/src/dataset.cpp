#include "omar/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "omar/errors.hpp"
#include "omar/io_util.hpp"

namespace omar::data {

namespace {

constexpr char kMagic[4] = {'O', 'M', 'D', 'S'};
constexpr std::uint32_t kVersion = 1;

nn::MlpSpec actor_spec(const env::EnvConfig& env_cfg, const std::vector<int>& hidden) {
  nn::MlpSpec spec;
  spec.input_dim = env_cfg.obs_dim();
  spec.hidden_dims = hidden;
  spec.output_dim = env_cfg.action_dim();
  spec.output_activation = nn::Activation::kTanh;
  return spec;
}

Dataset from_stream(const env::EnvConfig& env_cfg,
                    const std::vector<Transition>& stream) {
  const int n = env_cfg.n_agents;
  Dataset d;
  d.obs.resize(n);
  d.act.resize(n);
  d.rew.resize(n);
  d.next_obs.resize(n);
  const auto t_count = static_cast<Eigen::Index>(stream.size());
  for (int i = 0; i < n; ++i) {
    d.obs[i].resize(env_cfg.obs_dim(), t_count);
    d.act[i].resize(env_cfg.action_dim(), t_count);
    d.rew[i].resize(t_count);
    d.next_obs[i].resize(env_cfg.obs_dim(), t_count);
  }
  d.done.resize(t_count);
  for (Eigen::Index t = 0; t < t_count; ++t) {
    const Transition& tr = stream[static_cast<std::size_t>(t)];
    for (int i = 0; i < n; ++i) {
      d.obs[i].col(t) = tr.obs[static_cast<std::size_t>(i)];
      d.act[i].col(t) = tr.act[static_cast<std::size_t>(i)];
      d.rew[i](t) = tr.rew(i);
      d.next_obs[i].col(t) = tr.next_obs[static_cast<std::size_t>(i)];
    }
    d.done(t) = tr.done ? 1.0 : 0.0;
  }
  return d;
}

// Mean return (over agents, per episode) of the episodes fully contained in
// the stream.
double mean_episode_return(const env::EnvConfig& env_cfg,
                           const std::vector<Transition>& stream) {
  double total = 0.0;
  double episode = 0.0;
  int episodes = 0;
  for (const Transition& tr : stream) {
    episode += tr.rew.mean();
    if (tr.done) {
      total += episode;
      episode = 0.0;
      ++episodes;
    }
  }
  return episodes > 0 ? total / episodes : 0.0;
}

}  // namespace

std::string tier_name(QualityTier t) {
  switch (t) {
    case QualityTier::kRandom:
      return "random";
    case QualityTier::kMedium:
      return "medium";
    case QualityTier::kMediumReplay:
      return "medium_replay";
    case QualityTier::kExpert:
      return "expert";
  }
  throw ContractError("unknown quality tier");
}

QualityTier tier_from_name(const std::string& name) {
  if (name == "random") return QualityTier::kRandom;
  if (name == "medium") return QualityTier::kMedium;
  if (name == "medium_replay") return QualityTier::kMediumReplay;
  if (name == "expert") return QualityTier::kExpert;
  throw ConfigError("unknown quality tier: " + name);
}

void Dataset::validate() const {
  contract_check(!obs.empty(), "Dataset: no agents");
  const auto n = obs.size();
  contract_check(act.size() == n && rew.size() == n && next_obs.size() == n,
                 "Dataset: per-agent column groups inconsistent");
  const auto t_count = done.size();
  for (std::size_t i = 0; i < n; ++i) {
    contract_check(obs[i].cols() == t_count && act[i].cols() == t_count &&
                       rew[i].size() == t_count && next_obs[i].cols() == t_count,
                   "Dataset: column lengths differ");
    contract_check(obs[i].rows() == next_obs[i].rows(),
                   "Dataset: obs/next_obs dims differ");
    contract_check((act[i].array() >= -1.0).all() && (act[i].array() <= 1.0).all(),
                   "Dataset: actions out of [-1,1]");
  }
  contract_check(meta.sample_count == static_cast<std::uint64_t>(t_count),
                 "Dataset: metadata sample count does not match columns");
}

double normalized_score(double s, const ScoreTable& table) {
  if (table.s_expert == table.s_random)
    throw ConfigError("normalized_score: s_expert equals s_random");
  return 100.0 * (s - table.s_random) / (table.s_expert - table.s_random);
}

Dataset generate_dataset(const env::EnvConfig& env_cfg, QualityTier tier,
                         std::int64_t n_samples, std::uint64_t seed,
                         const BehaviorSource& behavior) {
  env_cfg.validate();
  contract_check(n_samples >= 1, "generate_dataset: n_samples must be >= 1");

  if (tier == QualityTier::kMediumReplay) {
    if (behavior.recording == nullptr)
      throw ConfigError(
          "generate_dataset: medium_replay tier needs a recorded online run");
    const ReplayRecording& rec = *behavior.recording;
    if (rec.medium_cross_transition < 0)
      throw ConfigError(
          "generate_dataset: recording never reached the medium threshold");
    const auto take = std::min<std::int64_t>(
        {rec.medium_cross_transition,
         static_cast<std::int64_t>(rec.stream.size()), n_samples});
    if (take < 1) throw ConfigError("generate_dataset: empty replay recording");
    std::vector<Transition> slice(rec.stream.begin(), rec.stream.begin() + take);
    Dataset d = from_stream(env_cfg, slice);
    d.meta.env = env_cfg;
    d.meta.tier = tier;
    d.meta.behavior = "online replay stream until first medium-threshold evaluation";
    d.meta.sample_count = static_cast<std::uint64_t>(take);
    d.meta.seed = seed;
    d.meta.behavior_return = mean_episode_return(env_cfg, slice);
    d.validate();
    return d;
  }

  BehaviorPolicy policy;
  if (tier == QualityTier::kRandom) {
    // Fresh untrained policy drawn from the seed.
    Rng init = Rng::stream(seed, rng_tag::kInit);
    for (int i = 0; i < env_cfg.n_agents; ++i)
      policy.actors.push_back(
          nn::MlpParams::random_init(actor_spec(env_cfg, {64, 64}), init));
    policy.noise_std = 0.1;
  } else {
    if (!behavior.policy.has_value())
      throw ConfigError("generate_dataset: " + tier_name(tier) +
                        " tier needs a behavior policy checkpoint");
    policy = *behavior.policy;
    contract_check(static_cast<int>(policy.actors.size()) == env_cfg.n_agents,
                   "generate_dataset: one actor per agent required");
  }

  std::vector<Transition> stream;
  stream.reserve(static_cast<std::size_t>(n_samples));
  auto [state, obs] = env::reset(env_cfg, Rng::stream(seed, rng_tag::kDataGen).next_u64());
  Rng noise = Rng::stream(seed, rng_tag::kExplore);
  while (static_cast<std::int64_t>(stream.size()) < n_samples) {
    std::vector<Eigen::VectorXd> actions(static_cast<std::size_t>(env_cfg.n_agents));
    for (int i = 0; i < env_cfg.n_agents; ++i) {
      Eigen::VectorXd a = nn::mlp_forward(policy.actors[static_cast<std::size_t>(i)],
                                          obs[static_cast<std::size_t>(i)]);
      for (Eigen::Index c = 0; c < a.size(); ++c)
        a(c) = std::clamp(a(c) + noise.normal(0.0, policy.noise_std), -1.0, 1.0);
      actions[static_cast<std::size_t>(i)] = std::move(a);
    }
    const auto res = env::step(env_cfg, state, actions);
    Transition tr;
    tr.obs = obs;
    tr.act = actions;
    tr.rew = res.rewards;
    tr.next_obs = res.observations;
    tr.done = res.done;
    stream.push_back(std::move(tr));
    if (res.done)
      obs = env::reset_next(env_cfg, state);
    else
      obs = res.observations;
  }

  Dataset d = from_stream(env_cfg, stream);
  d.meta.env = env_cfg;
  d.meta.tier = tier;
  d.meta.behavior = tier == QualityTier::kRandom
                        ? "untrained policy rollouts with gaussian action noise"
                        : tier_name(tier) + " snapshot rollouts with gaussian action noise";
  d.meta.sample_count = static_cast<std::uint64_t>(n_samples);
  d.meta.seed = seed;
  d.meta.behavior_return = mean_episode_return(env_cfg, stream);
  d.validate();
  return d;
}

Dataset subsample(const Dataset& d, double fraction, std::uint64_t seed) {
  contract_check(fraction > 0.0 && fraction <= 1.0,
                 "subsample: fraction must be in (0,1]");
  const auto total = d.size();
  const auto keep = static_cast<std::int64_t>(
      std::floor(fraction * static_cast<double>(total)));
  if (keep < 1) throw ConfigError("subsample: fraction keeps no samples");

  // Partial Fisher-Yates over the index range.
  std::vector<std::int64_t> idx(static_cast<std::size_t>(total));
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng = Rng::stream(seed, rng_tag::kSubsample);
  for (std::int64_t i = 0; i < keep; ++i) {
    const std::int64_t j = i + rng.uniform_int(total - i);
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
  }
  idx.resize(static_cast<std::size_t>(keep));

  Dataset out;
  out.meta = d.meta;
  out.meta.sample_count = static_cast<std::uint64_t>(keep);
  out.meta.seed = seed;
  out.meta.behavior += " (subsampled " + io::format_double(fraction) + ")";
  const int n = d.n_agents();
  out.obs.resize(n);
  out.act.resize(n);
  out.rew.resize(n);
  out.next_obs.resize(n);
  for (int i = 0; i < n; ++i) {
    out.obs[i].resize(d.obs[i].rows(), keep);
    out.act[i].resize(d.act[i].rows(), keep);
    out.rew[i].resize(keep);
    out.next_obs[i].resize(d.next_obs[i].rows(), keep);
  }
  out.done.resize(keep);
  for (std::int64_t t = 0; t < keep; ++t) {
    const auto src = idx[static_cast<std::size_t>(t)];
    for (int i = 0; i < n; ++i) {
      out.obs[i].col(t) = d.obs[i].col(src);
      out.act[i].col(t) = d.act[i].col(src);
      out.rew[i](t) = d.rew[i](src);
      out.next_obs[i].col(t) = d.next_obs[i].col(src);
    }
    out.done(t) = d.done(src);
  }
  out.validate();
  return out;
}

std::string encode_dataset(const Dataset& d) {
  d.validate();
  io::BinaryWriter w;
  w.bytes(std::string(kMagic, 4));
  w.u32(kVersion);

  std::map<std::string, std::string> meta;
  meta["env_variant"] = env::variant_name(d.meta.env.variant);
  meta["n_agents"] = std::to_string(d.meta.env.n_agents);
  meta["episode_len"] = std::to_string(d.meta.env.episode_len);
  meta["world_halfwidth"] = io::format_double(d.meta.env.world_halfwidth);
  meta["collision_radius"] = io::format_double(d.meta.env.collision_radius);
  meta["collision_penalty"] = io::format_double(d.meta.env.collision_penalty);
  meta["max_speed"] = io::format_double(d.meta.env.max_speed);
  meta["dt"] = io::format_double(d.meta.env.dt);
  meta["tier"] = tier_name(d.meta.tier);
  meta["behavior"] = d.meta.behavior;
  meta["sample_count"] = std::to_string(d.meta.sample_count);
  meta["seed"] = std::to_string(d.meta.seed);
  meta["behavior_return"] = io::format_double(d.meta.behavior_return);
  meta["joint_actions"] = d.meta.joint_actions ? "1" : "0";
  meta["obs_dim"] = std::to_string(d.obs_dim());
  meta["act_dim"] = std::to_string(d.act_dim());
  w.u32(static_cast<std::uint32_t>(meta.size()));
  for (const auto& [k, v] : meta) {
    w.tagged_string(k);
    w.tagged_string(v);
  }

  const auto block = [&w](char tag, const double* data, std::size_t count) {
    w.u32(static_cast<std::uint32_t>(tag));
    w.u64(count);
    w.f64_block(data, count);
  };
  for (int i = 0; i < d.n_agents(); ++i) {
    block('O', d.obs[i].data(), static_cast<std::size_t>(d.obs[i].size()));
    block('A', d.act[i].data(), static_cast<std::size_t>(d.act[i].size()));
    block('R', d.rew[i].data(), static_cast<std::size_t>(d.rew[i].size()));
    block('N', d.next_obs[i].data(), static_cast<std::size_t>(d.next_obs[i].size()));
  }
  block('D', d.done.data(), static_cast<std::size_t>(d.done.size()));
  w.u64(d.meta.sample_count);
  return w.buffer();
}

Dataset decode_dataset(const std::string& bytes) {
  io::BinaryReader r(bytes);
  r.section("dataset magic");
  char magic[4];
  for (char& c : magic) c = static_cast<char>(r.u8());
  if (std::string(magic, 4) != std::string(kMagic, 4))
    throw IoError("dataset: bad magic, not a dataset file");
  const std::uint32_t version = r.u32();
  if (version != kVersion)
    throw IoError("dataset: unsupported version " + std::to_string(version));

  r.section("dataset metadata");
  std::map<std::string, std::string> meta;
  const std::uint32_t n_pairs = r.u32();
  for (std::uint32_t i = 0; i < n_pairs; ++i) {
    std::string k = r.tagged_string();
    meta[k] = r.tagged_string();
  }
  const auto need = [&meta](const std::string& key) -> const std::string& {
    auto it = meta.find(key);
    if (it == meta.end())
      throw IoError("dataset: metadata key missing: " + key);
    return it->second;
  };

  Dataset d;
  d.meta.env.variant = env::variant_from_name(need("env_variant"));
  d.meta.env.n_agents = std::stoi(need("n_agents"));
  d.meta.env.episode_len = std::stoi(need("episode_len"));
  d.meta.env.world_halfwidth = std::stod(need("world_halfwidth"));
  d.meta.env.collision_radius = std::stod(need("collision_radius"));
  d.meta.env.collision_penalty = std::stod(need("collision_penalty"));
  d.meta.env.max_speed = std::stod(need("max_speed"));
  d.meta.env.dt = std::stod(need("dt"));
  d.meta.tier = tier_from_name(need("tier"));
  d.meta.behavior = need("behavior");
  d.meta.sample_count = std::stoull(need("sample_count"));
  d.meta.seed = std::stoull(need("seed"));
  d.meta.behavior_return = std::stod(need("behavior_return"));
  d.meta.joint_actions = need("joint_actions") == "1";
  const int obs_dim = std::stoi(need("obs_dim"));
  const int act_dim = std::stoi(need("act_dim"));
  const int n = d.meta.env.n_agents;
  const auto t_count = static_cast<Eigen::Index>(d.meta.sample_count);

  const auto read_block = [&r](char tag, const std::string& name, double* out,
                               std::size_t count) {
    r.section(name);
    const auto got = static_cast<char>(r.u32());
    if (got != tag)
      throw IoError("dataset: expected block '" + std::string(1, tag) +
                    "' in section '" + name + "', found '" + std::string(1, got) +
                    "'");
    const std::uint64_t stored = r.u64();
    if (stored != count)
      throw IoError("dataset: block '" + name + "' holds " +
                    std::to_string(stored) + " values, expected " +
                    std::to_string(count));
    r.f64_block(out, count);
  };

  d.obs.resize(n);
  d.act.resize(n);
  d.rew.resize(n);
  d.next_obs.resize(n);
  for (int i = 0; i < n; ++i) {
    const std::string suffix = " (agent " + std::to_string(i) + ")";
    d.obs[i].resize(obs_dim, t_count);
    read_block('O', "obs" + suffix, d.obs[i].data(),
               static_cast<std::size_t>(d.obs[i].size()));
    d.act[i].resize(act_dim, t_count);
    read_block('A', "act" + suffix, d.act[i].data(),
               static_cast<std::size_t>(d.act[i].size()));
    d.rew[i].resize(t_count);
    read_block('R', "rew" + suffix, d.rew[i].data(),
               static_cast<std::size_t>(d.rew[i].size()));
    d.next_obs[i].resize(obs_dim, t_count);
    read_block('N', "next_obs" + suffix, d.next_obs[i].data(),
               static_cast<std::size_t>(d.next_obs[i].size()));
  }
  d.done.resize(t_count);
  read_block('D', "done", d.done.data(), static_cast<std::size_t>(d.done.size()));

  r.section("dataset footer");
  const std::uint64_t footer = r.u64();
  if (footer != d.meta.sample_count)
    throw IoError("dataset: footer count " + std::to_string(footer) +
                  " does not match metadata " +
                  std::to_string(d.meta.sample_count));
  if (!r.at_end()) throw IoError("dataset: trailing bytes after footer");
  d.validate();
  return d;
}

void save_dataset(const Dataset& d, const std::string& path) {
  io::write_file_atomic(path, encode_dataset(d));
}

Dataset load_dataset(const std::string& path) {
  return decode_dataset(io::read_file(path));
}

}  // namespace omar::data
