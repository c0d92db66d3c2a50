#include "omar/config.hpp"

#include <json.hpp>
#include <set>

#include "omar/errors.hpp"
#include "omar/io_util.hpp"

namespace omar::cfg {

namespace {

using nlohmann::json;

// Fail-closed object access: every key must be consumed by the schema.
class StrictObject {
 public:
  StrictObject(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object())
      throw ConfigError("config: '" + where_ + "' must be an object");
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key);
  }

  const json* get(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key()))
        throw ConfigError("config: unknown key '" + it.key() + "' in '" + where_ +
                          "'");
  }

  const std::string& where() const { return where_; }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

template <typename T>
void read_number(StrictObject& obj, const std::string& key, T& out) {
  if (const json* v = obj.get(key)) {
    if (!v->is_number())
      throw ConfigError("config: '" + obj.where() + "." + key + "' must be a number");
    out = v->get<T>();
  }
}

void read_bool(StrictObject& obj, const std::string& key, bool& out) {
  if (const json* v = obj.get(key)) {
    if (!v->is_boolean())
      throw ConfigError("config: '" + obj.where() + "." + key + "' must be a bool");
    out = v->get<bool>();
  }
}

void read_string(StrictObject& obj, const std::string& key, std::string& out) {
  if (const json* v = obj.get(key)) {
    if (!v->is_string())
      throw ConfigError("config: '" + obj.where() + "." + key + "' must be a string");
    out = v->get<std::string>();
  }
}

void read_int_list(StrictObject& obj, const std::string& key, std::vector<int>& out) {
  if (const json* v = obj.get(key)) {
    if (!v->is_array())
      throw ConfigError("config: '" + obj.where() + "." + key + "' must be an array");
    out.clear();
    for (const auto& e : *v) {
      if (!e.is_number_integer())
        throw ConfigError("config: '" + obj.where() + "." + key +
                          "' must hold integers");
      out.push_back(e.get<int>());
    }
  }
}

void parse_env(const json& j, env::EnvConfig& env) {
  StrictObject obj(j, "env");
  std::string variant = env::variant_name(env.variant);
  read_string(obj, "variant", variant);
  env.variant = env::variant_from_name(variant);
  read_number(obj, "n_agents", env.n_agents);
  read_number(obj, "episode_len", env.episode_len);
  read_number(obj, "world_halfwidth", env.world_halfwidth);
  read_number(obj, "collision_radius", env.collision_radius);
  read_number(obj, "collision_penalty", env.collision_penalty);
  read_number(obj, "max_speed", env.max_speed);
  read_number(obj, "dt", env.dt);
  read_bool(obj, "strict_actions", env.strict_actions);
  obj.finish();
}

void parse_online(const json& j, OnlineSection& online) {
  StrictObject obj(j, "dataset.online");
  read_number(obj, "steps", online.steps);
  read_number(obj, "update_every", online.update_every);
  read_number(obj, "lr", online.lr);
  read_number(obj, "explore_noise", online.explore_noise);
  read_number(obj, "eval_interval", online.eval_interval);
  read_number(obj, "batch_size", online.batch_size);
  read_int_list(obj, "hidden_dims", online.hidden_dims);
  obj.finish();
}

void parse_dataset(const json& j, DatasetSection& ds) {
  StrictObject obj(j, "dataset");
  std::string tier = data::tier_name(ds.tier);
  read_string(obj, "tier", tier);
  ds.tier = data::tier_from_name(tier);
  read_number(obj, "size", ds.size);
  read_string(obj, "path", ds.path);
  read_number(obj, "gen_seed", ds.gen_seed);
  read_number(obj, "rollout_noise", ds.rollout_noise);
  if (const json* v = obj.get("online")) parse_online(*v, ds.online);
  obj.finish();
}

void parse_sampler(const json& j, sampler::SamplerConfig& s) {
  StrictObject obj(j, "sampler");
  std::string variant = sampler::variant_name(s.variant);
  read_string(obj, "variant", variant);
  s.variant = sampler::variant_from_name(variant);
  read_number(obj, "iterations", s.iterations);
  read_number(obj, "population", s.population);
  read_number(obj, "temperature", s.temperature);
  read_number(obj, "init_mean", s.init_mean);
  read_number(obj, "init_std", s.init_std);
  read_number(obj, "elite_fraction", s.elite_fraction);
  std::string std_mode = s.std_mode == sampler::StdMode::kNormalized ? "normalized"
                                                                     : "literal";
  read_string(obj, "std_mode", std_mode);
  if (std_mode == "normalized")
    s.std_mode = sampler::StdMode::kNormalized;
  else if (std_mode == "literal")
    s.std_mode = sampler::StdMode::kLiteral;
  else
    throw ConfigError("config: sampler.std_mode must be normalized or literal");
  obj.finish();
}

void parse_train(const json& j, algo::TrainConfig& t, bool& tau_given) {
  StrictObject obj(j, "train");
  read_number(obj, "gamma", t.gamma);
  read_number(obj, "rho", t.rho);
  read_number(obj, "batch_size", t.batch_size);
  read_number(obj, "lr", t.lr);
  read_number(obj, "actor_lr", t.actor_lr);
  read_number(obj, "alpha", t.alpha);
  if (const json* v = obj.get("tau")) {
    if (!v->is_number()) throw ConfigError("config: 'train.tau' must be a number");
    t.tau = v->get<double>();
    tau_given = true;
  }
  std::string actor_mode = algo::actor_mode_name(t.actor_mode);
  read_string(obj, "actor_mode", actor_mode);
  t.actor_mode = algo::actor_mode_from_name(actor_mode);
  std::string critic_mode = algo::critic_mode_name(t.critic_mode);
  read_string(obj, "critic_mode", critic_mode);
  t.critic_mode = algo::critic_mode_from_name(critic_mode);
  read_number(obj, "target_noise_std", t.target_noise_std);
  read_number(obj, "target_noise_clip", t.target_noise_clip);
  read_number(obj, "ood_samples", t.ood_samples);
  read_number(obj, "ood_noise_std", t.ood_noise_std);
  read_number(obj, "total_steps", t.total_steps);
  read_number(obj, "eval_interval", t.eval_interval);
  read_number(obj, "eval_episodes", t.eval_episodes);
  read_number(obj, "actor_updates", t.actor_updates);
  read_int_list(obj, "hidden_dims", t.hidden_dims);
  read_number(obj, "explore_noise_std", t.explore_noise_std);
  read_number(obj, "replay_capacity", t.replay_capacity);
  read_number(obj, "update_every", t.update_every);
  obj.finish();
}

std::string replace_all(std::string s, const std::string& what,
                        const std::string& with) {
  std::size_t at = 0;
  while ((at = s.find(what, at)) != std::string::npos) {
    s.replace(at, what.size(), with);
    at += with.size();
  }
  return s;
}

}  // namespace

double tier_default_tau(data::QualityTier tier) {
  switch (tier) {
    case data::QualityTier::kRandom:
    case data::QualityTier::kMediumReplay:
      return 0.5;
    case data::QualityTier::kMedium:
      return 0.7;
    case data::QualityTier::kExpert:
      return 0.9;
  }
  throw ContractError("unknown tier");
}

std::string RunConfig::dataset_path() const {
  std::string p = replace_all(dataset.path, "{tier}", data::tier_name(dataset.tier));
  return replace_all(p, "{n}", std::to_string(env.n_agents));
}

RunConfig parse_run_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  RunConfig cfg;
  StrictObject obj(j, "<root>");
  bool tau_given = false;
  if (const json* v = obj.get("env")) parse_env(*v, cfg.env);
  if (const json* v = obj.get("dataset")) parse_dataset(*v, cfg.dataset);
  if (const json* v = obj.get("train")) parse_train(*v, cfg.train, tau_given);
  if (const json* v = obj.get("sampler")) parse_sampler(*v, cfg.train.sampler);
  if (const json* v = obj.get("seeds")) {
    if (!v->is_array()) throw ConfigError("config: 'seeds' must be an array");
    cfg.seeds.clear();
    for (const auto& e : *v) {
      if (!e.is_number_integer() || e.get<std::int64_t>() < 0)
        throw ConfigError("config: 'seeds' must hold non-negative integers");
      cfg.seeds.push_back(e.get<std::uint64_t>());
    }
    if (cfg.seeds.empty()) throw ConfigError("config: 'seeds' must be nonempty");
  }
  read_string(obj, "output_dir", cfg.output_dir);
  read_number(obj, "workers", cfg.workers);
  obj.finish();

  if (!tau_given) cfg.train.tau = tier_default_tau(cfg.dataset.tier);
  cfg.env.validate();
  cfg.train.validate();
  if (cfg.workers < 1) throw ConfigError("config: workers must be >= 1");
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  return parse_run_config(io::read_file(path));
}

std::string resolved_config_json(const RunConfig& cfg) {
  json j;
  j["env"] = {{"variant", env::variant_name(cfg.env.variant)},
              {"n_agents", cfg.env.n_agents},
              {"episode_len", cfg.env.episode_len},
              {"world_halfwidth", cfg.env.world_halfwidth},
              {"collision_radius", cfg.env.collision_radius},
              {"collision_penalty", cfg.env.collision_penalty},
              {"max_speed", cfg.env.max_speed},
              {"dt", cfg.env.dt},
              {"strict_actions", cfg.env.strict_actions}};
  j["dataset"] = {{"tier", data::tier_name(cfg.dataset.tier)},
                  {"size", cfg.dataset.size},
                  {"path", cfg.dataset.path},
                  {"gen_seed", cfg.dataset.gen_seed},
                  {"rollout_noise", cfg.dataset.rollout_noise},
                  {"online",
                   {{"steps", cfg.dataset.online.steps},
                    {"update_every", cfg.dataset.online.update_every},
                    {"lr", cfg.dataset.online.lr},
                    {"explore_noise", cfg.dataset.online.explore_noise},
                    {"eval_interval", cfg.dataset.online.eval_interval},
                    {"batch_size", cfg.dataset.online.batch_size},
                    {"hidden_dims", cfg.dataset.online.hidden_dims}}}};
  const auto& t = cfg.train;
  j["train"] = {{"gamma", t.gamma},
                {"rho", t.rho},
                {"batch_size", t.batch_size},
                {"lr", t.lr},
                {"actor_lr", t.actor_lr},
                {"alpha", t.alpha},
                {"tau", t.tau},
                {"actor_mode", algo::actor_mode_name(t.actor_mode)},
                {"critic_mode", algo::critic_mode_name(t.critic_mode)},
                {"target_noise_std", t.target_noise_std},
                {"target_noise_clip", t.target_noise_clip},
                {"ood_samples", t.ood_samples},
                {"ood_noise_std", t.ood_noise_std},
                {"total_steps", t.total_steps},
                {"eval_interval", t.eval_interval},
                {"eval_episodes", t.eval_episodes},
                {"actor_updates", t.actor_updates},
                {"hidden_dims", t.hidden_dims},
                {"explore_noise_std", t.explore_noise_std},
                {"replay_capacity", t.replay_capacity},
                {"update_every", t.update_every}};
  const auto& s = cfg.train.sampler;
  j["sampler"] = {
      {"variant", sampler::variant_name(s.variant)},
      {"iterations", s.iterations},
      {"population", s.population},
      {"temperature", s.temperature},
      {"init_mean", s.init_mean},
      {"init_std", s.init_std},
      {"elite_fraction", s.elite_fraction},
      {"std_mode",
       s.std_mode == sampler::StdMode::kNormalized ? "normalized" : "literal"}};
  j["seeds"] = cfg.seeds;
  j["output_dir"] = cfg.output_dir;
  j["workers"] = cfg.workers;
  return j.dump(2) + "\n";
}

}  // namespace omar::cfg
