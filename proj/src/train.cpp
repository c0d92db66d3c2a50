#include "omar/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "omar/errors.hpp"

namespace omar::algo {

namespace {

std::vector<std::int64_t> sample_indices(std::int64_t n, int batch, Rng& rng) {
  std::vector<std::int64_t> idx(static_cast<std::size_t>(batch));
  for (auto& i : idx) i = rng.uniform_int(n);
  return idx;
}

std::vector<nn::MlpParams> actor_snapshot(const std::vector<AgentLearner>& learners) {
  std::vector<nn::MlpParams> actors;
  actors.reserve(learners.size());
  for (const auto& l : learners) actors.push_back(l.actor);
  return actors;
}

struct IntervalAccum {
  double critic_loss = 0, penalty = 0, actor_loss = 0, rect = 0, improve = 0;
  std::int64_t samples = 0;

  void reset() { *this = IntervalAccum{}; }
};

// One gradient round for one agent; shared by the offline and online loops.
void update_agent(const Batch& batch, std::vector<AgentLearner>& learners,
                  const TrainConfig& cfg, Rng& target_noise, Rng& ood_rng,
                  Rng& sampler_rng, IntervalAccum& acc) {
  AgentLearner& self = learners[static_cast<std::size_t>(batch.agent)];
  const Eigen::VectorXd y = td3_target(batch, learners, cfg, target_noise);
  OodActions ood;
  if (cfg.alpha > 0.0) ood = draw_ood_actions(batch, self, cfg, ood_rng);
  const CriticLossResult closs = cql_critic_loss(batch, y, ood, learners, cfg);
  nn::adam_step(self.critic1, closs.grads1, self.critic1_opt, cfg.lr);
  nn::adam_step(self.critic2, closs.grads2, self.critic2_opt, cfg.lr);

  double actor_loss_sum = 0.0, rect_sum = 0.0, improve_sum = 0.0;
  for (int u = 0; u < cfg.actor_updates; ++u) {
    ActorLossResult aloss;
    double improve = 0.0;
    switch (cfg.actor_mode) {
      case ActorMode::kOmar: {
        if (cfg.tau > 0.0) {
          const Eigen::MatrixXd pi = nn::mlp_forward_batch(self.actor, batch.obs);
          const auto cand = sampler::select_candidates(
              make_candidate_evaluator(batch, learners, cfg), pi, cfg.sampler,
              sampler_rng);
          improve = (cand.action_q - cand.policy_q).mean();
          aloss = rectified_actor_loss(batch, &cand.actions, cfg.tau, learners, cfg);
        } else {
          // tau = 0 reduces to the plain policy-gradient objective; the
          // candidate search would not contribute to the update.
          aloss = rectified_actor_loss(batch, nullptr, 0.0, learners, cfg);
        }
        break;
      }
      case ActorMode::kMatd3bc:
        aloss = rectified_actor_loss(batch, &batch.act, cfg.tau, learners, cfg);
        break;
      case ActorMode::kMacql:
      case ActorMode::kOnline:
        aloss = rectified_actor_loss(batch, nullptr, 0.0, learners, cfg);
        break;
    }
    nn::adam_step(self.actor, aloss.grads, self.actor_opt, cfg.effective_actor_lr());
    actor_loss_sum += aloss.loss;
    rect_sum += aloss.rect_dist;
    improve_sum += improve;
  }
  acc.actor_loss += actor_loss_sum / cfg.actor_updates;
  acc.rect += rect_sum / cfg.actor_updates;
  acc.improve += improve_sum / cfg.actor_updates;

  nn::soft_update(self.actor_target, self.actor, cfg.rho);
  nn::soft_update(self.critic1_target, self.critic1, cfg.rho);
  nn::soft_update(self.critic2_target, self.critic2, cfg.rho);

  acc.critic_loss += 0.5 * (closs.loss1 + closs.loss2);
  acc.penalty += 0.5 * (closs.penalty1 + closs.penalty2);
  acc.samples += 1;
}

TrainMetricsRow finish_row(std::int64_t step, const IntervalAccum& acc,
                           const EvalStats& eval) {
  TrainMetricsRow row;
  row.step = step;
  const double n = std::max<std::int64_t>(acc.samples, 1);
  row.critic_loss = acc.critic_loss / n;
  row.cql_penalty = acc.penalty / n;
  row.actor_loss = acc.actor_loss / n;
  row.rect_dist = acc.rect / n;
  row.cand_improve = acc.improve / n;
  row.eval_mean = eval.mean;
  row.eval_std = eval.stddev;
  return row;
}

}  // namespace

TrainResult train_run(const data::Dataset& dataset, const TrainConfig& cfg,
                      std::uint64_t seed) {
  cfg.validate();
  dataset.validate();
  contract_check(cfg.actor_mode != ActorMode::kOnline,
                 "train_run: online mode is handled by online_train_run");
  if (cfg.batch_size > dataset.size())
    throw ConfigError("train_run: batch_size (" + std::to_string(cfg.batch_size) +
                      ") exceeds dataset size (" + std::to_string(dataset.size()) +
                      ")");
  if (cfg.critic_mode == CriticMode::kCentralized && !dataset.meta.joint_actions)
    throw ConfigError("train_run: centralized critics need joint actions");

  const int n = dataset.n_agents();
  const int critic_in =
      critic_input_dim(dataset.obs_dim(), dataset.act_dim(), n, cfg.critic_mode);
  Rng init = Rng::stream(seed, rng_tag::kInit);
  std::vector<AgentLearner> learners;
  learners.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    learners.push_back(AgentLearner::init(dataset.obs_dim(), dataset.act_dim(),
                                          critic_in, cfg.hidden_dims, init));

  Rng minibatch = Rng::stream(seed, rng_tag::kMinibatch);
  Rng target_noise = Rng::stream(seed, rng_tag::kTargetNoise);
  Rng ood_rng = Rng::stream(seed, rng_tag::kOod);
  Rng sampler_rng = Rng::stream(seed, rng_tag::kSampler);

  TrainResult result;
  IntervalAccum acc;
  std::int64_t eval_ordinal = 0;
  double update_seconds = 0.0;
  const auto run_start = std::chrono::steady_clock::now();

  for (std::int64_t t = 1; t <= cfg.total_steps; ++t) {
    const auto t0 = std::chrono::steady_clock::now();
    for (int i = 0; i < n; ++i) {
      const auto idx = sample_indices(dataset.size(), cfg.batch_size, minibatch);
      const Batch batch = gather_batch(dataset, idx, i, cfg.critic_mode);
      update_agent(batch, learners, cfg, target_noise, ood_rng, sampler_rng, acc);
    }
    update_seconds += std::chrono::duration<double>(
                          std::chrono::steady_clock::now() - t0)
                          .count();
    if (t % cfg.eval_interval == 0 || t == cfg.total_steps) {
      const EvalStats eval = evaluate_policy(
          dataset.meta.env, actor_snapshot(learners), cfg.eval_episodes,
          Rng::stream(seed, rng_tag::kEval, static_cast<std::uint64_t>(eval_ordinal))
              .next_u64());
      ++eval_ordinal;
      result.metrics.push_back(finish_row(t, acc, eval));
      acc.reset();
    }
  }

  result.learners = std::move(learners);
  result.ms_per_update =
      cfg.total_steps > 0 ? 1000.0 * update_seconds / static_cast<double>(cfg.total_steps)
                          : 0.0;
  result.total_seconds = std::chrono::duration<double>(
                             std::chrono::steady_clock::now() - run_start)
                             .count();
  return result;
}

ReplayBuffer::ReplayBuffer(const env::EnvConfig& env_cfg, std::int64_t capacity)
    : capacity_(capacity) {
  contract_check(capacity >= 1, "ReplayBuffer: capacity must be >= 1");
  const int nv = env_cfg.n_agents;
  store_.meta.env = env_cfg;
  store_.meta.joint_actions = true;
  store_.obs.assign(nv, Eigen::MatrixXd::Zero(env_cfg.obs_dim(), capacity));
  store_.act.assign(nv, Eigen::MatrixXd::Zero(env_cfg.action_dim(), capacity));
  store_.rew.assign(nv, Eigen::VectorXd::Zero(capacity));
  store_.next_obs.assign(nv, Eigen::MatrixXd::Zero(env_cfg.obs_dim(), capacity));
  store_.done = Eigen::VectorXd::Zero(capacity);
}

void ReplayBuffer::add(const data::Transition& t) {
  const int nv = static_cast<int>(store_.obs.size());
  for (int i = 0; i < nv; ++i) {
    store_.obs[i].col(next_) = t.obs[static_cast<std::size_t>(i)];
    store_.act[i].col(next_) = t.act[static_cast<std::size_t>(i)];
    store_.rew[i](next_) = t.rew(i);
    store_.next_obs[i].col(next_) = t.next_obs[static_cast<std::size_t>(i)];
  }
  store_.done(next_) = t.done ? 1.0 : 0.0;
  next_ = (next_ + 1) % capacity_;  // oldest entry overwritten when full
  size_ = std::min(size_ + 1, capacity_);
  inserted_ += 1;
}

Batch ReplayBuffer::gather(const std::vector<std::int64_t>& indices, int agent,
                           CriticMode mode) const {
  Batch b;
  const int nv = static_cast<int>(store_.obs.size());
  const int od = static_cast<int>(store_.obs[0].rows());
  const int ad = static_cast<int>(store_.act[0].rows());
  const auto batch = static_cast<Eigen::Index>(indices.size());
  b.agent = agent;
  b.n_agents = nv;
  b.obs.resize(od, batch);
  b.act.resize(ad, batch);
  b.next_obs.resize(od, batch);
  b.rew.resize(batch);
  b.done.resize(batch);
  for (Eigen::Index c = 0; c < batch; ++c) {
    const auto t = indices[static_cast<std::size_t>(c)];
    b.obs.col(c) = store_.obs[agent].col(t);
    b.act.col(c) = store_.act[agent].col(t);
    b.next_obs.col(c) = store_.next_obs[agent].col(t);
    b.rew(c) = store_.rew[agent](t);
    b.done(c) = store_.done(t);
  }
  if (mode == CriticMode::kCentralized) {
    b.all_obs.resize(nv * od, batch);
    b.all_act.resize(nv * ad, batch);
    b.all_next_obs.resize(nv * od, batch);
    for (Eigen::Index c = 0; c < batch; ++c) {
      const auto t = indices[static_cast<std::size_t>(c)];
      for (int j = 0; j < nv; ++j) {
        b.all_obs.block(j * od, c, od, 1) = store_.obs[j].col(t);
        b.all_act.block(j * ad, c, ad, 1) = store_.act[j].col(t);
        b.all_next_obs.block(j * od, c, od, 1) = store_.next_obs[j].col(t);
      }
    }
  }
  return b;
}

OnlineRunResult online_train_run(const env::EnvConfig& env_cfg,
                                 const TrainConfig& cfg, std::uint64_t seed,
                                 bool record_replay) {
  cfg.validate();
  env_cfg.validate();
  contract_check(cfg.actor_mode == ActorMode::kOnline,
                 "online_train_run: actor_mode must be online");

  const int n = env_cfg.n_agents;
  const int critic_in = critic_input_dim(env_cfg.obs_dim(), env_cfg.action_dim(),
                                         n, cfg.critic_mode);
  Rng init = Rng::stream(seed, rng_tag::kInit);
  std::vector<AgentLearner> learners;
  for (int i = 0; i < n; ++i)
    learners.push_back(AgentLearner::init(env_cfg.obs_dim(), env_cfg.action_dim(),
                                          critic_in, cfg.hidden_dims, init));

  // Online updates run the plain twin-critic objective.
  TrainConfig up_cfg = cfg;
  up_cfg.alpha = 0.0;

  Rng minibatch = Rng::stream(seed, rng_tag::kMinibatch);
  Rng target_noise = Rng::stream(seed, rng_tag::kTargetNoise);
  Rng ood_rng = Rng::stream(seed, rng_tag::kOod);
  Rng sampler_rng = Rng::stream(seed, rng_tag::kSampler);
  Rng explore = Rng::stream(seed, rng_tag::kExplore);

  ReplayBuffer buffer(env_cfg, std::min(cfg.replay_capacity, cfg.total_steps + 1));

  OnlineRunResult out;
  out.init_actors = actor_snapshot(learners);
  std::vector<std::vector<nn::MlpParams>> snapshots;  // per eval point
  IntervalAccum acc;

  std::int64_t eval_ordinal = 0;
  const auto run_eval = [&](std::int64_t step) {
    const EvalStats stats = evaluate_policy(
        env_cfg, actor_snapshot(learners), cfg.eval_episodes,
        Rng::stream(seed, rng_tag::kEval, static_cast<std::uint64_t>(eval_ordinal))
            .next_u64());
    ++eval_ordinal;
    out.eval_trace.push_back({step, stats.mean});
    snapshots.push_back(actor_snapshot(learners));
  };
  run_eval(0);
  out.s_random = out.eval_trace.front().mean_return;

  auto [state, obs] = env::reset(env_cfg, Rng::stream(seed, rng_tag::kDataGen).next_u64());
  double episode_return = 0.0;
  for (std::int64_t t = 1; t <= cfg.total_steps; ++t) {
    std::vector<Eigen::VectorXd> actions(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      Eigen::VectorXd a = nn::mlp_forward(learners[static_cast<std::size_t>(i)].actor,
                                          obs[static_cast<std::size_t>(i)]);
      for (Eigen::Index c = 0; c < a.size(); ++c)
        a(c) = std::clamp(a(c) + explore.normal(0.0, cfg.explore_noise_std), -1.0, 1.0);
      actions[static_cast<std::size_t>(i)] = std::move(a);
    }
    const auto res = env::step(env_cfg, state, actions);
    data::Transition tr;
    tr.obs = obs;
    tr.act = actions;
    tr.rew = res.rewards;
    tr.next_obs = res.observations;
    tr.done = res.done;
    buffer.add(tr);
    if (record_replay) out.recording.stream.push_back(tr);
    episode_return += res.rewards.mean();
    if (res.done) {
      out.recording.episode_returns.push_back(episode_return);
      episode_return = 0.0;
      obs = env::reset_next(env_cfg, state);
    } else {
      obs = res.observations;
    }

    if (buffer.size() >= cfg.batch_size && t % cfg.update_every == 0) {
      for (int i = 0; i < n; ++i) {
        const auto idx = sample_indices(buffer.size(), cfg.batch_size, minibatch);
        const Batch batch = buffer.gather(idx, i, cfg.critic_mode);
        update_agent(batch, learners, up_cfg, target_noise, ood_rng, sampler_rng,
                     acc);
      }
    }
    if (t % cfg.eval_interval == 0 || t == cfg.total_steps) run_eval(t);
  }

  out.expert_actors = actor_snapshot(learners);
  out.s_expert = out.eval_trace.back().mean_return;

  // Post-hoc snapshot selection along the evaluation trace.
  const double span = out.s_expert - out.s_random;
  if (span != 0.0) {
    std::int64_t fallback = -1;
    std::size_t fallback_idx = 0;
    for (std::size_t e = 0; e < out.eval_trace.size(); ++e) {
      const double progress = (out.eval_trace[e].mean_return - out.s_random) / span;
      if (progress >= 0.4 && out.medium_snapshot_step < 0) {
        if (progress <= 0.6) {
          out.medium_snapshot_step = out.eval_trace[e].step;
          out.medium_actors = snapshots[e];
          out.s_medium = out.eval_trace[e].mean_return;
        } else if (fallback < 0) {
          fallback = out.eval_trace[e].step;
          fallback_idx = e;
        }
      }
      if (progress >= 0.5 && out.recording.medium_cross_transition < 0)
        out.recording.medium_cross_transition = out.eval_trace[e].step;
    }
    if (out.medium_snapshot_step < 0 && fallback >= 0) {
      out.medium_snapshot_step = fallback;
      out.medium_actors = snapshots[fallback_idx];
      out.s_medium = out.eval_trace[fallback_idx].mean_return;
    }
  }
  return out;
}

}  // namespace omar::algo
