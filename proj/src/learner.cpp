#include "omar/learner.hpp"

#include <algorithm>
#include <cmath>

#include "omar/errors.hpp"

namespace omar::algo {

std::string actor_mode_name(ActorMode m) {
  switch (m) {
    case ActorMode::kOmar:
      return "omar";
    case ActorMode::kMacql:
      return "macql";
    case ActorMode::kMatd3bc:
      return "matd3bc";
    case ActorMode::kOnline:
      return "online";
  }
  throw ContractError("unknown actor mode");
}

ActorMode actor_mode_from_name(const std::string& name) {
  if (name == "omar") return ActorMode::kOmar;
  if (name == "macql") return ActorMode::kMacql;
  if (name == "matd3bc") return ActorMode::kMatd3bc;
  if (name == "online") return ActorMode::kOnline;
  throw ConfigError("unknown actor mode: " + name);
}

std::string critic_mode_name(CriticMode m) {
  return m == CriticMode::kDecentralized ? "decentralized" : "centralized";
}

CriticMode critic_mode_from_name(const std::string& name) {
  if (name == "decentralized") return CriticMode::kDecentralized;
  if (name == "centralized") return CriticMode::kCentralized;
  throw ConfigError("unknown critic mode: " + name);
}

void TrainConfig::validate() const {
  contract_check(gamma >= 0.0 && gamma < 1.0, "TrainConfig: gamma must be in [0,1)");
  contract_check(rho >= 0.0 && rho <= 1.0, "TrainConfig: rho must be in [0,1]");
  contract_check(tau >= 0.0 && tau <= 1.0, "TrainConfig: tau must be in [0,1]");
  contract_check(alpha >= 0.0, "TrainConfig: alpha must be >= 0");
  contract_check(batch_size >= 1, "TrainConfig: batch_size must be >= 1");
  contract_check(lr > 0.0, "TrainConfig: lr must be > 0");
  contract_check(ood_samples >= 1, "TrainConfig: ood_samples must be >= 1");
  contract_check(total_steps >= 0, "TrainConfig: total_steps must be >= 0");
  contract_check(eval_interval >= 1, "TrainConfig: eval_interval must be >= 1");
  contract_check(eval_episodes >= 1, "TrainConfig: eval_episodes must be >= 1");
  contract_check(actor_updates >= 1, "TrainConfig: actor_updates must be >= 1");
  contract_check(target_noise_std >= 0.0 && target_noise_clip >= 0.0,
                 "TrainConfig: target noise parameters must be >= 0");
  contract_check(update_every >= 1, "TrainConfig: update_every must be >= 1");
  contract_check(replay_capacity >= 1, "TrainConfig: replay_capacity must be >= 1");
  contract_check(!hidden_dims.empty(), "TrainConfig: hidden_dims must be nonempty");
  sampler.validate();
}

nn::MlpSpec make_actor_spec(int obs_dim, int act_dim,
                            const std::vector<int>& hidden_dims) {
  nn::MlpSpec spec;
  spec.input_dim = obs_dim;
  spec.hidden_dims = hidden_dims;
  spec.output_dim = act_dim;
  spec.output_activation = nn::Activation::kTanh;
  return spec;
}

nn::MlpSpec make_critic_spec(int input_dim, const std::vector<int>& hidden_dims) {
  nn::MlpSpec spec;
  spec.input_dim = input_dim;
  spec.hidden_dims = hidden_dims;
  spec.output_dim = 1;
  spec.output_activation = nn::Activation::kIdentity;
  return spec;
}

int critic_input_dim(int obs_dim, int act_dim, int n_agents, CriticMode mode) {
  return mode == CriticMode::kDecentralized
             ? obs_dim + act_dim
             : n_agents * (obs_dim + act_dim);
}

AgentLearner AgentLearner::init(int obs_dim, int act_dim, int critic_in_dim,
                                const std::vector<int>& hidden_dims, Rng& rng) {
  AgentLearner l;
  l.actor = nn::MlpParams::random_init(make_actor_spec(obs_dim, act_dim, hidden_dims), rng);
  l.critic1 = nn::MlpParams::random_init(make_critic_spec(critic_in_dim, hidden_dims), rng);
  l.critic2 = nn::MlpParams::random_init(make_critic_spec(critic_in_dim, hidden_dims), rng);
  l.actor_target = l.actor;
  l.critic1_target = l.critic1;
  l.critic2_target = l.critic2;
  l.actor_opt = nn::AdamState::for_params(l.actor);
  l.critic1_opt = nn::AdamState::for_params(l.critic1);
  l.critic2_opt = nn::AdamState::for_params(l.critic2);
  return l;
}

Batch gather_batch(const data::Dataset& d,
                   const std::vector<std::int64_t>& indices, int agent,
                   CriticMode mode) {
  contract_check(agent >= 0 && agent < d.n_agents(), "gather_batch: bad agent");
  if (mode == CriticMode::kCentralized && !d.meta.joint_actions)
    throw ConfigError(
        "centralized critics need a dataset that stores joint actions");
  const auto batch = static_cast<Eigen::Index>(indices.size());
  const int n = d.n_agents();
  const int od = d.obs_dim();
  const int ad = d.act_dim();

  Batch b;
  b.agent = agent;
  b.n_agents = n;
  b.obs.resize(od, batch);
  b.act.resize(ad, batch);
  b.next_obs.resize(od, batch);
  b.rew.resize(batch);
  b.done.resize(batch);
  for (Eigen::Index c = 0; c < batch; ++c) {
    const auto t = indices[static_cast<std::size_t>(c)];
    b.obs.col(c) = d.obs[agent].col(t);
    b.act.col(c) = d.act[agent].col(t);
    b.next_obs.col(c) = d.next_obs[agent].col(t);
    b.rew(c) = d.rew[agent](t);
    b.done(c) = d.done(t);
  }
  if (mode == CriticMode::kCentralized) {
    b.all_obs.resize(n * od, batch);
    b.all_act.resize(n * ad, batch);
    b.all_next_obs.resize(n * od, batch);
    for (Eigen::Index c = 0; c < batch; ++c) {
      const auto t = indices[static_cast<std::size_t>(c)];
      for (int j = 0; j < n; ++j) {
        b.all_obs.block(j * od, c, od, 1) = d.obs[j].col(t);
        b.all_act.block(j * ad, c, ad, 1) = d.act[j].col(t);
        b.all_next_obs.block(j * od, c, od, 1) = d.next_obs[j].col(t);
      }
    }
  }
  return b;
}

Eigen::MatrixXd assemble_critic_inputs(const Batch& b, CriticMode mode,
                                       const Eigen::MatrixXd& actions, int reps,
                                       bool next_side) {
  const auto batch = b.size();
  contract_check(reps >= 1 && actions.cols() == batch * reps,
                 "assemble_critic_inputs: candidate count mismatch");
  const auto ad = actions.rows();
  if (mode == CriticMode::kDecentralized) {
    const Eigen::MatrixXd& base = next_side ? b.next_obs : b.obs;
    Eigen::MatrixXd X(base.rows() + ad, actions.cols());
    for (Eigen::Index s = 0; s < batch; ++s)
      for (int k = 0; k < reps; ++k) {
        const Eigen::Index c = s * reps + k;
        X.block(0, c, base.rows(), 1) = base.col(s);
        X.block(base.rows(), c, ad, 1) = actions.col(c);
      }
    return X;
  }
  const Eigen::MatrixXd& base = next_side ? b.all_next_obs : b.all_obs;
  contract_check(base.size() > 0 && b.all_act.size() > 0,
                 "assemble_critic_inputs: batch lacks joint columns");
  Eigen::MatrixXd X(base.rows() + b.all_act.rows(), actions.cols());
  for (Eigen::Index s = 0; s < batch; ++s)
    for (int k = 0; k < reps; ++k) {
      const Eigen::Index c = s * reps + k;
      X.block(0, c, base.rows(), 1) = base.col(s);
      X.block(base.rows(), c, b.all_act.rows(), 1) = b.all_act.col(s);
      X.block(base.rows() + b.agent * ad, c, ad, 1) = actions.col(c);
    }
  return X;
}

namespace {

// Smoothing noise on target-policy actions, applied elementwise in a fixed
// column-major order, then clamped back to the action box.
void add_target_noise(Eigen::MatrixXd& actions, const TrainConfig& cfg,
                      Rng& rng) {
  for (Eigen::Index c = 0; c < actions.cols(); ++c)
    for (Eigen::Index r = 0; r < actions.rows(); ++r) {
      const double eps = std::clamp(rng.normal(0.0, cfg.target_noise_std),
                                    -cfg.target_noise_clip, cfg.target_noise_clip);
      actions(r, c) = std::clamp(actions(r, c) + eps, -1.0, 1.0);
    }
}

// Rows holding agent `agent`'s action slice within a critic input column.
Eigen::Index action_row_offset(const Batch& b, CriticMode mode) {
  return mode == CriticMode::kDecentralized
             ? b.obs.rows()
             : b.all_obs.rows() + b.agent * b.act.rows();
}

}  // namespace

Eigen::VectorXd td3_target(const Batch& b,
                           const std::vector<AgentLearner>& learners,
                           const TrainConfig& cfg, Rng& noise_rng) {
  contract_check(b.size() >= 1, "td3_target: empty batch");
  const AgentLearner& self = learners[static_cast<std::size_t>(b.agent)];
  Eigen::MatrixXd X;
  if (cfg.critic_mode == CriticMode::kDecentralized) {
    Eigen::MatrixXd next_a = nn::mlp_forward_batch(self.actor_target, b.next_obs);
    add_target_noise(next_a, cfg, noise_rng);
    X = assemble_critic_inputs(b, cfg.critic_mode, next_a, 1, /*next_side=*/true);
  } else {
    const int n = b.n_agents;
    const auto od = b.obs.rows();
    const auto ad = b.act.rows();
    Eigen::MatrixXd joint(n * ad, b.size());
    for (int j = 0; j < n; ++j) {
      Eigen::MatrixXd next_a = nn::mlp_forward_batch(
          learners[static_cast<std::size_t>(j)].actor_target,
          b.all_next_obs.middleRows(j * od, od));
      add_target_noise(next_a, cfg, noise_rng);
      joint.middleRows(j * ad, ad) = next_a;
    }
    X.resize(b.all_next_obs.rows() + joint.rows(), b.size());
    X.topRows(b.all_next_obs.rows()) = b.all_next_obs;
    X.bottomRows(joint.rows()) = joint;
  }
  const Eigen::MatrixXd q1 = nn::mlp_forward_batch(self.critic1_target, X);
  const Eigen::MatrixXd q2 = nn::mlp_forward_batch(self.critic2_target, X);
  // Episodes terminate by time limit only; the target always bootstraps.
  return b.rew + cfg.gamma * q1.row(0).cwiseMin(q2.row(0)).transpose();
}

OodActions draw_ood_actions(const Batch& b, const AgentLearner& learner,
                            const TrainConfig& cfg, Rng& rng) {
  const auto batch = b.size();
  const auto ad = b.act.rows();
  const int m = cfg.ood_samples;
  OodActions ood;
  ood.per_sample = 3 * m;
  ood.actions.resize(ad, batch * ood.per_sample);

  const Eigen::MatrixXd pi_now = nn::mlp_forward_batch(learner.actor, b.obs);
  const Eigen::MatrixXd pi_next = nn::mlp_forward_batch(learner.actor, b.next_obs);
  for (Eigen::Index s = 0; s < batch; ++s) {
    Eigen::Index c = s * ood.per_sample;
    for (int k = 0; k < m; ++k, ++c)
      for (Eigen::Index r = 0; r < ad; ++r)
        ood.actions(r, c) = rng.uniform(-1.0, 1.0);
    for (int k = 0; k < m; ++k, ++c)
      for (Eigen::Index r = 0; r < ad; ++r)
        ood.actions(r, c) = std::clamp(
            pi_now(r, s) + rng.normal(0.0, cfg.ood_noise_std), -1.0, 1.0);
    for (int k = 0; k < m; ++k, ++c)
      for (Eigen::Index r = 0; r < ad; ++r)
        ood.actions(r, c) = std::clamp(
            pi_next(r, s) + rng.normal(0.0, cfg.ood_noise_std), -1.0, 1.0);
  }
  return ood;
}

namespace {

struct TwinLoss {
  double td = 0, penalty = 0, loss = 0;
  nn::MlpGrads grads;
};

TwinLoss critic_loss_one(const nn::MlpParams& critic, const Eigen::MatrixXd& x_data,
                         const Eigen::MatrixXd& x_ood, int per_sample,
                         const Eigen::VectorXd& y, double alpha) {
  const auto batch = y.size();
  const double inv_b = 1.0 / static_cast<double>(batch);
  TwinLoss out;
  out.grads = nn::MlpGrads::zeros(critic.spec);

  nn::ForwardCache cache_data;
  const Eigen::MatrixXd q_data = nn::mlp_forward_batch(critic, x_data, &cache_data);
  const Eigen::VectorXd td_err = q_data.row(0).transpose() - y;
  out.td = 0.5 * td_err.squaredNorm() * inv_b;

  Eigen::MatrixXd ograd_data = (td_err * inv_b).transpose();
  if (alpha > 0.0) {
    nn::ForwardCache cache_ood;
    const Eigen::MatrixXd q_ood = nn::mlp_forward_batch(critic, x_ood, &cache_ood);
    Eigen::MatrixXd ograd_ood(1, q_ood.cols());
    double penalty_sum = 0.0;
    for (Eigen::Index s = 0; s < batch; ++s) {
      const auto block = q_ood.row(0).segment(s * per_sample, per_sample);
      const double shift = block.maxCoeff();
      const Eigen::ArrayXd ex = (block.transpose().array() - shift).exp();
      const double z = ex.sum();
      penalty_sum += shift + std::log(z) - q_data(0, s);
      ograd_ood.row(0).segment(s * per_sample, per_sample) =
          (alpha * inv_b / z) * ex.transpose();
    }
    out.penalty = penalty_sum * inv_b;
    ograd_data.array() -= alpha * inv_b;
    nn::mlp_backward_batch(critic, cache_ood, ograd_ood, &out.grads);
  }
  out.loss = out.td + alpha * out.penalty;
  nn::mlp_backward_batch(critic, cache_data, ograd_data, &out.grads);
  return out;
}

}  // namespace

CriticLossResult cql_critic_loss(const Batch& b, const Eigen::VectorXd& y,
                                 const OodActions& ood,
                                 const std::vector<AgentLearner>& learners,
                                 const TrainConfig& cfg) {
  contract_check(y.size() == b.size(), "cql_critic_loss: y/batch size mismatch");
  const AgentLearner& self = learners[static_cast<std::size_t>(b.agent)];
  const Eigen::MatrixXd x_data = assemble_critic_inputs(b, cfg.critic_mode, b.act, 1);
  Eigen::MatrixXd x_ood;
  if (cfg.alpha > 0.0) {
    contract_check(ood.per_sample >= 1 &&
                       ood.actions.cols() == b.size() * ood.per_sample,
                   "cql_critic_loss: penalty action set mismatch");
    x_ood = assemble_critic_inputs(b, cfg.critic_mode, ood.actions, ood.per_sample);
  }
  CriticLossResult res;
  TwinLoss l1 = critic_loss_one(self.critic1, x_data, x_ood, ood.per_sample, y,
                                cfg.alpha);
  TwinLoss l2 = critic_loss_one(self.critic2, x_data, x_ood, ood.per_sample, y,
                                cfg.alpha);
  res.td_loss1 = l1.td;
  res.td_loss2 = l2.td;
  res.penalty1 = l1.penalty;
  res.penalty2 = l2.penalty;
  res.loss1 = l1.loss;
  res.loss2 = l2.loss;
  res.grads1 = std::move(l1.grads);
  res.grads2 = std::move(l2.grads);
  return res;
}

ActorLossResult rectified_actor_loss(const Batch& b,
                                     const Eigen::MatrixXd* a_hat, double tau,
                                     const std::vector<AgentLearner>& learners,
                                     const TrainConfig& cfg) {
  contract_check(tau >= 0.0 && tau <= 1.0, "rectified_actor_loss: tau in [0,1]");
  contract_check(a_hat != nullptr || tau == 0.0,
                 "rectified_actor_loss: a_hat required unless tau = 0");
  const AgentLearner& self = learners[static_cast<std::size_t>(b.agent)];
  const auto batch = b.size();
  const double inv_b = 1.0 / static_cast<double>(batch);

  ActorLossResult res;
  nn::ForwardCache actor_cache;
  res.policy_actions = nn::mlp_forward_batch(self.actor, b.obs, &actor_cache);

  nn::ForwardCache critic_cache;
  const Eigen::MatrixXd x_pi =
      assemble_critic_inputs(b, cfg.critic_mode, res.policy_actions, 1);
  const Eigen::MatrixXd q = nn::mlp_forward_batch(self.critic1, x_pi, &critic_cache);
  res.mean_q = q.row(0).mean();

  // d loss / d pi: the critic path plus the rectification pull.
  const Eigen::MatrixXd ograd_q =
      Eigen::MatrixXd::Constant(1, batch, -(1.0 - tau) * inv_b);
  Eigen::MatrixXd input_grad;
  nn::mlp_backward_batch(self.critic1, critic_cache, ograd_q, nullptr, &input_grad);
  Eigen::MatrixXd dpi = input_grad.middleRows(action_row_offset(b, cfg.critic_mode),
                                              res.policy_actions.rows());
  if (a_hat != nullptr && tau > 0.0) {
    contract_check(a_hat->rows() == res.policy_actions.rows() &&
                       a_hat->cols() == batch,
                   "rectified_actor_loss: a_hat shape mismatch");
    const Eigen::MatrixXd diff = res.policy_actions - *a_hat;
    res.rect_dist = diff.array().square().colwise().sum().mean();
    dpi += (2.0 * tau * inv_b) * diff;
  }
  res.loss = -(1.0 - tau) * res.mean_q + tau * res.rect_dist;

  res.grads = nn::MlpGrads::zeros(self.actor.spec);
  nn::mlp_backward_batch(self.actor, actor_cache, dpi, &res.grads);
  return res;
}

sampler::BatchQFn make_candidate_evaluator(const Batch& b,
                                           const std::vector<AgentLearner>& learners,
                                           const TrainConfig& cfg) {
  const AgentLearner& self = learners[static_cast<std::size_t>(b.agent)];
  return [&b, &self, &cfg](const Eigen::MatrixXd& actions) -> Eigen::VectorXd {
    const auto reps = actions.cols() / b.size();
    const Eigen::MatrixXd x = assemble_critic_inputs(
        b, cfg.critic_mode, actions, static_cast<int>(reps));
    return nn::mlp_forward_batch(self.critic1, x).row(0).transpose();
  };
}

}  // namespace omar::algo
