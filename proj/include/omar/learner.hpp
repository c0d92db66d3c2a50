#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "omar/dataset.hpp"
#include "omar/nn.hpp"
#include "omar/rng.hpp"
#include "omar/sampler.hpp"

namespace omar::algo {

enum class ActorMode { kOmar, kMacql, kMatd3bc, kOnline };
enum class CriticMode { kDecentralized, kCentralized };

std::string actor_mode_name(ActorMode m);
ActorMode actor_mode_from_name(const std::string& name);
std::string critic_mode_name(CriticMode m);
CriticMode critic_mode_from_name(const std::string& name);

struct TrainConfig {
  double gamma = 0.99;
  double rho = 0.01;  // target network update rate
  int batch_size = 1024;
  double lr = 0.01;
  double actor_lr = 0.0;  // 0 -> same as lr
  double alpha = 1.0;     // conservative penalty coefficient
  double tau = 0.5;       // rectification coefficient in [0,1]
  ActorMode actor_mode = ActorMode::kOmar;
  CriticMode critic_mode = CriticMode::kDecentralized;
  double target_noise_std = 0.2;
  double target_noise_clip = 0.5;
  int ood_samples = 10;        // M; the penalty set holds 3M actions per sample
  double ood_noise_std = 0.2;  // noise added to policy actions in the penalty set
  std::int64_t total_steps = 30000;
  std::int64_t eval_interval = 1000;
  int eval_episodes = 10;
  int actor_updates = 1;
  std::vector<int> hidden_dims = {64, 64};
  sampler::SamplerConfig sampler;
  // online-mode knobs
  double explore_noise_std = 0.1;
  std::int64_t replay_capacity = 1000000;
  int update_every = 1;

  double effective_actor_lr() const { return actor_lr > 0.0 ? actor_lr : lr; }
  void validate() const;
};

// Twin critics with targets plus a deterministic tanh actor with target,
// one Adam state per network.
struct AgentLearner {
  nn::MlpParams actor, actor_target;
  nn::MlpParams critic1, critic2, critic1_target, critic2_target;
  nn::AdamState actor_opt, critic1_opt, critic2_opt;

  static AgentLearner init(int obs_dim, int act_dim, int critic_input_dim,
                           const std::vector<int>& hidden_dims, Rng& rng);
};

nn::MlpSpec make_actor_spec(int obs_dim, int act_dim,
                            const std::vector<int>& hidden_dims);
nn::MlpSpec make_critic_spec(int input_dim, const std::vector<int>& hidden_dims);
int critic_input_dim(int obs_dim, int act_dim, int n_agents, CriticMode mode);

// Minibatch gathered from a dataset. Joint blocks are stacked per agent in
// index order and filled only in centralized mode.
struct Batch {
  Eigen::MatrixXd obs, act, next_obs;  // agent-local, dims x B
  Eigen::VectorXd rew, done;
  Eigen::MatrixXd all_obs, all_act, all_next_obs;
  int agent = 0;
  int n_agents = 1;

  Eigen::Index size() const { return rew.size(); }
};

Batch gather_batch(const data::Dataset& d,
                   const std::vector<std::int64_t>& indices, int agent,
                   CriticMode mode);

// Critic input columns for per-sample action candidates: `actions` holds
// `reps` candidate columns per batch sample (block layout). Decentralized
// inputs are [obs; a_i]; centralized inputs are [all obs; joint action] with
// agent i's slice replaced by the candidate.
Eigen::MatrixXd assemble_critic_inputs(const Batch& b, CriticMode mode,
                                       const Eigen::MatrixXd& actions, int reps,
                                       bool next_side = false);

// Clipped-double-Q regression target with clipped Gaussian smoothing on the
// target policy action: y = r + gamma * min_k Qbar_k(o', clamp(pibar(o') + eps)).
// Episodes end by time limit only, so the target always bootstraps.
// Centralized mode rebuilds every agent's target action.
Eigen::VectorXd td3_target(const Batch& b,
                           const std::vector<AgentLearner>& learners,
                           const TrainConfig& cfg, Rng& noise_rng);

// Penalty action set: per sample, M uniform actions, M around pi(o), and
// M around pi(o'), all clamped to the action box.
struct OodActions {
  Eigen::MatrixXd actions;  // act_dim x (B * 3M)
  int per_sample = 0;
};
OodActions draw_ood_actions(const Batch& b, const AgentLearner& learner,
                            const TrainConfig& cfg, Rng& rng);

// Conservative twin-critic loss:
//   0.5 * mean[(Q(o,a) - y)^2]
//   + alpha * mean[ logsumexp over the penalty set of Q(o,.) - Q(o, a_data) ],
// evaluated and differentiated independently for each twin.
struct CriticLossResult {
  double td_loss1 = 0, td_loss2 = 0;
  double penalty1 = 0, penalty2 = 0;
  double loss1 = 0, loss2 = 0;
  nn::MlpGrads grads1, grads2;
};
CriticLossResult cql_critic_loss(const Batch& b, const Eigen::VectorXd& y,
                                 const OodActions& ood,
                                 const std::vector<AgentLearner>& learners,
                                 const TrainConfig& cfg);

// Rectified policy objective:
//   mean[ -(1 - tau) * Q1(o, pi(o)) + tau * ||pi(o) - a_hat||^2 ]
// a_hat is a constant (no gradient flows into its producer). Pass nullptr
// only with tau = 0, which reduces to the plain -Q objective. The dataset
// action in place of a_hat gives the behavior-cloning variant.
struct ActorLossResult {
  double loss = 0;
  double mean_q = 0;
  double rect_dist = 0;  // mean ||pi(o) - a_hat||^2
  nn::MlpGrads grads;
  Eigen::MatrixXd policy_actions;  // pi(o), act_dim x B
};
ActorLossResult rectified_actor_loss(const Batch& b,
                                     const Eigen::MatrixXd* a_hat, double tau,
                                     const std::vector<AgentLearner>& learners,
                                     const TrainConfig& cfg);

// Batched Q1 evaluator over candidate actions for the zeroth-order search.
sampler::BatchQFn make_candidate_evaluator(const Batch& b,
                                           const std::vector<AgentLearner>& learners,
                                           const TrainConfig& cfg);

}  // namespace omar::algo
