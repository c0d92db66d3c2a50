#include "omar/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "omar/errors.hpp"

namespace omar::sampler {

std::string variant_name(SamplerVariant v) {
  switch (v) {
    case SamplerVariant::kSoft:
      return "soft";
    case SamplerVariant::kCem:
      return "cem";
    case SamplerVariant::kRandomShooting:
      return "random_shooting";
  }
  throw ContractError("unknown sampler variant");
}

SamplerVariant variant_from_name(const std::string& name) {
  if (name == "soft") return SamplerVariant::kSoft;
  if (name == "cem") return SamplerVariant::kCem;
  if (name == "random_shooting") return SamplerVariant::kRandomShooting;
  throw ConfigError("unknown sampler variant: " + name);
}

int SamplerConfig::elite_count() const {
  return static_cast<int>(
      std::ceil(elite_fraction * static_cast<double>(population)));
}

void SamplerConfig::validate() const {
  contract_check(iterations >= 0, "SamplerConfig: iterations must be >= 0");
  contract_check(population >= 1, "SamplerConfig: population must be >= 1");
  contract_check(temperature > 0.0, "SamplerConfig: temperature must be > 0");
  contract_check(init_std > 0.0, "SamplerConfig: init_std must be > 0");
  contract_check(elite_fraction > 0.0 && elite_fraction <= 1.0,
                 "SamplerConfig: elite_fraction must be in (0,1]");
  contract_check(elite_count() >= 1, "SamplerConfig: elite count must be >= 1");
}

SamplerState SamplerState::init(const SamplerConfig& cfg, int action_dim) {
  contract_check(action_dim >= 1, "SamplerState: action_dim must be >= 1");
  SamplerState s;
  s.mean = Eigen::VectorXd::Constant(action_dim, cfg.init_mean);
  s.std = Eigen::VectorXd::Constant(action_dim, cfg.init_std);
  s.iteration = 0;
  return s;
}

Eigen::MatrixXd draw_population(const SamplerState& state, int k, Rng& rng) {
  contract_check(k >= 1, "draw_population: k must be >= 1");
  contract_check(state.mean.size() == state.std.size() && state.mean.size() > 0,
                 "draw_population: bad state");
  Eigen::MatrixXd samples(state.mean.size(), k);
  for (Eigen::Index col = 0; col < k; ++col)
    for (Eigen::Index d = 0; d < state.mean.size(); ++d)
      samples(d, col) =
          std::clamp(rng.normal(state.mean(d), state.std(d)), -1.0, 1.0);
  return samples;
}

Eigen::VectorXd softmax_weights(const Eigen::VectorXd& qvalues, double beta) {
  contract_check(qvalues.size() >= 1, "softmax_weights: empty qvalues");
  const double shift = qvalues.maxCoeff();
  Eigen::VectorXd w = (beta * (qvalues.array() - shift)).exp();
  return w / w.sum();
}

SamplerState soft_update_distribution(const Eigen::MatrixXd& samples,
                                      const Eigen::VectorXd& qvalues,
                                      const SamplerState& state, double beta,
                                      StdMode std_mode) {
  contract_check(samples.cols() >= 1, "soft_update_distribution: empty population");
  contract_check(samples.cols() == qvalues.size(),
                 "soft_update_distribution: samples/qvalues length mismatch");
  contract_check(samples.rows() == state.mean.size(),
                 "soft_update_distribution: dimension mismatch");
  const Eigen::VectorXd w = softmax_weights(qvalues, beta);
  SamplerState next;
  next.mean = samples * w;
  Eigen::ArrayXd sq =
      (samples.colwise() - state.mean).array().square().rowwise().sum();
  if (std_mode == StdMode::kNormalized)
    sq /= static_cast<double>(samples.cols());
  next.std = sq.sqrt().max(kStdFloor).matrix();
  next.iteration = state.iteration + 1;
  return next;
}

SamplerState cem_update_distribution(const Eigen::MatrixXd& samples,
                                     const Eigen::VectorXd& qvalues,
                                     const SamplerState& state,
                                     double elite_fraction) {
  contract_check(samples.cols() >= 1, "cem_update_distribution: empty population");
  contract_check(samples.cols() == qvalues.size(),
                 "cem_update_distribution: samples/qvalues length mismatch");
  contract_check(elite_fraction > 0.0 && elite_fraction <= 1.0,
                 "cem_update_distribution: elite_fraction must be in (0,1]");
  const auto k = static_cast<int>(samples.cols());
  const int n_elite = std::min(
      k, static_cast<int>(std::ceil(elite_fraction * static_cast<double>(k))));

  std::vector<int> order(static_cast<std::size_t>(k));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return qvalues(a) > qvalues(b); });

  SamplerState next;
  next.mean = Eigen::VectorXd::Zero(samples.rows());
  for (int e = 0; e < n_elite; ++e) next.mean += samples.col(order[static_cast<std::size_t>(e)]);
  next.mean /= static_cast<double>(n_elite);
  Eigen::ArrayXd var = Eigen::ArrayXd::Zero(samples.rows());
  for (int e = 0; e < n_elite; ++e)
    var += (samples.col(order[static_cast<std::size_t>(e)]) - next.mean).array().square();
  var /= static_cast<double>(n_elite);
  next.std = var.sqrt().max(kStdFloor).matrix();
  next.iteration = state.iteration + 1;
  return next;
}

namespace {

SamplerState update_for_variant(const SamplerConfig& cfg,
                                const Eigen::MatrixXd& samples,
                                const Eigen::VectorXd& q,
                                const SamplerState& state) {
  switch (cfg.variant) {
    case SamplerVariant::kSoft:
      return soft_update_distribution(samples, q, state, cfg.temperature,
                                      cfg.std_mode);
    case SamplerVariant::kCem:
      return cem_update_distribution(samples, q, state, cfg.elite_fraction);
    case SamplerVariant::kRandomShooting: {
      // No refinement: keep drawing from the initial distribution.
      SamplerState next = state;
      next.iteration = state.iteration + 1;
      return next;
    }
  }
  throw ContractError("unknown sampler variant");
}

}  // namespace

CandidateResult select_candidate(const QFn& q,
                                 const Eigen::VectorXd& policy_action,
                                 const SamplerConfig& cfg, Rng& rng) {
  cfg.validate();
  for (Eigen::Index d = 0; d < policy_action.size(); ++d)
    contract_check(policy_action(d) >= -1.0 && policy_action(d) <= 1.0,
                   "select_candidate: policy_action out of [-1,1]");

  CandidateResult res;
  res.policy_q = q(policy_action);
  res.action = policy_action;
  res.action_q = res.policy_q;
  SamplerState state = SamplerState::init(cfg, static_cast<int>(policy_action.size()));
  for (int j = 0; j < cfg.iterations; ++j) {
    const Eigen::MatrixXd samples = draw_population(state, cfg.population, rng);
    Eigen::VectorXd qs(samples.cols());
    for (Eigen::Index k = 0; k < samples.cols(); ++k) qs(k) = q(samples.col(k));
    for (Eigen::Index k = 0; k < samples.cols(); ++k) {
      if (qs(k) > res.action_q) {
        res.action_q = qs(k);
        res.action = samples.col(k);
      }
    }
    res.best_q_per_iter.push_back(res.action_q);
    state = update_for_variant(cfg, samples, qs, state);
  }
  res.final_state = state;
  return res;
}

BatchCandidateResult select_candidates(const BatchQFn& q,
                                       const Eigen::MatrixXd& policy_actions,
                                       const SamplerConfig& cfg, Rng& rng) {
  cfg.validate();
  const auto dim = policy_actions.rows();
  const auto batch = policy_actions.cols();
  contract_check(batch >= 1, "select_candidates: empty batch");

  BatchCandidateResult res;
  res.policy_q = q(policy_actions);
  contract_check(res.policy_q.size() == batch,
                 "select_candidates: evaluator returned wrong count");
  res.actions = policy_actions;
  res.action_q = res.policy_q;

  std::vector<SamplerState> states(
      static_cast<std::size_t>(batch),
      SamplerState::init(cfg, static_cast<int>(dim)));
  const int k = cfg.population;
  Eigen::MatrixXd samples(dim, batch * k);
  for (int j = 0; j < cfg.iterations; ++j) {
    for (Eigen::Index b = 0; b < batch; ++b)
      samples.middleCols(b * k, k) =
          draw_population(states[static_cast<std::size_t>(b)], k, rng);
    const Eigen::VectorXd qs = q(samples);
    contract_check(qs.size() == samples.cols(),
                   "select_candidates: evaluator returned wrong count");
    for (Eigen::Index b = 0; b < batch; ++b) {
      const auto block_q = qs.segment(b * k, k);
      for (Eigen::Index c = 0; c < k; ++c) {
        if (block_q(c) > res.action_q(b)) {
          res.action_q(b) = block_q(c);
          res.actions.col(b) = samples.col(b * k + c);
        }
      }
      states[static_cast<std::size_t>(b)] =
          update_for_variant(cfg, samples.middleCols(b * k, k), block_q,
                             states[static_cast<std::size_t>(b)]);
    }
  }
  return res;
}

}  // namespace omar::sampler
