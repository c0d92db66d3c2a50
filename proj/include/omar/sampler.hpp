#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

#include "omar/rng.hpp"

namespace omar::sampler {

enum class SamplerVariant { kSoft, kCem, kRandomShooting };
enum class StdMode { kNormalized, kLiteral };

std::string variant_name(SamplerVariant v);
SamplerVariant variant_from_name(const std::string& name);

// Width floor keeping the search distribution non-degenerate.
inline constexpr double kStdFloor = 1e-3;

struct SamplerConfig {
  SamplerVariant variant = SamplerVariant::kSoft;
  int iterations = 3;        // refinement iterations J
  int population = 10;       // candidates per iteration K
  double temperature = 1.0;  // softmax weight scale beta
  double init_mean = 0.0;
  double init_std = 2.0;
  double elite_fraction = 0.2;  // cem only
  // kNormalized divides the squared deviations by K before the square root;
  // kLiteral keeps the raw sum, so the width grows with population size.
  StdMode std_mode = StdMode::kNormalized;

  int elite_count() const;
  void validate() const;
  bool operator==(const SamplerConfig&) const = default;
};

// Per-dimension Gaussian the candidates are drawn from.
struct SamplerState {
  Eigen::VectorXd mean;
  Eigen::VectorXd std;
  int iteration = 0;

  static SamplerState init(const SamplerConfig& cfg, int action_dim);
};

// K i.i.d. draws per dimension, clamped to [-1, 1]. Returns (dim x K).
Eigen::MatrixXd draw_population(const SamplerState& state, int k, Rng& rng);

// Max-shifted softmax over q scaled by beta; nonnegative, sums to one.
Eigen::VectorXd softmax_weights(const Eigen::VectorXd& qvalues, double beta);

// Mean moves to the softmax-weighted sample average; the width becomes the
// (optionally K-normalized) root of the squared deviations from the previous
// mean, floored at kStdFloor.
SamplerState soft_update_distribution(const Eigen::MatrixXd& samples,
                                      const Eigen::VectorXd& qvalues,
                                      const SamplerState& state, double beta,
                                      StdMode std_mode = StdMode::kNormalized);

// Classic cross-entropy update: mean/population-std of the top elite_count
// samples by Q, floored at kStdFloor.
SamplerState cem_update_distribution(const Eigen::MatrixXd& samples,
                                     const Eigen::VectorXd& qvalues,
                                     const SamplerState& state,
                                     double elite_fraction);

// Action-value evaluator with the observation already bound.
using QFn = std::function<double(const Eigen::VectorXd&)>;
// Batched form: columns are candidate actions, returns one Q per column.
using BatchQFn = std::function<Eigen::VectorXd(const Eigen::MatrixXd&)>;

struct CandidateResult {
  Eigen::VectorXd action;  // pool argmax (>= policy action Q by construction)
  double action_q = 0.0;
  double policy_q = 0.0;
  std::vector<double> best_q_per_iter;  // running best after each iteration
  SamplerState final_state;
};

// Runs `iterations` refinement rounds (random shooting redraws from the
// initial distribution instead of refining), pools every drawn candidate
// together with the policy action, and returns the pool member with the
// highest Q. Ties keep the policy action, then the earliest draw.
CandidateResult select_candidate(const QFn& q, const Eigen::VectorXd& policy_action,
                                 const SamplerConfig& cfg, Rng& rng);

// Vectorized selection for a batch of observations. `policy_actions` is
// (dim x B); the evaluator receives (dim x B*K) candidate blocks whose
// column b*K+k is candidate k for sample b.
struct BatchCandidateResult {
  Eigen::MatrixXd actions;   // dim x B
  Eigen::VectorXd action_q;  // B
  Eigen::VectorXd policy_q;  // B
};
BatchCandidateResult select_candidates(const BatchQFn& q,
                                       const Eigen::MatrixXd& policy_actions,
                                       const SamplerConfig& cfg, Rng& rng);

}  // namespace omar::sampler
