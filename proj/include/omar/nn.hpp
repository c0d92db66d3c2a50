#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "omar/rng.hpp"

namespace omar::nn {

enum class Activation : std::uint8_t { kRelu = 0, kIdentity = 1, kTanh = 2 };

// Architecture of a dense feed-forward network. Hidden layers use ReLU;
// the output layer is identity (critics) or tanh (actors).
struct MlpSpec {
  int input_dim = 0;
  std::vector<int> hidden_dims;
  int output_dim = 0;
  Activation hidden_activation = Activation::kRelu;
  Activation output_activation = Activation::kIdentity;

  int num_layers() const { return static_cast<int>(hidden_dims.size()) + 1; }
  int layer_in(int layer) const;
  int layer_out(int layer) const;
  std::size_t param_count() const;
  void validate() const;
  bool operator==(const MlpSpec&) const = default;
};

// Parameters stored as one flat vector; per-layer weights/biases are Eigen
// maps into it. Flat layout, per layer: weight matrix (out x in,
// column-major), then bias vector. The same structure doubles as the
// gradient container (gradients are parameter-shaped).
struct MlpParams {
  MlpSpec spec;
  Eigen::VectorXd flat;

  static MlpParams zeros(const MlpSpec& spec);
  // Uniform fan-in init: every weight and bias in (-1/sqrt(fan_in), +1/sqrt(fan_in)).
  static MlpParams random_init(const MlpSpec& spec, Rng& rng);

  Eigen::Map<Eigen::MatrixXd> weight(int layer);
  Eigen::Map<const Eigen::MatrixXd> weight(int layer) const;
  Eigen::Map<Eigen::VectorXd> bias(int layer);
  Eigen::Map<const Eigen::VectorXd> bias(int layer) const;

  void set_zero() { flat.setZero(); }
  bool all_finite() const { return flat.allFinite(); }
};

using MlpGrads = MlpParams;  // gradients share the parameter layout

// Post-activation values kept for the backward pass. acts[0] is the input
// batch (input_dim x B); acts[l+1] the output of layer l.
struct ForwardCache {
  std::vector<Eigen::MatrixXd> acts;
};

// Batched forward pass: X is (input_dim x B), returns (output_dim x B).
Eigen::MatrixXd mlp_forward_batch(const MlpParams& params,
                                  const Eigen::MatrixXd& X,
                                  ForwardCache* cache = nullptr);

Eigen::VectorXd mlp_forward(const MlpParams& params, const Eigen::VectorXd& x);

// Exact reverse-mode gradients of sum_b (output_col_b . output_grad_col_b).
// Parameter gradients are ACCUMULATED into *grads (caller zeroes first);
// either of grads / input_grad may be null to skip that part.
void mlp_backward_batch(const MlpParams& params, const ForwardCache& cache,
                        const Eigen::MatrixXd& output_grad, MlpGrads* grads,
                        Eigen::MatrixXd* input_grad = nullptr);

struct BackwardResult {
  MlpGrads grads;
  Eigen::VectorXd input_grad;
};
BackwardResult mlp_backward(const MlpParams& params, const Eigen::VectorXd& x,
                            const Eigen::VectorXd& output_grad);

// Adam with bias correction.
struct AdamState {
  Eigen::VectorXd m;
  Eigen::VectorXd v;
  std::int64_t t = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState for_params(const MlpParams& params);
};

// Rejects non-finite gradients; guarantees finite parameters afterwards.
void adam_step(MlpParams& params, const MlpGrads& grads, AdamState& state,
               double lr);

// target <- rho * online + (1 - rho) * target, elementwise. rho in [0, 1].
void soft_update(MlpParams& target, const MlpParams& online, double rho);

// Checkpoint format (little-endian):
//   magic "OMLP", u32 version = 1,
//   u8 hidden_activation, u8 output_activation,
//   u32 input_dim, u32 n_hidden, u32 hidden_dims[n_hidden], u32 output_dim,
//   u64 param_count, f64 flat[param_count] in the layout described above.
void save_params(const MlpParams& params, const std::string& path);
MlpParams load_params(const std::string& path);

// In-memory forms of the checkpoint encoding (used for manifests/tests).
std::string encode_params(const MlpParams& params);
MlpParams decode_params(const std::string& bytes);

}  // namespace omar::nn
