#include "omar/nn.hpp"

#include <cmath>

#include "omar/errors.hpp"
#include "omar/io_util.hpp"

namespace omar::nn {

namespace {

constexpr char kMagic[4] = {'O', 'M', 'L', 'P'};
constexpr std::uint32_t kVersion = 1;

// Offset of layer `layer`'s weight block within the flat vector.
std::size_t layer_offset(const MlpSpec& spec, int layer) {
  std::size_t off = 0;
  for (int l = 0; l < layer; ++l) {
    off += static_cast<std::size_t>(spec.layer_out(l)) *
               static_cast<std::size_t>(spec.layer_in(l)) +
           static_cast<std::size_t>(spec.layer_out(l));
  }
  return off;
}

void apply_activation(Eigen::MatrixXd& z, Activation act) {
  switch (act) {
    case Activation::kRelu:
      z = z.cwiseMax(0.0);
      break;
    case Activation::kIdentity:
      break;
    case Activation::kTanh:
      z = z.array().tanh().matrix();
      break;
  }
}

// delta <- delta .* act'(post) where `post` holds post-activation values.
void apply_activation_grad(Eigen::MatrixXd& delta, const Eigen::MatrixXd& post,
                           Activation act) {
  switch (act) {
    case Activation::kRelu:
      delta.array() *= (post.array() > 0.0).cast<double>();
      break;
    case Activation::kIdentity:
      break;
    case Activation::kTanh:
      delta.array() *= 1.0 - post.array().square();
      break;
  }
}

}  // namespace

int MlpSpec::layer_in(int layer) const {
  return layer == 0 ? input_dim : hidden_dims[static_cast<std::size_t>(layer - 1)];
}

int MlpSpec::layer_out(int layer) const {
  return layer == num_layers() - 1 ? output_dim
                                   : hidden_dims[static_cast<std::size_t>(layer)];
}

std::size_t MlpSpec::param_count() const {
  return layer_offset(*this, num_layers());
}

void MlpSpec::validate() const {
  contract_check(input_dim >= 1, "MlpSpec: input_dim must be >= 1");
  contract_check(output_dim >= 1, "MlpSpec: output_dim must be >= 1");
  contract_check(!hidden_dims.empty(), "MlpSpec: at least one hidden layer");
  for (int h : hidden_dims)
    contract_check(h >= 1, "MlpSpec: hidden dims must be >= 1");
  contract_check(hidden_activation == Activation::kRelu,
                 "MlpSpec: hidden activation must be relu");
  contract_check(output_activation == Activation::kIdentity ||
                     output_activation == Activation::kTanh,
                 "MlpSpec: output activation must be identity or tanh");
}

MlpParams MlpParams::zeros(const MlpSpec& spec) {
  spec.validate();
  MlpParams p;
  p.spec = spec;
  p.flat = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(spec.param_count()));
  return p;
}

MlpParams MlpParams::random_init(const MlpSpec& spec, Rng& rng) {
  MlpParams p = zeros(spec);
  for (int l = 0; l < spec.num_layers(); ++l) {
    const double limit = 1.0 / std::sqrt(static_cast<double>(spec.layer_in(l)));
    auto w = p.weight(l);
    for (Eigen::Index j = 0; j < w.cols(); ++j)
      for (Eigen::Index i = 0; i < w.rows(); ++i)
        w(i, j) = rng.uniform(-limit, limit);
    auto b = p.bias(l);
    for (Eigen::Index i = 0; i < b.size(); ++i) b(i) = rng.uniform(-limit, limit);
  }
  return p;
}

Eigen::Map<Eigen::MatrixXd> MlpParams::weight(int layer) {
  const std::size_t off = layer_offset(spec, layer);
  return {flat.data() + off, spec.layer_out(layer), spec.layer_in(layer)};
}

Eigen::Map<const Eigen::MatrixXd> MlpParams::weight(int layer) const {
  const std::size_t off = layer_offset(spec, layer);
  return {flat.data() + off, spec.layer_out(layer), spec.layer_in(layer)};
}

Eigen::Map<Eigen::VectorXd> MlpParams::bias(int layer) {
  const std::size_t off =
      layer_offset(spec, layer) + static_cast<std::size_t>(spec.layer_out(layer)) *
                                      static_cast<std::size_t>(spec.layer_in(layer));
  return {flat.data() + off, spec.layer_out(layer)};
}

Eigen::Map<const Eigen::VectorXd> MlpParams::bias(int layer) const {
  const std::size_t off =
      layer_offset(spec, layer) + static_cast<std::size_t>(spec.layer_out(layer)) *
                                      static_cast<std::size_t>(spec.layer_in(layer));
  return {flat.data() + off, spec.layer_out(layer)};
}

Eigen::MatrixXd mlp_forward_batch(const MlpParams& params,
                                  const Eigen::MatrixXd& X,
                                  ForwardCache* cache) {
  contract_check(X.rows() == params.spec.input_dim,
                 "mlp_forward: input dim mismatch");
  const int layers = params.spec.num_layers();
  if (cache) {
    cache->acts.resize(static_cast<std::size_t>(layers) + 1);
    cache->acts[0] = X;
  }
  Eigen::MatrixXd a = X;
  for (int l = 0; l < layers; ++l) {
    Eigen::MatrixXd z = (params.weight(l) * a).colwise() + params.bias(l);
    const Activation act = (l == layers - 1) ? params.spec.output_activation
                                             : params.spec.hidden_activation;
    apply_activation(z, act);
    a = std::move(z);
    if (cache) cache->acts[static_cast<std::size_t>(l) + 1] = a;
  }
  return a;
}

Eigen::VectorXd mlp_forward(const MlpParams& params, const Eigen::VectorXd& x) {
  return mlp_forward_batch(params, x);
}

void mlp_backward_batch(const MlpParams& params, const ForwardCache& cache,
                        const Eigen::MatrixXd& output_grad, MlpGrads* grads,
                        Eigen::MatrixXd* input_grad) {
  const int layers = params.spec.num_layers();
  contract_check(static_cast<int>(cache.acts.size()) == layers + 1,
                 "mlp_backward: cache does not match spec");
  contract_check(output_grad.rows() == params.spec.output_dim &&
                     output_grad.cols() == cache.acts[0].cols(),
                 "mlp_backward: output_grad shape mismatch");
  if (grads)
    contract_check(grads->spec == params.spec,
                   "mlp_backward: grads spec mismatch");

  Eigen::MatrixXd delta = output_grad;
  apply_activation_grad(delta, cache.acts.back(),
                        params.spec.output_activation);
  for (int l = layers - 1; l >= 0; --l) {
    if (grads) {
      grads->weight(l).noalias() +=
          delta * cache.acts[static_cast<std::size_t>(l)].transpose();
      grads->bias(l).noalias() += delta.rowwise().sum();
    }
    if (l == 0) {
      if (input_grad) input_grad->noalias() = params.weight(0).transpose() * delta;
    } else {
      Eigen::MatrixXd next = params.weight(l).transpose() * delta;
      apply_activation_grad(next, cache.acts[static_cast<std::size_t>(l)],
                            params.spec.hidden_activation);
      delta = std::move(next);
    }
  }
}

BackwardResult mlp_backward(const MlpParams& params, const Eigen::VectorXd& x,
                            const Eigen::VectorXd& output_grad) {
  ForwardCache cache;
  mlp_forward_batch(params, x, &cache);
  BackwardResult res;
  res.grads = MlpGrads::zeros(params.spec);
  Eigen::MatrixXd in_grad;
  mlp_backward_batch(params, cache, output_grad, &res.grads, &in_grad);
  res.input_grad = in_grad.col(0);
  return res;
}

AdamState AdamState::for_params(const MlpParams& params) {
  AdamState s;
  s.m = Eigen::VectorXd::Zero(params.flat.size());
  s.v = Eigen::VectorXd::Zero(params.flat.size());
  return s;
}

void adam_step(MlpParams& params, const MlpGrads& grads, AdamState& state,
               double lr) {
  contract_check(grads.spec == params.spec, "adam_step: spec mismatch");
  contract_check(state.m.size() == params.flat.size(),
                 "adam_step: state size mismatch");
  if (!grads.all_finite())
    throw ContractError("adam_step: non-finite gradients, update rejected");
  state.t += 1;
  state.m = state.beta1 * state.m + (1.0 - state.beta1) * grads.flat;
  state.v = state.beta2 * state.v.array().matrix() +
            (1.0 - state.beta2) * grads.flat.array().square().matrix();
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
  params.flat.array() -= lr * (state.m.array() / bc1) /
                         ((state.v.array() / bc2).sqrt() + state.eps);
  if (!params.all_finite())
    throw ContractError("adam_step: parameters became non-finite");
}

void soft_update(MlpParams& target, const MlpParams& online, double rho) {
  contract_check(target.spec == online.spec, "soft_update: spec mismatch");
  contract_check(rho >= 0.0 && rho <= 1.0, "soft_update: rho must be in [0,1]");
  target.flat = rho * online.flat + (1.0 - rho) * target.flat;
}

std::string encode_params(const MlpParams& params) {
  io::BinaryWriter w;
  w.bytes(std::string(kMagic, 4));
  w.u32(kVersion);
  w.u8(static_cast<std::uint8_t>(params.spec.hidden_activation));
  w.u8(static_cast<std::uint8_t>(params.spec.output_activation));
  w.u32(static_cast<std::uint32_t>(params.spec.input_dim));
  w.u32(static_cast<std::uint32_t>(params.spec.hidden_dims.size()));
  for (int h : params.spec.hidden_dims) w.u32(static_cast<std::uint32_t>(h));
  w.u32(static_cast<std::uint32_t>(params.spec.output_dim));
  w.u64(static_cast<std::uint64_t>(params.flat.size()));
  w.f64_block(params.flat.data(), static_cast<std::size_t>(params.flat.size()));
  return w.buffer();
}

MlpParams decode_params(const std::string& bytes) {
  io::BinaryReader r(bytes);
  r.section("checkpoint magic");
  char magic[4];
  for (char& c : magic) c = static_cast<char>(r.u8());
  if (std::string(magic, 4) != std::string(kMagic, 4))
    throw IoError("checkpoint: bad magic, not a parameter file");
  const std::uint32_t version = r.u32();
  if (version != kVersion)
    throw IoError("checkpoint: unsupported version " + std::to_string(version));

  r.section("checkpoint spec");
  MlpSpec spec;
  spec.hidden_activation = static_cast<Activation>(r.u8());
  spec.output_activation = static_cast<Activation>(r.u8());
  spec.input_dim = static_cast<int>(r.u32());
  const std::uint32_t n_hidden = r.u32();
  spec.hidden_dims.resize(n_hidden);
  for (auto& h : spec.hidden_dims) h = static_cast<int>(r.u32());
  spec.output_dim = static_cast<int>(r.u32());
  spec.validate();

  r.section("checkpoint parameters");
  const std::uint64_t count = r.u64();
  if (count != spec.param_count())
    throw IoError("checkpoint: parameter count " + std::to_string(count) +
                  " does not match spec (" + std::to_string(spec.param_count()) +
                  ")");
  MlpParams p = MlpParams::zeros(spec);
  r.f64_block(p.flat.data(), count);
  if (!r.at_end()) throw IoError("checkpoint: trailing bytes after parameters");
  if (!p.all_finite()) throw IoError("checkpoint: non-finite parameter values");
  return p;
}

void save_params(const MlpParams& params, const std::string& path) {
  io::write_file_atomic(path, encode_params(params));
}

MlpParams load_params(const std::string& path) {
  return decode_params(io::read_file(path));
}

}  // namespace omar::nn
