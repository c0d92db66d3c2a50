// Independent reference implementations used only by tests. These
// deliberately avoid the library's code paths (plain loops over
// std::vector<double>) so they can serve as oracles for it.
#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "omar/nn.hpp"

namespace oracle {

// Straight-line re-evaluation of a dense relu network with identity or tanh
// output, reading weights directly out of the flat parameter layout.
inline std::vector<double> forward_reference(const omar::nn::MlpParams& p,
                                             const std::vector<double>& input) {
  const auto& spec = p.spec;
  std::vector<double> act = input;
  std::size_t off = 0;
  for (int l = 0; l < spec.num_layers(); ++l) {
    const int in = spec.layer_in(l);
    const int out = spec.layer_out(l);
    // weight block is column-major (out x in), then the bias block
    std::vector<double> next(static_cast<std::size_t>(out), 0.0);
    for (int j = 0; j < in; ++j)
      for (int i = 0; i < out; ++i)
        next[static_cast<std::size_t>(i)] +=
            p.flat(static_cast<Eigen::Index>(off + static_cast<std::size_t>(j) *
                                                       static_cast<std::size_t>(out) +
                                             static_cast<std::size_t>(i))) *
            act[static_cast<std::size_t>(j)];
    off += static_cast<std::size_t>(in) * static_cast<std::size_t>(out);
    for (int i = 0; i < out; ++i)
      next[static_cast<std::size_t>(i)] +=
          p.flat(static_cast<Eigen::Index>(off + static_cast<std::size_t>(i)));
    off += static_cast<std::size_t>(out);
    const bool last = l == spec.num_layers() - 1;
    for (auto& v : next) {
      if (!last)
        v = v > 0.0 ? v : 0.0;
      else if (spec.output_activation == omar::nn::Activation::kTanh)
        v = std::tanh(v);
    }
    act = std::move(next);
  }
  return act;
}

// Central finite differences of a scalar function over a flat vector.
inline Eigen::VectorXd finite_difference(
    const std::function<double(const Eigen::VectorXd&)>& f,
    const Eigen::VectorXd& at, double h = 1e-5) {
  Eigen::VectorXd g(at.size());
  Eigen::VectorXd x = at;
  for (Eigen::Index i = 0; i < at.size(); ++i) {
    const double orig = x(i);
    x(i) = orig + h;
    const double up = f(x);
    x(i) = orig - h;
    const double down = f(x);
    x(i) = orig;
    g(i) = (up - down) / (2.0 * h);
  }
  return g;
}

// Relative tolerance 1e-4 with a 1e-7 absolute floor near zero.
inline bool grad_close(double analytic, double fd) {
  const double err = std::abs(analytic - fd);
  return err <= std::max(1e-7, 1e-4 * std::abs(fd));
}

inline bool grads_close(const Eigen::VectorXd& analytic,
                        const Eigen::VectorXd& fd) {
  if (analytic.size() != fd.size()) return false;
  for (Eigen::Index i = 0; i < fd.size(); ++i)
    if (!grad_close(analytic(i), fd(i))) return false;
  return true;
}

// Scalar-loop Adam with bias correction, independent of the library's
// vectorized version.
struct AdamReference {
  std::vector<double> m, v;
  std::int64_t t = 0;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

  explicit AdamReference(std::size_t n) : m(n, 0.0), v(n, 0.0) {}

  void step(std::vector<double>& params, const std::vector<double>& grads,
            double lr) {
    t += 1;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    for (std::size_t i = 0; i < params.size(); ++i) {
      m[i] = beta1 * m[i] + (1.0 - beta1) * grads[i];
      v[i] = beta2 * v[i] + (1.0 - beta2) * grads[i] * grads[i];
      params[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps);
    }
  }
};

// Dense grid argmax of a 1-D function over [-1, 1].
inline double grid_argmax(const std::function<double(double)>& f,
                          int points = 20001) {
  double best_x = -1.0;
  double best = f(-1.0);
  for (int i = 1; i < points; ++i) {
    const double x = -1.0 + 2.0 * static_cast<double>(i) / (points - 1);
    const double v = f(x);
    if (v > best) {
      best = v;
      best_x = x;
    }
  }
  return best_x;
}

// Log-sum-exp by direct summation in long double.
inline double logsumexp_reference(const std::vector<double>& xs) {
  long double s = 0.0L;
  for (double x : xs) s += std::exp(static_cast<long double>(x));
  return static_cast<double>(std::log(s));
}

}  // namespace oracle
