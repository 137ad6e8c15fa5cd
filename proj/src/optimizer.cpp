#include "adap/optimizer.hpp"

#include "adap/errors.hpp"

#include <cmath>
#include <string>

namespace adap {

namespace {

void check_shapes(std::span<Matrix* const> weights, std::span<const Matrix> grads) {
  if (weights.size() != grads.size()) throw ConfigError("optimizer: gradient count does not match weights");
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i]->rows() != grads[i].rows() || weights[i]->cols() != grads[i].cols()) {
      throw ConfigError("optimizer: gradient " + std::to_string(i) + " shape mismatch");
    }
    if (!grads[i].allFinite()) throw NumericError("optimizer: non-finite gradient in tensor " + std::to_string(i));
  }
}

}  // namespace

void adam_step(std::span<Matrix* const> weights, std::span<const Matrix> grads, const OptimizerConfig& config,
               AdamState& state) {
  check_shapes(weights, grads);
  if (state.first.size() != weights.size()) {
    state.first.clear();
    state.second.clear();
    for (const Matrix* w : weights) {
      state.first.push_back(Matrix::Zero(w->rows(), w->cols()));
      state.second.push_back(Matrix::Zero(w->rows(), w->cols()));
    }
  }
  const std::int64_t t = state.step + 1;
  const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(t));

  std::vector<Matrix> m(weights.size()), v(weights.size()), w(weights.size());
  for (std::size_t i = 0; i < weights.size(); ++i) {
    m[i] = config.beta1 * state.first[i] + (1.0 - config.beta1) * grads[i];
    v[i] = config.beta2 * state.second[i] + (1.0 - config.beta2) * grads[i].cwiseAbs2();
    const Matrix m_hat = m[i] / c1;
    const Matrix v_hat = v[i] / c2;
    w[i] = *weights[i] - (config.learning_rate * m_hat.array() / (v_hat.array().sqrt() + config.epsilon)).matrix();
    if (!w[i].allFinite()) throw NumericError("adam: update produced a non-finite weight in tensor " + std::to_string(i));
  }
  for (std::size_t i = 0; i < weights.size(); ++i) {
    *weights[i] = std::move(w[i]);
    state.first[i] = std::move(m[i]);
    state.second[i] = std::move(v[i]);
  }
  state.step = t;
}

void sgd_step(std::span<Matrix* const> weights, std::span<const Matrix> grads, const OptimizerConfig& config) {
  check_shapes(weights, grads);
  std::vector<Matrix> w(weights.size());
  for (std::size_t i = 0; i < weights.size(); ++i) {
    w[i] = *weights[i] - config.learning_rate * grads[i];
    if (!w[i].allFinite()) throw NumericError("sgd: update produced a non-finite weight in tensor " + std::to_string(i));
  }
  for (std::size_t i = 0; i < weights.size(); ++i) *weights[i] = std::move(w[i]);
}

void optimizer_step(std::span<Matrix* const> weights, std::span<const Matrix> grads, const OptimizerConfig& config,
                    AdamState& state) {
  if (config.kind == OptimizerKind::adam) {
    adam_step(weights, grads, config, state);
  } else {
    sgd_step(weights, grads, config);
    ++state.step;
  }
}

double clip_by_global_norm(std::span<Matrix> grads, double max_norm) {
  double sq = 0.0;
  for (const Matrix& g : grads) sq += g.squaredNorm();
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double s = max_norm / norm;
    for (Matrix& g : grads) g *= s;
  }
  return norm;
}

}  // namespace adap
