#pragma once

#include "adap/tape.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace adap {

enum class OptimizerKind { adam, sgd };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::adam;
  double learning_rate = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// First/second moments aligned with the parameter list, plus the step counter.
struct AdamState {
  std::vector<Matrix> first;
  std::vector<Matrix> second;
  std::int64_t step = 0;
};

// Applies one Adam update in place. Throws NumericError and leaves weights and
// moments untouched if any gradient or resulting weight is non-finite.
void adam_step(std::span<Matrix* const> weights, std::span<const Matrix> grads, const OptimizerConfig& config,
               AdamState& state);

void sgd_step(std::span<Matrix* const> weights, std::span<const Matrix> grads, const OptimizerConfig& config);

void optimizer_step(std::span<Matrix* const> weights, std::span<const Matrix> grads, const OptimizerConfig& config,
                    AdamState& state);

// Rescales grads so their joint L2 norm is at most max_norm; returns the norm before clipping.
double clip_by_global_norm(std::span<Matrix> grads, double max_norm);

}  // namespace adap
