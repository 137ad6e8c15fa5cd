#pragma once

#include "adap/policy.hpp"
#include "adap/tape.hpp"

#include <string_view>
#include <vector>

namespace adap {

// exp_neg_kl: mean of exp(-KL) over latent pairs and states, in (0, 1].
// raw_kl: mean pairwise KL over the same pairs and states.
enum class DiversityMode { exp_neg_kl, raw_kl };

DiversityMode parse_diversity_mode(std::string_view name);
std::string_view to_string(DiversityMode m);

struct DiversityConfig {
  int latent_samples = 10;  // m
  int state_samples = 30;   // n
  double smoothing = 0.05;  // b
  double coefficient = 0.2; // alpha
  DiversityMode mode = DiversityMode::exp_neg_kl;
  bool resample_each_epoch = false;
};

void validate(const DiversityConfig& config);

// Gaussian: sigma' = sigma + b. Categorical: p' = (p + b) / (1 + b A).
ActionDistribution smooth(const ActionDistribution& dist, double b);

// KL(p || q). Both must have the same kind and arity.
double kl(const ActionDistribution& p, const ActionDistribution& q);

// Pairwise smoothed-KL diversity over all m(m-1)/2 unordered latent pairs
// (KL(pi_zi || pi_zj) for i < j) and all states (columns of `states`).
Var l_div(Tape& tape, const PolicyGenerator& gen, const Matrix& states, const Matrix& latents, double b,
          DiversityMode mode = DiversityMode::exp_neg_kl);

double l_div_estimate(const PolicyGenerator& gen, const Matrix& states, const std::vector<LatentVector>& latents,
                      double b, DiversityMode mode = DiversityMode::exp_neg_kl);

}  // namespace adap
