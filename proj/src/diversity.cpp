#include "adap/diversity.hpp"

#include "adap/errors.hpp"

#include <cmath>
#include <string>

namespace adap {

DiversityMode parse_diversity_mode(std::string_view name) {
  if (name == "exp_neg_kl") return DiversityMode::exp_neg_kl;
  if (name == "raw_kl") return DiversityMode::raw_kl;
  throw ConfigError("unknown diversity mode '" + std::string(name) + "'");
}

std::string_view to_string(DiversityMode m) { return m == DiversityMode::exp_neg_kl ? "exp_neg_kl" : "raw_kl"; }

void validate(const DiversityConfig& config) {
  if (config.latent_samples < 2) throw ConfigError("diversity.latent_samples must be >= 2");
  if (config.state_samples < 1) throw ConfigError("diversity.state_samples must be >= 1");
  if (config.smoothing < 0.0) throw ConfigError("diversity.smoothing must be >= 0");
  if (config.coefficient < 0.0) throw ConfigError("diversity.coefficient must be >= 0");
}

ActionDistribution smooth(const ActionDistribution& dist, double b) {
  if (const auto* c = std::get_if<Categorical>(&dist)) {
    const double arity = static_cast<double>(c->probabilities.size());
    return Categorical{(c->probabilities.array() + b).matrix() / (1.0 + b * arity)};
  }
  const auto& g = std::get<Gaussian>(dist);
  return Gaussian{g.mean, (g.stddev.array() + b).matrix()};
}

double kl(const ActionDistribution& p, const ActionDistribution& q) {
  if (p.index() != q.index()) throw ConfigError("kl: distributions of different kinds");
  if (const auto* cp = std::get_if<Categorical>(&p)) {
    const auto& cq = std::get<Categorical>(q);
    if (cp->probabilities.size() != cq.probabilities.size()) throw ConfigError("kl: arity mismatch");
    double total = 0.0;
    for (Eigen::Index a = 0; a < cp->probabilities.size(); ++a) {
      const double pa = cp->probabilities[a];
      if (pa > 0.0) total += pa * (std::log(pa) - std::log(cq.probabilities[a]));
    }
    return std::max(total, 0.0);
  }
  const auto& gp = std::get<Gaussian>(p);
  const auto& gq = std::get<Gaussian>(q);
  if (gp.mean.size() != gq.mean.size()) throw ConfigError("kl: arity mismatch");
  double total = 0.0;
  for (Eigen::Index i = 0; i < gp.mean.size(); ++i) {
    const double s1 = gp.stddev[i];
    const double s2 = gq.stddev[i];
    const double dm = gp.mean[i] - gq.mean[i];
    total += std::log(s2 / s1) + (s1 * s1 + dm * dm) / (2.0 * s2 * s2) - 0.5;
  }
  return std::max(total, 0.0);
}

Var l_div(Tape& tape, const PolicyGenerator& gen, const Matrix& states, const Matrix& latents, double b,
          DiversityMode mode) {
  const Eigen::Index m = latents.cols();
  const Eigen::Index n = states.cols();
  if (m < 2) throw ConfigError("l_div: need at least two latents");
  if (n < 1) throw ConfigError("l_div: need at least one state");

  // Column i * n + s holds (state s, latent i).
  Matrix obs(states.rows(), m * n);
  Matrix lat(latents.rows(), m * n);
  for (Eigen::Index i = 0; i < m; ++i) {
    obs.middleCols(i * n, n) = states;
    lat.middleCols(i * n, n) = latents.col(i).replicate(1, n);
  }
  const double arity = static_cast<double>(gen.config().action_count);
  const Var probs = softmax(gen.logits(tape, obs, lat));
  const Var smoothed = (probs + b) * (1.0 / (1.0 + b * arity));
  const Var log_smoothed = log(smoothed);

  std::vector<int> left, right;
  left.reserve(static_cast<std::size_t>(m * (m - 1) / 2 * n));
  right.reserve(left.capacity());
  for (Eigen::Index i = 0; i + 1 < m; ++i) {
    for (Eigen::Index j = i + 1; j < m; ++j) {
      for (Eigen::Index s = 0; s < n; ++s) {
        left.push_back(static_cast<int>(i * n + s));
        right.push_back(static_cast<int>(j * n + s));
      }
    }
  }
  const Var p_i = tape.select_cols(smoothed, left);
  const Var log_p_i = tape.select_cols(log_smoothed, left);
  const Var log_p_j = tape.select_cols(log_smoothed, std::move(right));
  const Var pair_kl = col_sum(hadamard(p_i, log_p_i - log_p_j));
  if (mode == DiversityMode::raw_kl) return mean(pair_kl);
  return mean(exp(-pair_kl));
}

double l_div_estimate(const PolicyGenerator& gen, const Matrix& states, const std::vector<LatentVector>& latents,
                      double b, DiversityMode mode) {
  if (latents.size() < 2) throw ConfigError("l_div_estimate: need at least two latents (m >= 2)");
  Tape tape;
  return l_div(tape, gen, states, latent_matrix(latents), b, mode).scalar();
}

}  // namespace adap
