#include "adap/policy.hpp"

#include "adap/errors.hpp"

#include <cmath>
#include <string>

namespace adap {

LatentVector::LatentVector(Vector z) {
  const double n = z.norm();
  if (!(n > 0.0) || !std::isfinite(n)) throw ConfigError("LatentVector: cannot normalize a zero or non-finite vector");
  z_ = z / n;
}

LatentVector sample_latent(Rng& rng, int k) {
  if (k < 1) throw ConfigError("sample_latent: latent dimension must be positive");
  Vector z(k);
  for (;;) {
    for (int i = 0; i < k; ++i) z[i] = standard_normal(rng);
    if (z.norm() > 1e-12) return LatentVector(z);
  }
}

Matrix latent_matrix(const std::vector<LatentVector>& latents) {
  if (latents.empty()) return Matrix();
  Matrix m(latents.front().size(), static_cast<Eigen::Index>(latents.size()));
  for (std::size_t i = 0; i < latents.size(); ++i) m.col(static_cast<Eigen::Index>(i)) = latents[i].values();
  return m;
}

Architecture parse_architecture(std::string_view name) {
  if (name == "concatenation" || name == "concat" || name == "+") return Architecture::concatenation;
  if (name == "multiplicative" || name == "mult" || name == "x") return Architecture::multiplicative;
  throw ConfigError("unknown architecture '" + std::string(name) + "'");
}

std::string_view to_string(Architecture a) {
  return a == Architecture::concatenation ? "concatenation" : "multiplicative";
}

Matrix stack_inputs(const Matrix& observations, const Matrix& latents) {
  Matrix x(observations.rows() + latents.rows(), observations.cols());
  x << observations, latents;
  return x;
}

Matrix softmax_columns(const Matrix& logits) {
  Matrix p(logits.rows(), logits.cols());
  for (Eigen::Index j = 0; j < logits.cols(); ++j) {
    const double mx = logits.col(j).maxCoeff();
    p.col(j) = (logits.col(j).array() - mx).exp().matrix();
    p.col(j) /= p.col(j).sum();
  }
  return p;
}

PolicyGenerator::PolicyGenerator(const GeneratorConfig& config, Rng& rng) : config_(config) {
  if (config.observation_size <= 0 || config.action_count <= 0 || config.latent_dim <= 0 || config.hidden_dim <= 0 ||
      config.hidden_layers <= 0) {
    throw ConfigError("PolicyGenerator: sizes must be positive");
  }
  const int obs = config.observation_size;
  const int k = config.latent_dim;
  const int d = config.hidden_dim;
  const int a = config.action_count;
  if (config.architecture == Architecture::concatenation) {
    std::vector<int> sizes{obs + k};
    for (int i = 0; i < config.hidden_layers; ++i) sizes.push_back(d);
    sizes.push_back(a);
    policy_net_ = DenseNetd::random(sizes, config.policy_activation, Activation::identity, rng, 1.0, 0.01);
  } else {
    const std::vector<int> shared_sizes{obs, d};
    shared_ = DenseNetd::random(shared_sizes, config.policy_activation, config.policy_activation, rng);
    const std::vector<int> branch_sizes{d, d};
    for (int i = 0; i < k; ++i) {
      branches_.push_back(DenseNetd::random(branch_sizes, config.policy_activation, config.policy_activation, rng));
    }
    const std::vector<int> head_sizes{d, a};
    head_ = DenseNetd::random(head_sizes, Activation::identity, Activation::identity, rng, 0.01, 0.01);
  }
  std::vector<int> value_sizes{obs + k};
  for (int i = 0; i < config.hidden_layers; ++i) value_sizes.push_back(d);
  value_sizes.push_back(1);
  value_net_ = DenseNetd::random(value_sizes, config.value_activation, Activation::identity, rng, 1.0, 1.0);
}

void PolicyGenerator::check_inputs(const Matrix& observations, const Matrix& latents) const {
  if (observations.rows() != config_.observation_size) {
    throw ConfigError("PolicyGenerator: observation size " + std::to_string(observations.rows()) + " != " +
                      std::to_string(config_.observation_size));
  }
  if (latents.rows() != config_.latent_dim) {
    throw ConfigError("PolicyGenerator: latent size " + std::to_string(latents.rows()) + " != " +
                      std::to_string(config_.latent_dim));
  }
  if (observations.cols() != latents.cols()) throw ConfigError("PolicyGenerator: batch sizes differ");
}

Matrix PolicyGenerator::logits(const Matrix& observations, const Matrix& latents) const {
  check_inputs(observations, latents);
  if (config_.architecture == Architecture::concatenation) {
    return net_forward(policy_net_, stack_inputs(observations, latents));
  }
  const Matrix h = net_forward(shared_, observations);
  Matrix mixed = h;
  for (std::size_t i = 0; i < branches_.size(); ++i) {
    mixed += net_forward(branches_[i], h) * latents.row(static_cast<Eigen::Index>(i)).asDiagonal();
  }
  return net_forward(head_, mixed);
}

Matrix PolicyGenerator::probabilities(const Matrix& observations, const Matrix& latents) const {
  return softmax_columns(logits(observations, latents));
}

RowVector PolicyGenerator::values(const Matrix& observations, const Matrix& latents) const {
  check_inputs(observations, latents);
  return net_forward(value_net_, stack_inputs(observations, latents)).row(0);
}

Var PolicyGenerator::logits(Tape& tape, const Matrix& observations, const Matrix& latents) const {
  check_inputs(observations, latents);
  if (config_.architecture == Architecture::concatenation) {
    return net_forward(tape, policy_net_, tape.constant(stack_inputs(observations, latents)));
  }
  const Var h = net_forward(tape, shared_, tape.constant(observations));
  Var mixed = h;
  for (std::size_t i = 0; i < branches_.size(); ++i) {
    const Var b = net_forward(tape, branches_[i], h);
    mixed = mixed + scale_columns(b, tape.constant(latents.row(static_cast<Eigen::Index>(i))));
  }
  return net_forward(tape, head_, mixed);
}

Var PolicyGenerator::values(Tape& tape, const Matrix& observations, const Matrix& latents) const {
  check_inputs(observations, latents);
  return net_forward(tape, value_net_, tape.constant(stack_inputs(observations, latents)));
}

ActionDistribution PolicyGenerator::distribution(const Vector& observation, const LatentVector& z) const {
  return Categorical{probabilities(observation, z.values()).col(0)};
}

double PolicyGenerator::value(const Vector& observation, const LatentVector& z) const {
  return values(observation, z.values())(0);
}

std::vector<Matrix*> PolicyGenerator::parameters() {
  std::vector<Matrix*> out;
  auto collect = [&out](Matrix& m) { out.push_back(&m); };
  if (config_.architecture == Architecture::concatenation) {
    policy_net_.for_each_parameter(collect);
  } else {
    shared_.for_each_parameter(collect);
    for (auto& b : branches_) b.for_each_parameter(collect);
    head_.for_each_parameter(collect);
  }
  value_net_.for_each_parameter(collect);
  return out;
}

std::vector<const Matrix*> PolicyGenerator::parameters() const {
  std::vector<const Matrix*> out;
  for (Matrix* m : const_cast<PolicyGenerator*>(this)->parameters()) out.push_back(m);
  return out;
}

Eigen::Index PolicyGenerator::parameter_count() const {
  return policy_parameter_count() + value_net_.parameter_count();
}

Eigen::Index PolicyGenerator::policy_parameter_count() const {
  if (config_.architecture == Architecture::concatenation) return policy_net_.parameter_count();
  Eigen::Index n = shared_.parameter_count() + head_.parameter_count();
  for (const auto& b : branches_) n += b.parameter_count();
  return n;
}

Eigen::Index PolicyGenerator::hidden_parameter_count() const {
  if (config_.architecture == Architecture::concatenation) {
    return policy_net_.parameter_count() - policy_net_.layers().back().weight.size() -
           policy_net_.layers().back().bias.size();
  }
  Eigen::Index n = shared_.parameter_count();
  for (const auto& b : branches_) n += b.parameter_count();
  return n;
}

ActionDistribution concat_policy(const PolicyGenerator& gen, const Vector& observation, const LatentVector& z) {
  if (gen.config().architecture != Architecture::concatenation) {
    throw ConfigError("concat_policy: generator is not a concatenation model");
  }
  return gen.distribution(observation, z);
}

ActionDistribution multiplicative_policy(const PolicyGenerator& gen, const Vector& observation, const LatentVector& z) {
  if (gen.config().architecture != Architecture::multiplicative) {
    throw ConfigError("multiplicative_policy: generator is not a multiplicative model");
  }
  return gen.distribution(observation, z);
}

double value(const PolicyGenerator& gen, const Vector& observation, const LatentVector& z) {
  return gen.value(observation, z);
}

std::vector<int> sample_actions(const Matrix& probabilities, Rng& rng) {
  std::vector<int> actions(static_cast<std::size_t>(probabilities.cols()));
  for (Eigen::Index j = 0; j < probabilities.cols(); ++j) {
    const double u = uniform01(rng);
    double acc = 0.0;
    int a = static_cast<int>(probabilities.rows()) - 1;
    for (Eigen::Index i = 0; i < probabilities.rows(); ++i) {
      acc += probabilities(i, j);
      if (u < acc) {
        a = static_cast<int>(i);
        break;
      }
    }
    actions[static_cast<std::size_t>(j)] = a;
  }
  return actions;
}

int argmax_action(const Eigen::Ref<const Vector>& probabilities) {
  Eigen::Index idx = 0;
  probabilities.maxCoeff(&idx);
  return static_cast<int>(idx);
}

}  // namespace adap
