#pragma once

#include "adap/dense_net.hpp"
#include "adap/random.hpp"
#include "adap/tape.hpp"

#include <string_view>
#include <variant>
#include <vector>

namespace adap {

inline constexpr int kDefaultLatentDim = 3;

// A point on the unit sphere in R^k selecting one policy from the generator.
class LatentVector {
 public:
  LatentVector() = default;
  // Normalizes `z`; throws ConfigError for a zero or non-finite vector.
  explicit LatentVector(Vector z);

  const Vector& values() const { return z_; }
  Eigen::Index size() const { return z_.size(); }
  double operator[](Eigen::Index i) const { return z_[i]; }

  friend bool operator==(const LatentVector& a, const LatentVector& b) { return a.z_ == b.z_; }

 private:
  Vector z_;
};

// Uniform on the unit sphere via normalized Gaussian draws.
LatentVector sample_latent(Rng& rng, int k = kDefaultLatentDim);

// Stacks latents as columns of a k x n matrix.
Matrix latent_matrix(const std::vector<LatentVector>& latents);

struct Categorical {
  Vector probabilities;
};

struct Gaussian {
  Vector mean;
  Vector stddev;
};

using ActionDistribution = std::variant<Categorical, Gaussian>;

enum class Architecture { concatenation, multiplicative };

Architecture parse_architecture(std::string_view name);
std::string_view to_string(Architecture a);

struct GeneratorConfig {
  Architecture architecture = Architecture::multiplicative;
  int observation_size = 0;
  int action_count = 0;
  int latent_dim = kDefaultLatentDim;
  int hidden_dim = 64;
  int hidden_layers = 2;  // concatenation trunk depth; value net depth
  Activation policy_activation = Activation::tanh;
  Activation value_activation = Activation::tanh;
};

// G_phi: (observation, latent) -> action distribution, with a separate value
// network V(observation, latent). Batched entry points take observations as
// obs_size x B and latents as k x B.
//
// Multiplicative wiring: obs -> shared tanh layer h; k branch layers
// b_i = tanh(W_i h + c_i); mixed = h + sum_i z_i b_i; logits = head(mixed).
class PolicyGenerator {
 public:
  PolicyGenerator() = default;
  PolicyGenerator(const GeneratorConfig& config, Rng& rng);

  const GeneratorConfig& config() const { return config_; }

  Matrix logits(const Matrix& observations, const Matrix& latents) const;
  Matrix probabilities(const Matrix& observations, const Matrix& latents) const;
  RowVector values(const Matrix& observations, const Matrix& latents) const;

  Var logits(Tape& tape, const Matrix& observations, const Matrix& latents) const;
  Var values(Tape& tape, const Matrix& observations, const Matrix& latents) const;

  ActionDistribution distribution(const Vector& observation, const LatentVector& z) const;
  double value(const Vector& observation, const LatentVector& z) const;

  // Parameter tensors in a fixed order: policy networks first, then value network.
  std::vector<Matrix*> parameters();
  std::vector<const Matrix*> parameters() const;
  Eigen::Index parameter_count() const;
  Eigen::Index policy_parameter_count() const;
  // Weights of the layers between the observation input and the logit head.
  Eigen::Index hidden_parameter_count() const;

  // Concatenation architecture.
  const DenseNetd& policy_net() const { return policy_net_; }
  DenseNetd& policy_net() { return policy_net_; }
  // Multiplicative architecture.
  const DenseNetd& shared() const { return shared_; }
  DenseNetd& shared() { return shared_; }
  const std::vector<DenseNetd>& branches() const { return branches_; }
  std::vector<DenseNetd>& branches() { return branches_; }
  const DenseNetd& head() const { return head_; }
  DenseNetd& head() { return head_; }

  const DenseNetd& value_net() const { return value_net_; }
  DenseNetd& value_net() { return value_net_; }

 private:
  void check_inputs(const Matrix& observations, const Matrix& latents) const;

  GeneratorConfig config_;
  DenseNetd policy_net_;
  DenseNetd shared_;
  std::vector<DenseNetd> branches_;
  DenseNetd head_;
  DenseNetd value_net_;
};

// Input for concatenation-style networks: [obs; z] per column.
Matrix stack_inputs(const Matrix& observations, const Matrix& latents);

// Column-wise softmax.
Matrix softmax_columns(const Matrix& logits);

ActionDistribution concat_policy(const PolicyGenerator& gen, const Vector& observation, const LatentVector& z);
ActionDistribution multiplicative_policy(const PolicyGenerator& gen, const Vector& observation, const LatentVector& z);
double value(const PolicyGenerator& gen, const Vector& observation, const LatentVector& z);

// Samples an action index from each column of a probability matrix.
std::vector<int> sample_actions(const Matrix& probabilities, Rng& rng);
int argmax_action(const Eigen::Ref<const Vector>& probabilities);

}  // namespace adap
