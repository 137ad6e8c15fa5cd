#pragma once

#include "adap/diversity.hpp"
#include "adap/environment.hpp"
#include "adap/optimizer.hpp"
#include "adap/policy.hpp"

#include <cstdint>
#include <memory>
#include <span>
#include <string_view>
#include <vector>

namespace adap {

enum class Method { adap, vanilla, diayn_star };

Method parse_method(std::string_view name);
std::string_view to_string(Method m);

struct TrainerConfig {
  Method method = Method::adap;
  int batch_size = 8000;      // agent steps
  int minibatch_size = 8000;
  int sgd_iters = 10;
  double clip = 0.3;
  double entropy_coefficient = 0.05;
  double value_coefficient = 0.5;
  double gamma = 0.99;
  double lambda = 1.0;
  double grad_clip = 0.5;
  bool normalize_advantages = true;
  OptimizerConfig optimizer;
  DiversityConfig diversity;
  // DIAYN* discriminator.
  double intrinsic_coefficient = 0.05;
  int discriminator_hidden = 64;
  int discriminator_epochs = 5;
  double discriminator_learning_rate = 1e-3;
  // Rollout layout.
  int num_workers = 1;
  int envs_per_worker = 1;

  // Diversity coefficient actually applied: zero unless method is adap.
  double effective_alpha() const { return method == Method::adap ? diversity.coefficient : 0.0; }
};

void validate(const TrainerConfig& config);

// One contiguous run of steps taken by one agent under one latent.
struct Segment {
  int start = 0;
  int length = 0;
  bool terminal = false;        // episode ended inside the segment
  double bootstrap_value = 0.0; // V(s_T) for truncated segments, 0 when terminal
  LatentVector latent;
};

// Flattened rollout batch; column / index i is one agent step.
struct Batch {
  Matrix observations;
  Matrix latents;
  std::vector<int> actions;
  RowVector log_probs;
  RowVector values;
  RowVector rewards;
  RowVector advantages;
  RowVector value_targets;
  std::vector<Segment> segments;
  std::vector<double> episode_returns;

  int size() const { return static_cast<int>(actions.size()); }
};

struct GaeResult {
  std::vector<double> advantages;
  std::vector<double> value_targets;
};

// GAE(gamma, lambda) over one segment; `bootstrap` is V after the last step (0 at a terminal).
GaeResult compute_gae(std::span<const double> rewards, std::span<const double> values, double bootstrap,
                      bool terminal, double gamma, double lambda);

// Fills batch.advantages / value_targets for every segment, then optionally
// normalizes advantages to zero mean and unit variance.
void compute_batch_advantages(Batch& batch, double gamma, double lambda, bool normalize);

struct PpoBatch {
  Matrix observations;
  Matrix latents;
  std::vector<int> actions;
  RowVector log_prob_old;
  RowVector advantages;
  RowVector value_targets;
};

struct PpoTerms {
  Var surrogate;   // mean clipped surrogate
  Var value_loss;  // mean squared value error
  Var entropy;     // mean policy entropy
  Var objective;   // surrogate - c_v * value_loss + c_e * entropy (maximized)
};

// Throws NumericError naming the sample index if a probability ratio is not finite.
PpoTerms ppo_loss(Tape& tape, const PolicyGenerator& gen, const PpoBatch& batch, double clip,
                  double value_coefficient, double entropy_coefficient);

// DIAYN*: network regressing the episode latent from the observation.
class Discriminator {
 public:
  Discriminator() = default;
  Discriminator(int observation_size, int latent_dim, int hidden, Rng& rng);

  Matrix predict(const Matrix& observations) const;
  Var regression_loss(Tape& tape, const Matrix& observations, const Matrix& latents) const;
  // Full-batch Adam epochs on the squared-error regression; returns the final loss.
  double train(const Matrix& observations, const Matrix& latents, int epochs, const OptimizerConfig& opt);

  const DenseNetd& net() const { return net_; }
  DenseNetd& net() { return net_; }

 private:
  DenseNetd net_;
  AdamState state_;
};

// err_t = -alpha * ||q(s_t) - z_t||^2 - mean(err); returns r'_t = err_t + r_t.
RowVector diayn_star_reward(const Matrix& predictions, const Matrix& latents, const RowVector& rewards,
                            double intrinsic_coefficient);

struct IterationMetrics {
  std::int64_t iteration = 0;
  std::int64_t agent_steps = 0;
  double mean_episode_reward = 0.0;
  int episodes = 0;
  double l_div = 0.0;
  double entropy = 0.0;
  double value_loss = 0.0;
  double wall_seconds = 0.0;
};

// ADAP with PPO. Owns the generator, optimizer state and persistent rollout
// environments; each agent episode draws a fresh latent that is held fixed
// until the episode ends.
class Trainer {
 public:
  Trainer(PolicyGenerator generator, EnvironmentFactory factory, TrainerConfig config, std::uint64_t seed);
  ~Trainer();
  Trainer(Trainer&&) noexcept;
  Trainer& operator=(Trainer&&) noexcept;

  // Collects a batch, computes advantages and runs the SGD epochs. On an
  // environment or numeric fault nothing is committed and the error propagates.
  IterationMetrics train_iteration();

  // Rollout collection only; exposed for inspection and tests.
  Batch collect_batch();

  const PolicyGenerator& generator() const { return generator_; }
  PolicyGenerator& generator() { return generator_; }
  const AdamState& optimizer_state() const { return optimizer_state_; }
  AdamState& optimizer_state() { return optimizer_state_; }
  const TrainerConfig& config() const { return config_; }
  std::int64_t iteration() const { return iteration_; }
  std::int64_t agent_steps() const { return agent_steps_; }
  void set_progress(std::int64_t iteration, std::int64_t agent_steps) {
    iteration_ = iteration;
    agent_steps_ = agent_steps;
  }
  const Discriminator* discriminator() const { return discriminator_.get(); }

 private:
  struct Worker;

  PolicyGenerator generator_;
  EnvironmentFactory factory_;
  TrainerConfig config_;
  AdamState optimizer_state_;
  Rng update_rng_;
  std::vector<std::unique_ptr<Worker>> workers_;
  std::unique_ptr<Discriminator> discriminator_;
  std::int64_t iteration_ = 0;
  std::int64_t agent_steps_ = 0;
};

// Loss minimized by one SGD step: -(PPO objective) + alpha * L_div.
struct MinibatchLoss {
  Var total;
  PpoTerms ppo;
  Var diversity;
};

MinibatchLoss minibatch_loss(Tape& tape, const PolicyGenerator& gen, const PpoBatch& batch,
                             const TrainerConfig& config, const Matrix& diversity_states,
                             const Matrix& diversity_latents);

}  // namespace adap
