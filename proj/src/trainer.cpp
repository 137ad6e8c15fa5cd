#include "adap/trainer.hpp"

#include "adap/errors.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <thread>

namespace adap {

Method parse_method(std::string_view name) {
  if (name == "adap") return Method::adap;
  if (name == "vanilla") return Method::vanilla;
  if (name == "diayn_star" || name == "diayn*") return Method::diayn_star;
  throw ConfigError("unknown method '" + std::string(name) + "'");
}

std::string_view to_string(Method m) {
  switch (m) {
    case Method::adap: return "adap";
    case Method::vanilla: return "vanilla";
    case Method::diayn_star: return "diayn_star";
  }
  return "adap";
}

void validate(const TrainerConfig& c) {
  if (c.batch_size < 1) throw ConfigError("train.batch_size must be positive");
  if (c.minibatch_size < 1) throw ConfigError("train.minibatch_size must be positive");
  if (c.minibatch_size > c.batch_size) throw ConfigError("train.minibatch_size must not exceed train.batch_size");
  if (c.sgd_iters < 1) throw ConfigError("train.sgd_iters must be positive");
  if (c.clip <= 0.0) throw ConfigError("train.clip must be positive");
  if (c.gamma < 0.0 || c.gamma > 1.0) throw ConfigError("train.gamma must be in [0, 1]");
  if (c.lambda < 0.0 || c.lambda > 1.0) throw ConfigError("train.lambda must be in [0, 1]");
  if (c.grad_clip <= 0.0) throw ConfigError("train.grad_clip must be positive");
  if (c.optimizer.learning_rate <= 0.0) throw ConfigError("train.learning_rate must be positive");
  if (c.num_workers < 1 || c.envs_per_worker < 1) throw ConfigError("train: need at least one worker and env");
  if (c.discriminator_epochs < 0 || c.discriminator_hidden < 1) throw ConfigError("train: bad discriminator shape");
  validate(c.diversity);
}

GaeResult compute_gae(std::span<const double> rewards, std::span<const double> values, double bootstrap,
                      bool terminal, double gamma, double lambda) {
  if (rewards.size() != values.size()) throw ConfigError("compute_gae: rewards and values differ in length");
  const std::size_t n = rewards.size();
  GaeResult out;
  out.advantages.resize(n);
  out.value_targets.resize(n);
  double next_value = terminal ? 0.0 : bootstrap;
  double gae = 0.0;
  for (std::size_t i = n; i-- > 0;) {
    const double delta = rewards[i] + gamma * next_value - values[i];
    gae = delta + gamma * lambda * gae;
    out.advantages[i] = gae;
    out.value_targets[i] = gae + values[i];
    next_value = values[i];
  }
  return out;
}

void compute_batch_advantages(Batch& batch, double gamma, double lambda, bool normalize) {
  const auto n = batch.rewards.cols();
  if (batch.values.cols() != n) throw ConfigError("compute_batch_advantages: rewards and values differ in length");
  batch.advantages.resize(n);
  batch.value_targets.resize(n);
  for (const Segment& s : batch.segments) {
    if (s.start < 0 || s.length < 0 || s.start + s.length > n) {
      throw ConfigError("compute_batch_advantages: segment outside the batch");
    }
    const auto rewards = std::span<const double>(batch.rewards.data() + s.start, static_cast<std::size_t>(s.length));
    const auto values = std::span<const double>(batch.values.data() + s.start, static_cast<std::size_t>(s.length));
    const GaeResult g = compute_gae(rewards, values, s.bootstrap_value, s.terminal, gamma, lambda);
    for (int i = 0; i < s.length; ++i) {
      batch.advantages[s.start + i] = g.advantages[static_cast<std::size_t>(i)];
      batch.value_targets[s.start + i] = g.value_targets[static_cast<std::size_t>(i)];
    }
  }
  if (normalize && n > 1) {
    const double mu = batch.advantages.mean();
    const double var = (batch.advantages.array() - mu).square().mean();
    batch.advantages = ((batch.advantages.array() - mu) / (std::sqrt(var) + 1e-8)).matrix();
  }
}

PpoTerms ppo_loss(Tape& tape, const PolicyGenerator& gen, const PpoBatch& batch, double clip,
                  double value_coefficient, double entropy_coefficient) {
  const Var logits = gen.logits(tape, batch.observations, batch.latents);
  const Var logp_all = log_softmax(logits);
  const Var logp = tape.pick(logp_all, batch.actions);
  const Var ratio = exp(logp - tape.constant(batch.log_prob_old));
  const Matrix& r = ratio.value();
  for (Eigen::Index i = 0; i < r.cols(); ++i) {
    if (!std::isfinite(r(0, i))) throw NumericError("ppo: non-finite probability ratio at sample " + std::to_string(i));
  }
  const Var adv = tape.constant(batch.advantages);
  const Var unclipped = hadamard(ratio, adv);
  const Var clipped = hadamard(clamp(ratio, 1.0 - clip, 1.0 + clip), adv);

  PpoTerms t;
  t.surrogate = mean(minimum(unclipped, clipped));
  t.entropy = -mean(col_sum(hadamard(softmax(logits), logp_all)));
  const Var values = gen.values(tape, batch.observations, batch.latents);
  t.value_loss = mean(square(values - tape.constant(batch.value_targets)));
  t.objective = t.surrogate - value_coefficient * t.value_loss + entropy_coefficient * t.entropy;
  return t;
}

MinibatchLoss minibatch_loss(Tape& tape, const PolicyGenerator& gen, const PpoBatch& batch,
                             const TrainerConfig& config, const Matrix& diversity_states,
                             const Matrix& diversity_latents) {
  MinibatchLoss out;
  out.ppo = ppo_loss(tape, gen, batch, config.clip, config.value_coefficient, config.entropy_coefficient);
  out.total = -out.ppo.objective;
  const double alpha = config.effective_alpha();
  if (alpha != 0.0) {
    out.diversity = l_div(tape, gen, diversity_states, diversity_latents, config.diversity.smoothing,
                          config.diversity.mode);
    out.total = out.total + alpha * out.diversity;
  } else {
    out.diversity = tape.constant(Matrix::Zero(1, 1));
  }
  return out;
}

Discriminator::Discriminator(int observation_size, int latent_dim, int hidden, Rng& rng) {
  const std::vector<int> sizes{observation_size, hidden, hidden, latent_dim};
  net_ = DenseNetd::random(sizes, Activation::tanh, Activation::identity, rng);
}

Matrix Discriminator::predict(const Matrix& observations) const { return net_forward(net_, observations); }

Var Discriminator::regression_loss(Tape& tape, const Matrix& observations, const Matrix& latents) const {
  const Var q = net_forward(tape, net_, tape.constant(observations));
  return mean(col_sum(square(q - tape.constant(latents))));
}

double Discriminator::train(const Matrix& observations, const Matrix& latents, int epochs,
                            const OptimizerConfig& opt) {
  std::vector<Matrix*> params;
  net_.for_each_parameter([&](Matrix& m) { params.push_back(&m); });
  double loss = 0.0;
  for (int e = 0; e < epochs; ++e) {
    Tape tape;
    const Var l = regression_loss(tape, observations, latents);
    tape.backward(l);
    loss = l.scalar();
    std::vector<Matrix> grads;
    for (Matrix* p : params) grads.push_back(tape.gradient(*p));
    adam_step(params, grads, opt, state_);
  }
  return loss;
}

RowVector diayn_star_reward(const Matrix& predictions, const Matrix& latents, const RowVector& rewards,
                            double intrinsic_coefficient) {
  if (predictions.rows() != latents.rows() || predictions.cols() != latents.cols() ||
      rewards.cols() != latents.cols()) {
    throw ConfigError("diayn_star_reward: shape mismatch");
  }
  const RowVector raw = -intrinsic_coefficient * (predictions - latents).colwise().squaredNorm();
  const double centre = raw.size() > 0 ? raw.mean() : 0.0;
  return (raw.array() - centre).matrix() + rewards;
}

namespace {

struct StepRecord {
  Vector observation;
  int action = 0;
  double log_prob = 0.0;
  double value = 0.0;
  double reward = 0.0;
};

struct SegmentData {
  LatentVector latent;
  std::vector<StepRecord> steps;
  bool terminal = false;
  double bootstrap = 0.0;
};

struct AgentSlot {
  SegmentData open;
  double episode_return = 0.0;
};

struct WorkerOutput {
  std::vector<SegmentData> segments;
  std::vector<double> returns;
  int steps = 0;
};

}  // namespace

struct Trainer::Worker {
  std::vector<std::unique_ptr<Environment>> envs;
  std::vector<std::vector<AgentSlot>> slots;
  Rng rng;
  bool started = false;

  void reset_env(std::size_t e, int k) {
    envs[e]->reset(rng());
    for (AgentSlot& s : slots[e]) {
      s.open = SegmentData{};
      s.open.latent = sample_latent(rng, k);
      s.episode_return = 0.0;
    }
  }

  WorkerOutput collect(const PolicyGenerator& gen, int quota) {
    const int k = gen.config().latent_dim;
    if (!started) {
      slots.resize(envs.size());
      for (std::size_t e = 0; e < envs.size(); ++e) {
        slots[e].resize(static_cast<std::size_t>(envs[e]->agent_count()));
        reset_env(e, k);
      }
      started = true;
    }
    WorkerOutput out;
    std::vector<std::pair<std::size_t, int>> cols;
    while (out.steps < quota) {
      cols.clear();
      for (std::size_t e = 0; e < envs.size(); ++e) {
        for (int a = 0; a < envs[e]->agent_count(); ++a) {
          if (envs[e]->alive(a)) cols.emplace_back(e, a);
        }
      }
      if (cols.empty()) throw EnvironmentError("rollout: no living agents in any environment");
      const Eigen::Index n = static_cast<Eigen::Index>(cols.size());
      Matrix obs(gen.config().observation_size, n);
      Matrix lat(k, n);
      for (Eigen::Index c = 0; c < n; ++c) {
        const auto [e, a] = cols[static_cast<std::size_t>(c)];
        obs.col(c) = envs[e]->observation(a);
        lat.col(c) = slots[e][static_cast<std::size_t>(a)].open.latent.values();
      }
      const Matrix probs = gen.probabilities(obs, lat);
      const RowVector values = gen.values(obs, lat);
      const std::vector<int> acts = sample_actions(probs, rng);

      std::size_t c = 0;
      while (c < cols.size()) {
        const std::size_t e = cols[c].first;
        std::vector<int> actions(static_cast<std::size_t>(envs[e]->agent_count()), kNoAction);
        const std::size_t first = c;
        for (; c < cols.size() && cols[c].first == e; ++c) actions[static_cast<std::size_t>(cols[c].second)] = acts[c];
        const StepResult result = envs[e]->step(actions);
        for (std::size_t i = first; i < c; ++i) {
          const int a = cols[i].second;
          AgentSlot& slot = slots[e][static_cast<std::size_t>(a)];
          const AgentStep& s = result.agents[static_cast<std::size_t>(a)];
          const auto col = static_cast<Eigen::Index>(i);
          slot.open.steps.push_back(
              {obs.col(col), acts[i], std::log(probs(acts[i], col)), values(col), s.reward});
          slot.episode_return += s.reward;
          ++out.steps;
          if (s.done || result.episode_done) {
            slot.open.terminal = true;
            slot.open.bootstrap = 0.0;
            out.segments.push_back(std::move(slot.open));
            out.returns.push_back(slot.episode_return);
            slot.open = SegmentData{};
            slot.open.latent = out.segments.back().latent;
            slot.episode_return = 0.0;
          }
        }
        if (result.episode_done) reset_env(e, k);
      }
    }

    // Close open segments with a bootstrapped value; the slots keep their latents.
    std::vector<std::pair<std::size_t, int>> open;
    for (std::size_t e = 0; e < envs.size(); ++e) {
      for (int a = 0; a < envs[e]->agent_count(); ++a) {
        if (!slots[e][static_cast<std::size_t>(a)].open.steps.empty()) open.emplace_back(e, a);
      }
    }
    if (!open.empty()) {
      const Eigen::Index n = static_cast<Eigen::Index>(open.size());
      Matrix obs(gen.config().observation_size, n);
      Matrix lat(k, n);
      for (Eigen::Index c = 0; c < n; ++c) {
        const auto [e, a] = open[static_cast<std::size_t>(c)];
        obs.col(c) = envs[e]->observation(a);
        lat.col(c) = slots[e][static_cast<std::size_t>(a)].open.latent.values();
      }
      const RowVector boot = gen.values(obs, lat);
      for (Eigen::Index c = 0; c < n; ++c) {
        const auto [e, a] = open[static_cast<std::size_t>(c)];
        SegmentData& seg = slots[e][static_cast<std::size_t>(a)].open;
        seg.terminal = false;
        seg.bootstrap = boot(c);
        out.segments.push_back(std::move(seg));
        seg = SegmentData{};
        seg.latent = out.segments.back().latent;
      }
    }
    return out;
  }
};

Trainer::Trainer(PolicyGenerator generator, EnvironmentFactory factory, TrainerConfig config, std::uint64_t seed)
    : generator_(std::move(generator)), factory_(std::move(factory)), config_(config) {
  validate(config_);
  update_rng_.seed(derive_seed(seed, 1));
  for (int w = 0; w < config_.num_workers; ++w) {
    auto worker = std::make_unique<Worker>();
    worker->rng.seed(derive_seed(seed, 100 + static_cast<std::uint64_t>(w)));
    for (int e = 0; e < config_.envs_per_worker; ++e) {
      auto env = factory_();
      if (env->observation_size() != generator_.config().observation_size ||
          env->action_count() != generator_.config().action_count) {
        throw ConfigError("trainer: generator shape does not match environment '" + env->name() + "'");
      }
      worker->envs.push_back(std::move(env));
    }
    workers_.push_back(std::move(worker));
  }
  if (config_.method == Method::diayn_star) {
    Rng rng(derive_seed(seed, 2));
    discriminator_ = std::make_unique<Discriminator>(generator_.config().observation_size,
                                                     generator_.config().latent_dim, config_.discriminator_hidden,
                                                     rng);
  }
}

Trainer::~Trainer() = default;
Trainer::Trainer(Trainer&&) noexcept = default;
Trainer& Trainer::operator=(Trainer&&) noexcept = default;

Batch Trainer::collect_batch() {
  const int w = config_.num_workers;
  std::vector<WorkerOutput> outputs(static_cast<std::size_t>(w));
  auto quota = [&](int i) { return config_.batch_size / w + (i < config_.batch_size % w ? 1 : 0); };
  if (w == 1) {
    outputs[0] = workers_[0]->collect(generator_, quota(0));
  } else {
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(w));
    std::vector<std::thread> threads;
    for (int i = 0; i < w; ++i) {
      threads.emplace_back([&, i] {
        try {
          outputs[static_cast<std::size_t>(i)] = workers_[static_cast<std::size_t>(i)]->collect(generator_, quota(i));
        } catch (...) {
          errors[static_cast<std::size_t>(i)] = std::current_exception();
        }
      });
    }
    for (auto& t : threads) t.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  Batch batch;
  int total = 0;
  for (const auto& o : outputs) total += o.steps;
  const int k = generator_.config().latent_dim;
  batch.observations.resize(generator_.config().observation_size, total);
  batch.latents.resize(k, total);
  batch.actions.reserve(static_cast<std::size_t>(total));
  batch.log_probs.resize(total);
  batch.values.resize(total);
  batch.rewards.resize(total);
  int i = 0;
  for (auto& o : outputs) {
    for (auto& seg : o.segments) {
      Segment s;
      s.start = i;
      s.length = static_cast<int>(seg.steps.size());
      s.terminal = seg.terminal;
      s.bootstrap_value = seg.bootstrap;
      s.latent = seg.latent;
      for (const StepRecord& r : seg.steps) {
        batch.observations.col(i) = r.observation;
        batch.latents.col(i) = seg.latent.values();
        batch.actions.push_back(r.action);
        batch.log_probs(i) = r.log_prob;
        batch.values(i) = r.value;
        batch.rewards(i) = r.reward;
        ++i;
      }
      batch.segments.push_back(std::move(s));
    }
    batch.episode_returns.insert(batch.episode_returns.end(), o.returns.begin(), o.returns.end());
  }
  return batch;
}

namespace {

Matrix sample_columns(const Matrix& source, int n, Rng& rng) {
  const int total = static_cast<int>(source.cols());
  Matrix out(source.rows(), n);
  if (n <= total) {
    std::vector<int> idx(static_cast<std::size_t>(total));
    std::iota(idx.begin(), idx.end(), 0);
    for (int j = 0; j < n; ++j) {
      std::swap(idx[static_cast<std::size_t>(j)], idx[static_cast<std::size_t>(uniform_int(rng, j, total - 1))]);
      out.col(j) = source.col(idx[static_cast<std::size_t>(j)]);
    }
  } else {
    for (int j = 0; j < n; ++j) out.col(j) = source.col(uniform_int(rng, 0, total - 1));
  }
  return out;
}

PpoBatch gather(const Batch& b, std::span<const int> idx) {
  PpoBatch p;
  const std::vector<int> cols(idx.begin(), idx.end());
  p.observations = b.observations(Eigen::all, cols);
  p.latents = b.latents(Eigen::all, cols);
  p.log_prob_old = b.log_probs(cols);
  p.advantages = b.advantages(cols);
  p.value_targets = b.value_targets(cols);
  p.actions.reserve(cols.size());
  for (int c : cols) p.actions.push_back(b.actions[static_cast<std::size_t>(c)]);
  return p;
}

}  // namespace

IterationMetrics Trainer::train_iteration() {
  const auto t0 = std::chrono::steady_clock::now();
  Batch batch = collect_batch();
  if (batch.size() == 0) throw EnvironmentError("trainer: empty rollout batch");

  // Commit nothing until every step succeeded.
  PolicyGenerator next = generator_;
  AdamState next_state = optimizer_state_;
  std::unique_ptr<Discriminator> next_disc;
  Rng rng = update_rng_;

  if (discriminator_) {
    next_disc = std::make_unique<Discriminator>(*discriminator_);
    OptimizerConfig opt = config_.optimizer;
    opt.kind = OptimizerKind::adam;
    opt.learning_rate = config_.discriminator_learning_rate;
    next_disc->train(batch.observations, batch.latents, config_.discriminator_epochs, opt);
    batch.rewards = diayn_star_reward(next_disc->predict(batch.observations), batch.latents, batch.rewards,
                                      config_.intrinsic_coefficient);
  }
  compute_batch_advantages(batch, config_.gamma, config_.lambda, config_.normalize_advantages);

  const int k = next.config().latent_dim;
  auto draw_diversity_sample = [&](Matrix& states, Matrix& latents) {
    std::vector<LatentVector> zs;
    for (int i = 0; i < config_.diversity.latent_samples; ++i) zs.push_back(sample_latent(rng, k));
    latents = latent_matrix(zs);
    states = sample_columns(batch.observations, config_.diversity.state_samples, rng);
  };
  Matrix div_states, div_latents;
  draw_diversity_sample(div_states, div_latents);

  IterationMetrics m;
  {
    Tape tape;
    m.l_div = l_div(tape, next, div_states, div_latents, config_.diversity.smoothing, config_.diversity.mode).scalar();
  }

  std::vector<int> order(static_cast<std::size_t>(batch.size()));
  std::iota(order.begin(), order.end(), 0);
  const std::vector<Matrix*> params = next.parameters();
  double entropy_sum = 0.0, value_sum = 0.0;
  int minibatches = 0;
  for (int epoch = 0; epoch < config_.sgd_iters; ++epoch) {
    if (epoch > 0 && config_.diversity.resample_each_epoch) draw_diversity_sample(div_states, div_latents);
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config_.minibatch_size)) {
      const std::size_t len = std::min(order.size() - start, static_cast<std::size_t>(config_.minibatch_size));
      const PpoBatch mb = gather(batch, std::span<const int>(order.data() + start, len));
      Tape tape;
      const MinibatchLoss loss = minibatch_loss(tape, next, mb, config_, div_states, div_latents);
      tape.backward(loss.total);
      std::vector<Matrix> grads;
      grads.reserve(params.size());
      for (const Matrix* p : params) grads.push_back(tape.gradient(*p));
      clip_by_global_norm(grads, config_.grad_clip);
      optimizer_step(params, grads, config_.optimizer, next_state);
      entropy_sum += loss.ppo.entropy.scalar();
      value_sum += loss.ppo.value_loss.scalar();
      ++minibatches;
    }
  }

  generator_ = std::move(next);
  optimizer_state_ = std::move(next_state);
  if (next_disc) discriminator_ = std::move(next_disc);
  update_rng_ = rng;
  ++iteration_;
  agent_steps_ += batch.size();

  m.iteration = iteration_;
  m.agent_steps = agent_steps_;
  m.episodes = static_cast<int>(batch.episode_returns.size());
  m.mean_episode_reward =
      m.episodes > 0 ? std::accumulate(batch.episode_returns.begin(), batch.episode_returns.end(), 0.0) / m.episodes
                     : std::nan("");
  m.entropy = entropy_sum / minibatches;
  m.value_loss = value_sum / minibatches;
  m.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return m;
}

}  // namespace adap
