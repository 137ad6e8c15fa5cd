#include "adap/dense_net.hpp"
#include "adap/diversity.hpp"
#include "adap/errors.hpp"
#include "adap/optimizer.hpp"
#include "adap/policy.hpp"
#include "gradcheck.hpp"

#include <doctest.h>

#include <cmath>
#include <vector>

using namespace adap;
using adap::testing::check_gradient;

namespace {

Matrix random_matrix(Rng& rng, Eigen::Index r, Eigen::Index c) {
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = uniform(rng, -1.0, 1.0);
  return m;
}

GeneratorConfig small_config(Architecture arch, int obs = 4, int actions = 3) {
  GeneratorConfig c;
  c.architecture = arch;
  c.observation_size = obs;
  c.action_count = actions;
  c.hidden_dim = 5;
  c.hidden_layers = 2;
  return c;
}

// Output head weights are tiny at init; scale them up so distributions differ.
void sharpen(PolicyGenerator& gen, Rng& rng) {
  for (Matrix* p : gen.parameters()) *p = random_matrix(rng, p->rows(), p->cols());
}

double direct_kl(const Vector& p, const Vector& q) {
  double s = 0.0;
  for (Eigen::Index a = 0; a < p.size(); ++a) s += p[a] * std::log(p[a] / q[a]);
  return s;
}

Vector direct_smooth(const Vector& p, double b) {
  return (p.array() + b) / (1.0 + b * static_cast<double>(p.size()));
}

}  // namespace

TEST_CASE("identity layer passes input through") {
  DenseLayer<double> l{Matrix::Identity(2, 2), Matrix::Zero(2, 1), Activation::identity};
  DenseNetd net({l});
  Matrix x(2, 1);
  x << 0.3, -0.7;
  CHECK(net_forward(net, x) == x);
}

TEST_CASE("hand-evaluated tanh layer") {
  Matrix w(2, 2);
  w << 1, 1, 1, -1;
  DenseNetd net({DenseLayer<double>{w, Matrix::Zero(2, 1), Activation::tanh}});
  Matrix x(2, 1);
  x << 0.5, 0.5;
  const Matrix y = net_forward(net, x);
  CHECK(y(0, 0) == doctest::Approx(0.7615941559557649));
  CHECK(y(1, 0) == 0.0);
}

TEST_CASE("zero input and zero bias give zero output under odd activations") {
  Rng rng(3);
  const std::vector<int> sizes{4, 6, 3};
  const DenseNetd net = DenseNetd::random(sizes, Activation::tanh, Activation::identity, rng);
  CHECK(net_forward(net, Matrix::Zero(4, 2)).isZero());
}

TEST_CASE("forward rejects mismatched input and layer shapes") {
  Rng rng(1);
  const std::vector<int> sizes{3, 2};
  const DenseNetd net = DenseNetd::random(sizes, Activation::tanh, Activation::identity, rng);
  CHECK_THROWS_AS(net_forward(net, Matrix::Zero(4, 1)), ConfigError);
  DenseLayer<double> a{Matrix::Zero(2, 3), Matrix::Zero(2, 1), Activation::tanh};
  DenseLayer<double> b{Matrix::Zero(2, 4), Matrix::Zero(2, 1), Activation::tanh};
  CHECK_THROWS_AS(DenseNetd({a, b}), ConfigError);
}

TEST_CASE("normc rows have the requested norm and forward is deterministic") {
  Rng rng(9);
  const Matrix w = DenseNetd::normc(5, 7, 0.01, rng);
  for (Eigen::Index r = 0; r < w.rows(); ++r) CHECK(w.row(r).norm() == doctest::Approx(0.01));
  const std::vector<int> sizes{7, 8, 2};
  const DenseNetd net = DenseNetd::random(sizes, Activation::relu, Activation::identity, rng);
  const Matrix x = random_matrix(rng, 7, 3);
  CHECK(net_forward(net, x) == net_forward(net, x));
}

TEST_CASE("recorded forward matches plain forward and sum loss has unit gradient") {
  Rng rng(4);
  const std::vector<int> sizes{3, 4, 2};
  DenseNetd net = DenseNetd::random(sizes, Activation::tanh, Activation::identity, rng);
  const Matrix x = random_matrix(rng, 3, 5);
  Tape t;
  CHECK((net_forward(t, net, t.constant(x)).value() - net_forward(net, x)).norm() < 1e-14);

  Tape t2;
  Matrix p = random_matrix(rng, 2, 3);
  Matrix unused = random_matrix(rng, 2, 2);
  t2.backward(sum(t2.parameter(p)));
  CHECK(t2.gradient(p) == Matrix::Ones(2, 3));
  CHECK(t2.gradient(unused).isZero());
}

TEST_CASE("two-layer net gradient matches central differences") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const std::vector<int> sizes{3, 4, 2};
    DenseNetd net = DenseNetd::random(sizes, Activation::tanh, Activation::identity, rng);
    const Matrix x = random_matrix(rng, 3, 4);
    const Matrix w = random_matrix(rng, 2, 4);
    std::vector<Matrix*> params;
    net.for_each_parameter([&](Matrix& m) { params.push_back(&m); });
    const auto r = check_gradient(params, [&](Tape& t) {
      return sum(hadamard(net_forward(t, net, t.constant(x)), t.constant(w)));
    }, 1e-5);
    CHECK(r.relative_error < 1e-4);
  }
}

TEST_CASE("adam matches a scalar hand trace") {
  // m1 = 0.05, v1 = 2.5e-4, bias-corrected 0.5 and 0.25, so each step is lr * 0.5 / (0.5 + eps).
  Matrix w = Matrix::Constant(1, 1, 1.0);
  std::vector<Matrix*> ws{&w};
  const std::vector<Matrix> g{Matrix::Constant(1, 1, 0.5)};
  OptimizerConfig cfg;
  cfg.learning_rate = 0.1;
  AdamState state;
  const double step = 0.1 * 0.5 / (0.5 + 1e-8);
  adam_step(ws, g, cfg, state);
  CHECK(w(0, 0) == doctest::Approx(1.0 - step).epsilon(1e-12));
  CHECK(state.step == 1);
  adam_step(ws, g, cfg, state);
  CHECK(w(0, 0) == doctest::Approx(1.0 - 2 * step).epsilon(1e-12));
  CHECK(w(0, 0) == doctest::Approx(0.8).epsilon(1e-6));
  CHECK(OptimizerConfig{}.learning_rate == 3e-4);
}

TEST_CASE("adam with zero gradient leaves weights and increments step") {
  Matrix w = Matrix::Constant(2, 2, 0.7);
  std::vector<Matrix*> ws{&w};
  const std::vector<Matrix> g{Matrix::Zero(2, 2)};
  AdamState state;
  adam_step(ws, g, OptimizerConfig{}, state);
  CHECK(w == Matrix::Constant(2, 2, 0.7));
  CHECK(state.step == 1);
}

TEST_CASE("adam rejects a non-finite gradient without touching state") {
  Matrix w = Matrix::Constant(1, 2, 1.0);
  std::vector<Matrix*> ws{&w};
  AdamState state;
  adam_step(ws, std::vector<Matrix>{Matrix::Constant(1, 2, 0.3)}, OptimizerConfig{}, state);
  const Matrix w_before = w;
  const AdamState s_before = state;
  Matrix bad(1, 2);
  bad << 0.1, std::nan("");
  CHECK_THROWS_AS(adam_step(ws, std::vector<Matrix>{bad}, OptimizerConfig{}, state), NumericError);
  CHECK(w == w_before);
  CHECK(state.step == s_before.step);
  CHECK(state.first[0] == s_before.first[0]);
  CHECK(state.second[0] == s_before.second[0]);
}

TEST_CASE("sgd step and global norm clipping") {
  Matrix w = Matrix::Constant(1, 1, 1.0);
  std::vector<Matrix*> ws{&w};
  OptimizerConfig cfg;
  cfg.kind = OptimizerKind::sgd;
  cfg.learning_rate = 0.5;
  AdamState state;
  optimizer_step(ws, std::vector<Matrix>{Matrix::Constant(1, 1, 2.0)}, cfg, state);
  CHECK(w(0, 0) == 0.0);

  std::vector<Matrix> g{Matrix::Constant(1, 1, 3.0), Matrix::Constant(1, 1, 4.0)};
  CHECK(clip_by_global_norm(g, 0.5) == doctest::Approx(5.0));
  CHECK(g[0](0, 0) == doctest::Approx(0.3));
  CHECK(g[1](0, 0) == doctest::Approx(0.4));
  CHECK(clip_by_global_norm(g, 0.5) == doctest::Approx(0.5));
  CHECK(g[1](0, 0) == doctest::Approx(0.4));
}

TEST_CASE("latents lie on the unit sphere and are centred") {
  Rng rng(11);
  Vector acc = Vector::Zero(3);
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const LatentVector z = sample_latent(rng);
    REQUIRE(std::abs(z.values().norm() - 1.0) < 1e-9);
    acc += z.values();
  }
  acc /= n;
  for (int i = 0; i < 3; ++i) CHECK(std::abs(acc[i]) < 0.02);
  CHECK(kDefaultLatentDim == 3);
  CHECK_THROWS_AS(LatentVector(Vector::Zero(3)), ConfigError);
  Vector v(2);
  v << 3.0, 4.0;
  CHECK(LatentVector(v)[1] == doctest::Approx(0.8));
}

TEST_CASE("policy outputs are valid distributions for both architectures") {
  for (Architecture arch : {Architecture::concatenation, Architecture::multiplicative}) {
    Rng rng(5);
    PolicyGenerator gen(small_config(arch), rng);
    sharpen(gen, rng);
    const Matrix obs = random_matrix(rng, 4, 6);
    Matrix lat(3, 6);
    for (int c = 0; c < 6; ++c) lat.col(c) = sample_latent(rng).values();
    const Matrix p = gen.probabilities(obs, lat);
    for (int c = 0; c < 6; ++c) {
      CHECK(std::abs(p.col(c).sum() - 1.0) < 1e-9);
      CHECK(p.col(c).minCoeff() >= 0.0);
      // Batched and single-column evaluations agree.
      const auto single = std::get<Categorical>(gen.distribution(obs.col(c), LatentVector(lat.col(c))));
      CHECK((single.probabilities - p.col(c)).norm() < 1e-12);
      CHECK(std::isfinite(gen.value(obs.col(c), LatentVector(lat.col(c)))));
    }
    CHECK_THROWS_AS(gen.probabilities(random_matrix(rng, 5, 1), lat.leftCols(1)), ConfigError);
    CHECK_THROWS_AS(gen.probabilities(obs.leftCols(1), Matrix::Ones(2, 1)), ConfigError);
  }
}

TEST_CASE("equal logits give a uniform distribution") {
  Matrix logits = Matrix::Constant(6, 1, 0.25);
  const Matrix p = softmax_columns(logits);
  for (int a = 0; a < 6; ++a) CHECK(p(a, 0) == doctest::Approx(1.0 / 6.0));
}

TEST_CASE("concatenation policy ignores z when latent weights are zero") {
  Rng rng(6);
  PolicyGenerator gen(small_config(Architecture::concatenation), rng);
  sharpen(gen, rng);
  Matrix& first = gen.policy_net().layers().front().weight;
  first.rightCols(3).setZero();
  const Vector obs = random_matrix(rng, 4, 1).col(0);
  const auto a = std::get<Categorical>(concat_policy(gen, obs, sample_latent(rng)));
  const auto b = std::get<Categorical>(concat_policy(gen, obs, sample_latent(rng)));
  CHECK(a.probabilities == b.probabilities);
}

TEST_CASE("multiplicative policy ignores z when branches are zero") {
  Rng rng(7);
  PolicyGenerator gen(small_config(Architecture::multiplicative), rng);
  sharpen(gen, rng);
  for (auto& br : gen.branches()) br.for_each_parameter([](Matrix& m) { m.setZero(); });
  const Vector obs = random_matrix(rng, 4, 1).col(0);
  const auto a = std::get<Categorical>(multiplicative_policy(gen, obs, sample_latent(rng)));
  const auto b = std::get<Categorical>(multiplicative_policy(gen, obs, sample_latent(rng)));
  CHECK((a.probabilities - b.probabilities).norm() == 0.0);
}

TEST_CASE("multiplicative basis latent does not see other branches") {
  Rng rng(8);
  PolicyGenerator gen(small_config(Architecture::multiplicative), rng);
  sharpen(gen, rng);
  const Vector obs = random_matrix(rng, 4, 1).col(0);
  const LatentVector e1(Vector::Unit(3, 0));
  const auto before = std::get<Categorical>(multiplicative_policy(gen, obs, e1));
  gen.branches()[1].for_each_parameter([](Matrix& m) { m.setZero(); });
  const auto after = std::get<Categorical>(multiplicative_policy(gen, obs, e1));
  CHECK((before.probabilities - after.probabilities).norm() == 0.0);
  const auto e2 = std::get<Categorical>(multiplicative_policy(gen, obs, LatentVector(Vector::Unit(3, 1))));
  CHECK((e2.probabilities - before.probabilities).norm() > 1e-6);
}

TEST_CASE("multiplicative output depends on z through finite differences") {
  Rng rng(10);
  PolicyGenerator gen(small_config(Architecture::multiplicative), rng);
  sharpen(gen, rng);
  const Matrix obs = random_matrix(rng, 4, 1);
  Matrix z(3, 1);
  z << 0.6, 0.0, 0.8;
  const double h = 1e-6;
  double grad_norm = 0.0;
  for (int i = 0; i < 3; ++i) {
    Matrix up = z, down = z;
    up(i, 0) += h;
    down(i, 0) -= h;
    grad_norm += ((gen.logits(obs, up) - gen.logits(obs, down)) / (2 * h)).squaredNorm();
  }
  CHECK(std::sqrt(grad_norm) > 1e-3);
}

TEST_CASE("multiplicative hidden parameters stay within the (k+1) d^2 bound") {
  Rng rng(2);
  GeneratorConfig c = small_config(Architecture::multiplicative, 64, 6);
  c.hidden_dim = 64;
  PolicyGenerator gen(c, rng);
  const Eigen::Index d = 64, k = 3, layers = 1;
  // Shared layer d*obs + d, then k branches of d*d + d.
  CHECK(gen.hidden_parameter_count() == d * 64 + d + k * (d * d + d));
  CHECK(gen.hidden_parameter_count() <= 4 * d * d * layers + (k + 1) * d);
}

TEST_CASE("policy and value networks share no parameters") {
  for (Architecture arch : {Architecture::concatenation, Architecture::multiplicative}) {
    Rng rng(1);
    PolicyGenerator gen(small_config(arch), rng);
    const auto params = gen.parameters();
    std::vector<Matrix*> value_params;
    gen.value_net().for_each_parameter([&](Matrix& m) { value_params.push_back(&m); });
    Eigen::Index total = 0;
    for (const Matrix* p : params) total += p->size();
    CHECK(total == gen.parameter_count());
    CHECK(gen.policy_parameter_count() + gen.value_net().parameter_count() == gen.parameter_count());
    // Value parameters are the tail of the list and nowhere else.
    for (std::size_t i = 0; i < params.size(); ++i) {
      const bool is_value = std::find(value_params.begin(), value_params.end(), params[i]) != value_params.end();
      CHECK(is_value == (i >= params.size() - value_params.size()));
    }
    CHECK(gen.value_net().input_size() == 4 + 3);
  }
}

TEST_CASE("value loss gradient matches central differences") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    PolicyGenerator gen(small_config(seed % 2 ? Architecture::concatenation : Architecture::multiplicative), rng);
    const Matrix obs = random_matrix(rng, 4, 5);
    const Matrix lat = random_matrix(rng, 3, 5);
    const Matrix target = random_matrix(rng, 1, 5);
    std::vector<Matrix*> params;
    gen.value_net().for_each_parameter([&](Matrix& m) { params.push_back(&m); });
    const auto r = check_gradient(params, [&](Tape& t) {
      return mean(square(gen.values(t, obs, lat) - t.constant(target)));
    }, 1e-5);
    CHECK(r.relative_error < 1e-4);
  }
}

TEST_CASE("smoothing follows the additive rule") {
  const ActionDistribution c = Categorical{Vector::Unit(2, 0)};
  const auto s = std::get<Categorical>(smooth(c, 0.05)).probabilities;
  CHECK(s[0] == doctest::Approx(1.05 / 1.1).epsilon(1e-12));
  CHECK(s[1] == doctest::Approx(0.05 / 1.1).epsilon(1e-12));
  CHECK(s[0] == doctest::Approx(0.954545).epsilon(1e-6));
  CHECK(std::get<Categorical>(smooth(c, 0.0)).probabilities == Vector::Unit(2, 0));
  const ActionDistribution g = Gaussian{Vector::Constant(1, 0.3), Vector::Constant(1, 0.1)};
  CHECK(std::get<Gaussian>(smooth(g, 0.05)).stddev[0] == doctest::Approx(0.15));
}

TEST_CASE("kl direct values") {
  Vector p(2), q(2);
  p << 0.5, 0.5;
  q << 0.25, 0.75;
  const double expect = 0.5 * std::log(2.0) + 0.5 * std::log(2.0 / 3.0);
  CHECK(kl(Categorical{p}, Categorical{q}) == doctest::Approx(expect).epsilon(1e-12));
  CHECK(expect == doctest::Approx(0.143841).epsilon(1e-5));
  CHECK(kl(Categorical{p}, Categorical{p}) == 0.0);
  const ActionDistribution g = Gaussian{Vector::Constant(2, 0.3), Vector::Constant(2, 0.4)};
  CHECK(kl(g, g) == 0.0);
  CHECK_THROWS_AS(kl(Categorical{p}, Categorical{Vector::Constant(3, 1.0 / 3)}), ConfigError);
}

TEST_CASE("kl between two latents matches the direct formula") {
  Rng rng(12);
  PolicyGenerator gen(small_config(Architecture::concatenation), rng);
  sharpen(gen, rng);
  const Vector obs = random_matrix(rng, 4, 1).col(0);
  const auto p = std::get<Categorical>(concat_policy(gen, obs, sample_latent(rng))).probabilities;
  const auto q = std::get<Categorical>(concat_policy(gen, obs, sample_latent(rng))).probabilities;
  CHECK(kl(Categorical{p}, Categorical{q}) == doctest::Approx(direct_kl(p, q)).epsilon(1e-12));
  CHECK(direct_kl(p, q) > 0.0);
}

TEST_CASE("l_div equals the brute-force pair average") {
  for (Architecture arch : {Architecture::concatenation, Architecture::multiplicative}) {
    Rng rng(13);
    PolicyGenerator gen(small_config(arch), rng);
    sharpen(gen, rng);
    const Matrix states = random_matrix(rng, 4, 2);
    std::vector<LatentVector> lat;
    for (int i = 0; i < 3; ++i) lat.push_back(sample_latent(rng));
    const double b = 0.05;
    double exp_acc = 0.0, raw_acc = 0.0;
    int pairs = 0;
    for (int i = 0; i < 3; ++i) {
      for (int j = i + 1; j < 3; ++j) {
        for (int s = 0; s < 2; ++s) {
          const Vector pi = direct_smooth(gen.probabilities(states.col(s), lat[i].values()).col(0), b);
          const Vector pj = direct_smooth(gen.probabilities(states.col(s), lat[j].values()).col(0), b);
          const double d = direct_kl(pi, pj);
          exp_acc += std::exp(-d);
          raw_acc += d;
          ++pairs;
        }
      }
    }
    CHECK(pairs == 6);
    CHECK(std::abs(l_div_estimate(gen, states, lat, b) - exp_acc / pairs) < 1e-12);
    CHECK(std::abs(l_div_estimate(gen, states, lat, b, DiversityMode::raw_kl) - raw_acc / pairs) < 1e-12);
  }
}

TEST_CASE("l_div range, identical latents and permutation symmetry") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    PolicyGenerator gen(small_config(seed % 2 ? Architecture::concatenation : Architecture::multiplicative), rng);
    sharpen(gen, rng);
    const int m = 2 + static_cast<int>(seed % 4);
    const Matrix states = random_matrix(rng, 4, 3);
    std::vector<LatentVector> lat;
    for (int i = 0; i < m; ++i) lat.push_back(sample_latent(rng));
    const double v = l_div_estimate(gen, states, lat, 0.05);
    CHECK(v > 0.0);
    CHECK(v <= 1.0);
    // Pairs are ordered (i < j) and KL is asymmetric, so reversing the list
    // swaps every KL direction; the pair set itself is unchanged.
    std::vector<LatentVector> reversed(lat.rbegin(), lat.rend());
    double swapped_dir = 0.0;
    int pairs = 0;
    for (int i = 0; i < m; ++i) {
      for (int j = i + 1; j < m; ++j) {
        for (int s = 0; s < 3; ++s) {
          const Vector pi = direct_smooth(gen.probabilities(states.col(s), lat[i].values()).col(0), 0.05);
          const Vector pj = direct_smooth(gen.probabilities(states.col(s), lat[j].values()).col(0), 0.05);
          swapped_dir += std::exp(-direct_kl(pj, pi));
          ++pairs;
        }
      }
    }
    CHECK(l_div_estimate(gen, states, reversed, 0.05) == doctest::Approx(swapped_dir / pairs).epsilon(1e-12));
    Matrix swapped = states;
    swapped.col(0).swap(swapped.col(2));
    CHECK(l_div_estimate(gen, swapped, lat, 0.05) == doctest::Approx(v).epsilon(1e-12));
    const std::vector<LatentVector> same(m, lat[0]);
    CHECK(l_div_estimate(gen, states, same, 0.05) == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("exp(-KL) grows as two distributions are interpolated together") {
  Vector p(3), q(3);
  p << 0.7, 0.2, 0.1;
  q << 0.1, 0.3, 0.6;
  double last = 0.0;
  for (int i = 0; i <= 10; ++i) {
    const double t = i / 10.0;
    const Vector r = (1 - t) * q + t * p;
    const double v = std::exp(-kl(smooth(Categorical{p}, 0.05), smooth(Categorical{r}, 0.05)));
    CHECK(v >= last);
    last = v;
  }
  CHECK(last == doctest::Approx(1.0));
}

TEST_CASE("l_div rejects a single latent") {
  Rng rng(1);
  PolicyGenerator gen(small_config(Architecture::multiplicative), rng);
  CHECK_THROWS_AS(l_div_estimate(gen, Matrix::Zero(4, 1), {sample_latent(rng)}, 0.05), ConfigError);
  DiversityConfig bad;
  bad.latent_samples = 1;
  CHECK_THROWS_AS(validate(bad), ConfigError);
}

TEST_CASE("l_div gradient matches central differences") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    PolicyGenerator gen(small_config(seed % 2 ? Architecture::concatenation : Architecture::multiplicative), rng);
    sharpen(gen, rng);
    const Matrix states = random_matrix(rng, 4, 2);
    Matrix lat(3, 3);
    for (int i = 0; i < 3; ++i) lat.col(i) = sample_latent(rng).values();
    const auto mode = seed < 10 ? DiversityMode::exp_neg_kl : DiversityMode::raw_kl;
    std::vector<Matrix*> params = gen.parameters();
    const auto r = check_gradient(params, [&](Tape& t) { return l_div(t, gen, states, lat, 0.05, mode); }, 1e-5);
    CHECK(r.relative_error < 1e-4);
  }
}
