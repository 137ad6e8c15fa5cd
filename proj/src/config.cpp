#include "adap/config.hpp"

#include "adap/errors.hpp"
#include "adap/farmworld.hpp"
#include "adap/multigoal.hpp"
#include "adap/soccer.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

namespace adap {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, std::string_view expected) {
  throw ConfigError("config key '" + key + "': expected " + std::string(expected) + ", got '" + value + "'");
}

}  // namespace

ConfigFile ConfigFile::parse(std::string_view text) {
  ConfigFile out;
  std::string section;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    if (t.front() == '[') {
      if (t.back() != ']' || t.size() < 3) throw ConfigError("config line " + std::to_string(line_no) + ": bad section header");
      section = trim(std::string_view(t).substr(1, t.size() - 2));
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(std::string_view(t).substr(0, eq));
    if (key.empty()) throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
    out.set(section.empty() ? key : section + "." + key, trim(std::string_view(t).substr(eq + 1)));
  }
  return out;
}

ConfigFile ConfigFile::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

void ConfigFile::set(const std::string& key, const std::string& value) { values_[key] = value; }

void ConfigFile::apply_override(std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) throw ConfigError("override '" + std::string(assignment) + "' is not key=value");
  const std::string key = trim(assignment.substr(0, eq));
  if (key.find('.') == std::string::npos) throw ConfigError("override key '" + key + "' needs a section prefix");
  set(key, trim(assignment.substr(eq + 1)));
}

const std::string& ConfigFile::require(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("missing required config key '" + key + "'");
  used_.insert(key);
  return it->second;
}

std::string ConfigFile::get_string(const std::string& key, const std::string& fallback) const {
  return has(key) ? require(key) : fallback;
}

double ConfigFile::get_double(const std::string& key, double fallback) const {
  if (!has(key)) return fallback;
  const std::string& v = require(key);
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) bad_value(key, v, "a number");
    return d;
  } catch (const std::logic_error&) {
    bad_value(key, v, "a number");
  }
}

int ConfigFile::get_int(const std::string& key, int fallback) const {
  if (!has(key)) return fallback;
  const std::string& v = require(key);
  int out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) bad_value(key, v, "an integer");
  return out;
}

std::uint64_t ConfigFile::get_u64(const std::string& key, std::uint64_t fallback) const {
  if (!has(key)) return fallback;
  const std::string& v = require(key);
  std::uint64_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) bad_value(key, v, "a non-negative integer");
  return out;
}

bool ConfigFile::get_bool(const std::string& key, bool fallback) const {
  if (!has(key)) return fallback;
  const std::string& v = require(key);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  bad_value(key, v, "a boolean");
}

std::vector<std::string> ConfigFile::keys(std::string_view section) const {
  std::vector<std::string> out;
  const std::string prefix = section.empty() ? "" : std::string(section) + ".";
  for (const auto& [k, v] : values_) {
    if (k.compare(0, prefix.size(), prefix) == 0) {
      out.push_back(k);
      used_.insert(k);
    }
  }
  return out;
}

void ConfigFile::check_all_used() const {
  for (const auto& [k, v] : values_) {
    if (!used_.count(k)) throw ConfigError("unknown config key '" + k + "'");
  }
}

nlohmann::json environment_preset(const std::string& env, const std::string& preset) {
  if (env == "multigoal") {
    if (preset != "default") throw ConfigError("run.preset: multigoal has no preset '" + preset + "'");
    return MultiGoalConfig{};
  }
  if (env == "soccer") {
    if (preset != "default") throw ConfigError("run.preset: soccer has no preset '" + preset + "'");
    return SoccerConfig{};
  }
  if (env == "farmworld") {
    if (preset == "default" || preset == "training") return build_ablation(Ablation::training);
    if (preset == "niche") return niche_specialization_config();
    try {
      return build_ablation(preset);
    } catch (const ConfigError&) {
      throw ConfigError("run.preset: farmworld has no preset '" + preset + "'");
    }
  }
  throw ConfigError("run.env: unknown environment '" + env + "'");
}

namespace {

// Overwrites one field of an environment JSON config from its text form,
// keeping the field's type.
void override_env_field(nlohmann::json& env, const std::string& key, const std::string& field,
                        const std::string& text) {
  if (!env.contains(field)) throw ConfigError("unknown config key '" + key + "'");
  nlohmann::json& slot = env[field];
  if (slot.is_string()) {
    std::string s;
    for (std::size_t i = 0; i < text.size(); ++i) {
      if (text[i] == '\\' && i + 1 < text.size() && text[i + 1] == 'n') {
        s += '\n';
        ++i;
      } else {
        s += text[i];
      }
    }
    slot = s;
    return;
  }
  nlohmann::json v;
  try {
    v = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception&) {
    bad_value(key, text, "a JSON literal");
  }
  if (slot.is_boolean() && !v.is_boolean()) bad_value(key, text, "a boolean");
  if (slot.is_number_integer() && !v.is_number_integer()) bad_value(key, text, "an integer");
  if (slot.is_number_float() && !v.is_number()) bad_value(key, text, "a number");
  if (slot.is_array() && !v.is_array()) bad_value(key, text, "an array");
  slot = slot.is_number_float() ? nlohmann::json(v.get<double>()) : v;
}

}  // namespace

ResolvedConfig resolve(const ConfigFile& file) {
  ResolvedConfig c;
  c.run.env = file.require("run.env");
  c.run.preset = file.get_string("run.preset", "default");
  c.env = environment_preset(c.run.env, c.run.preset);

  // Per-environment training tables.
  TrainerConfig& t = c.trainer;
  GeneratorConfig& g = c.generator;
  if (c.run.env == "multigoal") {
    t.batch_size = 4000;
    t.minibatch_size = 400;
    g.hidden_dim = 32;
    t.diversity.coefficient = 0.5;
    c.run.iterations = 500;
  } else if (c.run.env == "soccer") {
    t.gamma = 0.9;
    t.lambda = 0.95;
    c.run.iterations = 10000;
    c.search.episodes_per_latent = 10;
  } else {
    c.run.iterations = 10000;
  }

  c.run.seed = file.get_u64("run.seed", c.run.seed);
  c.run.iterations = file.get_int("run.iterations", c.run.iterations);
  c.run.checkpoint_every = file.get_int("run.checkpoint_every", c.run.checkpoint_every);
  if (file.has("run.seeds")) {
    c.run.seeds.clear();
    std::stringstream ss(file.require("run.seeds"));
    std::string item;
    while (std::getline(ss, item, ',')) {
      ConfigFile one;
      one.set("run.seeds", trim(item));
      c.run.seeds.push_back(one.get_u64("run.seeds", 0));
    }
    if (c.run.seeds.empty()) throw ConfigError("config key 'run.seeds': empty list");
  }
  if (c.run.iterations < 0) throw ConfigError("config key 'run.iterations': must be non-negative");
  if (c.run.checkpoint_every < 1) throw ConfigError("config key 'run.checkpoint_every': must be positive");

  t.method = parse_method(file.get_string("train.method", std::string(to_string(t.method))));
  if (t.method == Method::diayn_star && c.run.env != "soccer") g.value_activation = Activation::relu;
  t.batch_size = file.get_int("train.batch_size", t.batch_size);
  t.minibatch_size = file.get_int("train.minibatch_size", t.minibatch_size);
  t.sgd_iters = file.get_int("train.sgd_iters", t.sgd_iters);
  t.clip = file.get_double("train.clip", t.clip);
  t.entropy_coefficient = file.get_double("train.entropy_coefficient", t.entropy_coefficient);
  t.value_coefficient = file.get_double("train.value_coefficient", t.value_coefficient);
  t.gamma = file.get_double("train.gamma", t.gamma);
  t.lambda = file.get_double("train.lambda", t.lambda);
  t.grad_clip = file.get_double("train.grad_clip", t.grad_clip);
  t.normalize_advantages = file.get_bool("train.normalize_advantages", t.normalize_advantages);
  t.optimizer.learning_rate = file.get_double("train.learning_rate", t.optimizer.learning_rate);
  const std::string opt = file.get_string("train.optimizer", "adam");
  if (opt == "adam") {
    t.optimizer.kind = OptimizerKind::adam;
  } else if (opt == "sgd") {
    t.optimizer.kind = OptimizerKind::sgd;
  } else {
    bad_value("train.optimizer", opt, "adam or sgd");
  }
  t.intrinsic_coefficient = file.get_double("train.intrinsic_coefficient", t.intrinsic_coefficient);
  t.discriminator_hidden = file.get_int("train.discriminator_hidden", g.hidden_dim);
  t.discriminator_epochs = file.get_int("train.discriminator_epochs", t.discriminator_epochs);
  t.discriminator_learning_rate = file.get_double("train.discriminator_learning_rate", t.discriminator_learning_rate);
  t.num_workers = file.get_int("train.workers", t.num_workers);
  t.envs_per_worker = file.get_int("train.envs_per_worker", t.envs_per_worker);

  DiversityConfig& d = t.diversity;
  d.coefficient = file.get_double("diversity.alpha", d.coefficient);
  d.latent_samples = file.get_int("diversity.m", d.latent_samples);
  d.state_samples = file.get_int("diversity.n", d.state_samples);
  d.smoothing = file.get_double("diversity.b", d.smoothing);
  d.mode = parse_diversity_mode(file.get_string("diversity.mode", std::string(to_string(d.mode))));
  d.resample_each_epoch = file.get_bool("diversity.resample_each_epoch", d.resample_each_epoch);
  if (t.method == Method::vanilla) d.coefficient = 0.0;

  g.architecture = parse_architecture(file.get_string("generator.architecture", std::string(to_string(g.architecture))));
  g.latent_dim = file.get_int("generator.latent_dim", g.latent_dim);
  g.hidden_dim = file.get_int("generator.hidden", g.hidden_dim);
  g.hidden_layers = file.get_int("generator.hidden_layers", g.hidden_layers);
  g.policy_activation = parse_activation(file.get_string("generator.policy_activation", std::string(to_string(g.policy_activation))));
  g.value_activation = parse_activation(file.get_string("generator.value_activation", std::string(to_string(g.value_activation))));
  if (!file.has("train.discriminator_hidden")) t.discriminator_hidden = g.hidden_dim;

  SearchConfig& s = c.search;
  s.generations = file.get_int("search.generations", s.generations);
  s.episodes_per_latent = file.get_int("search.episodes_per_latent", s.episodes_per_latent);
  s.top = file.get_int("search.top", s.top);
  s.exploration_fraction = file.get_double("search.exploration_fraction", s.exploration_fraction);
  s.mutation_scale = file.get_double("search.mutation_scale", s.mutation_scale);
  s.exploration_coin = file.get_bool("search.exploration_coin", s.exploration_coin);
  s.latent_dim = g.latent_dim;

  c.eval.games = file.get_int("eval.games", c.eval.games);
  c.eval.family_size = file.get_int("eval.family_size", c.eval.family_size);
  c.eval.eval_episodes = file.get_int("eval.eval_episodes", c.eval.eval_episodes);
  c.eval.episodes = file.get_int("eval.episodes", c.eval.episodes);

  for (const std::string& key : file.keys(c.run.env)) {
    override_env_field(c.env, key, key.substr(c.run.env.size() + 1), file.entries().at(key));
  }

  validate(t);
  validate(s);
  if (g.latent_dim < 1 || g.hidden_dim < 1 || g.hidden_layers < 1) {
    throw ConfigError("config section 'generator': dimensions must be positive");
  }
  if (c.eval.games < 1 || c.eval.family_size < 1 || c.eval.eval_episodes < 1 || c.eval.episodes < 1) {
    throw ConfigError("config section 'eval': counts must be positive");
  }
  // Round-trips through the environment so invalid values surface here.
  const auto env = make_environment(c.run.env, c.env);
  c.env = env->config_json();
  g.observation_size = env->observation_size();
  g.action_count = env->action_count();
  file.check_all_used();
  return c;
}

nlohmann::json to_json(const ResolvedConfig& c) {
  const TrainerConfig& t = c.trainer;
  const GeneratorConfig& g = c.generator;
  return nlohmann::json{
      {"run",
       {{"env", c.run.env},
        {"preset", c.run.preset},
        {"seed", c.run.seed},
        {"seeds", c.run.seeds},
        {"iterations", c.run.iterations},
        {"checkpoint_every", c.run.checkpoint_every}}},
      {"generator",
       {{"architecture", to_string(g.architecture)},
        {"observation_size", g.observation_size},
        {"action_count", g.action_count},
        {"latent_dim", g.latent_dim},
        {"hidden", g.hidden_dim},
        {"hidden_layers", g.hidden_layers},
        {"policy_activation", to_string(g.policy_activation)},
        {"value_activation", to_string(g.value_activation)}}},
      {"train",
       {{"method", to_string(t.method)},
        {"batch_size", t.batch_size},
        {"minibatch_size", t.minibatch_size},
        {"sgd_iters", t.sgd_iters},
        {"clip", t.clip},
        {"entropy_coefficient", t.entropy_coefficient},
        {"value_coefficient", t.value_coefficient},
        {"gamma", t.gamma},
        {"lambda", t.lambda},
        {"grad_clip", t.grad_clip},
        {"normalize_advantages", t.normalize_advantages},
        {"optimizer", t.optimizer.kind == OptimizerKind::adam ? "adam" : "sgd"},
        {"learning_rate", t.optimizer.learning_rate},
        {"adam_beta1", t.optimizer.beta1},
        {"adam_beta2", t.optimizer.beta2},
        {"adam_epsilon", t.optimizer.epsilon},
        {"intrinsic_coefficient", t.intrinsic_coefficient},
        {"discriminator_hidden", t.discriminator_hidden},
        {"discriminator_epochs", t.discriminator_epochs},
        {"discriminator_learning_rate", t.discriminator_learning_rate},
        {"workers", t.num_workers},
        {"envs_per_worker", t.envs_per_worker}}},
      {"diversity",
       {{"alpha", t.diversity.coefficient},
        {"effective_alpha", t.effective_alpha()},
        {"m", t.diversity.latent_samples},
        {"n", t.diversity.state_samples},
        {"b", t.diversity.smoothing},
        {"mode", to_string(t.diversity.mode)},
        {"resample_each_epoch", t.diversity.resample_each_epoch}}},
      {"search",
       {{"generations", c.search.generations},
        {"episodes_per_latent", c.search.episodes_per_latent},
        {"top", c.search.top},
        {"exploration_fraction", c.search.exploration_fraction},
        {"mutation_scale", c.search.mutation_scale},
        {"exploration_coin", c.search.exploration_coin}}},
      {"eval",
       {{"games", c.eval.games},
        {"family_size", c.eval.family_size},
        {"eval_episodes", c.eval.eval_episodes},
        {"episodes", c.eval.episodes}}},
      {"env", c.env}};
}

EnvironmentFactory make_factory(const ResolvedConfig& config) {
  return [name = config.run.env, env = config.env] { return make_environment(name, env); };
}

}  // namespace adap
