#pragma once

#include "adap/environment.hpp"
#include "adap/latent_search.hpp"
#include "adap/policy.hpp"
#include "adap/trainer.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace adap {

// Flat sectioned key = value text:
//
//   [train]
//   batch_size = 8000   # comment
//
// Keys are addressed as "section.key".
class ConfigFile {
 public:
  static ConfigFile parse(std::string_view text);
  static ConfigFile load(const std::filesystem::path& path);

  void set(const std::string& key, const std::string& value);
  // "section.key=value", as given on the command line.
  void apply_override(std::string_view assignment);

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  const std::string& require(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  int get_int(const std::string& key, int fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  // Keys in `section` ("" for all); marks them used.
  std::vector<std::string> keys(std::string_view section) const;
  // Throws ConfigError naming the first key never read.
  void check_all_used() const;

  const std::map<std::string, std::string>& entries() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
  mutable std::set<std::string> used_;
};

struct RunConfig {
  std::string env;
  std::string preset = "default";
  std::uint64_t seed = 1;
  std::vector<std::uint64_t> seeds{1, 2, 3};
  int iterations = 0;
  int checkpoint_every = 10;
};

struct EvalConfig {
  int games = 1000;
  int family_size = 32;
  int eval_episodes = 10;
  int episodes = 20;  // specialization protocol
};

struct ResolvedConfig {
  RunConfig run;
  GeneratorConfig generator;
  TrainerConfig trainer;
  SearchConfig search;
  EvalConfig eval;
  nlohmann::json env;  // environment config, as accepted by make_environment
};

// Environment defaults per name and preset ("default", or for farmworld
// "training", "niche" and the ablation names).
nlohmann::json environment_preset(const std::string& env, const std::string& preset);

// Applies defaults (per-environment training tables, then design decisions),
// then every key in the file. Throws ConfigError naming the offending key.
ResolvedConfig resolve(const ConfigFile& file);

nlohmann::json to_json(const ResolvedConfig& config);

EnvironmentFactory make_factory(const ResolvedConfig& config);

}  // namespace adap
