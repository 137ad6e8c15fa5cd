#pragma once

#include "adap/tape.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace adap {

// Placeholder action for roster slots whose agent is no longer alive.
inline constexpr int kNoAction = -1;

struct AgentStep {
  Vector observation;
  double reward = 0.0;
  bool done = false;
};

struct StepResult {
  std::vector<AgentStep> agents;  // one entry per roster slot
  bool episode_done = false;
};

// Shared contract for every simulator. An instance is single-threaded and
// fully determined by (seed, action sequence).
class Environment {
 public:
  virtual ~Environment() = default;

  virtual std::string name() const = 0;
  virtual int observation_size() const = 0;
  virtual int action_count() const = 0;
  virtual int agent_count() const = 0;
  virtual int max_episode_timesteps() const = 0;

  virtual std::vector<Vector> reset(std::uint64_t seed) = 0;
  // `actions` has one entry per roster slot; entries of dead agents are ignored.
  // Throws EnvironmentError on an illegal id for a living agent or when the
  // episode is already over.
  virtual StepResult step(std::span<const int> actions) = 0;

  virtual bool done() const = 0;
  virtual bool alive(int agent) const = 0;
  virtual Vector observation(int agent) const = 0;
  virtual int tick() const = 0;
  virtual std::string render() const = 0;
  virtual nlohmann::json config_json() const = 0;
};

using EnvironmentFactory = std::function<std::unique_ptr<Environment>()>;

// Builds an environment from its name and config_json(); used by replay.
std::unique_ptr<Environment> make_environment(const std::string& name, const nlohmann::json& config);

// CRC-32 of the canonical JSON dump.
std::uint32_t config_hash(const nlohmann::json& config);

struct ReplayHeader {
  std::string env;
  std::uint64_t seed = 0;
  std::uint32_t config_hash = 0;
  nlohmann::json config;
};

struct ReplayRecord {
  int tick = 0;
  int agent_id = 0;
  int action = 0;
  double reward = 0.0;
  bool done = false;
};

// JSON-lines log: a header record followed by one record per agent per step.
class ReplayWriter {
 public:
  ReplayWriter(std::ostream& out, const Environment& env, std::uint64_t seed);
  void record(int tick, std::span<const int> actions, const StepResult& result, const Environment& env);
  // Appends a free-form result line, e.g. a soccer game outcome.
  void result_line(const nlohmann::json& result);

 private:
  std::ostream& out_;
};

struct ReplayLog {
  bool empty = true;
  ReplayHeader header;
  std::vector<ReplayRecord> records;
  std::vector<nlohmann::json> results;
};

// Throws ConfigError naming the 1-based line of the first corrupt record.
ReplayLog read_replay(std::istream& in);

struct ReplayOutcome {
  bool rewards_match = true;
  std::size_t steps = 0;
  std::vector<std::string> frames;  // rendered board after reset and after each tick
};

// Re-simulates a log and compares every reward bit-exactly.
ReplayOutcome replay(const ReplayLog& log);

}  // namespace adap
