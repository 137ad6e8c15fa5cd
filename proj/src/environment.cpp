#include "adap/environment.hpp"

#include "adap/errors.hpp"
#include "adap/farmworld.hpp"
#include "adap/multigoal.hpp"
#include "adap/soccer.hpp"

#include <boost/crc.hpp>

#include <istream>
#include <ostream>

namespace adap {

std::unique_ptr<Environment> make_environment(const std::string& name, const nlohmann::json& config) {
  if (name == "multigoal") return std::make_unique<MultiGoalEnv>(config.get<MultiGoalConfig>());
  if (name == "farmworld") return std::make_unique<FarmworldEnv>(config.get<FarmworldConfig>());
  if (name == "soccer") return std::make_unique<SoccerEnv>(config.get<SoccerConfig>());
  throw ConfigError("unknown environment '" + name + "'");
}

std::uint32_t config_hash(const nlohmann::json& config) {
  const std::string text = config.dump();
  boost::crc_32_type crc;
  crc.process_bytes(text.data(), text.size());
  return crc.checksum();
}

ReplayWriter::ReplayWriter(std::ostream& out, const Environment& env, std::uint64_t seed) : out_(out) {
  const nlohmann::json config = env.config_json();
  nlohmann::json header{{"env", env.name()}, {"seed", seed}, {"config_hash", config_hash(config)}, {"config", config}};
  out_ << header.dump() << '\n';
}

void ReplayWriter::record(int tick, std::span<const int> actions, const StepResult& result, const Environment&) {
  for (std::size_t i = 0; i < actions.size(); ++i) {
    if (actions[i] == kNoAction) continue;
    nlohmann::json rec{{"tick", tick},
                       {"agent_id", static_cast<int>(i)},
                       {"action", actions[i]},
                       {"reward", result.agents[i].reward},
                       {"done", result.agents[i].done}};
    out_ << rec.dump() << '\n';
  }
}

void ReplayWriter::result_line(const nlohmann::json& result) { out_ << nlohmann::json{{"result", result}}.dump() << '\n'; }

ReplayLog read_replay(std::istream& in) {
  ReplayLog log;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
      if (log.empty) {
        log.header.env = j.at("env").get<std::string>();
        log.header.seed = j.at("seed").get<std::uint64_t>();
        log.header.config_hash = j.at("config_hash").get<std::uint32_t>();
        log.header.config = j.at("config");
        log.empty = false;
        if (config_hash(log.header.config) != log.header.config_hash) {
          throw ConfigError("config hash mismatch");
        }
      } else if (j.contains("result")) {
        log.results.push_back(j.at("result"));
      } else {
        ReplayRecord r;
        r.tick = j.at("tick").get<int>();
        r.agent_id = j.at("agent_id").get<int>();
        r.action = j.at("action").get<int>();
        r.reward = j.at("reward").get<double>();
        r.done = j.at("done").get<bool>();
        log.records.push_back(r);
      }
    } catch (const std::exception& e) {
      throw ConfigError("replay: corrupt record on line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return log;
}

ReplayOutcome replay(const ReplayLog& log) {
  ReplayOutcome outcome;
  if (log.empty) return outcome;
  auto env = make_environment(log.header.env, log.header.config);
  env->reset(log.header.seed);
  outcome.frames.push_back(env->render());

  // Consecutive records sharing a tick form one step.
  std::vector<std::vector<const ReplayRecord*>> steps;
  for (const auto& r : log.records) {
    if (steps.empty() || steps.back().front()->tick != r.tick) steps.emplace_back();
    steps.back().push_back(&r);
  }
  for (const auto& records : steps) {
    // A log may hold several episodes; each restarts from the logged seed.
    if (env->done()) {
      env->reset(log.header.seed);
      outcome.frames.push_back(env->render());
    }
    std::vector<int> actions(static_cast<std::size_t>(env->agent_count()), kNoAction);
    for (const ReplayRecord* r : records) {
      if (r->agent_id < 0 || r->agent_id >= env->agent_count()) throw ConfigError("replay: agent id out of range");
      actions[static_cast<std::size_t>(r->agent_id)] = r->action;
    }
    const StepResult result = env->step(actions);
    for (const ReplayRecord* r : records) {
      if (result.agents[static_cast<std::size_t>(r->agent_id)].reward != r->reward) outcome.rewards_match = false;
    }
    ++outcome.steps;
    outcome.frames.push_back(env->render());
  }
  return outcome;
}

}  // namespace adap
