#include "adap/multigoal.hpp"

#include "adap/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace adap {

void to_json(nlohmann::json& j, const MultiGoalConfig& c) {
  j = nlohmann::json{{"agents", c.agents},
                     {"step_size", c.step_size},
                     {"goal_radius", c.goal_radius},
                     {"max_episode_timesteps", c.max_episode_timesteps},
                     {"start_x", c.start_x},
                     {"start_y", c.start_y}};
}

void from_json(const nlohmann::json& j, MultiGoalConfig& c) {
  c.agents = j.value("agents", c.agents);
  c.step_size = j.value("step_size", c.step_size);
  c.goal_radius = j.value("goal_radius", c.goal_radius);
  c.max_episode_timesteps = j.value("max_episode_timesteps", c.max_episode_timesteps);
  c.start_x = j.value("start_x", c.start_x);
  c.start_y = j.value("start_y", c.start_y);
}

MultiGoalEnv::MultiGoalEnv(MultiGoalConfig config) : config_(config) {
  if (config_.agents < 1) throw ConfigError("multigoal.agents must be >= 1");
  if (config_.max_episode_timesteps < 1) throw ConfigError("multigoal.max_episode_timesteps must be >= 1");
  if (config_.step_size <= 0.0 || config_.goal_radius <= 0.0) {
    throw ConfigError("multigoal step_size and goal_radius must be positive");
  }
  if (config_.start_x < 0.0 || config_.start_x > 1.0 || config_.start_y < 0.0 || config_.start_y > 1.0) {
    throw ConfigError("multigoal start position must lie in the unit square");
  }
}

std::vector<Vector> MultiGoalEnv::reset(std::uint64_t /*seed*/) {
  const auto n = static_cast<std::size_t>(config_.agents);
  positions_.assign(n, {config_.start_x, config_.start_y});
  finished_.assign(n, false);
  reached_.assign(n, -1);
  tick_ = 0;
  done_ = false;
  std::vector<Vector> obs;
  for (int i = 0; i < config_.agents; ++i) obs.push_back(observation(i));
  return obs;
}

Vector MultiGoalEnv::observation(int agent) const {
  const auto& p = positions_.at(static_cast<std::size_t>(agent));
  return Vector{{p[0], p[1]}};
}

StepResult MultiGoalEnv::step(std::span<const int> actions) {
  if (done_) throw EnvironmentError("multigoal: step called on a finished episode");
  if (static_cast<int>(actions.size()) != config_.agents) throw EnvironmentError("multigoal: wrong number of actions");
  for (int i = 0; i < config_.agents; ++i) {
    if (!finished_[static_cast<std::size_t>(i)] && (actions[static_cast<std::size_t>(i)] < 0 ||
                                                    actions[static_cast<std::size_t>(i)] >= kActions)) {
      throw EnvironmentError("multigoal: illegal action " + std::to_string(actions[static_cast<std::size_t>(i)]) +
                             " for agent " + std::to_string(i));
    }
  }
  ++tick_;
  StepResult result;
  result.agents.resize(static_cast<std::size_t>(config_.agents));
  for (int i = 0; i < config_.agents; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    AgentStep& out = result.agents[idx];
    if (finished_[idx]) {
      out.observation = observation(i);
      out.done = true;
      continue;
    }
    auto& p = positions_[idx];
    switch (actions[idx]) {
      case 0: p[1] += config_.step_size; break;
      case 1: p[1] -= config_.step_size; break;
      case 2: p[0] += config_.step_size; break;
      case 3: p[0] -= config_.step_size; break;
      default: break;
    }
    p[0] = std::clamp(p[0], 0.0, 1.0);
    p[1] = std::clamp(p[1], 0.0, 1.0);
    double nearest = std::numeric_limits<double>::infinity();
    int nearest_goal = -1;
    for (std::size_t g = 0; g < kGoals.size(); ++g) {
      const double d = std::hypot(p[0] - kGoals[g][0], p[1] - kGoals[g][1]);
      if (d < nearest) {
        nearest = d;
        nearest_goal = static_cast<int>(g);
      }
    }
    out.reward = -nearest;
    if (nearest <= config_.goal_radius + 1e-9) {
      finished_[idx] = true;
      reached_[idx] = nearest_goal;
    }
    out.observation = observation(i);
  }
  const bool horizon = tick_ >= config_.max_episode_timesteps;
  done_ = horizon || std::all_of(finished_.begin(), finished_.end(), [](bool f) { return f; });
  for (auto& a : result.agents) a.done = a.done || done_;
  for (int i = 0; i < config_.agents; ++i) {
    if (finished_[static_cast<std::size_t>(i)]) result.agents[static_cast<std::size_t>(i)].done = true;
  }
  if (done_) std::fill(finished_.begin(), finished_.end(), true);
  result.episode_done = done_;
  return result;
}

std::string MultiGoalEnv::render() const {
  constexpr int kCells = 11;
  std::vector<std::string> rows(kCells, std::string(kCells, '.'));
  for (const auto& g : kGoals) {
    rows[static_cast<std::size_t>(std::lround((1.0 - g[1]) * (kCells - 1)))]
        [static_cast<std::size_t>(std::lround(g[0] * (kCells - 1)))] = 'G';
  }
  for (std::size_t i = 0; i < positions_.size(); ++i) {
    const auto& p = positions_[i];
    rows[static_cast<std::size_t>(std::lround((1.0 - p[1]) * (kCells - 1)))]
        [static_cast<std::size_t>(std::lround(p[0] * (kCells - 1)))] = static_cast<char>('0' + i % 10);
  }
  std::ostringstream out;
  out << "tick " << tick_ << '\n';
  for (const auto& r : rows) out << r << '\n';
  return out.str();
}

nlohmann::json MultiGoalEnv::config_json() const { return config_; }

}  // namespace adap
