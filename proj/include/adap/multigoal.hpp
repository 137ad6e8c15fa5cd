#pragma once

#include "adap/environment.hpp"

#include <array>

namespace adap {

struct MultiGoalConfig {
  int agents = 1;
  double step_size = 0.05;
  double goal_radius = 0.05;
  int max_episode_timesteps = 100;
  double start_x = 0.5;
  double start_y = 0.5;
};

void to_json(nlohmann::json& j, const MultiGoalConfig& c);
void from_json(const nlohmann::json& j, MultiGoalConfig& c);

// Point agents in the unit square with goals at the four corners.
// Actions: 0 up (+y), 1 down, 2 right (+x), 3 left, 4 stay.
// Reward per step: minus the distance to the nearest goal after moving.
class MultiGoalEnv final : public Environment {
 public:
  static constexpr int kActions = 5;
  static constexpr std::array<std::array<double, 2>, 4> kGoals{{{0.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}, {1.0, 1.0}}};

  explicit MultiGoalEnv(MultiGoalConfig config = {});

  std::string name() const override { return "multigoal"; }
  int observation_size() const override { return 2; }
  int action_count() const override { return kActions; }
  int agent_count() const override { return config_.agents; }
  int max_episode_timesteps() const override { return config_.max_episode_timesteps; }

  std::vector<Vector> reset(std::uint64_t seed) override;
  StepResult step(std::span<const int> actions) override;

  bool done() const override { return done_; }
  bool alive(int agent) const override { return !finished_.at(static_cast<std::size_t>(agent)); }
  Vector observation(int agent) const override;
  int tick() const override { return tick_; }
  std::string render() const override;
  nlohmann::json config_json() const override;

  // Index into kGoals of the goal an agent reached, or -1.
  int goal_reached(int agent) const { return reached_.at(static_cast<std::size_t>(agent)); }
  const std::array<double, 2>& position(int agent) const { return positions_.at(static_cast<std::size_t>(agent)); }

 private:
  MultiGoalConfig config_;
  std::vector<std::array<double, 2>> positions_;
  std::vector<bool> finished_;
  std::vector<int> reached_;
  int tick_ = 0;
  bool done_ = true;
};

}  // namespace adap
