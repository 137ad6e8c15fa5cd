#pragma once

#include "adap/environment.hpp"
#include "adap/random.hpp"

#include <optional>
#include <string_view>

namespace adap {

// Type codes used in observations (scaled by 1/5). Haystacks encode as towers
// with a state flag; off-map cells encode with type 1.0.
enum class UnitKind { ground = 0, agent = 1, chicken = 2, tower = 3, fence = 4 };

enum class Orientation { north = 0, east = 1, south = 2, west = 3 };

enum class Resource { none, chicken, tower };

enum class FarmAction { up = 0, down = 1, right = 2, left = 3, attack = 4, mine = 5 };

enum class Ablation { training, far_corner, wall_barrier, speed, patience, poison_chickens };

Ablation parse_ablation(std::string_view name);
std::string_view to_string(Ablation a);
const std::vector<Ablation>& table_ablations();  // the five ablations, training excluded

struct Cell {
  int x = 0;  // column
  int y = 0;  // row, 0 at the top
  friend bool operator==(const Cell&, const Cell&) = default;
};

// Inclusive rectangle of cells.
struct Region {
  int x0 = 0;
  int y0 = 0;
  int x1 = -1;  // -1: extends to the map edge
  int y1 = -1;
};

struct FarmworldConfig {
  int width = 10;
  int height = 10;
  int agents = 10;
  int chickens = 10;
  int towers = 10;

  double agent_max_health = 10.0;
  double agent_start_health = 5.0;
  double health_decay = 0.1;
  double agent_attack_damage = 1.0;

  int chicken_max_health = 2;       // hits to kill
  double chicken_yield = 3.0;
  int chicken_respawn_time = 20;
  double chicken_move_probability = 0.25;

  int tower_max_health = 2;         // attacks to turn into a haystack
  int haystack_max_health = 2;      // mines to harvest
  double tower_yield = 5.0;
  int tower_respawn_time = 20;

  int max_episode_timesteps = 200;
  double alive_reward = 0.1;
  bool enforced_specialization = false;
  Ablation ablation = Ablation::training;

  // Random layout: units are placed uniformly inside their regions.
  Region agent_region;
  Region food_region;
  std::vector<Cell> fence_cells;

  // Hand-crafted layout; overrides counts and regions when non-empty.
  std::string map;
};

void to_json(nlohmann::json& j, const FarmworldConfig& c);
void from_json(const nlohmann::json& j, FarmworldConfig& c);

// Parses a plain-text grid: '.' ground, 'A' agent spawn, 'c' chicken, 't' tower, 'f' fence.
// Returns a config with width/height/counts set from the map and `map` filled in.
FarmworldConfig parse_farm_map(std::string_view text, FarmworldConfig base = {});

FarmworldConfig build_ablation(Ablation ablation);
FarmworldConfig build_ablation(std::string_view name);

// Scaled-down niche specialization setup with the enforced specialization rule on.
FarmworldConfig niche_specialization_config(int size = 6, int agents = 4, int chickens = 4, int towers = 4);

// Per-agent attack accounting used by the specialization metric.
struct SpecializationRecord {
  int chicken_attacks = 0;
  int tower_attacks = 0;
  int blunders = 0;
};

struct FarmUnit {
  UnitKind kind = UnitKind::ground;
  Cell pos;
  Cell home;
  Orientation orientation = Orientation::south;
  double health = 0.0;   // agents: health points
  int hits = 0;          // chickens: hits taken; towers: attacks taken; haystacks: mines taken
  bool haystack = false;
  bool present = true;
  int respawn_timer = 0;
  // Agents only. Never written into an observation.
  Resource locked_into = Resource::none;
  SpecializationRecord record;
  double tick_yield = 0.0;
  double tick_damage = 0.0;
};

// Partially observable multi-agent foraging gridworld.
class FarmworldEnv final : public Environment {
 public:
  static constexpr int kActions = 6;
  static constexpr int kViewRadius = 2;
  static constexpr int kViewCells = 13;
  static constexpr int kCellFeatures = 4;
  static constexpr int kObservationSize = kViewCells * kCellFeatures + 1;

  explicit FarmworldEnv(FarmworldConfig config = {});

  std::string name() const override { return "farmworld"; }
  int observation_size() const override { return kObservationSize; }
  int action_count() const override { return kActions; }
  int agent_count() const override { return static_cast<int>(agent_ids_.size()); }
  int max_episode_timesteps() const override { return config_.max_episode_timesteps; }

  std::vector<Vector> reset(std::uint64_t seed) override;
  StepResult step(std::span<const int> actions) override;

  bool done() const override { return done_; }
  bool alive(int agent) const override;
  Vector observation(int agent) const override;
  int tick() const override { return tick_; }
  std::string render() const override;
  nlohmann::json config_json() const override;

  const FarmworldConfig& config() const { return config_; }
  const FarmUnit& agent(int i) const { return units_.at(static_cast<std::size_t>(agent_ids_.at(static_cast<std::size_t>(i)))); }
  FarmUnit& agent_mut(int i) { return units_.at(static_cast<std::size_t>(agent_ids_.at(static_cast<std::size_t>(i)))); }
  const std::vector<FarmUnit>& units() const { return units_; }
  std::vector<FarmUnit>& units_mut() { return units_; }
  // Index of the unit occupying a cell, if any.
  std::optional<int> unit_at(Cell c) const;
  double final_health(int i) const { return alive(i) ? agent(i).health : 0.0; }

  // Decides whether a harvest of `target` by `agent` yields health, updating the
  // lock and blunder count when the enforced specialization rule is active.
  bool apply_specialization_rule(FarmUnit& agent, Resource target) const;

 private:
  bool in_bounds(Cell c) const { return c.x >= 0 && c.y >= 0 && c.x < config_.width && c.y < config_.height; }
  Region resolve(Region r) const;
  std::optional<Cell> random_free_cell(Region r, int attempts = 1000);
  void place_unit(FarmUnit u);
  void act(int agent_index, FarmAction action);
  void harvest(FarmUnit& agent, Resource kind, double amount);
  void move_chickens();
  void tick_respawns();
  void encode_cell(Cell c, Eigen::Ref<Vector> out) const;

  FarmworldConfig config_;
  Rng rng_;
  std::vector<FarmUnit> units_;
  std::vector<int> agent_ids_;
  std::vector<int> occupancy_;  // unit index per cell, -1 when empty
  int tick_ = 0;
  bool done_ = true;
};

}  // namespace adap
