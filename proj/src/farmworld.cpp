#include "adap/farmworld.hpp"

#include "adap/errors.hpp"

#include <algorithm>
#include <array>
#include <numeric>
#include <sstream>

namespace adap {

namespace {

constexpr std::array<Cell, 4> kDirections{{{0, -1}, {1, 0}, {0, 1}, {-1, 0}}};  // N E S W
constexpr double kDeathEpsilon = 1e-9;

Orientation orientation_for(FarmAction a) {
  switch (a) {
    case FarmAction::up: return Orientation::north;
    case FarmAction::down: return Orientation::south;
    case FarmAction::right: return Orientation::east;
    default: return Orientation::west;
  }
}

Cell offset(Cell c, Orientation o) {
  const Cell d = kDirections[static_cast<std::size_t>(o)];
  return {c.x + d.x, c.y + d.y};
}

int count_char(std::string_view map, char ch) { return static_cast<int>(std::count(map.begin(), map.end(), ch)); }

std::vector<std::string> map_rows(std::string_view text) {
  std::vector<std::string> rows;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) rows.push_back(line);
  }
  return rows;
}

}  // namespace

Ablation parse_ablation(std::string_view name) {
  if (name == "training" || name == "none") return Ablation::training;
  if (name == "far_corner") return Ablation::far_corner;
  if (name == "wall_barrier") return Ablation::wall_barrier;
  if (name == "speed") return Ablation::speed;
  if (name == "patience") return Ablation::patience;
  if (name == "poison_chickens") return Ablation::poison_chickens;
  throw ConfigError("unknown ablation '" + std::string(name) + "'");
}

std::string_view to_string(Ablation a) {
  switch (a) {
    case Ablation::training: return "training";
    case Ablation::far_corner: return "far_corner";
    case Ablation::wall_barrier: return "wall_barrier";
    case Ablation::speed: return "speed";
    case Ablation::patience: return "patience";
    case Ablation::poison_chickens: return "poison_chickens";
  }
  return "training";
}

const std::vector<Ablation>& table_ablations() {
  static const std::vector<Ablation> all{Ablation::far_corner, Ablation::wall_barrier, Ablation::speed,
                                         Ablation::patience, Ablation::poison_chickens};
  return all;
}

void to_json(nlohmann::json& j, const FarmworldConfig& c) {
  auto region = [](const Region& r) { return nlohmann::json::array({r.x0, r.y0, r.x1, r.y1}); };
  nlohmann::json fences = nlohmann::json::array();
  for (const Cell& f : c.fence_cells) fences.push_back({f.x, f.y});
  j = nlohmann::json{{"width", c.width},
                     {"height", c.height},
                     {"agents", c.agents},
                     {"chickens", c.chickens},
                     {"towers", c.towers},
                     {"agent_max_health", c.agent_max_health},
                     {"agent_start_health", c.agent_start_health},
                     {"health_decay", c.health_decay},
                     {"agent_attack_damage", c.agent_attack_damage},
                     {"chicken_max_health", c.chicken_max_health},
                     {"chicken_yield", c.chicken_yield},
                     {"chicken_respawn_time", c.chicken_respawn_time},
                     {"chicken_move_probability", c.chicken_move_probability},
                     {"tower_max_health", c.tower_max_health},
                     {"haystack_max_health", c.haystack_max_health},
                     {"tower_yield", c.tower_yield},
                     {"tower_respawn_time", c.tower_respawn_time},
                     {"max_episode_timesteps", c.max_episode_timesteps},
                     {"alive_reward", c.alive_reward},
                     {"enforced_specialization", c.enforced_specialization},
                     {"ablation", std::string(to_string(c.ablation))},
                     {"agent_region", region(c.agent_region)},
                     {"food_region", region(c.food_region)},
                     {"fence_cells", fences},
                     {"map", c.map}};
}

void from_json(const nlohmann::json& j, FarmworldConfig& c) {
  auto region = [](const nlohmann::json& a, Region fallback) {
    if (!a.is_array() || a.size() != 4) return fallback;
    return Region{a[0].get<int>(), a[1].get<int>(), a[2].get<int>(), a[3].get<int>()};
  };
  c.width = j.value("width", c.width);
  c.height = j.value("height", c.height);
  c.agents = j.value("agents", c.agents);
  c.chickens = j.value("chickens", c.chickens);
  c.towers = j.value("towers", c.towers);
  c.agent_max_health = j.value("agent_max_health", c.agent_max_health);
  c.agent_start_health = j.value("agent_start_health", c.agent_start_health);
  c.health_decay = j.value("health_decay", c.health_decay);
  c.agent_attack_damage = j.value("agent_attack_damage", c.agent_attack_damage);
  c.chicken_max_health = j.value("chicken_max_health", c.chicken_max_health);
  c.chicken_yield = j.value("chicken_yield", c.chicken_yield);
  c.chicken_respawn_time = j.value("chicken_respawn_time", c.chicken_respawn_time);
  c.chicken_move_probability = j.value("chicken_move_probability", c.chicken_move_probability);
  c.tower_max_health = j.value("tower_max_health", c.tower_max_health);
  c.haystack_max_health = j.value("haystack_max_health", c.haystack_max_health);
  c.tower_yield = j.value("tower_yield", c.tower_yield);
  c.tower_respawn_time = j.value("tower_respawn_time", c.tower_respawn_time);
  c.max_episode_timesteps = j.value("max_episode_timesteps", c.max_episode_timesteps);
  c.alive_reward = j.value("alive_reward", c.alive_reward);
  c.enforced_specialization = j.value("enforced_specialization", c.enforced_specialization);
  if (j.contains("ablation")) c.ablation = parse_ablation(j.at("ablation").get<std::string>());
  if (j.contains("agent_region")) c.agent_region = region(j.at("agent_region"), c.agent_region);
  if (j.contains("food_region")) c.food_region = region(j.at("food_region"), c.food_region);
  if (j.contains("fence_cells")) {
    c.fence_cells.clear();
    for (const auto& f : j.at("fence_cells")) c.fence_cells.push_back({f[0].get<int>(), f[1].get<int>()});
  }
  c.map = j.value("map", c.map);
}

FarmworldConfig parse_farm_map(std::string_view text, FarmworldConfig base) {
  const auto rows = map_rows(text);
  if (rows.empty()) throw ConfigError("farm map: empty map");
  const std::size_t width = rows.front().size();
  std::string canonical;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != width) throw ConfigError("farm map: row " + std::to_string(r + 1) + " has a different width");
    for (char ch : rows[r]) {
      if (ch != '.' && ch != 'A' && ch != 'c' && ch != 't' && ch != 'f') {
        throw ConfigError("farm map: unknown cell '" + std::string(1, ch) + "' on row " + std::to_string(r + 1));
      }
    }
    canonical += rows[r];
    canonical += '\n';
  }
  base.width = static_cast<int>(width);
  base.height = static_cast<int>(rows.size());
  base.agents = count_char(canonical, 'A');
  base.chickens = count_char(canonical, 'c');
  base.towers = count_char(canonical, 't');
  base.fence_cells.clear();
  base.map = canonical;
  return base;
}

FarmworldConfig build_ablation(Ablation ablation) {
  FarmworldConfig c;
  c.ablation = ablation;
  switch (ablation) {
    case Ablation::training:
      break;
    case Ablation::far_corner:
      c.width = 18;
      c.height = 18;
      c.agents = 4;
      c.chickens = 6;
      c.towers = 6;
      c.agent_region = {0, 0, 3, 3};
      c.food_region = {12, 12, 17, 17};
      break;
    case Ablation::wall_barrier: {
      c.width = 10;
      c.height = 10;
      c.agents = 4;
      c.chickens = 5;
      c.towers = 5;
      for (int y = 2; y < c.height; ++y) c.fence_cells.push_back({4, y});
      c.agent_region = {0, 4, 3, 9};
      c.food_region = {6, 4, 9, 9};
      break;
    }
    case Ablation::speed:
      c = parse_farm_map("At\nt.\n", c);
      c.tower_yield = 1.0;
      c.tower_respawn_time = 5;
      break;
    case Ablation::patience:
      c = parse_farm_map("At\nt.\n", c);
      c.tower_yield = 10.0;
      c.tower_respawn_time = 120;
      break;
    case Ablation::poison_chickens:
      c.chicken_yield = -c.chicken_yield;
      break;
  }
  return c;
}

FarmworldConfig build_ablation(std::string_view name) { return build_ablation(parse_ablation(name)); }

FarmworldConfig niche_specialization_config(int size, int agents, int chickens, int towers) {
  FarmworldConfig c;
  c.width = size;
  c.height = size;
  c.agents = agents;
  c.chickens = chickens;
  c.towers = towers;
  c.enforced_specialization = true;
  return c;
}

FarmworldEnv::FarmworldEnv(FarmworldConfig config) : config_(std::move(config)) {
  if (!config_.map.empty()) config_ = parse_farm_map(config_.map, config_);
  if (config_.width < 1 || config_.height < 1) throw ConfigError("farmworld: width and height must be positive");
  if (config_.agents < 1) throw ConfigError("farmworld: need at least one agent");
  if (config_.chickens < 0 || config_.towers < 0) throw ConfigError("farmworld: unit counts must be non-negative");
  if (config_.chicken_respawn_time < 0 || config_.tower_respawn_time < 0) {
    throw ConfigError("farmworld: respawn_time must be >= 0");
  }
  if (config_.chicken_max_health < 1 || config_.tower_max_health < 1 || config_.haystack_max_health < 1) {
    throw ConfigError("farmworld: unit max health must be >= 1");
  }
  if (config_.max_episode_timesteps < 1) throw ConfigError("farmworld: max_episode_timesteps must be >= 1");
  const int cells = config_.width * config_.height;
  const int fences = config_.map.empty() ? static_cast<int>(config_.fence_cells.size()) : count_char(config_.map, 'f');
  if (config_.agents + config_.chickens + config_.towers + fences > cells) {
    throw ConfigError("farmworld: unit counts do not fit the grid");
  }
  for (const Cell& f : config_.fence_cells) {
    if (!in_bounds(f)) throw ConfigError("farmworld: fence cell outside the grid");
  }
  agent_ids_.assign(static_cast<std::size_t>(config_.agents), -1);
}

Region FarmworldEnv::resolve(Region r) const {
  Region out = r;
  if (out.x1 < 0) out.x1 = config_.width - 1;
  if (out.y1 < 0) out.y1 = config_.height - 1;
  out.x0 = std::clamp(out.x0, 0, config_.width - 1);
  out.y0 = std::clamp(out.y0, 0, config_.height - 1);
  out.x1 = std::clamp(out.x1, out.x0, config_.width - 1);
  out.y1 = std::clamp(out.y1, out.y0, config_.height - 1);
  return out;
}

std::optional<Cell> FarmworldEnv::random_free_cell(Region r, int attempts) {
  const Region rr = resolve(r);
  for (int i = 0; i < attempts; ++i) {
    const Cell c{uniform_int(rng_, rr.x0, rr.x1), uniform_int(rng_, rr.y0, rr.y1)};
    if (occupancy_[static_cast<std::size_t>(c.y * config_.width + c.x)] < 0) return c;
  }
  return std::nullopt;
}

std::optional<int> FarmworldEnv::unit_at(Cell c) const {
  if (!in_bounds(c)) return std::nullopt;
  const int id = occupancy_[static_cast<std::size_t>(c.y * config_.width + c.x)];
  if (id < 0) return std::nullopt;
  return id;
}

void FarmworldEnv::place_unit(FarmUnit u) {
  const int id = static_cast<int>(units_.size());
  occupancy_[static_cast<std::size_t>(u.pos.y * config_.width + u.pos.x)] = id;
  if (u.kind == UnitKind::agent) {
    const auto slot = std::find(agent_ids_.begin(), agent_ids_.end(), -1);
    *slot = id;
  }
  units_.push_back(std::move(u));
}

std::vector<Vector> FarmworldEnv::reset(std::uint64_t seed) {
  rng_.seed(seed);
  units_.clear();
  occupancy_.assign(static_cast<std::size_t>(config_.width * config_.height), -1);
  std::fill(agent_ids_.begin(), agent_ids_.end(), -1);
  tick_ = 0;
  done_ = false;

  auto make = [&](UnitKind kind, Cell pos) {
    FarmUnit u;
    u.kind = kind;
    u.pos = pos;
    u.home = pos;
    if (kind == UnitKind::agent) u.health = config_.agent_start_health;
    if (kind == UnitKind::chicken) u.orientation = static_cast<Orientation>(uniform_int(rng_, 0, 3));
    return u;
  };

  if (!config_.map.empty()) {
    const auto rows = map_rows(config_.map);
    for (int y = 0; y < config_.height; ++y) {
      for (int x = 0; x < config_.width; ++x) {
        const char ch = rows[static_cast<std::size_t>(y)][static_cast<std::size_t>(x)];
        if (ch == 'f') place_unit(make(UnitKind::fence, {x, y}));
        if (ch == 'A') place_unit(make(UnitKind::agent, {x, y}));
        if (ch == 'c') place_unit(make(UnitKind::chicken, {x, y}));
        if (ch == 't') place_unit(make(UnitKind::tower, {x, y}));
      }
    }
  } else {
    for (const Cell& f : config_.fence_cells) {
      if (!unit_at(f)) place_unit(make(UnitKind::fence, f));
    }
    auto spawn = [&](UnitKind kind, int count, Region region) {
      for (int i = 0; i < count; ++i) {
        auto cell = random_free_cell(region);
        if (!cell) cell = random_free_cell(Region{}, 100000);
        if (!cell) throw ConfigError("farmworld: could not place all units");
        place_unit(make(kind, *cell));
      }
    };
    spawn(UnitKind::agent, config_.agents, config_.agent_region);
    spawn(UnitKind::tower, config_.towers, config_.food_region);
    spawn(UnitKind::chicken, config_.chickens, config_.food_region);
  }
  std::vector<Vector> obs;
  for (int i = 0; i < agent_count(); ++i) obs.push_back(observation(i));
  return obs;
}

bool FarmworldEnv::alive(int agent_index) const {
  const int id = agent_ids_.at(static_cast<std::size_t>(agent_index));
  return id >= 0 && units_[static_cast<std::size_t>(id)].present;
}

bool FarmworldEnv::apply_specialization_rule(FarmUnit& agent_unit, Resource target) const {
  if (!config_.enforced_specialization) return true;
  if (agent_unit.locked_into == Resource::none) {
    agent_unit.locked_into = target;
    return true;
  }
  if (agent_unit.locked_into == target) return true;
  ++agent_unit.record.blunders;
  return false;
}

void FarmworldEnv::harvest(FarmUnit& agent_unit, Resource kind, double amount) {
  if (!apply_specialization_rule(agent_unit, kind)) return;
  double gain = amount;
  if (gain > 0.0) gain = std::max(0.0, std::min(gain, config_.agent_max_health - agent_unit.health));
  agent_unit.health += gain;
  agent_unit.tick_yield += gain;
}

void FarmworldEnv::act(int agent_index, FarmAction action) {
  const int id = agent_ids_[static_cast<std::size_t>(agent_index)];
  FarmUnit& a = units_[static_cast<std::size_t>(id)];
  if (action == FarmAction::up || action == FarmAction::down || action == FarmAction::left ||
      action == FarmAction::right) {
    a.orientation = orientation_for(action);
    const Cell target = offset(a.pos, a.orientation);
    if (in_bounds(target) && !unit_at(target)) {
      occupancy_[static_cast<std::size_t>(a.pos.y * config_.width + a.pos.x)] = -1;
      a.pos = target;
      occupancy_[static_cast<std::size_t>(target.y * config_.width + target.x)] = id;
    }
    return;
  }
  const Cell target = offset(a.pos, a.orientation);
  const auto other = unit_at(target);
  if (!other) return;
  FarmUnit& u = units_[static_cast<std::size_t>(*other)];
  auto remove = [&](FarmUnit& unit, int respawn_time) {
    unit.present = false;
    unit.respawn_timer = respawn_time;
    occupancy_[static_cast<std::size_t>(unit.pos.y * config_.width + unit.pos.x)] = -1;
  };
  if (action == FarmAction::attack) {
    switch (u.kind) {
      case UnitKind::chicken:
        ++a.record.chicken_attacks;
        if (++u.hits >= config_.chicken_max_health) {
          remove(u, config_.chicken_respawn_time);
          harvest(a, Resource::chicken, config_.chicken_yield);
        }
        break;
      case UnitKind::tower:
        ++a.record.tower_attacks;
        if (!u.haystack && ++u.hits >= config_.tower_max_health) {
          u.haystack = true;
          u.hits = 0;
        }
        break;
      case UnitKind::agent:
        u.health -= config_.agent_attack_damage;
        u.tick_damage += config_.agent_attack_damage;
        break;
      case UnitKind::fence:
      case UnitKind::ground:
        break;
    }
    return;
  }
  if (u.kind == UnitKind::tower && u.haystack && ++u.hits >= config_.haystack_max_health) {
    remove(u, config_.tower_respawn_time);
    harvest(a, Resource::tower, config_.tower_yield);
  }
}

void FarmworldEnv::move_chickens() {
  for (std::size_t i = 0; i < units_.size(); ++i) {
    FarmUnit& c = units_[i];
    if (c.kind != UnitKind::chicken || !c.present) continue;
    if (uniform01(rng_) >= config_.chicken_move_probability) continue;
    const auto dir = static_cast<Orientation>(uniform_int(rng_, 0, 3));
    c.orientation = dir;
    const Cell target = offset(c.pos, dir);
    if (in_bounds(target) && !unit_at(target)) {
      occupancy_[static_cast<std::size_t>(c.pos.y * config_.width + c.pos.x)] = -1;
      c.pos = target;
      occupancy_[static_cast<std::size_t>(target.y * config_.width + target.x)] = static_cast<int>(i);
    }
  }
}

void FarmworldEnv::tick_respawns() {
  for (std::size_t i = 0; i < units_.size(); ++i) {
    FarmUnit& u = units_[i];
    if (u.present || (u.kind != UnitKind::chicken && u.kind != UnitKind::tower)) continue;
    if (u.respawn_timer > 0) --u.respawn_timer;
    if (u.respawn_timer > 0) continue;
    std::optional<Cell> cell;
    if (!config_.map.empty()) {
      if (!unit_at(u.home)) cell = u.home;
    } else {
      cell = random_free_cell(config_.food_region, 64);
    }
    if (!cell) continue;
    u.pos = *cell;
    u.present = true;
    u.hits = 0;
    u.haystack = false;
    occupancy_[static_cast<std::size_t>(cell->y * config_.width + cell->x)] = static_cast<int>(i);
  }
}

StepResult FarmworldEnv::step(std::span<const int> actions) {
  if (done_) throw EnvironmentError("farmworld: step called on a finished episode");
  if (static_cast<int>(actions.size()) != agent_count()) throw EnvironmentError("farmworld: wrong number of actions");
  std::vector<int> order;
  for (int i = 0; i < agent_count(); ++i) {
    if (!alive(i)) continue;
    const int a = actions[static_cast<std::size_t>(i)];
    if (a < 0 || a >= kActions) {
      throw EnvironmentError("farmworld: illegal action " + std::to_string(a) + " for agent " + std::to_string(i));
    }
    order.push_back(i);
  }
  std::vector<bool> was_alive(static_cast<std::size_t>(agent_count()));
  for (int i = 0; i < agent_count(); ++i) {
    was_alive[static_cast<std::size_t>(i)] = alive(i);
    if (alive(i)) {
      agent_mut(i).tick_yield = 0.0;
      agent_mut(i).tick_damage = 0.0;
    }
  }

  // Respawns run first so a unit removed this tick stays away for the full respawn time.
  tick_respawns();
  std::shuffle(order.begin(), order.end(), rng_);
  for (int i : order) act(i, static_cast<FarmAction>(actions[static_cast<std::size_t>(i)]));

  for (int i : order) {
    FarmUnit& a = agent_mut(i);
    a.health -= config_.health_decay;
    if (a.health <= kDeathEpsilon) {
      a.present = false;
      occupancy_[static_cast<std::size_t>(a.pos.y * config_.width + a.pos.x)] = -1;
    }
  }
  move_chickens();
  ++tick_;

  bool any_alive = false;
  for (int i = 0; i < agent_count(); ++i) any_alive = any_alive || alive(i);
  done_ = tick_ >= config_.max_episode_timesteps || !any_alive;

  StepResult result;
  result.agents.resize(static_cast<std::size_t>(agent_count()));
  for (int i = 0; i < agent_count(); ++i) {
    AgentStep& s = result.agents[static_cast<std::size_t>(i)];
    s.observation = observation(i);
    const bool living = alive(i);
    s.reward = (was_alive[static_cast<std::size_t>(i)] && living) ? config_.alive_reward : 0.0;
    s.done = !living || done_;
  }
  result.episode_done = done_;
  return result;
}

void FarmworldEnv::encode_cell(Cell c, Eigen::Ref<Vector> out) const {
  out.setZero();
  if (!in_bounds(c)) {
    out[0] = 1.0;
    return;
  }
  const auto id = unit_at(c);
  if (!id) return;
  const FarmUnit& u = units_[static_cast<std::size_t>(*id)];
  out[0] = static_cast<double>(static_cast<int>(u.kind)) / 5.0;
  switch (u.kind) {
    case UnitKind::agent:
      out[1] = std::clamp(u.health / config_.agent_max_health, 0.0, 1.0);
      out[2] = static_cast<double>(static_cast<int>(u.orientation)) / 3.0;
      break;
    case UnitKind::chicken:
      out[1] = static_cast<double>(config_.chicken_max_health - u.hits) / config_.chicken_max_health;
      out[2] = static_cast<double>(static_cast<int>(u.orientation)) / 3.0;
      break;
    case UnitKind::tower:
      if (u.haystack) {
        out[1] = static_cast<double>(config_.haystack_max_health - u.hits) / config_.haystack_max_health;
        out[3] = 1.0;
      } else {
        out[1] = static_cast<double>(config_.tower_max_health - u.hits) / config_.tower_max_health;
      }
      break;
    case UnitKind::fence:
      out[1] = 1.0;
      break;
    case UnitKind::ground:
      break;
  }
}

Vector FarmworldEnv::observation(int agent_index) const {
  Vector obs = Vector::Zero(kObservationSize);
  const int id = agent_ids_.at(static_cast<std::size_t>(agent_index));
  if (id < 0) return obs;
  const FarmUnit& a = units_[static_cast<std::size_t>(id)];
  int slot = 0;
  for (int dy = -kViewRadius; dy <= kViewRadius; ++dy) {
    const int span = kViewRadius - std::abs(dy);
    for (int dx = -span; dx <= span; ++dx) {
      encode_cell({a.pos.x + dx, a.pos.y + dy}, obs.segment(slot * kCellFeatures, kCellFeatures));
      ++slot;
    }
  }
  obs[kObservationSize - 1] = std::clamp(a.health / config_.agent_max_health, 0.0, 1.0);
  return obs;
}

std::string FarmworldEnv::render() const {
  std::vector<std::string> rows(static_cast<std::size_t>(config_.height),
                                std::string(static_cast<std::size_t>(config_.width), '.'));
  for (std::size_t i = 0; i < units_.size(); ++i) {
    const FarmUnit& u = units_[i];
    if (!u.present) continue;
    char ch = '.';
    switch (u.kind) {
      case UnitKind::agent: {
        const auto slot = std::find(agent_ids_.begin(), agent_ids_.end(), static_cast<int>(i)) - agent_ids_.begin();
        ch = static_cast<char>('0' + slot % 10);
        break;
      }
      case UnitKind::chicken: ch = 'c'; break;
      case UnitKind::tower: ch = u.haystack ? 'h' : 't'; break;
      case UnitKind::fence: ch = 'f'; break;
      case UnitKind::ground: break;
    }
    rows[static_cast<std::size_t>(u.pos.y)][static_cast<std::size_t>(u.pos.x)] = ch;
  }
  std::ostringstream out;
  out << "tick " << tick_ << " health";
  for (int i = 0; i < agent_count(); ++i) out << ' ' << (alive(i) ? agent(i).health : 0.0);
  out << '\n';
  for (const auto& r : rows) out << r << '\n';
  return out.str();
}

nlohmann::json FarmworldEnv::config_json() const { return config_; }

}  // namespace adap
