#include "adap/soccer.hpp"

#include "adap/errors.hpp"

#include <sstream>

namespace adap {

void to_json(nlohmann::json& j, const SoccerConfig& c) {
  j = nlohmann::json{{"rows", c.rows},
                     {"cols", c.cols},
                     {"draw_probability", c.draw_probability},
                     {"max_episode_timesteps", c.max_episode_timesteps},
                     {"start_a", {c.start_a.row, c.start_a.col}},
                     {"start_b", {c.start_b.row, c.start_b.col}},
                     {"initial_possession", c.initial_possession}};
}

void from_json(const nlohmann::json& j, SoccerConfig& c) {
  c.rows = j.value("rows", c.rows);
  c.cols = j.value("cols", c.cols);
  c.draw_probability = j.value("draw_probability", c.draw_probability);
  c.max_episode_timesteps = j.value("max_episode_timesteps", c.max_episode_timesteps);
  if (j.contains("start_a")) c.start_a = {j["start_a"][0].get<int>(), j["start_a"][1].get<int>()};
  if (j.contains("start_b")) c.start_b = {j["start_b"][0].get<int>(), j["start_b"][1].get<int>()};
  c.initial_possession = j.value("initial_possession", c.initial_possession);
}

bool is_goal_row(const SoccerConfig& config, int row) {
  const int top = (config.rows - 1) / 2;
  return row == top || row == top + (config.rows % 2 == 0 ? 1 : 0);
}

SoccerState initial_soccer_state(const SoccerConfig& config, Rng& rng) {
  SoccerState s;
  s.a = config.start_a;
  s.b = config.start_b;
  if (config.initial_possession < 0) {
    s.possession = uniform01(rng) < 0.5 ? Side::a : Side::b;
  } else {
    s.possession = config.initial_possession == 0 ? Side::a : Side::b;
  }
  return s;
}

namespace {

// Applies one player's move; returns true when it scores.
bool apply_move(SoccerState& s, Side mover, SoccerAction action, const SoccerConfig& config) {
  if (action == SoccerAction::stand) return false;
  SoccerPos& me = s.pos(mover);
  const SoccerPos& other = s.pos(opponent(mover));
  SoccerPos target = me;
  switch (action) {
    case SoccerAction::up: --target.row; break;
    case SoccerAction::down: ++target.row; break;
    case SoccerAction::left: --target.col; break;
    case SoccerAction::right: ++target.col; break;
    case SoccerAction::stand: break;
  }
  if (s.possession == mover && is_goal_row(config, target.row)) {
    if (mover == Side::a && target.col == config.cols) return true;
    if (mover == Side::b && target.col == -1) return true;
  }
  if (target.row < 0 || target.row >= config.rows || target.col < 0 || target.col >= config.cols) return false;
  if (target == other) {
    s.possession = opponent(s.possession);
    return false;
  }
  me = target;
  return false;
}

}  // namespace

GameResult soccer_step(SoccerState& state, SoccerAction action_a, SoccerAction action_b, Rng& rng,
                       const SoccerConfig& config) {
  if (state.result != GameResult::ongoing) throw EnvironmentError("soccer: step called on a finished game");
  ++state.tick;
  if (uniform01(rng) < config.draw_probability) {
    state.result = GameResult::draw;
    return state.result;
  }
  const Side first = uniform01(rng) < 0.5 ? Side::a : Side::b;
  for (Side mover : {first, opponent(first)}) {
    if (apply_move(state, mover, mover == Side::a ? action_a : action_b, config)) {
      state.result = mover == Side::a ? GameResult::a_scores : GameResult::b_scores;
      return state.result;
    }
  }
  if (state.tick >= config.max_episode_timesteps) state.result = GameResult::draw;
  return state.result;
}

Vector side_invariant_obs(const SoccerState& state, Side side, const SoccerConfig& config) {
  const double col_scale = config.cols > 1 ? 1.0 / (config.cols - 1) : 1.0;
  const double row_scale = config.rows > 1 ? 1.0 / (config.rows - 1) : 1.0;
  auto col = [&](const SoccerPos& p) { return side == Side::a ? p.col : config.cols - 1 - p.col; };
  const SoccerPos& me = state.pos(side);
  const SoccerPos& them = state.pos(opponent(side));
  Vector obs(SoccerEnv::kObservationSize);
  obs << col(me) * col_scale, me.row * row_scale, col(them) * col_scale, them.row * row_scale,
      state.possession == side ? 1.0 : 0.0;
  return obs;
}

SoccerAction to_absolute(SoccerAction ego, Side side) {
  if (side == Side::a) return ego;
  if (ego == SoccerAction::left) return SoccerAction::right;
  if (ego == SoccerAction::right) return SoccerAction::left;
  return ego;
}

std::string render_soccer(const SoccerState& state, const SoccerConfig& config) {
  std::ostringstream out;
  out << "tick " << state.tick << " ball " << (state.possession == Side::a ? 'A' : 'B');
  switch (state.result) {
    case GameResult::ongoing: break;
    case GameResult::a_scores: out << " result A scores"; break;
    case GameResult::b_scores: out << " result B scores"; break;
    case GameResult::draw: out << " result draw"; break;
  }
  out << '\n';
  for (int r = 0; r < config.rows; ++r) {
    out << (is_goal_row(config, r) ? '[' : ' ');
    for (int c = 0; c < config.cols; ++c) {
      const SoccerPos p{r, c};
      if (p == state.a) {
        out << (state.possession == Side::a ? "A*" : "A ");
      } else if (p == state.b) {
        out << (state.possession == Side::b ? "B*" : "B ");
      } else {
        out << ". ";
      }
    }
    out << (is_goal_row(config, r) ? ']' : ' ') << '\n';
  }
  return out.str();
}

SoccerEnv::SoccerEnv(SoccerConfig config) : config_(config) {
  if (config_.rows < 2 || config_.cols < 2) throw ConfigError("soccer: grid must be at least 2 x 2");
  if (config_.draw_probability < 0.0 || config_.draw_probability > 1.0) {
    throw ConfigError("soccer: draw_probability must be in [0, 1]");
  }
  if (config_.start_a == config_.start_b) throw ConfigError("soccer: players cannot start on the same cell");
  state_.result = GameResult::draw;
}

std::vector<Vector> SoccerEnv::reset(std::uint64_t seed) {
  rng_.seed(seed);
  state_ = initial_soccer_state(config_, rng_);
  return {observation(0), observation(1)};
}

Vector SoccerEnv::observation(int agent) const {
  return side_invariant_obs(state_, agent == 0 ? Side::a : Side::b, config_);
}

StepResult SoccerEnv::step(std::span<const int> actions) {
  if (done()) throw EnvironmentError("soccer: step called on a finished game");
  if (actions.size() != 2) throw EnvironmentError("soccer: expected two actions");
  for (std::size_t i = 0; i < 2; ++i) {
    if (actions[i] < 0 || actions[i] >= kActions) {
      throw EnvironmentError("soccer: illegal action " + std::to_string(actions[i]) + " for agent " + std::to_string(i));
    }
  }
  const auto a = to_absolute(static_cast<SoccerAction>(actions[0]), Side::a);
  const auto b = to_absolute(static_cast<SoccerAction>(actions[1]), Side::b);
  const GameResult r = soccer_step(state_, a, b, rng_, config_);
  StepResult out;
  out.agents.resize(2);
  const double ra = r == GameResult::a_scores ? 1.0 : (r == GameResult::b_scores ? -1.0 : 0.0);
  out.agents[0].reward = ra;
  out.agents[1].reward = -ra;
  out.episode_done = r != GameResult::ongoing;
  for (int i = 0; i < 2; ++i) {
    out.agents[static_cast<std::size_t>(i)].observation = observation(i);
    out.agents[static_cast<std::size_t>(i)].done = out.episode_done;
  }
  return out;
}

nlohmann::json SoccerEnv::config_json() const { return config_; }

BotKind parse_bot(std::string_view name) {
  if (name == "straight") return BotKind::straight;
  if (name == "oscillate0") return BotKind::oscillate0;
  if (name == "oscillate1") return BotKind::oscillate1;
  if (name == "stand") return BotKind::stand;
  if (name == "rule_based") return BotKind::rule_based;
  if (name == "random") return BotKind::random;
  throw ConfigError("unknown bot '" + std::string(name) + "'");
}

std::string_view to_string(BotKind k) {
  switch (k) {
    case BotKind::straight: return "straight";
    case BotKind::oscillate0: return "oscillate0";
    case BotKind::oscillate1: return "oscillate1";
    case BotKind::stand: return "stand";
    case BotKind::rule_based: return "rule_based";
    case BotKind::random: return "random";
  }
  return "random";
}

Bot make_bot(BotKind kind) {
  switch (kind) {
    case BotKind::straight: return {kind, BotRole::offense};
    case BotKind::oscillate0:
    case BotKind::oscillate1:
    case BotKind::stand: return {kind, BotRole::defense};
    case BotKind::rule_based:
    case BotKind::random: return {kind, BotRole::mixed};
  }
  return {kind, BotRole::mixed};
}

const std::vector<Bot>& all_bots() {
  static const std::vector<Bot> bots{make_bot(BotKind::straight),   make_bot(BotKind::oscillate0),
                                     make_bot(BotKind::oscillate1), make_bot(BotKind::stand),
                                     make_bot(BotKind::rule_based), make_bot(BotKind::random)};
  return bots;
}

namespace {

SoccerAction oscillate(const SoccerState& s, int column, const SoccerConfig& config) {
  const SoccerPos& me = s.a;
  if (me.col > column) return SoccerAction::left;
  if (me.col < column) return SoccerAction::right;
  const int top = (config.rows - 1) / 2;
  return me.row <= top ? SoccerAction::down : SoccerAction::up;
}

SoccerAction step_toward(const SoccerPos& from, const SoccerPos& to) {
  if (from.row < to.row) return SoccerAction::down;
  if (from.row > to.row) return SoccerAction::up;
  if (from.col < to.col) return SoccerAction::right;
  if (from.col > to.col) return SoccerAction::left;
  return SoccerAction::stand;
}

// With the ball: head for the right goal, sidestepping an opponent directly
// ahead. Without: take the cell between the opponent and the own (left) goal.
SoccerAction rule_based(const SoccerState& s, const SoccerConfig& config) {
  const SoccerPos& me = s.a;
  const SoccerPos& them = s.b;
  const int top = (config.rows - 1) / 2;
  if (s.possession == Side::a) {
    const bool blocked = them.row == me.row && them.col == me.col + 1;
    if (blocked || (me.col == config.cols - 1 && !is_goal_row(config, me.row))) {
      if (me.row <= top) return SoccerAction::down;
      return SoccerAction::up;
    }
    return SoccerAction::right;
  }
  SoccerPos guard{them.row, std::max(0, them.col - 1)};
  if (guard == them) guard.row = std::clamp(them.row + (them.row <= top ? 1 : -1), 0, config.rows - 1);
  return step_toward(me, guard);
}

}  // namespace

SoccerAction bot_policy(const Bot& bot, const SoccerState& state, Rng& rng, const SoccerConfig& config) {
  switch (bot.kind) {
    case BotKind::straight: return SoccerAction::right;
    case BotKind::oscillate0: return oscillate(state, 0, config);
    case BotKind::oscillate1: return oscillate(state, 1, config);
    case BotKind::stand: return SoccerAction::stand;
    case BotKind::rule_based: return rule_based(state, config);
    case BotKind::random: return static_cast<SoccerAction>(uniform_int(rng, 0, SoccerEnv::kActions - 1));
  }
  return SoccerAction::stand;
}

SoccerConfig bot_match_config(const Bot& bot, SoccerConfig base) {
  const int top = (base.rows - 1) / 2;
  switch (bot.kind) {
    case BotKind::oscillate0:
    case BotKind::stand: base.start_a = {top, 0}; break;
    case BotKind::oscillate1: base.start_a = {top, 1}; break;
    default: break;
  }
  switch (bot.role) {
    case BotRole::offense: base.initial_possession = 0; break;
    case BotRole::defense: base.initial_possession = 1; break;
    case BotRole::mixed: base.initial_possession = -1; break;
  }
  return base;
}

}  // namespace adap
