#pragma once

#include "adap/environment.hpp"
#include "adap/random.hpp"

#include <string_view>

namespace adap {

// Absolute-frame moves. Environment::step takes actions in each player's own
// frame, where `right` always points at the goal that player attacks.
enum class SoccerAction { up = 0, down = 1, left = 2, right = 3, stand = 4 };

enum class Side { a = 0, b = 1 };  // a starts on the left and attacks the right goal

enum class GameResult { ongoing, a_scores, b_scores, draw };

struct SoccerPos {
  int row = 0;
  int col = 0;
  friend bool operator==(const SoccerPos&, const SoccerPos&) = default;
};

struct SoccerConfig {
  int rows = 4;
  int cols = 5;
  double draw_probability = 0.02;
  int max_episode_timesteps = 100;
  SoccerPos start_a{2, 1};
  SoccerPos start_b{1, 3};
  int initial_possession = -1;  // -1 random, 0 side a, 1 side b
};

void to_json(nlohmann::json& j, const SoccerConfig& c);
void from_json(const nlohmann::json& j, SoccerConfig& c);

struct SoccerState {
  SoccerPos a;
  SoccerPos b;
  Side possession = Side::a;
  int tick = 0;
  GameResult result = GameResult::ongoing;

  const SoccerPos& pos(Side s) const { return s == Side::a ? a : b; }
  SoccerPos& pos(Side s) { return s == Side::a ? a : b; }
};

inline Side opponent(Side s) { return s == Side::a ? Side::b : Side::a; }

// Goal mouths are the two middle rows; scoring cells are the virtual columns
// -1 (b scores) and cols (a scores).
bool is_goal_row(const SoccerConfig& config, int row);

SoccerState initial_soccer_state(const SoccerConfig& config, Rng& rng);

// Advances one simultaneous-move tick in place and returns the result.
GameResult soccer_step(SoccerState& state, SoccerAction action_a, SoccerAction action_b, Rng& rng,
                       const SoccerConfig& config);

// [own col, own row, opponent col, opponent row, has ball], columns mirrored for side b.
Vector side_invariant_obs(const SoccerState& state, Side side, const SoccerConfig& config);

// Converts between a player's own frame and the absolute frame.
SoccerAction to_absolute(SoccerAction ego, Side side);

std::string render_soccer(const SoccerState& state, const SoccerConfig& config);

// Two-player zero-sum wrapper: agent 0 is side a, agent 1 side b. Rewards are
// +1 to the scorer, -1 to the other player, 0 on a draw.
class SoccerEnv final : public Environment {
 public:
  static constexpr int kActions = 5;
  static constexpr int kObservationSize = 5;

  explicit SoccerEnv(SoccerConfig config = {});

  std::string name() const override { return "soccer"; }
  int observation_size() const override { return kObservationSize; }
  int action_count() const override { return kActions; }
  int agent_count() const override { return 2; }
  int max_episode_timesteps() const override { return config_.max_episode_timesteps; }

  std::vector<Vector> reset(std::uint64_t seed) override;
  StepResult step(std::span<const int> actions) override;

  bool done() const override { return state_.result != GameResult::ongoing; }
  bool alive(int) const override { return !done(); }
  Vector observation(int agent) const override;
  int tick() const override { return state_.tick; }
  std::string render() const override { return render_soccer(state_, config_); }
  nlohmann::json config_json() const override;

  const SoccerState& state() const { return state_; }
  SoccerState& state_mut() { return state_; }
  const SoccerConfig& config() const { return config_; }
  Rng& rng() { return rng_; }

 private:
  SoccerConfig config_;
  SoccerState state_;
  Rng rng_;
};

enum class BotKind { straight, oscillate0, oscillate1, stand, rule_based, random };
enum class BotRole { offense, defense, mixed };

struct Bot {
  BotKind kind = BotKind::random;
  BotRole role = BotRole::mixed;
};

BotKind parse_bot(std::string_view name);
std::string_view to_string(BotKind k);
Bot make_bot(BotKind kind);
const std::vector<Bot>& all_bots();

// Bots always play side a (left). Returns an absolute-frame action.
SoccerAction bot_policy(const Bot& bot, const SoccerState& state, Rng& rng, const SoccerConfig& config = {});

// Game config for a bot match: bot start cell and possession per its role.
SoccerConfig bot_match_config(const Bot& bot, SoccerConfig base = {});

}  // namespace adap
