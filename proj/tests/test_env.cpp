#include "adap/errors.hpp"
#include "adap/farmworld.hpp"
#include "adap/multigoal.hpp"
#include "adap/soccer.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>
#include <vector>

using namespace adap;

namespace {

FarmworldConfig still_chickens(FarmworldConfig c) {
  c.chicken_move_probability = 0.0;
  return c;
}

std::vector<int> random_actions(Rng& rng, const Environment& env) {
  std::vector<int> a(static_cast<std::size_t>(env.agent_count()));
  for (int i = 0; i < env.agent_count(); ++i) a[static_cast<std::size_t>(i)] = env.alive(i) ? uniform_int(rng, 0, env.action_count() - 1) : kNoAction;
  return a;
}

// Plays random actions until the episode ends and returns every observation and reward.
std::vector<double> rollout_trace(Environment& env, std::uint64_t seed, std::uint64_t action_seed) {
  Rng rng(action_seed);
  std::vector<double> trace;
  for (const Vector& o : env.reset(seed)) trace.insert(trace.end(), o.data(), o.data() + o.size());
  while (!env.done()) {
    const auto r = env.step(random_actions(rng, env));
    for (const auto& s : r.agents) {
      trace.insert(trace.end(), s.observation.data(), s.observation.data() + s.observation.size());
      trace.push_back(s.reward);
    }
  }
  return trace;
}

}  // namespace

TEST_CASE("multigoal geometry and rewards") {
  MultiGoalEnv env;
  const auto obs = env.reset(1);
  CHECK(obs.size() == 1);
  CHECK(obs[0][0] == 0.5);
  CHECK(MultiGoalEnv::kGoals.size() == 4);
  for (const auto& g : MultiGoalEnv::kGoals) CHECK(((g[0] == 0.0 || g[0] == 1.0) && (g[1] == 0.0 || g[1] == 1.0)));
  const std::vector<int> right{2};
  const auto r = env.step(right);
  CHECK(r.agents[0].reward == doctest::Approx(-std::hypot(0.45, 0.5)).epsilon(1e-12));

  // Walk to the top-right corner; the episode ends inside the goal radius.
  int steps = 1;
  while (!env.done()) {
    const std::vector<int> a{steps % 2 ? 0 : 2};
    env.step(a);
    ++steps;
  }
  CHECK(env.goal_reached(0) == 3);
  CHECK(steps < 100);
  CHECK(std::hypot(1.0 - env.position(0)[0], 1.0 - env.position(0)[1]) <= 0.05 + 1e-12);
  CHECK_THROWS_AS(env.step(right), EnvironmentError);
}

TEST_CASE("multigoal horizon, roster and illegal actions") {
  MultiGoalConfig c;
  c.agents = 3;
  MultiGoalEnv env(c);
  CHECK(env.reset(5).size() == 3);
  CHECK_THROWS_AS(env.step(std::vector<int>{0, 5, 0}), EnvironmentError);
  CHECK_THROWS_AS(env.step(std::vector<int>{0, 0}), EnvironmentError);
  StepResult last;
  for (int t = 0; t < 100; ++t) last = env.step(std::vector<int>{4, 4, 4});
  CHECK(env.done());
  for (const auto& s : last.agents) CHECK(s.done);
}

TEST_CASE("environments are deterministic in seed and actions") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    MultiGoalEnv m1, m2;
    CHECK(rollout_trace(m1, seed, seed + 7) == rollout_trace(m2, seed, seed + 7));
    FarmworldEnv f1, f2;
    CHECK(rollout_trace(f1, seed, seed + 7) == rollout_trace(f2, seed, seed + 7));
    SoccerEnv s1, s2;
    CHECK(rollout_trace(s1, seed, seed + 7) == rollout_trace(s2, seed, seed + 7));
  }
}

TEST_CASE("farmworld training layout and observation encoding") {
  FarmworldEnv env;
  const auto obs = env.reset(3);
  CHECK(env.config().width == 10);
  CHECK(env.config().height == 10);
  CHECK(env.agent_count() == 10);
  int chickens = 0, towers = 0;
  for (const auto& u : env.units()) {
    chickens += u.kind == UnitKind::chicken;
    towers += u.kind == UnitKind::tower;
  }
  CHECK(chickens == 10);
  CHECK(towers == 10);
  CHECK(obs.size() == 10);
  CHECK(FarmworldEnv::kObservationSize == 53);
  for (const Vector& o : obs) {
    CHECK(o.size() == 53);
    CHECK(o.minCoeff() >= 0.0);
    CHECK(o.maxCoeff() <= 1.0);
    CHECK(o[52] == doctest::Approx(0.5));
  }
  const FarmworldConfig d;
  CHECK(d.agent_max_health == 10.0);
  CHECK(d.health_decay == 0.1);
  CHECK(d.chicken_yield == 3.0);
  CHECK(d.tower_yield == 5.0);
  CHECK(d.chicken_respawn_time == 20);
  CHECK(d.max_episode_timesteps == 200);
}

TEST_CASE("farmworld off-map cells encode as border") {
  FarmworldEnv env(still_chickens(parse_farm_map("A\n")));
  const Vector o = env.reset(1)[0];
  // Scan order: dy = -2 first, so slot 0 is two rows above the agent.
  CHECK(o[0] == 1.0);
  // Slot 6 is the agent's own cell.
  CHECK(o[6 * 4] == doctest::Approx(1.0 / 5.0));
}

TEST_CASE("living agents get exactly the alive reward") {
  FarmworldEnv env;
  env.reset(4);
  Rng rng(1);
  for (int t = 0; t < 20; ++t) {
    const auto r = env.step(random_actions(rng, env));
    for (int i = 0; i < env.agent_count(); ++i) {
      if (env.alive(i)) CHECK(r.agents[static_cast<std::size_t>(i)].reward == 0.1);
    }
  }
}

TEST_CASE("unfed agent starves at tick 50 while the episode goes on") {
  FarmworldEnv env(still_chickens(parse_farm_map("A.\n..\nA.\n")));
  env.reset(1);
  env.agent_mut(1).health = 10.0;
  StepResult r;
  for (int t = 0; t < 50; ++t) r = env.step(std::vector<int>{5, 5});
  CHECK(!env.alive(0));
  CHECK(r.agents[0].done);
  CHECK(r.agents[0].reward == 0.0);
  CHECK(env.alive(1));
  CHECK(!env.done());
  CHECK(env.final_health(0) == 0.0);
  // Dead agents' actions are ignored, even illegal ones.
  env.step(std::vector<int>{99, 5});
}

TEST_CASE("chicken kill trace") {
  FarmworldEnv env(still_chickens(parse_farm_map("Ac\n")));
  env.reset(1);
  const std::vector<int> face{static_cast<int>(FarmAction::right)}, attack{static_cast<int>(FarmAction::attack)};
  env.step(face);  // blocked, turns east
  CHECK(env.agent(0).pos == Cell{0, 0});
  env.step(attack);
  CHECK(env.unit_at({1, 0}).has_value());
  const double before = env.agent(0).health;
  env.step(attack);
  CHECK(!env.unit_at({1, 0}).has_value());
  CHECK(env.agent(0).health == doctest::Approx(before + 3.0 - 0.1).epsilon(1e-12));
  CHECK(env.agent(0).tick_yield == 3.0);
  CHECK(env.agent(0).record.chicken_attacks == 2);
  // Respawns after 20 ticks at its home cell.
  const std::vector<int> stay_facing{static_cast<int>(FarmAction::mine)};
  int ticks = 0;
  while (!env.unit_at({1, 0}) && ticks < 30) {
    env.step(stay_facing);
    ++ticks;
  }
  CHECK(ticks == 20);
}

TEST_CASE("tower takes two attacks then two mines") {
  FarmworldEnv env(still_chickens(parse_farm_map("At\n")));
  env.reset(1);
  const int attack = static_cast<int>(FarmAction::attack), mine = static_cast<int>(FarmAction::mine);
  env.step(std::vector<int>{static_cast<int>(FarmAction::right)});
  env.step(std::vector<int>{mine});
  const auto tower = *env.unit_at({1, 0});
  CHECK(!env.units()[static_cast<std::size_t>(tower)].haystack);
  env.step(std::vector<int>{attack});
  env.step(std::vector<int>{attack});
  CHECK(env.units()[static_cast<std::size_t>(tower)].haystack);
  CHECK(env.observation(0)[7 * 4 + 3] == 1.0);  // haystack flag in the east cell
  const double before = env.agent(0).health;
  env.step(std::vector<int>{mine});
  env.step(std::vector<int>{mine});
  CHECK(!env.unit_at({1, 0}).has_value());
  CHECK(env.agent(0).health == doctest::Approx(before + 5.0 - 0.2).epsilon(1e-12));
}

TEST_CASE("fences are indestructible and block movement") {
  FarmworldEnv env(still_chickens(parse_farm_map("Af.\n")));
  env.reset(1);
  for (int t = 0; t < 5; ++t) env.step(std::vector<int>{t == 0 ? static_cast<int>(FarmAction::right) : static_cast<int>(FarmAction::attack)});
  CHECK(env.agent(0).pos == Cell{0, 0});
  const auto f = env.unit_at({1, 0});
  REQUIRE(f.has_value());
  CHECK(env.units()[static_cast<std::size_t>(*f)].kind == UnitKind::fence);
  CHECK(env.units()[static_cast<std::size_t>(*f)].present);
}

TEST_CASE("health gains are capped at max health and poison is not") {
  FarmworldEnv env(still_chickens(parse_farm_map("Ac\n")));
  env.reset(1);
  env.agent_mut(0).health = 9.0;
  env.step(std::vector<int>{static_cast<int>(FarmAction::right)});
  env.step(std::vector<int>{4});
  env.step(std::vector<int>{4});
  CHECK(env.agent(0).health == doctest::Approx(10.0 - 0.1));

  FarmworldConfig poison = still_chickens(parse_farm_map("Ac\n"));
  poison.chicken_yield = -3.0;
  FarmworldEnv p(poison);
  p.reset(1);
  const double h = p.agent(0).health;
  p.step(std::vector<int>{static_cast<int>(FarmAction::right)});
  p.step(std::vector<int>{4});
  p.step(std::vector<int>{4});
  CHECK(p.agent(0).health == doctest::Approx(h - 3.0 - 0.3));
}

TEST_CASE("specialization lock and blunders") {
  FarmworldConfig c = still_chickens(parse_farm_map("Ac\n"));
  c.enforced_specialization = true;
  FarmworldEnv env(c);
  env.reset(1);
  FarmUnit& a = env.agent_mut(0);
  CHECK(env.apply_specialization_rule(a, Resource::tower));
  CHECK(a.locked_into == Resource::tower);
  CHECK(!env.apply_specialization_rule(a, Resource::chicken));
  CHECK(a.record.blunders == 1);
  CHECK(env.apply_specialization_rule(a, Resource::tower));

  // A locked tower agent gains nothing from a chicken.
  const double h = env.agent(0).health;
  env.step(std::vector<int>{static_cast<int>(FarmAction::right)});
  env.step(std::vector<int>{4});
  env.step(std::vector<int>{4});
  CHECK(env.agent(0).health == doctest::Approx(h - 0.3));
  CHECK(env.agent(0).record.blunders == 2);

  FarmworldEnv off(still_chickens(parse_farm_map("Ac\n")));
  off.reset(1);
  FarmUnit& b = off.agent_mut(0);
  b.locked_into = Resource::tower;
  CHECK(off.apply_specialization_rule(b, Resource::chicken));
}

TEST_CASE("observation never depends on the lock") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    FarmworldConfig c;
    c.enforced_specialization = true;
    FarmworldEnv env(c);
    env.reset(seed);
    Rng rng(seed);
    for (int t = 0; t < 10; ++t) env.step(random_actions(rng, env));
    for (int i = 0; i < env.agent_count(); ++i) {
      if (!env.alive(i)) continue;
      std::vector<Vector> seen;
      for (Resource r : {Resource::none, Resource::chicken, Resource::tower}) {
        for (int j = 0; j < env.agent_count(); ++j) {
          if (env.alive(j)) env.agent_mut(j).locked_into = r;
        }
        seen.push_back(env.observation(i));
      }
      CHECK(seen[0] == seen[1]);
      CHECK(seen[0] == seen[2]);
    }
  }
}

TEST_CASE("cells beyond the view radius never change an observation") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    FarmworldEnv env;
    env.reset(seed);
    Rng rng(seed + 50);
    for (int t = 0; t < 5; ++t) env.step(random_actions(rng, env));
    for (int i = 0; i < env.agent_count(); ++i) {
      if (!env.alive(i)) continue;
      const Vector before = env.observation(i);
      const Cell me = env.agent(i).pos;
      auto& units = env.units_mut();
      for (auto& u : units) {
        if (!u.present || std::abs(u.pos.x - me.x) + std::abs(u.pos.y - me.y) <= 2) continue;
        u.health += 1.0;
        u.hits = u.hits == 0 ? 1 : 0;
        u.haystack = !u.haystack;
        u.orientation = static_cast<Orientation>((static_cast<int>(u.orientation) + 1) % 4);
      }
      CHECK(env.observation(i) == before);
      for (auto& u : units) {
        if (!u.present || std::abs(u.pos.x - me.x) + std::abs(u.pos.y - me.y) <= 2) continue;
        u.health -= 1.0;
        u.hits = u.hits == 1 ? 0 : 1;
        u.haystack = !u.haystack;
        u.orientation = static_cast<Orientation>((static_cast<int>(u.orientation) + 3) % 4);
      }
    }
  }
}

TEST_CASE("health bookkeeping and occupancy hold every tick") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    FarmworldConfig c;
    c.agent_attack_damage = 0.5;
    FarmworldEnv env(c);
    env.reset(seed);
    Rng rng(seed * 3 + 1);
    while (!env.done()) {
      std::vector<double> before(static_cast<std::size_t>(env.agent_count()));
      std::vector<bool> was(static_cast<std::size_t>(env.agent_count()));
      for (int i = 0; i < env.agent_count(); ++i) {
        was[static_cast<std::size_t>(i)] = env.alive(i);
        if (env.alive(i)) before[static_cast<std::size_t>(i)] = env.agent(i).health;
      }
      env.step(random_actions(rng, env));
      for (int i = 0; i < env.agent_count(); ++i) {
        if (!was[static_cast<std::size_t>(i)] || !env.alive(i)) continue;
        const FarmUnit& a = env.agent(i);
        CHECK(a.health - before[static_cast<std::size_t>(i)] ==
              doctest::Approx(-0.1 + a.tick_yield - a.tick_damage).epsilon(1e-12));
      }
      std::vector<int> seen(static_cast<std::size_t>(c.width * c.height), 0);
      for (const auto& u : env.units()) {
        if (u.present) REQUIRE(++seen[static_cast<std::size_t>(u.pos.y * c.width + u.pos.x)] == 1);
      }
    }
  }
}

TEST_CASE("ablation layouts") {
  CHECK(table_ablations().size() == 5);
  const FarmworldConfig far = build_ablation("far_corner");
  CHECK(far.width == 18);
  CHECK(far.height == 18);
  FarmworldEnv far_env(far);
  far_env.reset(2);
  for (const auto& u : far_env.units()) {
    if (u.kind == UnitKind::agent) CHECK((u.pos.x <= 3 && u.pos.y <= 3));
    if (u.kind == UnitKind::chicken || u.kind == UnitKind::tower) CHECK((u.pos.x >= 12 && u.pos.y >= 12));
  }

  FarmworldEnv wall(build_ablation("wall_barrier"));
  wall.reset(2);
  int fences = 0;
  for (const auto& u : wall.units()) {
    if (u.kind == UnitKind::fence) {
      ++fences;
      CHECK(u.pos.x == 4);
      CHECK(u.pos.y >= 2);
    }
    if (u.kind == UnitKind::agent) CHECK(u.pos.x < 4);
    if (u.kind == UnitKind::chicken || u.kind == UnitKind::tower) CHECK(u.pos.x > 4);
  }
  CHECK(fences == 8);
  CHECK(!wall.unit_at({4, 0}).has_value());

  const FarmworldConfig speed = build_ablation("speed"), patience = build_ablation("patience");
  CHECK(speed.width == 2);
  CHECK(speed.agents == 1);
  CHECK(patience.agents == 1);
  CHECK(patience.tower_yield > speed.tower_yield);
  CHECK(patience.tower_respawn_time > speed.tower_respawn_time);

  const FarmworldConfig poison = build_ablation("poison_chickens"), train = build_ablation("training");
  CHECK(poison.chicken_yield == -train.chicken_yield);
  CHECK(poison.tower_yield == train.tower_yield);
  CHECK(train.agents == 10);
  CHECK(train.chickens == 10);
  CHECK(train.towers == 10);
  CHECK_THROWS_AS(build_ablation("lava"), ConfigError);
}

TEST_CASE("farm config and map validation") {
  CHECK_THROWS_AS(parse_farm_map("Ax\n"), ConfigError);
  CHECK_THROWS_AS(parse_farm_map("A.\n.\n"), ConfigError);
  FarmworldConfig c;
  c.width = 2;
  c.height = 2;
  CHECK_THROWS_AS(FarmworldEnv{c}, ConfigError);
  c = FarmworldConfig{};
  c.chicken_respawn_time = -1;
  CHECK_THROWS_AS(FarmworldEnv{c}, ConfigError);
  FarmworldEnv env;
  env.reset(1);
  std::vector<int> bad(10, 0);
  bad[3] = 6;
  CHECK_THROWS_AS(env.step(bad), EnvironmentError);
}

TEST_CASE("soccer scoring, bumping and draws") {
  SoccerConfig cfg;
  cfg.draw_probability = 0.0;
  Rng rng(1);
  SoccerState s;
  s.a = {1, 4};
  s.b = {0, 0};
  s.possession = Side::a;
  CHECK(soccer_step(s, SoccerAction::right, SoccerAction::stand, rng, cfg) == GameResult::a_scores);

  s = SoccerState{};
  s.a = {1, 0};
  s.b = {3, 4};
  s.possession = Side::b;
  // Without the ball a player cannot score, and stays in bounds.
  CHECK(soccer_step(s, SoccerAction::left, SoccerAction::stand, rng, cfg) == GameResult::ongoing);
  CHECK(s.a == SoccerPos{1, 0});

  s = SoccerState{};
  s.a = {1, 1};
  s.b = {1, 2};
  s.possession = Side::a;
  soccer_step(s, SoccerAction::stand, SoccerAction::left, rng, cfg);
  CHECK(s.possession == Side::b);
  CHECK(s.b == SoccerPos{1, 2});

  s = SoccerState{};
  s.b = {2, 0};
  s.a = {0, 4};
  s.possession = Side::b;
  CHECK(soccer_step(s, SoccerAction::stand, SoccerAction::left, rng, cfg) == GameResult::b_scores);

  SoccerConfig always = cfg;
  always.draw_probability = 1.0;
  for (int i = 0; i < 100; ++i) {
    SoccerState d = initial_soccer_state(always, rng);
    CHECK(soccer_step(d, SoccerAction::right, SoccerAction::left, rng, always) == GameResult::draw);
  }
  CHECK(is_goal_row(cfg, 1));
  CHECK(is_goal_row(cfg, 2));
  CHECK(!is_goal_row(cfg, 0));
  CHECK(!is_goal_row(cfg, 3));
}

TEST_CASE("soccer execution order is a fair coin") {
  // A moves into B while B steps away: A only advances when B moved first.
  SoccerConfig cfg;
  cfg.draw_probability = 0.0;
  Rng rng(99);
  int b_first = 0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    SoccerState s;
    s.a = {1, 1};
    s.b = {1, 2};
    s.possession = Side::a;
    soccer_step(s, SoccerAction::right, SoccerAction::down, rng, cfg);
    b_first += s.a == SoccerPos{1, 2};
    // Per tick nobody moves more than one cell.
    CHECK(std::abs(s.a.col - 1) + std::abs(s.a.row - 1) <= 1);
    CHECK(std::abs(s.b.col - 2) + std::abs(s.b.row - 1) <= 1);
    CHECK(!(s.a == s.b));
  }
  CHECK(std::abs(b_first / static_cast<double>(n) - 0.5) < 0.02);
}

TEST_CASE("soccer observations are side invariant") {
  SoccerConfig cfg;
  Rng rng(5);
  for (int i = 0; i < 200; ++i) {
    SoccerState s;
    s.a = {uniform_int(rng, 0, 3), uniform_int(rng, 0, 4)};
    do {
      s.b = {uniform_int(rng, 0, 3), uniform_int(rng, 0, 4)};
    } while (s.b == s.a);
    s.possession = uniform01(rng) < 0.5 ? Side::a : Side::b;
    SoccerState m;
    m.a = {s.b.row, cfg.cols - 1 - s.b.col};
    m.b = {s.a.row, cfg.cols - 1 - s.a.col};
    m.possession = opponent(s.possession);
    CHECK(side_invariant_obs(s, Side::a, cfg) == side_invariant_obs(m, Side::b, cfg));
    const Vector o = side_invariant_obs(s, Side::b, cfg);
    CHECK((o[4] == 0.0 || o[4] == 1.0));
    CHECK(o == side_invariant_obs(s, Side::b, cfg));
  }
  CHECK(to_absolute(SoccerAction::right, Side::b) == SoccerAction::left);
  CHECK(to_absolute(SoccerAction::up, Side::b) == SoccerAction::up);
}

TEST_CASE("soccer env rewards are zero sum") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    SoccerEnv env;
    env.reset(seed);
    Rng rng(seed);
    StepResult r;
    while (!env.done()) r = env.step(random_actions(rng, env));
    CHECK(r.agents[0].reward == -r.agents[1].reward);
    CHECK(r.agents[0].done);
    CHECK(r.agents[1].done);
  }
  SoccerEnv env;
  env.reset(1);
  CHECK_THROWS_AS(env.step(std::vector<int>{5, 0}), EnvironmentError);
}

TEST_CASE("scripted bots") {
  SoccerConfig cfg;
  Rng rng(3);
  SoccerState s;
  s.a = {0, 2};
  s.b = {3, 4};
  CHECK(bot_policy(make_bot(BotKind::straight), s, rng, cfg) == SoccerAction::right);
  CHECK(bot_policy(make_bot(BotKind::stand), s, rng, cfg) == SoccerAction::stand);
  s.a = {1, 0};
  CHECK(bot_policy(make_bot(BotKind::oscillate0), s, rng, cfg) == SoccerAction::down);
  s.a = {2, 0};
  CHECK(bot_policy(make_bot(BotKind::oscillate0), s, rng, cfg) == SoccerAction::up);
  s.a = {2, 1};
  CHECK(bot_policy(make_bot(BotKind::oscillate1), s, rng, cfg) == SoccerAction::up);
  s.a = {1, 0};
  CHECK(bot_policy(make_bot(BotKind::oscillate1), s, rng, cfg) == SoccerAction::right);

  // Oscillate0 covers both goal-mouth cells over a two-tick cycle.
  SoccerConfig quiet = cfg;
  quiet.draw_probability = 0.0;
  SoccerState o;
  o.a = {1, 0};
  o.b = {0, 4};
  o.possession = Side::b;
  std::vector<SoccerPos> visited;
  for (int t = 0; t < 4; ++t) {
    soccer_step(o, bot_policy(make_bot(BotKind::oscillate0), o, rng, quiet), SoccerAction::stand, rng, quiet);
    visited.push_back(o.a);
  }
  CHECK(visited == std::vector<SoccerPos>{{2, 0}, {1, 0}, {2, 0}, {1, 0}});

  CHECK(all_bots().size() == 6);
  CHECK(make_bot(BotKind::straight).role == BotRole::offense);
  CHECK(make_bot(BotKind::stand).role == BotRole::defense);
  CHECK(bot_match_config(make_bot(BotKind::straight)).initial_possession == 0);
  CHECK(bot_match_config(make_bot(BotKind::oscillate1)).start_a == SoccerPos{1, 1});
  CHECK(parse_bot("rule_based") == BotKind::rule_based);
  CHECK_THROWS_AS(parse_bot("minimax"), ConfigError);

  int counts[5] = {};
  for (int i = 0; i < 5000; ++i) ++counts[static_cast<int>(bot_policy(make_bot(BotKind::random), s, rng, cfg))];
  for (int c : counts) CHECK(std::abs(c - 1000) < 150);
}

TEST_CASE("rule based bot takes the ball forward and guards without it") {
  SoccerConfig cfg;
  Rng rng(1);
  SoccerState s;
  s.a = {1, 1};
  s.b = {1, 2};
  s.possession = Side::a;
  CHECK(bot_policy(make_bot(BotKind::rule_based), s, rng, cfg) == SoccerAction::down);
  s.b = {3, 4};
  CHECK(bot_policy(make_bot(BotKind::rule_based), s, rng, cfg) == SoccerAction::right);
  s.possession = Side::b;
  s.a = {1, 3};
  s.b = {1, 2};
  CHECK(bot_policy(make_bot(BotKind::rule_based), s, rng, cfg) == SoccerAction::left);
}

TEST_CASE("replay reproduces rewards and flags tampering") {
  for (int which = 0; which < 3; ++which) {
    std::unique_ptr<Environment> env;
    if (which == 0) env = std::make_unique<MultiGoalEnv>();
    if (which == 1) env = std::make_unique<FarmworldEnv>();
    if (which == 2) env = std::make_unique<SoccerEnv>();
    std::stringstream log;
    ReplayWriter writer(log, *env, 17);
    env->reset(17);
    Rng rng(4);
    int t = 0;
    while (!env->done()) {
      const auto a = random_actions(rng, *env);
      const auto r = env->step(a);
      writer.record(++t, a, r, *env);
    }
    std::stringstream copy(log.str());
    const ReplayLog parsed = read_replay(copy);
    CHECK(!parsed.empty);
    CHECK(parsed.header.env == env->name());
    CHECK(parsed.header.config_hash == config_hash(env->config_json()));
    const ReplayOutcome out = replay(parsed);
    CHECK(out.rewards_match);
    CHECK(out.steps == static_cast<std::size_t>(t));
    CHECK(out.frames.back() == env->render());

    ReplayLog tampered = parsed;
    tampered.records.back().reward += 1e-12;
    CHECK(!replay(tampered).rewards_match);
  }
  std::stringstream empty;
  const ReplayLog none = read_replay(empty);
  CHECK(none.empty);
  CHECK(replay(none).frames.empty());

  MultiGoalEnv mg;
  std::stringstream header;
  ReplayWriter w(header, mg, 1);
  std::stringstream corrupt(header.str() + "not json\n");
  try {
    read_replay(corrupt);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
}
