#include "adap/eval.hpp"

#include "adap/errors.hpp"

#include <array>
#include <cmath>
#include <iomanip>
#include <ostream>

namespace adap {

double binary_entropy_bits(double p) {
  if (p <= 0.0 || p >= 1.0) return 0.0;
  return -(p * std::log2(p) + (1.0 - p) * std::log2(1.0 - p));
}

double specialization(const SpecializationRecord& rec) {
  const int total = rec.tower_attacks + rec.chicken_attacks;
  if (total <= 0) return 0.0;
  return 1.0 - binary_entropy_bits(static_cast<double>(rec.tower_attacks) / total);
}

EpisodeResult run_episode(Environment& env, const PolicyGenerator& gen, std::span<const LatentVector> latents,
                          std::uint64_t seed, Rng& rng, bool greedy, ReplayWriter* log) {
  const int agents = env.agent_count();
  if (static_cast<int>(latents.size()) != agents) throw ConfigError("run_episode: need one latent per agent");
  env.reset(seed);
  EpisodeResult out;
  out.returns.assign(static_cast<std::size_t>(agents), 0.0);
  std::vector<int> alive;
  while (!env.done()) {
    alive.clear();
    for (int a = 0; a < agents; ++a) {
      if (env.alive(a)) alive.push_back(a);
    }
    const auto n = static_cast<Eigen::Index>(alive.size());
    Matrix obs(env.observation_size(), n);
    Matrix lat(gen.config().latent_dim, n);
    for (Eigen::Index c = 0; c < n; ++c) {
      obs.col(c) = env.observation(alive[static_cast<std::size_t>(c)]);
      lat.col(c) = latents[static_cast<std::size_t>(alive[static_cast<std::size_t>(c)])].values();
    }
    const Matrix probs = gen.probabilities(obs, lat);
    std::vector<int> actions(static_cast<std::size_t>(agents), kNoAction);
    if (greedy) {
      for (Eigen::Index c = 0; c < n; ++c) actions[static_cast<std::size_t>(alive[static_cast<std::size_t>(c)])] = argmax_action(probs.col(c));
    } else {
      const std::vector<int> sampled = sample_actions(probs, rng);
      for (Eigen::Index c = 0; c < n; ++c) {
        actions[static_cast<std::size_t>(alive[static_cast<std::size_t>(c)])] = sampled[static_cast<std::size_t>(c)];
      }
    }
    const int tick = env.tick();
    const StepResult r = env.step(actions);
    if (log) log->record(tick, actions, r, env);
    for (int a : alive) out.returns[static_cast<std::size_t>(a)] += r.agents[static_cast<std::size_t>(a)].reward;
    ++out.ticks;
  }
  return out;
}

FarmEvaluation evaluate_farmworld(const PolicyGenerator& gen, const FarmworldConfig& config, int episodes,
                                  std::uint64_t seed) {
  FarmworldEnv env(config);
  Rng rng(seed);
  FarmEvaluation out;
  double spec = 0.0, reward = 0.0, health = 0.0;
  int samples = 0;
  for (int e = 0; e < episodes; ++e) {
    std::vector<LatentVector> latents;
    for (int a = 0; a < env.agent_count(); ++a) latents.push_back(sample_latent(rng, gen.config().latent_dim));
    const EpisodeResult r = run_episode(env, gen, latents, derive_seed(seed, static_cast<std::uint64_t>(e)), rng);
    for (int a = 0; a < env.agent_count(); ++a) {
      spec += specialization(env.agent(a).record);
      reward += r.returns[static_cast<std::size_t>(a)];
      health += env.final_health(a);
      out.blunders += env.agent(a).record.blunders;
      ++samples;
    }
  }
  out.episodes = episodes;
  if (samples > 0) {
    out.mean_specialization = spec / samples;
    out.mean_episode_reward = reward / samples;
    out.mean_final_health = health / samples;
  }
  return out;
}

double farm_final_health(const PolicyGenerator& gen, const FarmworldConfig& config, const LatentVector& z,
                         std::uint64_t seed, Rng& rng) {
  FarmworldEnv env(config);
  const std::vector<LatentVector> latents(static_cast<std::size_t>(env.agent_count()), z);
  run_episode(env, gen, latents, seed, rng);
  double total = 0.0;
  for (int a = 0; a < env.agent_count(); ++a) total += env.final_health(a);
  return total / env.agent_count();
}

std::vector<Ablation> all_ablations() {
  std::vector<Ablation> out = table_ablations();
  out.push_back(Ablation::training);
  return out;
}

std::vector<AblationRow> ablation_sweep(const PolicyGenerator& gen, std::span<const Ablation> ablations,
                                        const SearchConfig& search, std::span<const std::uint64_t> seeds,
                                        int eval_episodes) {
  std::vector<AblationRow> rows;
  for (Ablation ab : ablations) {
    const FarmworldConfig config = build_ablation(ab);
    AblationRow row;
    row.ablation = std::string(to_string(ab));
    row.initial_health = config.agent_start_health;
    for (std::uint64_t seed : seeds) {
      const EpisodeScorer scorer = [&](const LatentVector& z, Rng& rng) {
        return farm_final_health(gen, config, z, rng(), rng);
      };
      Rng search_rng(derive_seed(seed, 1));
      const SearchResult found = optimize_latents(scorer, search, search_rng);
      Rng eval_rng(derive_seed(seed, 2));
      double total = 0.0;
      for (int e = 0; e < eval_episodes; ++e) {
        total += farm_final_health(gen, config, found.best, derive_seed(seed, 1000 + static_cast<std::uint64_t>(e)),
                                   eval_rng);
      }
      row.per_seed.push_back(total / eval_episodes);
      row.best.push_back(found.best);
    }
    double mean = 0.0;
    for (double v : row.per_seed) mean += v;
    mean /= static_cast<double>(row.per_seed.size());
    double var = 0.0;
    for (double v : row.per_seed) var += (v - mean) * (v - mean);
    row.mean_final_health = mean;
    row.std_final_health = std::sqrt(var / static_cast<double>(row.per_seed.size()));
    rows.push_back(std::move(row));
  }
  return rows;
}

SoccerPolicy generator_policy(const PolicyGenerator& gen, LatentVector z, bool greedy) {
  return [&gen, z = std::move(z), greedy](const SoccerState& state, Side side, const SoccerConfig& config, Rng& rng) {
    const Matrix obs = side_invariant_obs(state, side, config);
    const Matrix probs = gen.probabilities(obs, z.values());
    const int ego = greedy ? argmax_action(probs.col(0)) : sample_actions(probs, rng).front();
    return to_absolute(static_cast<SoccerAction>(ego), side);
  };
}

SoccerPolicy bot_player(Bot bot) {
  return [bot](const SoccerState& state, Side side, const SoccerConfig& config, Rng& rng) {
    if (side != Side::a) throw ConfigError("bots only play side a");
    return bot_policy(bot, state, rng, config);
  };
}

MatchScore& MatchScore::operator+=(const MatchScore& o) {
  wins += o.wins;
  losses += o.losses;
  draws += o.draws;
  zero_sum_violations += o.zero_sum_violations;
  return *this;
}

int play_game(const SoccerPolicy& a, const SoccerPolicy& b, const SoccerConfig& config, std::uint64_t seed,
              MatchScore* tally, ReplayWriter* log) {
  SoccerEnv env(config);
  env.reset(seed);
  Rng rng(derive_seed(seed, 7));
  while (!env.done()) {
    const SoccerAction abs_a = a(env.state(), Side::a, config, rng);
    const SoccerAction abs_b = b(env.state(), Side::b, config, rng);
    // The mirror is its own inverse, so it also maps absolute moves to ego moves.
    const std::array<int, 2> actions{static_cast<int>(to_absolute(abs_a, Side::a)),
                                     static_cast<int>(to_absolute(abs_b, Side::b))};
    const int tick = env.tick();
    const StepResult r = env.step(actions);
    if (log) log->record(tick, actions, r, env);
    if (tally && r.agents[0].reward + r.agents[1].reward != 0.0) ++tally->zero_sum_violations;
  }
  const GameResult result = env.state().result;
  const int outcome = result == GameResult::a_scores ? 1 : (result == GameResult::b_scores ? -1 : 0);
  if (tally) {
    if (outcome > 0) ++tally->wins;
    else if (outcome < 0) ++tally->losses;
    else ++tally->draws;
  }
  if (log) {
    log->result_line({{"winner", outcome > 0 ? "a" : (outcome < 0 ? "b" : "draw")}, {"ticks", env.tick()}});
  }
  return outcome;
}

MatchScore play_match(const SoccerPolicy& first, const SoccerPolicy& second, const SoccerConfig& config, int games,
                      std::uint64_t seed, bool alternate_sides) {
  MatchScore total;
  for (int g = 0; g < games; ++g) {
    const std::uint64_t s = derive_seed(seed, static_cast<std::uint64_t>(g));
    MatchScore one;
    if (alternate_sides && g % 2 == 1) {
      play_game(second, first, config, s, &one);
      one = one.mirrored();
    } else {
      play_game(first, second, config, s, &one);
    }
    total += one;
  }
  return total;
}

std::vector<BotResult> bot_gauntlet(const PolicyGenerator& gen, std::span<const Bot> bots, int games,
                                    const SearchConfig& search, std::uint64_t seed, const SoccerConfig& base) {
  std::vector<BotResult> out;
  for (std::size_t i = 0; i < bots.size(); ++i) {
    const Bot bot = bots[i];
    const SoccerConfig config = bot_match_config(bot, base);
    const SoccerPolicy opponent = bot_player(bot);
    const EpisodeScorer scorer = [&](const LatentVector& z, Rng& rng) {
      return -static_cast<double>(play_game(opponent, generator_policy(gen, z), config, rng()));
    };
    Rng search_rng(derive_seed(seed, 10 + i));
    const SearchResult found = optimize_latents(scorer, search, search_rng);
    BotResult r;
    r.bot = bot;
    r.z = found.best;
    r.search_score = found.score;
    const SoccerPolicy learned = generator_policy(gen, found.best);
    MatchScore tally;
    for (int g = 0; g < games; ++g) {
      play_game(opponent, learned, config, derive_seed(seed, 100000 * (i + 1) + static_cast<std::uint64_t>(g)), &tally);
    }
    r.score = tally.mirrored();
    out.push_back(r);
  }
  return out;
}

double score_against_family(const PolicyGenerator& player, const LatentVector& z, const PolicyGenerator& family,
                            std::span<const LatentVector> panel, const SoccerConfig& config, std::uint64_t seed) {
  const SoccerPolicy me = generator_policy(player, z);
  double total = 0.0;
  for (std::size_t p = 0; p < panel.size(); ++p) {
    const SoccerPolicy other = generator_policy(family, panel[p]);
    const std::uint64_t s = derive_seed(seed, p);
    total += p % 2 == 0 ? play_game(me, other, config, s) : -play_game(other, me, config, s);
  }
  return panel.empty() ? 0.0 : total / static_cast<double>(panel.size());
}

namespace {

std::vector<LatentVector> sample_panel(int n, int k, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<LatentVector> out;
  for (int i = 0; i < n; ++i) out.push_back(sample_latent(rng, k));
  return out;
}

LatentVector select_against_family(const PolicyGenerator& player, const PolicyGenerator& family,
                                   const RoundRobinConfig& config, std::uint64_t seed) {
  const std::vector<LatentVector> panel = sample_panel(config.family_size, family.config().latent_dim, derive_seed(seed, 11));
  SearchConfig search = config.search;
  search.episodes_per_latent = 1;
  search.latent_dim = player.config().latent_dim;
  const EpisodeScorer scorer = [&](const LatentVector& z, Rng&) {
    return score_against_family(player, z, family, panel, config.soccer, derive_seed(seed, 12));
  };
  Rng rng(derive_seed(seed, 13));
  return optimize_latents(scorer, search, rng).best;
}

}  // namespace

RoundRobinResult round_robin(const PolicyGenerator& g1, const PolicyGenerator& g2, const RoundRobinConfig& config,
                             std::uint64_t seed) {
  RoundRobinResult out;
  out.z2 = select_against_family(g2, g1, config, seed);
  if (config.best_response) {
    const std::vector<LatentVector> fixed(static_cast<std::size_t>(config.family_size), out.z2);
    SearchConfig search = config.search;
    search.episodes_per_latent = 1;
    search.latent_dim = g1.config().latent_dim;
    const EpisodeScorer scorer = [&](const LatentVector& z, Rng&) {
      return score_against_family(g1, z, g2, fixed, config.soccer, derive_seed(seed, 14));
    };
    Rng rng(derive_seed(seed, 15));
    out.z1 = optimize_latents(scorer, search, rng).best;
  } else {
    out.z1 = select_against_family(g1, g2, config, seed);
  }
  out.score = play_match(generator_policy(g1, out.z1), generator_policy(g2, out.z2), config.soccer, config.games,
                         derive_seed(seed, 16), true);
  return out;
}

Tournament tournament(std::span<const PolicyGenerator* const> generators, const RoundRobinConfig& config,
                      std::uint64_t seed) {
  const auto n = generators.size();
  Tournament t;
  t.directed.assign(n, std::vector<RoundRobinResult>(n));
  t.matrix = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const std::uint64_t s = derive_seed(seed, i * n + j);
      t.directed[i][j] = round_robin(*generators[i], *generators[j], config, s);
      t.directed[j][i] = round_robin(*generators[j], *generators[i], config, s);
      const double cell = 0.5 * (t.directed[i][j].score.score() - t.directed[j][i].score.score());
      t.matrix(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = cell;
      t.matrix(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = -cell;
      t.zero_sum_violations += t.directed[i][j].score.zero_sum_violations + t.directed[j][i].score.zero_sum_violations;
    }
  }
  return t;
}

void write_results(std::ostream& out, const std::vector<ResultRow>& rows) {
  out << "method,seed,metric,value\n" << std::setprecision(17);
  for (const auto& r : rows) out << r.method << ',' << r.seed << ',' << r.metric << ',' << r.value << '\n';
}

}  // namespace adap
