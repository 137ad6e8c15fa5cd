#pragma once

#include "adap/farmworld.hpp"
#include "adap/latent_search.hpp"
#include "adap/policy.hpp"
#include "adap/soccer.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace adap {

// 1 - H2(p) in bits with p = tower / (tower + chicken); zero attacks score 0.
double specialization(const SpecializationRecord& rec);
double binary_entropy_bits(double p);

struct EpisodeResult {
  std::vector<double> returns;  // per roster slot
  int ticks = 0;
};

// Plays one episode from reset(seed); agent i acts under latents[i]. Actions
// are sampled with `rng` unless greedy.
EpisodeResult run_episode(Environment& env, const PolicyGenerator& gen, std::span<const LatentVector> latents,
                          std::uint64_t seed, Rng& rng, bool greedy = false, ReplayWriter* log = nullptr);

struct FarmEvaluation {
  double mean_specialization = 0.0;
  double mean_episode_reward = 0.0;  // per agent
  double mean_final_health = 0.0;
  int blunders = 0;
  int episodes = 0;
};

// Fresh latent per agent per episode, as during training.
FarmEvaluation evaluate_farmworld(const PolicyGenerator& gen, const FarmworldConfig& config, int episodes,
                                  std::uint64_t seed);

// One episode where every agent uses z; returns the mean final agent health.
double farm_final_health(const PolicyGenerator& gen, const FarmworldConfig& config, const LatentVector& z,
                         std::uint64_t seed, Rng& rng);

struct AblationRow {
  std::string ablation;
  double mean_final_health = 0.0;
  double std_final_health = 0.0;
  double initial_health = 0.0;
  std::vector<double> per_seed;
  std::vector<LatentVector> best;  // per seed
};

// Every ablation layout, the training layout included.
std::vector<Ablation> all_ablations();

// Per ablation and seed: latent search scored by mean final health, then the
// chosen latent is evaluated over `eval_episodes` fresh episodes.
std::vector<AblationRow> ablation_sweep(const PolicyGenerator& gen, std::span<const Ablation> ablations,
                                        const SearchConfig& search, std::span<const std::uint64_t> seeds,
                                        int eval_episodes = 10);

// Soccer -----------------------------------------------------------------

// Returns an absolute-frame action for the player on `side`.
using SoccerPolicy = std::function<SoccerAction(const SoccerState&, Side, const SoccerConfig&, Rng&)>;

SoccerPolicy generator_policy(const PolicyGenerator& gen, LatentVector z, bool greedy = false);
SoccerPolicy bot_player(Bot bot);  // bots always play side a

struct MatchScore {
  int wins = 0;
  int losses = 0;
  int draws = 0;
  int zero_sum_violations = 0;  // ticks where the two rewards did not cancel

  int games() const { return wins + losses + draws; }
  int score() const { return wins - losses; }
  MatchScore mirrored() const { return {losses, wins, draws, zero_sum_violations}; }
  MatchScore& operator+=(const MatchScore& o);
};

// Plays one game; returns +1, -1 or 0 from side a's point of view.
int play_game(const SoccerPolicy& a, const SoccerPolicy& b, const SoccerConfig& config, std::uint64_t seed,
              MatchScore* tally = nullptr, ReplayWriter* log = nullptr);

// `games` games with seeds derived from `seed`. When alternate_sides is set,
// odd games swap which side `first` plays. Scores are from first's view.
MatchScore play_match(const SoccerPolicy& first, const SoccerPolicy& second, const SoccerConfig& config, int games,
                      std::uint64_t seed, bool alternate_sides);

struct BotResult {
  Bot bot;
  LatentVector z;
  double search_score = 0.0;
  MatchScore score;  // learned policy's view
};

// Learned policy plays side b (the right); its latent per bot comes from search.
std::vector<BotResult> bot_gauntlet(const PolicyGenerator& gen, std::span<const Bot> bots, int games,
                                    const SearchConfig& search, std::uint64_t seed,
                                    const SoccerConfig& base = {});

struct RoundRobinConfig {
  SearchConfig search;
  int family_size = 32;
  int games = 1000;
  // true: z1 is G1's best response to pi_{G2,z2}. false: both latents are
  // chosen against the other generator's family.
  bool best_response = true;
  SoccerConfig soccer;
};

struct RoundRobinResult {
  LatentVector z1;
  LatentVector z2;
  MatchScore score;  // G1's view
};

// Mean return of `player` on alternating sides against each latent of a
// fixed panel from `family`, with common random numbers per panel slot.
double score_against_family(const PolicyGenerator& player, const LatentVector& z, const PolicyGenerator& family,
                            std::span<const LatentVector> panel, const SoccerConfig& config, std::uint64_t seed);

RoundRobinResult round_robin(const PolicyGenerator& g1, const PolicyGenerator& g2, const RoundRobinConfig& config,
                             std::uint64_t seed);

struct Tournament {
  std::vector<std::vector<RoundRobinResult>> directed;  // [i][j]: round_robin(G_i, G_j); diagonal unused
  Matrix matrix;  // antisymmetric: (score(G_i, G_j) - score(G_j, G_i)) / 2
  int zero_sum_violations = 0;
};

Tournament tournament(std::span<const PolicyGenerator* const> generators, const RoundRobinConfig& config,
                      std::uint64_t seed);

// CSV helpers: header method,seed,metric,value.
struct ResultRow {
  std::string method;
  std::uint64_t seed = 0;
  std::string metric;
  double value = 0.0;
};

void write_results(std::ostream& out, const std::vector<ResultRow>& rows);

}  // namespace adap
