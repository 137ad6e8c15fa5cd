#pragma once

#include "adap/policy.hpp"
#include "adap/random.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string_view>
#include <vector>

namespace adap {

enum class SearchAction { sample, mutate, replicate, prune };

std::string_view to_string(SearchAction a);

struct SearchConfig {
  int generations = 100;         // g
  int episodes_per_latent = 1;
  int latent_dim = kDefaultLatentDim;
  int top = 10;                  // size of the elite slice best[0:top]
  double exploration_fraction = 0.75;
  double mutation_scale = 0.1;
  // true: an extra 50/50 coin gates exploration during the first
  // exploration_fraction of generations. false: every early generation explores.
  bool exploration_coin = true;
};

void validate(const SearchConfig& config);

// Return of one episode played with latent z; the rng drives that episode.
using EpisodeScorer = std::function<double(const LatentVector& z, Rng& rng)>;

struct SearchEntry {
  LatentVector z;
  double score = 0.0;
  int evaluations = 0;
  std::int64_t order = 0;  // insertion stamp; earlier ranks higher on equal scores
};

struct SearchTraceRow {
  int generation = 0;
  LatentVector z;
  double score = 0.0;
  SearchAction action = SearchAction::sample;
};

// z + Unif[-s, s]^k, renormalized onto the sphere; a zero sum is redrawn.
LatentVector mutate(const LatentVector& z, Rng& rng, double scale = 0.1);

// Generation-based search over the latent sphere with frozen generator
// weights. State survives an exception thrown by the scorer, so the partial
// ranking stays available.
class LatentSearch {
 public:
  LatentSearch(EpisodeScorer scorer, SearchConfig config);

  // Runs one generation; returns false once all g generations are spent.
  bool step(Rng& rng);
  void run(Rng& rng);

  int generation() const { return generation_; }
  int episodes() const { return episodes_; }
  const std::vector<SearchEntry>& best() const { return best_; }
  const std::vector<SearchTraceRow>& trace() const { return trace_; }
  const SearchConfig& config() const { return config_; }

 private:
  double evaluate(const LatentVector& z, Rng& rng);
  void insert(SearchEntry e);
  void resort();

  EpisodeScorer scorer_;
  SearchConfig config_;
  std::vector<SearchEntry> best_;
  std::vector<SearchTraceRow> trace_;
  int generation_ = 0;
  int episodes_ = 0;
  std::int64_t stamp_ = 0;
};

struct SearchResult {
  LatentVector best;
  double score = 0.0;
  std::vector<SearchEntry> ranking;
  std::vector<SearchTraceRow> trace;
  int episodes = 0;
};

SearchResult optimize_latents(const EpisodeScorer& scorer, const SearchConfig& config, Rng& rng);

// CSV with header generation,z0,...,score,action.
void write_search_trace(std::ostream& out, const std::vector<SearchTraceRow>& trace);

}  // namespace adap
