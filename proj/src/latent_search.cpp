#include "adap/latent_search.hpp"

#include "adap/errors.hpp"

#include <algorithm>
#include <iomanip>
#include <ostream>

namespace adap {

std::string_view to_string(SearchAction a) {
  switch (a) {
    case SearchAction::sample: return "sample";
    case SearchAction::mutate: return "mutate";
    case SearchAction::replicate: return "replicate";
    case SearchAction::prune: return "prune";
  }
  return "sample";
}

void validate(const SearchConfig& c) {
  if (c.generations < 1) throw ConfigError("search.generations must be at least 1");
  if (c.episodes_per_latent < 1) throw ConfigError("search.episodes_per_latent must be at least 1");
  if (c.latent_dim < 1) throw ConfigError("search.latent_dim must be positive");
  if (c.top < 1) throw ConfigError("search.top must be positive");
  if (c.exploration_fraction < 0.0 || c.exploration_fraction > 1.0) {
    throw ConfigError("search.exploration_fraction must be in [0, 1]");
  }
  if (c.mutation_scale < 0.0) throw ConfigError("search.mutation_scale must be non-negative");
}

LatentVector mutate(const LatentVector& z, Rng& rng, double scale) {
  for (;;) {
    Vector v = z.values();
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] += uniform(rng, -scale, scale);
    if (v.norm() > 1e-12) return LatentVector(std::move(v));
  }
}

LatentSearch::LatentSearch(EpisodeScorer scorer, SearchConfig config)
    : scorer_(std::move(scorer)), config_(config) {
  validate(config_);
}

double LatentSearch::evaluate(const LatentVector& z, Rng& rng) {
  double total = 0.0;
  for (int e = 0; e < config_.episodes_per_latent; ++e) {
    total += scorer_(z, rng);
    ++episodes_;
  }
  return total / config_.episodes_per_latent;
}

void LatentSearch::resort() {
  std::stable_sort(best_.begin(), best_.end(), [](const SearchEntry& a, const SearchEntry& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.order < b.order;
  });
}

void LatentSearch::insert(SearchEntry e) {
  e.order = stamp_++;
  best_.push_back(std::move(e));
  resort();
}

bool LatentSearch::step(Rng& rng) {
  if (generation_ >= config_.generations) return false;
  const int i = generation_ + 1;
  const double explor = uniform01(rng);
  const double r = uniform01(rng);
  const auto size = static_cast<int>(best_.size());
  const int elite = std::min(size, config_.top);
  const bool small = size <= config_.top;

  SearchTraceRow row;
  row.generation = i;
  const bool early = i <= config_.exploration_fraction * config_.generations;
  if ((early && (explor <= 0.5 || !config_.exploration_coin)) || small) {
    if (r <= 0.5 || small) {
      row.action = SearchAction::sample;
      row.z = sample_latent(rng, config_.latent_dim);
    } else {
      row.action = SearchAction::mutate;
      row.z = mutate(best_[static_cast<std::size_t>(uniform_int(rng, 0, elite - 1))].z, rng, config_.mutation_scale);
    }
    row.score = evaluate(row.z, rng);
    insert({row.z, row.score, 1, 0});
  } else if (r <= 0.5) {
    // Replication: re-score an elite member, keeping the running mean.
    row.action = SearchAction::replicate;
    SearchEntry& e = best_[static_cast<std::size_t>(uniform_int(rng, 0, elite - 1))];
    row.z = e.z;
    const double s = evaluate(row.z, rng);
    e.score = (e.score * e.evaluations + s) / (e.evaluations + 1);
    ++e.evaluations;
    row.score = s;
    resort();
  } else {
    // Pruning: pop the weakest elite member and push it back with a fresh score.
    row.action = SearchAction::prune;
    const auto at = best_.begin() + (elite - 1);
    row.z = at->z;
    best_.erase(at);
    row.score = evaluate(row.z, rng);
    insert({row.z, row.score, 1, 0});
  }
  trace_.push_back(row);
  generation_ = i;
  return generation_ < config_.generations;
}

void LatentSearch::run(Rng& rng) {
  while (step(rng)) {
  }
}

SearchResult optimize_latents(const EpisodeScorer& scorer, const SearchConfig& config, Rng& rng) {
  LatentSearch search(scorer, config);
  search.run(rng);
  SearchResult out;
  out.best = search.best().front().z;
  out.score = search.best().front().score;
  out.ranking = search.best();
  out.trace = search.trace();
  out.episodes = search.episodes();
  return out;
}

void write_search_trace(std::ostream& out, const std::vector<SearchTraceRow>& trace) {
  const int k = trace.empty() ? kDefaultLatentDim : static_cast<int>(trace.front().z.size());
  out << "generation";
  for (int j = 0; j < k; ++j) out << ",z" << j;
  out << ",score,action\n";
  out << std::setprecision(17);
  for (const auto& row : trace) {
    out << row.generation;
    for (int j = 0; j < k; ++j) out << ',' << row.z[j];
    out << ',' << row.score << ',' << to_string(row.action) << '\n';
  }
}

}  // namespace adap
