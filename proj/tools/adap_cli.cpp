#include "adap/checkpoint.hpp"
#include "adap/config.hpp"
#include "adap/errors.hpp"
#include "adap/eval.hpp"
#include "adap/multigoal.hpp"
#include "adap/run.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

namespace {

using namespace adap;

std::string method_label(const nlohmann::json& meta) {
  const std::string method = meta.at("train").at("method").get<std::string>();
  const std::string arch = meta.at("generator").at("architecture").get<std::string>();
  return method + (arch == "multiplicative" ? "(x)" : "(+)");
}

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  ConfigFile file;
  file.set("run.env", "multigoal");
  file.set("run.seeds", text);
  return resolve(file).run.seeds;
}

int cmd_train(const std::string& config_path, const std::vector<std::string>& overrides, const std::string& out,
              bool quiet) {
  ConfigFile file;
  if (config_path.size() > 5 && config_path.substr(config_path.size() - 5) == ".json") {
    std::ifstream in(config_path);
    if (!in) throw ConfigError("cannot read manifest '" + config_path + "'");
    file = config_from_manifest(nlohmann::json::parse(in));
  } else {
    file = ConfigFile::load(config_path);
  }
  for (const auto& o : overrides) file.apply_override(o);
  const ResolvedConfig config = resolve(file);
  const auto dir = out.empty() ? new_run_directory(run_root(), config) : std::filesystem::path(out);
  std::cout << "run directory " << dir.string() << '\n';
  train_run(file, config, dir, quiet ? nullptr : &std::cout);
  return 0;
}

struct AdaptOptions {
  std::string checkpoint;
  std::string env;
  std::string ablation;
  std::string bot = "random";
  int generations = 100;
  int episodes = 0;
  std::uint64_t seed = 1;
  std::string trace = "search_trace.csv";
  std::string replay;
};

int cmd_adapt(const AdaptOptions& o) {
  const Checkpoint ckpt = load_checkpoint(std::filesystem::path(o.checkpoint));
  const PolicyGenerator& gen = ckpt.generator;
  const nlohmann::json& meta = ckpt.metadata;
  const std::string env = o.env.empty() ? meta.at("run").at("env").get<std::string>() : o.env;

  SearchConfig search;
  search.generations = o.generations;
  search.latent_dim = gen.config().latent_dim;
  search.episodes_per_latent =
      o.episodes > 0 ? o.episodes : meta.at("search").at("episodes_per_latent").get<int>();

  nlohmann::json env_config;
  EpisodeScorer scorer;
  std::function<void(const LatentVector&, std::ostream&)> record;
  if (env == "farmworld") {
    const FarmworldConfig fc = o.ablation.empty() ? meta.at("env").get<FarmworldConfig>() : build_ablation(o.ablation);
    env_config = fc;
    scorer = [&gen, fc](const LatentVector& z, Rng& rng) { return farm_final_health(gen, fc, z, rng(), rng); };
  } else if (env == "multigoal" || env == "soccer") {
    if (!o.ablation.empty()) throw ConfigError("--ablation applies to farmworld only");
    env_config = env == meta.at("run").at("env").get<std::string>() ? meta.at("env") : nlohmann::json::object();
  } else {
    throw ConfigError("unknown environment '" + env + "'");
  }
  {
    const auto probe = make_environment(env, env_config);
    if (probe->observation_size() != gen.config().observation_size ||
        probe->action_count() != gen.config().action_count) {
      throw ConfigError("checkpoint generator does not fit environment '" + env + "'");
    }
    env_config = probe->config_json();
  }
  if (env == "multigoal") {
    scorer = [&gen, env_config](const LatentVector& z, Rng& rng) {
      auto e = make_environment("multigoal", env_config);
      const std::vector<LatentVector> zs(static_cast<std::size_t>(e->agent_count()), z);
      const EpisodeResult r = run_episode(*e, gen, zs, rng(), rng);
      double total = 0.0;
      for (double v : r.returns) total += v;
      return total / static_cast<double>(r.returns.size());
    };
  } else if (env == "soccer") {
    const Bot bot = make_bot(parse_bot(o.bot));
    const SoccerConfig sc = bot_match_config(bot, env_config.get<SoccerConfig>());
    scorer = [&gen, bot, sc](const LatentVector& z, Rng& rng) {
      return -static_cast<double>(play_game(bot_player(bot), generator_policy(gen, z), sc, rng()));
    };
    record = [&gen, bot, sc](const LatentVector& z, std::ostream& out) {
      SoccerEnv probe(sc);
      ReplayWriter writer(out, probe, 1);
      play_game(bot_player(bot), generator_policy(gen, z), sc, 1, nullptr, &writer);
    };
  }
  if (!record) {
    record = [&gen, env, env_config](const LatentVector& z, std::ostream& out) {
      auto e = make_environment(env, env_config);
      ReplayWriter writer(out, *e, 1);
      Rng rng(2);
      const std::vector<LatentVector> zs(static_cast<std::size_t>(e->agent_count()), z);
      run_episode(*e, gen, zs, 1, rng, false, &writer);
    };
  }

  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(o.seed);
  const SearchResult result = optimize_latents(scorer, search, rng);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  {
    std::ofstream trace(o.trace);
    if (!trace) throw ConfigError("cannot write trace file '" + o.trace + "'");
    write_search_trace(trace, result.trace);
  }
  std::cout << std::setprecision(10) << "best latent";
  for (Eigen::Index i = 0; i < result.best.size(); ++i) std::cout << ' ' << result.best[i];
  std::cout << "\nscore " << result.score << "\nepisodes " << result.episodes << "\nseconds " << seconds
            << "\ntrace " << o.trace << '\n';
  if (!o.replay.empty()) {
    std::ofstream out(o.replay);
    record(result.best, out);
    std::cout << "replay " << o.replay << '\n';
  }
  return 0;
}

struct EvalOptions {
  std::vector<std::string> checkpoints;
  std::string protocol;
  std::string seeds = "1,2,3";
  int games = 1000;
  int generations = 100;
  int episodes = 0;
  int family = 32;
  std::string out = "results.csv";
};

void require_env(const Checkpoint& c, const std::string& env, const std::string& protocol) {
  const std::string have = c.metadata.at("run").at("env").get<std::string>();
  if (have != env) {
    throw ConfigError("protocol '" + protocol + "' needs a " + env + " checkpoint, got a " + have + " one");
  }
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double std_of(const std::vector<double>& v) {
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return v.empty() ? 0.0 : std::sqrt(s / static_cast<double>(v.size()));
}

int cmd_eval(const EvalOptions& o) {
  const std::vector<std::uint64_t> seeds = parse_seeds(o.seeds);
  std::vector<Checkpoint> ckpts;
  for (const auto& path : o.checkpoints) ckpts.push_back(load_checkpoint(std::filesystem::path(path)));
  std::vector<ResultRow> rows;
  std::ostringstream summary;
  summary << std::fixed << std::setprecision(3);

  if (o.protocol == "specialization") {
    for (const auto& c : ckpts) {
      require_env(c, "farmworld", o.protocol);
      const auto fc = c.metadata.at("env").get<FarmworldConfig>();
      const int episodes = o.episodes > 0 ? o.episodes : c.metadata.at("eval").at("episodes").get<int>();
      std::vector<double> spec, reward;
      for (auto seed : seeds) {
        const FarmEvaluation e = evaluate_farmworld(c.generator, fc, episodes, seed);
        rows.push_back({method_label(c.metadata), seed, "specialization", e.mean_specialization});
        rows.push_back({method_label(c.metadata), seed, "mean_episode_reward", e.mean_episode_reward});
        rows.push_back({method_label(c.metadata), seed, "blunders", static_cast<double>(e.blunders)});
        spec.push_back(e.mean_specialization);
        reward.push_back(e.mean_episode_reward);
      }
      summary << method_label(c.metadata) << "  specialization " << mean_of(spec) << " +- " << std_of(spec)
              << "  reward " << mean_of(reward) << " +- " << std_of(reward) << '\n';
    }
  } else if (o.protocol == "ablations") {
    for (const auto& c : ckpts) {
      require_env(c, "farmworld", o.protocol);
      SearchConfig search;
      search.generations = o.generations;
      search.latent_dim = c.generator.config().latent_dim;
      search.episodes_per_latent = o.episodes > 0 ? o.episodes : 1;
      const std::vector<Ablation> ablations = all_ablations();
      const auto table = ablation_sweep(c.generator, ablations, search, seeds,
                                        c.metadata.at("eval").at("eval_episodes").get<int>());
      for (const auto& row : table) {
        for (std::size_t s = 0; s < seeds.size(); ++s) {
          rows.push_back({method_label(c.metadata), seeds[s], "final_health:" + row.ablation, row.per_seed[s]});
        }
        summary << method_label(c.metadata) << "  " << std::setw(16) << row.ablation << "  final health "
                << row.mean_final_health << " +- " << row.std_final_health << "  (initial " << row.initial_health
                << ")\n";
      }
    }
  } else if (o.protocol == "bots") {
    for (const auto& c : ckpts) {
      require_env(c, "soccer", o.protocol);
      SearchConfig search;
      search.generations = o.generations;
      search.latent_dim = c.generator.config().latent_dim;
      search.episodes_per_latent =
          o.episodes > 0 ? o.episodes : c.metadata.at("search").at("episodes_per_latent").get<int>();
      const auto base = c.metadata.at("env").get<SoccerConfig>();
      std::map<std::string, std::vector<double>> per_bot;
      for (auto seed : seeds) {
        for (const auto& r : bot_gauntlet(c.generator, all_bots(), o.games, search, seed, base)) {
          const std::string bot(to_string(r.bot.kind));
          rows.push_back({method_label(c.metadata), seed, bot + ":wins_minus_losses", static_cast<double>(r.score.score())});
          per_bot[bot].push_back(r.score.score());
        }
      }
      for (const Bot& b : all_bots()) {
        const auto& v = per_bot[std::string(to_string(b.kind))];
        summary << method_label(c.metadata) << "  " << std::setw(10) << to_string(b.kind) << "  wins-losses "
                << mean_of(v) << " +- " << std_of(v) << '\n';
      }
    }
  } else if (o.protocol == "round_robin") {
    if (ckpts.size() < 2) throw ConfigError("round_robin needs at least two checkpoints");
    std::vector<const PolicyGenerator*> gens;
    for (const auto& c : ckpts) {
      require_env(c, "soccer", o.protocol);
      gens.push_back(&c.generator);
    }
    RoundRobinConfig rr;
    rr.search.generations = o.generations;
    rr.search.latent_dim = gens.front()->config().latent_dim;
    rr.games = o.games;
    rr.family_size = o.family;
    rr.soccer = ckpts.front().metadata.at("env").get<SoccerConfig>();
    const auto n = static_cast<Eigen::Index>(gens.size());
    Matrix total = Matrix::Zero(n, n);
    int violations = 0;
    for (auto seed : seeds) {
      const Tournament t = tournament(gens, rr, seed);
      total += t.matrix;
      violations += t.zero_sum_violations;
      for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
          rows.push_back({method_label(ckpts[static_cast<std::size_t>(i)].metadata), seed,
                          "vs:" + std::to_string(j) + ":" + method_label(ckpts[static_cast<std::size_t>(j)].metadata),
                          t.matrix(i, j)});
        }
      }
    }
    total /= static_cast<double>(seeds.size());
    for (Eigen::Index i = 0; i < n; ++i) {
      summary << std::setw(16) << method_label(ckpts[static_cast<std::size_t>(i)].metadata);
      for (Eigen::Index j = 0; j < n; ++j) summary << ' ' << std::setw(9) << total(i, j);
      summary << '\n';
    }
    summary << "zero-sum violations " << violations << '\n';
  } else {
    throw ConfigError("unknown protocol '" + o.protocol + "'");
  }
  std::ofstream out(o.out);
  if (!out) throw ConfigError("cannot write results file '" + o.out + "'");
  write_results(out, rows);
  std::cout << summary.str() << "results " << o.out << '\n';
  return 0;
}

int cmd_replay(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read replay log '" + path + "'");
  const ReplayLog log = read_replay(in);
  if (log.empty) return 0;
  const ReplayOutcome outcome = replay(log);
  for (const auto& frame : outcome.frames) std::cout << frame << '\n';
  for (const auto& r : log.results) std::cout << "result " << r.dump() << '\n';
  if (!outcome.rewards_match) throw IntegrityError("replay: rewards differ from the log");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Diverse policy generators: train, adapt, eval, replay"};
  app.require_subcommand(1);

  std::string config_path, train_out;
  std::vector<std::string> overrides;
  bool quiet = false;
  auto* train = app.add_subcommand("train", "Train a policy generator from a config file or run manifest");
  train->add_option("config", config_path, "Config file (or manifest.json of an earlier run)")->required();
  train->add_option("--set", overrides, "Override a config key: section.key=value");
  train->add_option("--out", train_out, "Run directory (default: a new directory under $ADAP_RUN_ROOT)");
  train->add_flag("--quiet", quiet, "No per-iteration progress");

  AdaptOptions ao;
  auto* adapt = app.add_subcommand("adapt", "Search the latent space of a frozen checkpoint");
  adapt->add_option("checkpoint", ao.checkpoint)->required();
  adapt->add_option("--env", ao.env, "Environment (default: the training environment)");
  adapt->add_option("--ablation", ao.ablation, "Farmworld ablation name");
  adapt->add_option("--bot", ao.bot, "Soccer opponent bot")->capture_default_str();
  adapt->add_option("-g,--generations", ao.generations, "Search generations")->capture_default_str();
  adapt->add_option("--episodes", ao.episodes, "Episodes per latent (default: from the checkpoint config)");
  adapt->add_option("--seed", ao.seed)->capture_default_str();
  adapt->add_option("--trace", ao.trace, "Search trace CSV")->capture_default_str();
  adapt->add_option("--replay", ao.replay, "Record one episode with the chosen latent");

  EvalOptions eo;
  auto* eval = app.add_subcommand("eval", "Run an evaluation protocol over checkpoints");
  eval->add_option("checkpoints", eo.checkpoints)->required();
  eval->add_option("--protocol", eo.protocol)
      ->required()
      ->check(CLI::IsMember({"specialization", "ablations", "bots", "round_robin"}));
  eval->add_option("--seeds", eo.seeds)->capture_default_str();
  eval->add_option("--games", eo.games)->capture_default_str();
  eval->add_option("-g,--generations", eo.generations)->capture_default_str();
  eval->add_option("--episodes", eo.episodes, "Episodes per latent / evaluation episodes");
  eval->add_option("--family", eo.family, "Latent panel size for round_robin")->capture_default_str();
  eval->add_option("--out", eo.out)->capture_default_str();

  std::string replay_path;
  auto* rep = app.add_subcommand("replay", "Render a replay log tick by tick");
  rep->add_option("log", replay_path)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*train) return cmd_train(config_path, overrides, train_out, quiet);
    if (*adapt) return cmd_adapt(ao);
    if (*eval) return cmd_eval(eo);
    if (*rep) return cmd_replay(replay_path);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return 3;
  } catch (const IntegrityError& e) {
    std::cerr << "integrity error: " << e.what() << '\n';
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
