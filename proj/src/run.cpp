#include "adap/run.hpp"

#include "adap/errors.hpp"

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#ifndef ADAP_VERSION
#define ADAP_VERSION "0.0.0"
#endif

namespace adap {

std::string_view code_version() { return ADAP_VERSION; }

void write_metrics_row(std::ostream& out, const IterationMetrics& m) {
  out << m.iteration << ',' << m.agent_steps << ',' << std::setprecision(17) << m.mean_episode_reward << ','
      << m.l_div << ',' << m.entropy << ',' << m.value_loss << ',' << std::setprecision(6) << m.wall_seconds << '\n';
}

nlohmann::json make_manifest(const ConfigFile& file, const ResolvedConfig& config) {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::ostringstream start;
  start << std::put_time(std::gmtime(&now), "%Y-%m-%dT%H:%M:%SZ");
  return nlohmann::json{{"code_version", code_version()},
                        {"environment", config.run.env},
                        {"start_time", start.str()},
                        {"seed", config.run.seed},
                        {"seeds", config.run.seeds},
                        {"entries", file.entries()},
                        {"config", to_json(config)}};
}

ConfigFile config_from_manifest(const nlohmann::json& manifest) {
  if (!manifest.contains("entries") || !manifest["entries"].is_object()) {
    throw ConfigError("manifest has no 'entries' object");
  }
  ConfigFile file;
  for (const auto& [k, v] : manifest["entries"].items()) file.set(k, v.get<std::string>());
  return file;
}

std::filesystem::path run_root() {
  const char* root = std::getenv("ADAP_RUN_ROOT");
  return root && *root ? std::filesystem::path(root) : std::filesystem::path("runs");
}

std::filesystem::path new_run_directory(const std::filesystem::path& root, const ResolvedConfig& config) {
  const std::string base = config.run.env + "_" + std::string(to_string(config.trainer.method)) + "_seed" +
                           std::to_string(config.run.seed);
  std::filesystem::path dir = root / base;
  for (int i = 1; std::filesystem::exists(dir); ++i) dir = root / (base + "_" + std::to_string(i));
  std::filesystem::create_directories(dir);
  return dir;
}

PolicyGenerator make_generator(const ResolvedConfig& config) {
  Rng rng(derive_seed(config.run.seed, 0));
  return PolicyGenerator(config.generator, rng);
}

Trainer make_trainer(const ResolvedConfig& config) {
  return Trainer(make_generator(config), make_factory(config), config.trainer, config.run.seed);
}

Checkpoint snapshot(const Trainer& trainer, const ResolvedConfig& config) {
  Checkpoint c;
  c.generator = trainer.generator();
  c.optimizer = trainer.optimizer_state();
  c.iteration = trainer.iteration();
  c.agent_steps = trainer.agent_steps();
  c.metadata = to_json(config);
  return c;
}

void train_run(const ConfigFile& file, const ResolvedConfig& config, const std::filesystem::path& dir,
               std::ostream* progress) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream manifest(dir / "manifest.json");
    manifest << make_manifest(file, config).dump(2) << '\n';
  }
  std::ofstream metrics(dir / "metrics.csv");
  metrics << kMetricsHeader << '\n';
  Trainer trainer = make_trainer(config);
  for (int i = 0; i < config.run.iterations; ++i) {
    IterationMetrics m;
    try {
      m = trainer.train_iteration();
    } catch (const NumericError&) {
      save_checkpoint(dir / "latest.bin", snapshot(trainer, config));
      throw;
    }
    write_metrics_row(metrics, m);
    metrics.flush();
    if (progress) {
      *progress << "iter " << m.iteration << " steps " << m.agent_steps << " reward " << m.mean_episode_reward
                << " l_div " << m.l_div << '\n';
    }
    if (m.iteration % config.run.checkpoint_every == 0) {
      save_checkpoint(dir / ("checkpoint_" + std::to_string(m.iteration) + ".bin"), snapshot(trainer, config));
    }
  }
  save_checkpoint(dir / "latest.bin", snapshot(trainer, config));
}

}  // namespace adap
