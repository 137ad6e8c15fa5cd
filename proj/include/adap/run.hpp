#pragma once

#include "adap/checkpoint.hpp"
#include "adap/config.hpp"
#include "adap/trainer.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <iosfwd>
#include <string_view>

namespace adap {

std::string_view code_version();

inline constexpr std::string_view kMetricsHeader =
    "iteration,agent_steps,mean_episode_reward,l_div,entropy,value_loss,wall_seconds";

void write_metrics_row(std::ostream& out, const IterationMetrics& m);

// Snapshot of everything needed to repeat a run: the raw key/value entries,
// the resolved config with every default, seeds, version and start time.
nlohmann::json make_manifest(const ConfigFile& file, const ResolvedConfig& config);

// Rebuilds the key/value entries recorded in a manifest.
ConfigFile config_from_manifest(const nlohmann::json& manifest);

// $ADAP_RUN_ROOT, or ./runs when unset.
std::filesystem::path run_root();

// A fresh directory under `root` named after env, method and seed.
std::filesystem::path new_run_directory(const std::filesystem::path& root, const ResolvedConfig& config);

PolicyGenerator make_generator(const ResolvedConfig& config);
Trainer make_trainer(const ResolvedConfig& config);

Checkpoint snapshot(const Trainer& trainer, const ResolvedConfig& config);

// Trains into `dir`: manifest.json, metrics.csv, checkpoint_<iter>.bin every
// checkpoint_every iterations and latest.bin. On a numeric fault the last
// committed state is checkpointed before the error propagates.
void train_run(const ConfigFile& file, const ResolvedConfig& config, const std::filesystem::path& dir,
               std::ostream* progress = nullptr);

}  // namespace adap
