#pragma once

#include "adap/optimizer.hpp"
#include "adap/policy.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>

namespace adap {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  PolicyGenerator generator;
  AdamState optimizer;
  std::int64_t iteration = 0;
  std::int64_t agent_steps = 0;
  nlohmann::json metadata;  // resolved run config
};

// Binary layout, all integers and reals little-endian:
//   "ADAPCKPT", u32 version, u32 architecture, u32 k, d, hidden_layers,
//   observation_size, action_count, policy_activation, value_activation,
//   u32 tensor count, (u32 rows, u32 cols) per tensor, f64 weights,
//   u32 moment count, f64 first moments, f64 second moments, i64 adam step,
//   i64 iteration, i64 agent_steps, u32 metadata length, metadata JSON,
//   u32 CRC-32 of everything before it.
void save_checkpoint(std::ostream& out, const Checkpoint& ckpt);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);

// Throws IntegrityError on a bad magic, version, shape or checksum.
Checkpoint load_checkpoint(std::istream& in);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace adap
