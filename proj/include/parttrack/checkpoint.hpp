#pragma once

#include <filesystem>

#include "parttrack/config.hpp"
#include "parttrack/model.hpp"

namespace parttrack {

/// Versioned text container: magic line, the full key=value config, training
/// counters and every named parameter as hex-float values (bit-exact).
struct Checkpoint {
  Config config;
  ModelParams<double> params;
  std::uint64_t step = 0;
  double epoch = 0;
  std::uint64_t rng_seed = 0;
  std::uint64_t rng_counter = 0;
};

inline constexpr int kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);

/// Throws DataError on malformed files and ConfigError when parameters do not
/// match the architecture the header describes.
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Also requires the stored architecture keys to equal `expected`.
Checkpoint load_checkpoint(const std::filesystem::path& path, const ModelConfig& expected);

}  // namespace parttrack
