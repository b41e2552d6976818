#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "geofuse/model.hpp"
#include "geofuse/preprocess.hpp"

namespace geofuse {

inline constexpr std::string_view kCheckpointMagic = "GEOFUSE-CKPT-1";

struct NamedArray {
  std::string name;
  int rows = 0;
  int cols = 0;
  std::vector<float> values;

  bool operator==(const NamedArray&) const = default;
};

/// Trained model state plus everything evaluation needs to reproduce the
/// training-time preprocessing.
///
/// File layout: the magic line, then text sections "[config]" (model keys),
/// "[meta]" (seed, steps, channel statistics) and "[params]", where each
/// parameter is a "name rows cols" line followed by rows*cols little-endian
/// float32 values and a newline; "[end]" closes the file.
struct Checkpoint {
  ModelConfig model;
  ChannelStats stats;
  std::uint64_t seed = 0;
  std::uint64_t steps = 0;
  std::vector<NamedArray> params;
};

Checkpoint snapshot(const FusionModel<float>& model, const ChannelStats& stats, std::uint64_t seed,
                    std::uint64_t steps);

// Rebuilds a model and overwrites its parameters; throws on any name or
// shape mismatch.
FusionModel<float> restore(const Checkpoint& ckpt);

std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(const std::string& bytes);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace geofuse
