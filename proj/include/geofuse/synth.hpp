#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "geofuse/image.hpp"
#include "geofuse/manifest.hpp"
#include "geofuse/mask.hpp"

namespace geofuse {

/// Synthetic corpus settings.
///
/// Each tile shows the plant pattern (the same geometry as its mask) and a
/// distractor pattern from a different class over textured, noisy ground.
/// `snr` is the plant pattern's contrast relative to the distractor's, so
/// the imagery alone is ambiguous while the mask isolates the plant.
struct SynthConfig {
  int per_class = 100;
  int size = 224;
  double snr = 1.6;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SynthSample {
  ImageTensor image;  // size x size x 3, quantized to 8-bit levels
  SpatialMask mask;
  ClassLabel label = ClassLabel::WND;
};

// Pure function of (config, label, index).
SynthSample synth_sample(const SynthConfig& cfg, ClassLabel label, std::size_t index);

// per_class samples of every class, class-major order.
std::vector<SynthSample> synth_corpus(const SynthConfig& cfg);

// Writes images/, masks/ and manifest.csv under `out_dir`; returns the
// manifest as written.
Manifest write_synth_corpus(const SynthConfig& cfg, const std::filesystem::path& out_dir);

}  // namespace geofuse
