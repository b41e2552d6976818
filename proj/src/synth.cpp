#include "geofuse/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "geofuse/error.hpp"

namespace geofuse {

namespace fs = std::filesystem;

void SynthConfig::validate() const {
  if (per_class < 0) throw Error("synth: per_class must be non-negative");
  if (size < 8) throw Error("synth: size must be at least 8");
  if (!(snr > 0)) throw Error("synth: snr must be positive");
}

namespace {
constexpr double kPatternAmplitude = 0.15;
constexpr double kTextureAmplitude = 0.04;
constexpr double kPixelNoise = 0.06;
}  // namespace

SynthSample synth_sample(const SynthConfig& cfg, ClassLabel label, std::size_t index) {
  cfg.validate();
  const Rng root(derive_seed(derive_seed(cfg.seed, index_of(label)), index));
  const Dims dims{cfg.size, cfg.size};
  Rng mask_rng = root.split(1);
  Rng distractor_rng = root.split(2);
  Rng rng = root.split(3);

  SynthSample s;
  s.label = label;
  s.mask = synth_mask(label, mask_rng, dims);
  const auto other = label_from_index((index_of(label) + 1 + static_cast<std::size_t>(rng.uniform_int(0, 3))) %
                                      kNumClasses);
  const SpatialMask distractor = synth_mask(other, distractor_rng, dims);

  double base[3], tint[3], dtint[3];
  for (int c = 0; c < 3; ++c) {
    base[c] = rng.uniform(0.35, 0.55);
    tint[c] = rng.uniform(0.6, 1.0);
    dtint[c] = rng.uniform(0.6, 1.0);
  }
  struct Wave {
    double kx, ky, phase;
  } waves[2];
  for (auto& w : waves) {
    const double freq = rng.uniform(1.0, 3.0) * 2.0 * std::numbers::pi / cfg.size;
    const double angle = rng.uniform(0.0, std::numbers::pi);
    w = {freq * std::cos(angle), freq * std::sin(angle), rng.uniform(0.0, 2.0 * std::numbers::pi)};
  }

  s.image = ImageTensor(cfg.size, cfg.size, 3);
  for (int y = 0; y < cfg.size; ++y) {
    for (int x = 0; x < cfg.size; ++x) {
      double texture = 0.0;
      for (const auto& w : waves) texture += std::sin(w.kx * x + w.ky * y + w.phase);
      texture *= kTextureAmplitude / 2.0;
      const double plant = s.mask.at(y, x) ? kPatternAmplitude * cfg.snr : 0.0;
      const double clutter = distractor.at(y, x) ? kPatternAmplitude : 0.0;
      for (int c = 0; c < 3; ++c) {
        const double v = base[c] + texture + plant * tint[c] + clutter * dtint[c] + rng.normal(0.0, kPixelNoise);
        // Quantize so in-memory samples match what a PNG round trip yields.
        s.image.at(y, x, c) = static_cast<float>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)) / 255.0f;
      }
    }
  }
  return s;
}

std::vector<SynthSample> synth_corpus(const SynthConfig& cfg) {
  cfg.validate();
  std::vector<SynthSample> out;
  out.reserve(static_cast<std::size_t>(cfg.per_class) * kNumClasses);
  for (auto label : kAllLabels) {
    for (int i = 0; i < cfg.per_class; ++i) out.push_back(synth_sample(cfg, label, static_cast<std::size_t>(i)));
  }
  return out;
}

Manifest write_synth_corpus(const SynthConfig& cfg, const fs::path& out_dir) {
  cfg.validate();
  std::error_code ec;
  fs::create_directories(out_dir / "images", ec);
  fs::create_directories(out_dir / "masks", ec);
  if (ec || !fs::is_directory(out_dir / "images") || !fs::is_directory(out_dir / "masks")) {
    throw Error("synth: cannot create output directory " + out_dir.string());
  }
  Manifest m;
  m.source_id = (out_dir / "manifest.csv").string();
  m.base_dir = out_dir;
  for (auto label : kAllLabels) {
    for (int i = 0; i < cfg.per_class; ++i) {
      const auto s = synth_sample(cfg, label, static_cast<std::size_t>(i));
      char name[64];
      std::snprintf(name, sizeof name, "%s_%05d.png", std::string(code(label)).c_str(), i);
      const fs::path image_rel = fs::path("images") / name;
      const fs::path mask_rel = fs::path("masks") / name;
      save_image(s.image, out_dir / image_rel);
      save_mask(s.mask, out_dir / mask_rel);
      m.records.push_back({image_rel, mask_rel, label, std::nullopt});
    }
  }
  write_manifest(m, out_dir / "manifest.csv");
  return m;
}

}  // namespace geofuse
