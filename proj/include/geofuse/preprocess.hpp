#pragma once

#include <filesystem>
#include <optional>
#include <utility>
#include <vector>

#include "geofuse/image.hpp"
#include "geofuse/manifest.hpp"
#include "geofuse/rng.hpp"

namespace geofuse {

enum class Interpolation { Bilinear, Nearest };

// Resizes to target x target using half-pixel centers. Bilinear is for
// imagery; nearest keeps binary masks binary.
ImageTensor resize(const ImageTensor& img, int target, Interpolation mode);

inline ImageTensor resize_image(const ImageTensor& img, int target) {
  return resize(img, target, Interpolation::Bilinear);
}
inline ImageTensor resize_mask(const ImageTensor& mask, int target) {
  return resize(mask, target, Interpolation::Nearest);
}

struct ChannelStats {
  std::vector<double> mean;
  std::vector<double> std;

  std::size_t channels() const { return mean.size(); }
};

inline constexpr double kStdEpsilon = 1e-7;

// Streaming per-channel mean and population std (Welford, merged per image).
class StatsAccumulator {
 public:
  explicit StatsAccumulator(int channels);
  void add(const ImageTensor& img);
  ChannelStats finish() const;

 private:
  std::vector<double> count_;
  std::vector<double> mean_;
  std::vector<double> m2_;
};

ChannelStats compute_channel_stats(const std::vector<ImageTensor>& images);

// Loads every image of the manifest, resizes it to `image_size` and
// accumulates statistics. Callers pass the training split only.
ChannelStats compute_channel_stats(const Manifest& train, int image_size);

ImageTensor standardize(const ImageTensor& img, const ChannelStats& stats);
ImageTensor unstandardize(const ImageTensor& img, const ChannelStats& stats);

// "mean_c v v v" / "std_c v v v" text cache.
void save_stats(const ChannelStats& stats, const std::filesystem::path& path);
ChannelStats load_stats(const std::filesystem::path& path);
std::string format_stats(const ChannelStats& stats);
ChannelStats parse_stats(const std::string& text);

struct AugmentationParams {
  bool flip_horizontal = false;
  bool flip_vertical = false;
  double rotation_degrees = 0.0;  // within [-10, 10]

  bool operator==(const AugmentationParams&) const = default;
};

inline constexpr double kMaxRotationDegrees = 10.0;

AugmentationParams sample_augmentation(Rng& rng);

/// Applies flips, then a rotation about the image center, identically to the
/// image and (if present) the mask. The image is sampled bilinearly and the
/// mask by nearest neighbor; pixels rotated in from outside the frame are 0.
std::pair<ImageTensor, std::optional<ImageTensor>> augment(const ImageTensor& img,
                                                           const std::optional<ImageTensor>& mask,
                                                           const AugmentationParams& p);

}  // namespace geofuse
