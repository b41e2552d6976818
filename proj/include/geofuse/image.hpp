#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

namespace geofuse {

/// Dense H x W x C image, row-major with interleaved channels.
struct ImageTensor {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<float> data;

  ImageTensor() = default;
  ImageTensor(int h, int w, int c, float fill = 0.0f);

  std::size_t index(int y, int x, int c) const {
    return (static_cast<std::size_t>(y) * width + x) * channels + c;
  }
  float& at(int y, int x, int c = 0) { return data[index(y, x, c)]; }
  float at(int y, int x, int c = 0) const { return data[index(y, x, c)]; }

  bool empty() const { return data.empty(); }
  std::size_t pixels() const { return static_cast<std::size_t>(height) * width; }

  bool operator==(const ImageTensor&) const = default;
};

// Reads an 8-bit raster as RGB in [0, 1]. Grayscale files are expanded to
// three channels.
ImageTensor load_image(const std::filesystem::path& path);

// Writes an 8-bit PNG; values are clamped to [0, 1] and rounded.
void save_image(const ImageTensor& img, const std::filesystem::path& path);

}  // namespace geofuse
