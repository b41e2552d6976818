#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "geofuse/image.hpp"
#include "geofuse/labels.hpp"
#include "geofuse/rng.hpp"

namespace geofuse {

struct Dims {
  int height = 0;
  int width = 0;

  bool operator==(const Dims&) const = default;
};

enum class MaskSource { File, LandCover, Synthetic };

/// Binary knowledge grid co-registered with an image tile. Every cell is 0 or 1.
class SpatialMask {
 public:
  SpatialMask() = default;
  SpatialMask(Dims dims, MaskSource source, std::uint8_t fill = 0);

  // Throws if any cell is not 0 or 1.
  static SpatialMask from_cells(Dims dims, std::vector<std::uint8_t> cells, MaskSource source);
  static SpatialMask from_tensor(const ImageTensor& t, MaskSource source);

  Dims dims() const { return dims_; }
  int height() const { return dims_.height; }
  int width() const { return dims_.width; }
  MaskSource source() const { return source_; }
  const std::vector<std::uint8_t>& cells() const { return cells_; }

  std::uint8_t at(int y, int x) const { return cells_[static_cast<std::size_t>(y) * dims_.width + x]; }
  void set(int y, int x, bool on) { cells_[static_cast<std::size_t>(y) * dims_.width + x] = on ? 1 : 0; }

  ImageTensor to_tensor() const;

  // Nearest-neighbor resample; binarity is preserved.
  SpatialMask resized(Dims target) const;

  bool operator==(const SpatialMask& o) const { return dims_ == o.dims_ && cells_ == o.cells_; }

 private:
  Dims dims_{};
  MaskSource source_ = MaskSource::File;
  std::vector<std::uint8_t> cells_;
};

// Reads a single-channel 8-bit raster holding only 0 and 255.
SpatialMask load_mask(const std::filesystem::path& path, Dims expected);

// Writes the mask as an 8-bit PNG with values {0, 255}.
void save_mask(const SpatialMask& mask, const std::filesystem::path& path);

double mask_coverage(const SpatialMask& m);

struct LandCoverGrid {
  Dims dims;
  std::vector<int> codes;
  std::map<int, std::string> code_book;

  int at(int y, int x) const { return codes[static_cast<std::size_t>(y) * dims.width + x]; }
  // Throws if a code is missing from the code book.
  void validate() const;
};

// "<code> <name>" per line; '#' starts a comment.
std::map<int, std::string> parse_code_book(const std::string& text);
std::map<int, std::string> load_code_book(const std::filesystem::path& path);

// Single-channel 8- or 16-bit raster of land-cover codes.
LandCoverGrid load_landcover(const std::filesystem::path& raster,
                             const std::map<int, std::string>& code_book);

// Cell is 1 iff its code is in `relevant_codes`, then resized to `expected`.
SpatialMask rasterize_landcover(const LandCoverGrid& lc, const std::set<int>& relevant_codes,
                                Dims expected);

/// Class-distinctive synthetic pattern. The family depends only on the label:
///   WND  3-8 disjoint small discs
///   SUN  a grid of axis-aligned rectangular panels
///   BIT  one large elliptical blob
///   NG   two parallel stripes spanning the tile
///   WAT  one filled half-plane on a random side
SpatialMask synth_mask(ClassLabel label, Rng& rng, Dims dims);

// Number of 4-connected components of on-cells.
int count_components(const SpatialMask& m);

}  // namespace geofuse
