#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "geofuse/labels.hpp"

namespace geofuse {

enum class Split { Train, Test };

std::string_view split_name(Split split);

struct SampleRecord {
  std::filesystem::path image_path;
  std::optional<std::filesystem::path> mask_path;
  ClassLabel label = ClassLabel::WND;
  std::optional<Split> split;

  bool operator==(const SampleRecord&) const = default;
};

/// Ordered sample catalog.
///
/// Paths are stored exactly as written in the source file; `resolve` turns
/// them into filesystem paths relative to `base_dir` (the directory holding
/// the manifest file).
struct Manifest {
  std::vector<SampleRecord> records;
  std::string source_id;
  std::filesystem::path base_dir;

  std::filesystem::path resolve(const std::filesystem::path& p) const {
    return p.is_absolute() || base_dir.empty() ? p : base_dir / p;
  }

  std::size_t size() const { return records.size(); }
  bool empty() const { return records.empty(); }
};

inline constexpr std::string_view kManifestHeader = "image_path,mask_path,label,split";

// Parses manifest text. `source_id` is used in error messages.
Manifest parse_manifest(std::string_view text, std::string source_id = "<memory>");

Manifest load_manifest(const std::filesystem::path& path);

std::string format_manifest(const Manifest& m);

// Writes records with paths re-expressed relative to the new file's directory.
void write_manifest(const Manifest& m, const std::filesystem::path& path);

ClassCounts class_distribution(const Manifest& m);

// floor(fraction * n + 1/2), so 0.3 * 765 = 229.5 gives 230. A small
// tolerance keeps products that land a hair below .5 in binary rounding up.
std::size_t round_half_up(double fraction, std::size_t n);

struct SplitResult {
  Manifest train;
  Manifest test;
};

/// Per-class seeded shuffle; the first round_half_up(test_fraction * n_c)
/// shuffled records of each class go to test. Both outputs keep the input
/// order and carry the matching split tag.
SplitResult stratified_split(const Manifest& m, double test_fraction, std::uint64_t seed);

}  // namespace geofuse
