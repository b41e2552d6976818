#include "geofuse/labels.hpp"

#include <numeric>

#include "geofuse/error.hpp"

namespace geofuse {

namespace {
constexpr std::array<std::string_view, kNumClasses> kCodes = {"WND", "SUN", "BIT", "NG", "WAT"};
constexpr std::array<std::string_view, kNumClasses> kNames = {
    "Wind", "Solar", "Biomass/Coal", "Natural Gas", "Hydroelectric"};
}  // namespace

ClassLabel label_from_index(std::size_t index) {
  if (index >= kNumClasses) throw Error("class index out of range: " + std::to_string(index));
  return static_cast<ClassLabel>(index);
}

std::string_view code(ClassLabel label) { return kCodes[index_of(label)]; }

std::string_view display_name(ClassLabel label) { return kNames[index_of(label)]; }

ClassLabel parse_label(std::string_view text) {
  for (std::size_t i = 0; i < kNumClasses; ++i) {
    if (kCodes[i] == text) return static_cast<ClassLabel>(i);
  }
  throw Error("unknown label code '" + std::string(text) + "'");
}

std::size_t ClassCounts::total() const {
  return std::accumulate(counts.begin(), counts.end(), std::size_t{0});
}

}  // namespace geofuse
