#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <string_view>

namespace geofuse {

// The five power plant categories. Indices are fixed and used as class ids.
enum class ClassLabel : int { WND = 0, SUN = 1, BIT = 2, NG = 3, WAT = 4 };

inline constexpr std::size_t kNumClasses = 5;

inline constexpr std::array<ClassLabel, kNumClasses> kAllLabels = {
    ClassLabel::WND, ClassLabel::SUN, ClassLabel::BIT, ClassLabel::NG, ClassLabel::WAT};

constexpr std::size_t index_of(ClassLabel label) { return static_cast<std::size_t>(label); }

ClassLabel label_from_index(std::size_t index);

std::string_view code(ClassLabel label);
std::string_view display_name(ClassLabel label);

// Parses a code such as "NG". Throws Error for anything outside the five codes.
ClassLabel parse_label(std::string_view text);

// Per-class integer counts indexed by ClassLabel.
struct ClassCounts {
  std::array<std::size_t, kNumClasses> counts{};

  std::size_t& operator[](ClassLabel label) { return counts[index_of(label)]; }
  std::size_t operator[](ClassLabel label) const { return counts[index_of(label)]; }
  std::size_t total() const;

  bool operator==(const ClassCounts&) const = default;
};

}  // namespace geofuse
