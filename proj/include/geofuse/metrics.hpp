#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "geofuse/labels.hpp"
#include "geofuse/model.hpp"

namespace geofuse {

// Rows are true classes, columns predicted classes.
struct ConfusionMatrix {
  std::array<std::array<std::size_t, kNumClasses>, kNumClasses> counts{};

  void add(std::size_t truth, std::size_t predicted);
  std::size_t total() const;
  std::size_t trace() const;
  std::size_t row_sum(std::size_t c) const;
  std::size_t col_sum(std::size_t c) const;

  bool operator==(const ConfusionMatrix&) const = default;
};

struct ClassMetrics {
  ClassLabel label = ClassLabel::WND;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;
};

struct MacroScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Per-class table in WND, SUN, BIT, NG, WAT order. Macro scores are the
/// unweighted mean over the five classes and are absent for an empty test
/// set. Reports parsed from files carry no confusion matrix.
struct EvalReport {
  std::vector<ClassMetrics> per_class;
  std::optional<MacroScores> macro;
  std::optional<ConfusionMatrix> confusion;
  Mode mode = Mode::Baseline;
  std::uint64_t seed = 0;

  std::size_t total_support() const;
  const ClassMetrics& row(ClassLabel label) const { return per_class.at(index_of(label)); }
};

// 0/0 ratios are defined as 0.
double harmonic_f1(double precision, double recall);

EvalReport per_class_metrics(const ConfusionMatrix& cm);

// Builds a report from externally supplied rows (e.g. a published table);
// macro scores are recomputed from the rows.
EvalReport report_from_rows(std::vector<ClassMetrics> rows);

struct ComparisonRow {
  ClassLabel label = ClassLabel::WND;
  double delta_precision = 0.0;
  double delta_recall = 0.0;
  double delta_f1 = 0.0;
  bool improved = false;  // all three metrics strictly better in b
};

struct ComparisonReport {
  std::vector<ComparisonRow> rows;
  std::optional<MacroScores> macro_delta;
  Mode mode_a = Mode::Baseline;
  Mode mode_b = Mode::Baseline;
};

// Deltas are b - a. Throws when the per-class supports differ.
ComparisonReport compare(const EvalReport& a, const EvalReport& b);

// Fixed-column table, metrics at two decimals.
std::string render_report(const EvalReport& r);
// "label,precision,recall,f1,support" with a trailing macro row.
std::string render_report_csv(const EvalReport& r);
EvalReport parse_report_table(std::string_view text);
EvalReport parse_report_csv(std::string_view text);

std::string render_confusion_csv(const ConfusionMatrix& cm);

// "label,delta_p,delta_r,delta_f1" with a trailing macro row.
std::string render_comparison_csv(const ComparisonReport& c);
std::string render_comparison(const ComparisonReport& c);

}  // namespace geofuse
