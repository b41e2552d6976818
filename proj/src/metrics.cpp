#include <cmath>
#include "geofuse/metrics.hpp"

#include <cstdio>
#include <numeric>
#include <sstream>

#include "geofuse/error.hpp"

namespace geofuse {

void ConfusionMatrix::add(std::size_t truth, std::size_t predicted) {
  if (truth >= kNumClasses || predicted >= kNumClasses) throw Error("confusion: class index out of range");
  ++counts[truth][predicted];
}

std::size_t ConfusionMatrix::total() const {
  std::size_t n = 0;
  for (const auto& row : counts) n += std::accumulate(row.begin(), row.end(), std::size_t{0});
  return n;
}

std::size_t ConfusionMatrix::trace() const {
  std::size_t n = 0;
  for (std::size_t c = 0; c < kNumClasses; ++c) n += counts[c][c];
  return n;
}

std::size_t ConfusionMatrix::row_sum(std::size_t c) const {
  return std::accumulate(counts[c].begin(), counts[c].end(), std::size_t{0});
}

std::size_t ConfusionMatrix::col_sum(std::size_t c) const {
  std::size_t n = 0;
  for (const auto& row : counts) n += row[c];
  return n;
}

std::size_t EvalReport::total_support() const {
  std::size_t n = 0;
  for (const auto& r : per_class) n += r.support;
  return n;
}

double harmonic_f1(double precision, double recall) {
  const double s = precision + recall;
  return s > 0.0 ? 2.0 * precision * recall / s : 0.0;
}

namespace {

double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

std::optional<MacroScores> macro_of(const std::vector<ClassMetrics>& rows) {
  std::size_t total = 0;
  for (const auto& r : rows) total += r.support;
  if (total == 0) return std::nullopt;
  MacroScores m;
  for (const auto& r : rows) {
    m.precision += r.precision;
    m.recall += r.recall;
    m.f1 += r.f1;
  }
  const auto n = static_cast<double>(rows.size());
  m.precision /= n;
  m.recall /= n;
  m.f1 /= n;
  return m;
}

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

// Two decimals, ties away from zero (printf alone rounds exact ties to even).
std::string dp2(double v) { return fmt("%.2f", std::round(v * 100.0) / 100.0); }

std::vector<std::string> tokens(std::string_view line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    const bool split = sep == ' ' ? (ch == ' ' || ch == '\t') : ch == sep;
    if (split) {
      if (sep != ' ' || !cur.empty()) out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  if (sep != ' ' || !cur.empty()) out.push_back(cur);
  return out;
}

double to_double(const std::string& s) {
  std::size_t pos = 0;
  const double v = std::stod(s, &pos);
  if (pos != s.size()) throw Error("report: invalid number '" + s + "'");
  return v;
}

std::size_t to_size(const std::string& s) {
  std::size_t pos = 0;
  const auto v = std::stoull(s, &pos);
  if (pos != s.size()) throw Error("report: invalid count '" + s + "'");
  return static_cast<std::size_t>(v);
}

// Shared by both report parsers: rows keyed by label, any order, missing
// classes filled with zeros.
EvalReport assemble(std::vector<ClassMetrics> found) {
  std::vector<ClassMetrics> rows(kNumClasses);
  for (std::size_t c = 0; c < kNumClasses; ++c) rows[c].label = label_from_index(c);
  for (const auto& r : found) rows[index_of(r.label)] = r;
  return report_from_rows(std::move(rows));
}

}  // namespace

EvalReport per_class_metrics(const ConfusionMatrix& cm) {
  EvalReport r;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    ClassMetrics m;
    m.label = label_from_index(c);
    const std::size_t tp = cm.counts[c][c];
    m.support = cm.row_sum(c);
    m.precision = ratio(tp, cm.col_sum(c));
    m.recall = ratio(tp, m.support);
    m.f1 = harmonic_f1(m.precision, m.recall);
    r.per_class.push_back(m);
  }
  r.macro = macro_of(r.per_class);
  r.confusion = cm;
  return r;
}

EvalReport report_from_rows(std::vector<ClassMetrics> rows) {
  if (rows.size() != kNumClasses) throw Error("report: expected one row per class");
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    if (rows[c].label != label_from_index(c)) throw Error("report: rows must follow WND, SUN, BIT, NG, WAT");
  }
  EvalReport r;
  r.per_class = std::move(rows);
  r.macro = macro_of(r.per_class);
  return r;
}

ComparisonReport compare(const EvalReport& a, const EvalReport& b) {
  if (a.per_class.size() != kNumClasses || b.per_class.size() != kNumClasses) {
    throw Error("compare: reports must cover all five classes");
  }
  ComparisonReport out;
  out.mode_a = a.mode;
  out.mode_b = b.mode;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    const auto& ra = a.per_class[c];
    const auto& rb = b.per_class[c];
    if (ra.support != rb.support) {
      throw Error("compare: supports differ for " + std::string(code(ra.label)) + " (" +
                  std::to_string(ra.support) + " vs " + std::to_string(rb.support) +
                  "); reports come from different test sets");
    }
    ComparisonRow row;
    row.label = ra.label;
    row.delta_precision = rb.precision - ra.precision;
    row.delta_recall = rb.recall - ra.recall;
    row.delta_f1 = rb.f1 - ra.f1;
    row.improved = row.delta_precision > 0 && row.delta_recall > 0 && row.delta_f1 > 0;
    out.rows.push_back(row);
  }
  if (a.macro && b.macro) {
    out.macro_delta = MacroScores{b.macro->precision - a.macro->precision, b.macro->recall - a.macro->recall,
                                  b.macro->f1 - a.macro->f1};
  }
  return out;
}

namespace {
constexpr const char* kTableHeader = "Category  Precision  Recall  F1-Score  Support";
constexpr const char* kRowFormat = "%-8s  %9s  %6s  %8s  %7s\n";

std::string table_row(std::string_view label, const std::string& p, const std::string& r,
                      const std::string& f, const std::string& s) {
  char buf[160];
  std::snprintf(buf, sizeof buf, kRowFormat, std::string(label).c_str(), p.c_str(), r.c_str(), f.c_str(),
                s.c_str());
  return buf;
}
}  // namespace

std::string render_report(const EvalReport& r) {
  std::string out = "# mode=" + std::string(mode_name(r.mode)) + " seed=" + std::to_string(r.seed) + "\n";
  out += kTableHeader;
  out += '\n';
  if (!r.macro) {
    out += table_row("macro", "n/a", "n/a", "n/a", "0");
    return out;
  }
  for (const auto& m : r.per_class) {
    out += table_row(code(m.label), dp2(m.precision), dp2(m.recall), dp2(m.f1),
                     std::to_string(m.support));
  }
  out += table_row("macro", dp2(r.macro->precision), dp2(r.macro->recall),
                   dp2(r.macro->f1), std::to_string(r.total_support()));
  return out;
}

std::string render_report_csv(const EvalReport& r) {
  std::string out = "label,precision,recall,f1,support\n";
  for (const auto& m : r.per_class) {
    out += std::string(code(m.label)) + "," + fmt("%.6f", m.precision) + "," + fmt("%.6f", m.recall) + "," +
           fmt("%.6f", m.f1) + "," + std::to_string(m.support) + "\n";
  }
  if (r.macro) {
    out += "macro," + fmt("%.6f", r.macro->precision) + "," + fmt("%.6f", r.macro->recall) + "," +
           fmt("%.6f", r.macro->f1) + "," + std::to_string(r.total_support()) + "\n";
  } else {
    out += "macro,n/a,n/a,n/a,0\n";
  }
  return out;
}

EvalReport parse_report_table(std::string_view text) {
  std::vector<ClassMetrics> found;
  std::optional<MacroScores> printed_macro;
  std::optional<Mode> mode;
  std::uint64_t seed = 0;
  bool header = false;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("# mode=", 0) == 0) {
      const auto t = tokens(line.substr(2), ' ');
      for (const auto& kv : t) {
        if (kv.rfind("mode=", 0) == 0) mode = parse_mode(kv.substr(5));
        if (kv.rfind("seed=", 0) == 0) seed = std::stoull(kv.substr(5));
      }
      continue;
    }
    const auto t = tokens(line, ' ');
    if (t.empty() || t[0].front() == '#') continue;
    if (t[0] == "Category") {
      header = true;
      continue;
    }
    if (t[0] == "macro") {
      if (t.size() >= 4 && t[1] != "n/a") printed_macro = MacroScores{to_double(t[1]), to_double(t[2]), to_double(t[3])};
      continue;
    }
    if (t.size() != 5) throw Error("report table: expected 5 columns in '" + line + "'");
    ClassMetrics m;
    m.label = parse_label(t[0]);
    m.precision = to_double(t[1]);
    m.recall = to_double(t[2]);
    m.f1 = to_double(t[3]);
    m.support = to_size(t[4]);
    found.push_back(m);
  }
  if (!header) throw Error("report table: missing header");
  auto r = assemble(std::move(found));
  // The printed macro row was computed before rounding; keep it.
  if (printed_macro && r.macro) r.macro = printed_macro;
  if (mode) r.mode = *mode;
  r.seed = seed;
  return r;
}

EvalReport parse_report_csv(std::string_view text) {
  std::vector<ClassMetrics> found;
  std::optional<MacroScores> printed_macro;
  std::istringstream in{std::string(text)};
  std::string line;
  bool header = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    if (!header) {
      if (line != "label,precision,recall,f1,support") throw Error("report csv: unexpected header '" + line + "'");
      header = true;
      continue;
    }
    const auto t = tokens(line, ',');
    if (t.size() != 5) throw Error("report csv: expected 5 fields in '" + line + "'");
    if (t[0] == "macro") {
      if (t[1] != "n/a") printed_macro = MacroScores{to_double(t[1]), to_double(t[2]), to_double(t[3])};
      continue;
    }
    ClassMetrics m;
    m.label = parse_label(t[0]);
    m.precision = to_double(t[1]);
    m.recall = to_double(t[2]);
    m.f1 = to_double(t[3]);
    m.support = to_size(t[4]);
    found.push_back(m);
  }
  if (!header) throw Error("report csv: missing header");
  auto r = assemble(std::move(found));
  if (printed_macro && r.macro) r.macro = printed_macro;
  return r;
}

std::string render_confusion_csv(const ConfusionMatrix& cm) {
  std::string out = "true\\pred";
  for (auto l : kAllLabels) out += "," + std::string(code(l));
  out += '\n';
  for (std::size_t r = 0; r < kNumClasses; ++r) {
    out += code(label_from_index(r));
    for (std::size_t c = 0; c < kNumClasses; ++c) out += "," + std::to_string(cm.counts[r][c]);
    out += '\n';
  }
  return out;
}

std::string render_comparison_csv(const ComparisonReport& c) {
  std::string out = "label,delta_p,delta_r,delta_f1\n";
  for (const auto& r : c.rows) {
    out += std::string(code(r.label)) + "," + fmt("%+.6f", r.delta_precision) + "," + fmt("%+.6f", r.delta_recall) +
           "," + fmt("%+.6f", r.delta_f1) + "\n";
  }
  if (c.macro_delta) {
    out += "macro," + fmt("%+.6f", c.macro_delta->precision) + "," + fmt("%+.6f", c.macro_delta->recall) + "," +
           fmt("%+.6f", c.macro_delta->f1) + "\n";
  } else {
    out += "macro,n/a,n/a,n/a\n";
  }
  return out;
}

std::string render_comparison(const ComparisonReport& c) {
  std::string out = "# " + std::string(mode_name(c.mode_b)) + " minus " + std::string(mode_name(c.mode_a)) + "\n";
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-8s  %9s  %9s  %9s  %s\n", "Category", "dPrec", "dRecall", "dF1", "Improved");
  out += buf;
  for (const auto& r : c.rows) {
    std::snprintf(buf, sizeof buf, "%-8s  %+9.3f  %+9.3f  %+9.3f  %s\n", std::string(code(r.label)).c_str(),
                  r.delta_precision, r.delta_recall, r.delta_f1, r.improved ? "yes" : "no");
    out += buf;
  }
  if (c.macro_delta) {
    std::snprintf(buf, sizeof buf, "%-8s  %+9.3f  %+9.3f  %+9.3f\n", "macro", c.macro_delta->precision,
                  c.macro_delta->recall, c.macro_delta->f1);
    out += buf;
  }
  return out;
}

}  // namespace geofuse
