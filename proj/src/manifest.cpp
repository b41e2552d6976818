#include "geofuse/manifest.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "geofuse/error.hpp"
#include "geofuse/rng.hpp"

namespace geofuse {

namespace fs = std::filesystem;

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

std::string row_error(const std::string& source, std::size_t line_no, const std::string& what) {
  return source + ": row " + std::to_string(line_no) + ": " + what;
}

}  // namespace

std::string_view split_name(Split split) { return split == Split::Train ? "train" : "test"; }

Manifest parse_manifest(std::string_view text, std::string source_id) {
  Manifest m;
  m.source_id = std::move(source_id);
  std::set<std::string> seen;
  bool header_seen = false;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    const auto raw = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    const auto line = trim(raw);
    if (line.empty() || line.front() == '#') {
      if (end == text.size()) break;
      continue;
    }
    if (!header_seen) {
      if (line != kManifestHeader) {
        throw Error(row_error(m.source_id, line_no,
                              "expected header '" + std::string(kManifestHeader) + "'"));
      }
      header_seen = true;
      continue;
    }
    const auto fields = split_commas(line);
    if (fields.size() != 4) {
      throw Error(row_error(m.source_id, line_no,
                            "expected 4 fields, found " + std::to_string(fields.size())));
    }
    SampleRecord rec;
    const auto image = trim(fields[0]);
    if (image.empty()) throw Error(row_error(m.source_id, line_no, "empty image_path"));
    rec.image_path = fs::path(std::string(image));
    if (const auto mask = trim(fields[1]); !mask.empty()) rec.mask_path = fs::path(std::string(mask));
    try {
      rec.label = parse_label(trim(fields[2]));
    } catch (const Error& e) {
      throw Error(row_error(m.source_id, line_no, e.what()));
    }
    if (const auto split = trim(fields[3]); !split.empty()) {
      if (split == "train") {
        rec.split = Split::Train;
      } else if (split == "test") {
        rec.split = Split::Test;
      } else {
        throw Error(row_error(m.source_id, line_no, "unknown split '" + std::string(split) + "'"));
      }
    }
    const auto key = rec.image_path.lexically_normal().generic_string();
    if (!seen.insert(key).second) {
      throw Error(row_error(m.source_id, line_no, "duplicate image_path '" + key + "'"));
    }
    m.records.push_back(std::move(rec));
    if (end == text.size()) break;
  }
  if (!header_seen) throw Error(m.source_id + ": missing header line");
  return m;
}

Manifest load_manifest(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open manifest: " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  auto m = parse_manifest(buf.str(), path.string());
  m.base_dir = path.parent_path();
  return m;
}

std::string format_manifest(const Manifest& m) {
  std::string out(kManifestHeader);
  out += '\n';
  for (const auto& r : m.records) {
    out += r.image_path.generic_string();
    out += ',';
    if (r.mask_path) out += r.mask_path->generic_string();
    out += ',';
    out += code(r.label);
    out += ',';
    if (r.split) out += split_name(*r.split);
    out += '\n';
  }
  return out;
}

void write_manifest(const Manifest& m, const fs::path& path) {
  const auto dir = path.parent_path();
  const auto rebase = [&](const fs::path& p) -> fs::path {
    if (p.is_absolute()) return p;
    const auto full = m.resolve(p);
    if (m.base_dir == dir) return p;
    return fs::relative(fs::absolute(full), fs::absolute(dir.empty() ? fs::path(".") : dir));
  };
  Manifest out = m;
  for (auto& r : out.records) {
    r.image_path = rebase(r.image_path);
    if (r.mask_path) r.mask_path = rebase(*r.mask_path);
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write manifest: " + path.string());
  f << format_manifest(out);
  if (!f) throw Error("write failed: " + path.string());
}

ClassCounts class_distribution(const Manifest& m) {
  ClassCounts c;
  for (const auto& r : m.records) ++c[r.label];
  return c;
}

std::size_t round_half_up(double fraction, std::size_t n) {
  const double x = fraction * static_cast<double>(n);
  return static_cast<std::size_t>(std::floor(x + 0.5 + 1e-9));
}

SplitResult stratified_split(const Manifest& m, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction >= 0.0 && test_fraction <= 1.0)) {
    throw Error("test_fraction must lie in [0, 1]");
  }
  std::array<std::vector<std::size_t>, kNumClasses> by_class;
  for (std::size_t i = 0; i < m.records.size(); ++i) {
    by_class[index_of(m.records[i].label)].push_back(i);
  }
  std::vector<bool> is_test(m.records.size(), false);
  const Rng root(seed);
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    auto& idx = by_class[c];
    Rng rng = root.split(c);
    shuffle(idx.begin(), idx.end(), rng);
    const auto k = std::min(round_half_up(test_fraction, idx.size()), idx.size());
    for (std::size_t j = 0; j < k; ++j) is_test[idx[j]] = true;
  }
  SplitResult out;
  out.train.source_id = m.source_id + "#train";
  out.test.source_id = m.source_id + "#test";
  out.train.base_dir = out.test.base_dir = m.base_dir;
  for (std::size_t i = 0; i < m.records.size(); ++i) {
    auto rec = m.records[i];
    rec.split = is_test[i] ? Split::Test : Split::Train;
    (is_test[i] ? out.test : out.train).records.push_back(std::move(rec));
  }
  return out;
}

}  // namespace geofuse
