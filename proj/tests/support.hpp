#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "geofuse/metrics.hpp"
#include "geofuse/model.hpp"
#include "geofuse/rng.hpp"
#include "geofuse/synth.hpp"
#include "geofuse/train.hpp"

namespace geofuse::testing {

// Fresh directory under the system temp dir; removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag);
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

std::string read_file(const std::filesystem::path& p);
void write_file(const std::filesystem::path& p, const std::string& text);

ImageTensor constant_image(int h, int w, int c, float v);
ImageTensor random_image(int h, int w, int c, Rng& rng);

// Published per-class rows (precision, recall, F1, support).
EvalReport published_baseline_report();
EvalReport published_kgml_report();

// Class sizes of the published corpus and the supports its test split shows.
ClassCounts published_class_counts();
ClassCounts published_test_supports();
Manifest manifest_with_counts(const ClassCounts& counts);

// Small model used by the single-CPU experiments.
ModelConfig desk_model(Mode mode);
TrainConfig desk_train(Mode mode, std::uint64_t seed);

// Samples straight from the synthetic generator (no disk round trip).
std::vector<Sample> synth_samples(const SynthConfig& cfg);

struct GradCheckResult {
  std::size_t checked = 0;
  std::size_t failed = 0;
  double max_rel_error = 0.0;
  std::string worst;
  std::map<std::string, std::size_t> failures_by_param;
};

// Compares every analytic parameter gradient of a small double-precision
// fused model (image 32, patch 16, D_v 8, depth 1, reduced_dim 8) against
// central differences of the cross-entropy loss.
GradCheckResult gradient_check(Mode mode, std::uint64_t seed, double tolerance);

}  // namespace geofuse::testing
