#include "support.hpp"

#include <unistd.h>

#include <atomic>
#include <cmath>
#include <optional>
#include <fstream>
#include <sstream>

#include "geofuse/error.hpp"

namespace fs = std::filesystem;

namespace geofuse::testing {

using nn::Mat;
using nn::RowVec;
using Eigen::Index;

TempDir::TempDir(const std::string& tag) {
  static std::atomic<int> counter{0};
  const auto base = fs::temp_directory_path();
  for (int attempt = 0;; ++attempt) {
    path_ = base / ("geofuse-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    if (fs::create_directories(path_)) break;
    if (attempt > 100) throw Error("cannot create temp dir");
  }
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

std::string read_file(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  if (!f) throw Error("cannot open " + p.string());
  std::stringstream s;
  s << f.rdbuf();
  return s.str();
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary);
  f << text;
}

ImageTensor constant_image(int h, int w, int c, float v) {
  ImageTensor img;
  img.height = h;
  img.width = w;
  img.channels = c;
  img.data.assign(static_cast<std::size_t>(h) * w * c, v);
  return img;
}

ImageTensor random_image(int h, int w, int c, Rng& rng) {
  auto img = constant_image(h, w, c, 0.0f);
  for (auto& v : img.data) v = static_cast<float>(rng.uniform());
  return img;
}

namespace {

EvalReport table(const double rows[5][3]) {
  const auto supports = published_test_supports();
  std::vector<ClassMetrics> out;
  for (auto l : kAllLabels) {
    const auto* r = rows[index_of(l)];
    out.push_back({l, r[0], r[1], r[2], supports[l]});
  }
  return report_from_rows(std::move(out));
}

}  // namespace

EvalReport published_baseline_report() {
  static const double rows[5][3] = {
      {0.89, 0.81, 0.85}, {0.73, 0.88, 0.81}, {0.61, 0.14, 0.25}, {0.75, 0.79, 0.77}, {0.75, 0.81, 0.78}};
  return table(rows);
}

EvalReport published_kgml_report() {
  static const double rows[5][3] = {
      {0.94, 0.85, 0.89}, {0.87, 0.92, 0.88}, {0.81, 0.40, 0.48}, {0.80, 0.82, 0.81}, {0.82, 0.91, 0.87}};
  auto r = table(rows);
  r.mode = Mode::Kgml;
  return r;
}

ClassCounts published_class_counts() {
  ClassCounts c;
  c.counts = {296, 707, 118, 765, 376};
  return c;
}

ClassCounts published_test_supports() {
  ClassCounts c;
  c.counts = {89, 212, 35, 230, 113};
  return c;
}

Manifest manifest_with_counts(const ClassCounts& counts) {
  Manifest m;
  m.source_id = "generated";
  for (auto l : kAllLabels) {
    for (std::size_t i = 0; i < counts[l]; ++i) {
      const std::string stem = std::string(code(l)) + "_" + std::to_string(i);
      m.records.push_back({"img/" + stem + ".png", "mask/" + stem + ".png", l, std::nullopt});
    }
  }
  return m;
}

ModelConfig desk_model(Mode mode) {
  ModelConfig mc;
  mc.mode = mode;
  mc.vit.image_size = 32;
  mc.vit.patch_size = 8;
  mc.vit.embed_dim = 64;
  mc.vit.depth = 2;
  mc.vit.heads = 4;
  mc.vit.mlp_ratio = 2.0;
  mc.reduced_dim = 64;
  return mc;
}

TrainConfig desk_train(Mode mode, std::uint64_t seed) {
  TrainConfig tc;
  tc.mode = mode;
  tc.epochs = 30;
  tc.batch_size = 32;
  tc.learning_rate = 1e-3;
  tc.seed = seed;
  return tc;
}

std::vector<Sample> synth_samples(const SynthConfig& cfg) {
  std::vector<Sample> out;
  for (auto& s : synth_corpus(cfg)) out.push_back({std::move(s.image), std::move(s.mask), s.label});
  return out;
}

namespace {

using Signature = std::vector<std::int64_t>;

// Loss and the activation pattern (ReLU signs, max-pool winners) it was
// computed under. Finite differences are only valid inside one pattern.
struct Probe {
  double loss = 0.0;
  Signature sig;
};

void append_signs(Signature& sig, const Mat<double>& m) {
  for (Index i = 0; i < m.size(); ++i) sig.push_back(m(i) > 0);
}

void record(GradCheckResult& r, const std::string& name, Index i, double analytic, double numeric,
            double tolerance) {
  // Gradients below the floor are compared on an absolute scale.
  constexpr double kFloor = 1e-6;
  const double denom = std::max({std::abs(analytic), std::abs(numeric), kFloor});
  const double rel = std::abs(analytic - numeric) / denom;
  ++r.checked;
  if (!(rel < tolerance)) ++r.failed, ++r.failures_by_param[name];  // NaN: no smooth stencil
  if (!(rel <= r.max_rel_error)) {
    r.max_rel_error = rel;
    std::ostringstream s;
    s << name << "[" << i << "] analytic " << analytic << " numeric " << numeric;
    r.worst = s.str();
  }
}

// Central difference when the pattern is constant over [-d, d]; otherwise a
// second-order one-sided difference on the side that keeps the base pattern
// (the side whose derivative the analytic gradient reports).
template <typename Eval>
std::optional<double> numeric_derivative(Eval eval, double delta) {
  const Probe base = eval(0.0);
  for (double d = delta; d >= delta * 1e-2; d *= 0.1) {
    const Probe p1 = eval(d), m1 = eval(-d);
    const bool plus_ok = p1.sig == base.sig, minus_ok = m1.sig == base.sig;
    if (plus_ok && minus_ok) return (p1.loss - m1.loss) / (2 * d);
    if (plus_ok) {
      const Probe p2 = eval(2 * d);
      if (p2.sig == base.sig) return (-3 * base.loss + 4 * p1.loss - p2.loss) / (2 * d);
    }
    if (minus_ok) {
      const Probe m2 = eval(-2 * d);
      if (m2.sig == base.sig) return (3 * base.loss - 4 * m1.loss + m2.loss) / (2 * d);
    }
  }
  return std::nullopt;
}

}  // namespace

GradCheckResult gradient_check(Mode mode, std::uint64_t seed, double tolerance) {
  ModelConfig mc;
  mc.mode = mode;
  mc.vit.image_size = 32;
  mc.vit.patch_size = 16;
  mc.vit.embed_dim = 8;
  mc.vit.depth = 1;
  mc.vit.heads = 2;
  mc.vit.mlp_ratio = 4.0;
  mc.reduced_dim = 8;
  FusionModel<double> model(mc, seed);

  // Nonzero biases and non-trivial norms keep activations away from the
  // ReLU kink at exactly zero.
  Rng rng(derive_seed(seed, 7));
  for (auto& p : model.params().params()) {
    const auto& n = p.name;
    if (n.ends_with(".bias") || n.ends_with(".beta")) {
      for (Index i = 0; i < p.value.size(); ++i) p.value(i) = rng.uniform(-0.1, 0.1);
    } else if (n.ends_with(".gamma")) {
      for (Index i = 0; i < p.value.size(); ++i) p.value(i) = 1.0 + rng.uniform(-0.2, 0.2);
    } else if (n == "vit.cls_token" || n == "vit.pos_embed") {
      for (Index i = 0; i < p.value.size(); ++i) p.value(i) = rng.normal(0.0, 0.1);
    }
  }

  const int s = mc.vit.image_size;
  auto img = random_image(s, s, 3, rng);
  ImageTensor mask = constant_image(s, s, 1, 0.0f);
  for (auto& v : mask.data) v = rng.bernoulli(0.3) ? 1.0f : 0.0f;
  const auto input = make_input<double>(img, std::optional<ImageTensor>(mask));
  const int target = 2;

  model.params().zero_grad();
  model.accumulate_gradients(input, target, 1.0);

  auto& store = model.params();
  const auto* fc1_w = store.find("head.fc1.weight");
  const auto* fc1_b = store.find("head.fc1.bias");
  auto head_probe = [&](const RowVec<double>& z, Signature sig) {
    const Mat<double> hidden = (z * fc1_w->value.transpose()) + fc1_b->value;
    append_signs(sig, hidden);
    return Probe{nn::cross_entropy<double>(model.classify(z), target, 1.0, nullptr), std::move(sig)};
  };

  typename FusionModel<double>::Cache cache;
  const auto base = model.features(input, &cache);
  const auto fusion = mc.fusion();
  const int ph = s / 2;
  const Index dv = base.h_vit.size();
  const Mat<double> cols2 = nn::im2col<double>(cache.cnn.pooled, ph, ph, 3);
  const Mat<double>& pre2 = cache.cnn.pre2;

  // Stage evaluators; each assumes the perturbed parameter is already set.
  auto eval_full = [&] {
    typename FusionModel<double>::Cache c;
    const auto f = model.features(input, &c);
    Signature sig;
    append_signs(sig, c.cnn.act1);
    for (Index a : c.cnn.pool.argmax) sig.push_back(a);
    append_signs(sig, c.cnn.pre2);
    return head_probe(f.z, std::move(sig));
  };
  auto eval_vit = [&] {
    const auto out = model.vit().forward(input.image, s, s, nullptr);
    return head_probe(fuse(out.h_vit, base.h_cnn, fusion), {});
  };
  auto eval_head = [&] { return head_probe(base.z, {}); };
  // conv2 is linear in its parameters and output channel o only affects
  // h_cnn[o]: rebuild that one entry from a shifted pre-activation row.
  auto eval_conv2_row = [&](Index o, const Mat<double>& row) {
    const Mat<double> pooled = nn::AdaptiveAvgPool<double>::forward(nn::relu<double>(row), ph, ph, 14);
    RowVec<double> z = base.z;
    z(dv + o) = pooled.mean();
    Signature sig;
    append_signs(sig, row);
    return head_probe(z, std::move(sig));
  };

  const double delta = 1e-5;
  GradCheckResult result;
  for (auto& p : store.params()) {
    const auto& name = p.name;
    if (name == "cnn.conv2.weight" || name == "cnn.conv2.bias") {
      const bool is_bias = name.ends_with(".bias");
      for (Index o = 0; o < pre2.rows(); ++o) {
        const Mat<double> row0 = pre2.row(o);
        const Index cols = is_bias ? 1 : p.value.cols();
        for (Index j = 0; j < cols; ++j) {
          auto eval = [&](double t) {
            if (is_bias) return eval_conv2_row(o, (row0.array() + t).matrix());
            return eval_conv2_row(o, row0 + t * cols2.row(j));
          };
          const auto numeric = numeric_derivative(eval, delta);
          const Index flat = is_bias ? o : o * p.value.cols() + j;
          const double analytic = is_bias ? p.grad(0, o) : p.grad(o, j);
          record(result, name, flat, analytic, numeric.value_or(std::nan("")), tolerance);
        }
      }
      continue;
    }
    const bool head = name.starts_with("head.");
    const bool vit = name.starts_with("vit.");
    for (Index i = 0; i < p.value.size(); ++i) {
      const Index r = i / p.value.cols(), c = i % p.value.cols();
      const double orig = p.value(r, c);
      auto eval = [&](double t) {
        p.value(r, c) = orig + t;
        const Probe out = head ? eval_head() : vit ? eval_vit() : eval_full();
        p.value(r, c) = orig;
        return out;
      };
      const auto numeric = numeric_derivative(eval, delta);
      record(result, name, i, p.grad(r, c), numeric.value_or(std::nan("")), tolerance);
    }
  }
  return result;
}

}  // namespace geofuse::testing
