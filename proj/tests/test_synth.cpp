#include <doctest.h>

#include "geofuse/error.hpp"
#include "geofuse/image.hpp"
#include "geofuse/synth.hpp"
#include "support.hpp"

using namespace geofuse;

TEST_CASE("synthetic samples are deterministic and label specific") {
  SynthConfig cfg;
  cfg.size = 48;
  cfg.seed = 3;
  const auto a = synth_sample(cfg, ClassLabel::NG, 5);
  const auto b = synth_sample(cfg, ClassLabel::NG, 5);
  CHECK(a.image == b.image);
  CHECK(a.mask == b.mask);
  CHECK(a.label == ClassLabel::NG);
  CHECK_FALSE(synth_sample(cfg, ClassLabel::NG, 6).image == a.image);
  cfg.seed = 4;
  CHECK_FALSE(synth_sample(cfg, ClassLabel::NG, 5).image == a.image);
}

TEST_CASE("synthetic images are 8-bit quantized RGB in range") {
  SynthConfig cfg;
  cfg.size = 32;
  for (auto l : kAllLabels) {
    const auto s = synth_sample(cfg, l, 0);
    CHECK(s.image.channels == 3);
    CHECK(s.image.height == 32);
    CHECK(s.mask.dims() == Dims{32, 32});
    for (float v : s.image.data) {
      CHECK(v >= 0.0f);
      CHECK(v <= 1.0f);
      CHECK(std::abs(v * 255.0f - std::round(v * 255.0f)) < 1e-3f);
    }
  }
}

TEST_CASE("corpus is class major and uniform") {
  SynthConfig cfg;
  cfg.per_class = 4;
  cfg.size = 32;
  const auto c = synth_corpus(cfg);
  REQUIRE(c.size() == 20);
  for (std::size_t i = 0; i < c.size(); ++i) CHECK(c[i].label == label_from_index(i / 4));
  cfg.per_class = -1;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg.per_class = 1;
  cfg.size = 4;
  CHECK_THROWS_AS(cfg.validate(), Error);
}

TEST_CASE("written corpus re-ingests cleanly") {
  testing::TempDir dir("synth");
  SynthConfig cfg;
  cfg.per_class = 3;
  cfg.size = 32;
  cfg.seed = 8;
  const auto m = write_synth_corpus(cfg, dir.path());
  CHECK(m.size() == 15);
  const auto loaded = load_manifest(dir / "manifest.csv");
  CHECK(loaded.size() == 15);
  for (auto l : kAllLabels) CHECK(class_distribution(loaded)[l] == 3);
  const auto corpus = synth_corpus(cfg);
  for (std::size_t i = 0; i < loaded.size(); ++i) {
    const auto& r = loaded.records[i];
    REQUIRE(r.mask_path);
    CHECK(load_mask(loaded.resolve(*r.mask_path), {32, 32}) == corpus[i].mask);
    CHECK(load_image(loaded.resolve(r.image_path)) == corpus[i].image);
  }
}
