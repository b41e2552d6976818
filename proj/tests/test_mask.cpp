#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "geofuse/error.hpp"
#include "geofuse/mask.hpp"
#include "support.hpp"

using namespace geofuse;
using geofuse::testing::TempDir;

namespace {

void write_gray(const std::filesystem::path& p, int h, int w, int value) {
  cv::Mat m(h, w, CV_8UC1, cv::Scalar(value));
  REQUIRE(cv::imwrite(p.string(), m));
}

bool binary(const SpatialMask& m) {
  return std::all_of(m.cells().begin(), m.cells().end(), [](auto v) { return v == 0 || v == 1; });
}

}  // namespace

TEST_CASE("load_mask maps 255 to one") {
  TempDir dir("mask");
  write_gray(dir / "full.png", 16, 16, 255);
  const auto m = load_mask(dir / "full.png", {16, 16});
  CHECK(mask_coverage(m) == 1.0);
  CHECK(m.source() == MaskSource::File);
}

TEST_CASE("load_mask rejects non-binary values and names them") {
  TempDir dir("mask");
  cv::Mat m(8, 8, CV_8UC1, cv::Scalar(0));
  m.at<unsigned char>(3, 4) = 128;
  REQUIRE(cv::imwrite((dir / "bad.png").string(), m));
  try {
    load_mask(dir / "bad.png", {8, 8});
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("128") != std::string::npos);
  }
  cv::Mat rgb(8, 8, CV_8UC3, cv::Scalar(0, 0, 0));
  REQUIRE(cv::imwrite((dir / "rgb.png").string(), rgb));
  CHECK_THROWS_AS(load_mask(dir / "rgb.png", {8, 8}), Error);
  CHECK_THROWS_AS(load_mask(dir / "missing.png", {8, 8}), Error);
}

TEST_CASE("load_mask resizes with nearest neighbor") {
  TempDir dir("mask");
  cv::Mat m(100, 100, CV_8UC1, cv::Scalar(0));
  for (int y = 0; y < 100; ++y)
    for (int x = 0; x < 100; ++x)
      if ((x / 7 + y / 5) % 2) m.at<unsigned char>(y, x) = 255;
  REQUIRE(cv::imwrite((dir / "m.png").string(), m));
  const auto mask = load_mask(dir / "m.png", {224, 224});
  CHECK(mask.dims() == Dims{224, 224});
  CHECK(binary(mask));
  CHECK(mask_coverage(mask) > 0.3);
  CHECK(mask_coverage(mask) < 0.7);
}

TEST_CASE("save and load round trip") {
  TempDir dir("mask");
  Rng rng(3);
  const auto m = synth_mask(ClassLabel::SUN, rng, {40, 40});
  save_mask(m, dir / "m.png");
  CHECK(load_mask(dir / "m.png", {40, 40}) == m);
}

TEST_CASE("SpatialMask rejects non-binary cells") {
  CHECK_THROWS_AS(SpatialMask::from_cells({1, 2}, {0, 2}, MaskSource::Synthetic), Error);
  CHECK_THROWS_AS(SpatialMask::from_cells({1, 2}, {0}, MaskSource::Synthetic), Error);
}

TEST_CASE("rasterize land cover") {
  LandCoverGrid lc;
  lc.dims = {4, 4};
  lc.codes = {11, 21, 11, 21, 21, 21, 11, 11, 11, 11, 11, 21, 21, 11, 21, 21};
  lc.code_book = {{11, "Open Water"}, {21, "Developed, Open Space"}, {41, "Deciduous Forest"}};

  CHECK(mask_coverage(rasterize_landcover(lc, {11, 21}, {4, 4})) == 1.0);
  CHECK(mask_coverage(rasterize_landcover(lc, {41}, {4, 4})) == 0.0);

  const auto m = rasterize_landcover(lc, {11}, {4, 4});
  CHECK(m.source() == MaskSource::LandCover);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) CHECK(m.at(y, x) == (lc.at(y, x) == 11 ? 1 : 0));

  const auto big = rasterize_landcover(lc, {11}, {8, 8});
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) CHECK(big.at(y, x) == m.at(y / 2, x / 2));

  CHECK_THROWS_AS(rasterize_landcover(lc, {}, {4, 4}), Error);
  lc.codes[0] = 99;
  CHECK_THROWS_AS(lc.validate(), Error);
}

TEST_CASE("rasterize is monotone in the code set") {
  Rng rng(17);
  const std::vector<int> all = {11, 21, 22, 41, 52, 81, 90};
  LandCoverGrid lc;
  lc.dims = {12, 12};
  for (int c : all) lc.code_book[c] = "c" + std::to_string(c);
  for (int i = 0; i < 144; ++i) lc.codes.push_back(all[static_cast<std::size_t>(rng.uniform_int(0, 6))]);
  for (int trial = 0; trial < 50; ++trial) {
    std::set<int> a, b;
    for (int c : all) {
      const bool in_a = rng.bernoulli(0.3);
      if (in_a) a.insert(c);
      if (in_a || rng.bernoulli(0.4)) b.insert(c);
    }
    if (a.empty()) a.insert(all[0]), b.insert(all[0]);
    const auto ma = rasterize_landcover(lc, a, {20, 20});
    const auto mb = rasterize_landcover(lc, b, {20, 20});
    for (std::size_t i = 0; i < ma.cells().size(); ++i) CHECK(ma.cells()[i] <= mb.cells()[i]);
  }
}

TEST_CASE("land cover rasters and code books load from disk") {
  TempDir dir("lc");
  testing::write_file(dir / "book.txt", "# nlcd subset\n11 Open Water\n300 Custom Class\n");
  const auto book = load_code_book(dir / "book.txt");
  CHECK(book.at(11) == "Open Water");
  CHECK(book.at(300) == "Custom Class");

  cv::Mat m(6, 6, CV_16UC1, cv::Scalar(11));
  m.at<unsigned short>(2, 3) = 300;
  REQUIRE(cv::imwrite((dir / "lc.png").string(), m));
  const auto lc = load_landcover(dir / "lc.png", book);
  CHECK(lc.at(2, 3) == 300);
  CHECK(lc.at(0, 0) == 11);
  const auto mask = rasterize_landcover(lc, {300}, {6, 6});
  CHECK(mask_coverage(mask) == doctest::Approx(1.0 / 36));

  m.at<unsigned short>(0, 0) = 5;
  REQUIRE(cv::imwrite((dir / "bad.png").string(), m));
  CHECK_THROWS_AS(load_landcover(dir / "bad.png", book), Error);
}

TEST_CASE("mask coverage") {
  CHECK(mask_coverage(SpatialMask({224, 224}, MaskSource::Synthetic, 0)) == 0.0);
  CHECK(mask_coverage(SpatialMask({224, 224}, MaskSource::Synthetic, 1)) == 1.0);
  SpatialMask one({224, 224}, MaskSource::Synthetic, 0);
  one.set(100, 7, true);
  CHECK(mask_coverage(one) == 1.0 / 50176.0);
}

TEST_CASE("synthetic masks are binary and deterministic") {
  for (auto l : kAllLabels) {
    Rng a(derive_seed(5, index_of(l))), b(derive_seed(5, index_of(l)));
    const auto ma = synth_mask(l, a, {64, 64});
    CHECK(binary(ma));
    CHECK(ma.source() == MaskSource::Synthetic);
    CHECK(ma == synth_mask(l, b, {64, 64}));
  }
}

TEST_CASE("synthetic families have the advertised geometry") {
  Rng rng(12);
  for (int i = 0; i < 100; ++i) {
    const double wat = mask_coverage(synth_mask(ClassLabel::WAT, rng, {224, 224}));
    CHECK(wat >= 0.4);
    CHECK(wat <= 0.6);
    const int discs = count_components(synth_mask(ClassLabel::WND, rng, {224, 224}));
    CHECK(discs >= 3);
    CHECK(discs <= 8);
    CHECK(count_components(synth_mask(ClassLabel::BIT, rng, {224, 224})) == 1);
    CHECK(count_components(synth_mask(ClassLabel::NG, rng, {224, 224})) == 2);
    CHECK(count_components(synth_mask(ClassLabel::SUN, rng, {224, 224})) >= 9);
  }
}

TEST_CASE("coverage and component count separate the classes under 5-NN") {
  struct Point {
    double coverage;
    double components;
    std::size_t label;
  };
  Rng rng(2024);
  std::vector<Point> pts;
  for (auto l : kAllLabels) {
    for (int i = 0; i < 100; ++i) {
      const auto m = synth_mask(l, rng, {224, 224});
      pts.push_back({mask_coverage(m), static_cast<double>(count_components(m)), index_of(l)});
    }
  }
  // Features scaled to comparable ranges; leave-one-out majority vote.
  auto dist = [](const Point& a, const Point& b) {
    const double dc = (a.coverage - b.coverage) * 10.0, dn = (a.components - b.components);
    return dc * dc + dn * dn;
  };
  std::size_t correct = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    std::vector<std::pair<double, std::size_t>> d;
    for (std::size_t j = 0; j < pts.size(); ++j)
      if (j != i) d.emplace_back(dist(pts[i], pts[j]), pts[j].label);
    std::partial_sort(d.begin(), d.begin() + 5, d.end());
    std::array<int, kNumClasses> votes{};
    for (int k = 0; k < 5; ++k) ++votes[d[k].second];
    const auto best = static_cast<std::size_t>(std::max_element(votes.begin(), votes.end()) - votes.begin());
    correct += best == pts[i].label;
  }
  const double acc = static_cast<double>(correct) / pts.size();
  INFO("5-NN accuracy " << acc);
  CHECK(acc > 0.9);
}

TEST_CASE("component counting") {
  auto m = SpatialMask::from_cells({3, 4}, {1, 1, 0, 1, 0, 0, 0, 1, 1, 0, 1, 0}, MaskSource::File);
  CHECK(count_components(m) == 4);  // diagonal neighbors are separate
  CHECK(count_components(SpatialMask({5, 5}, MaskSource::File, 0)) == 0);
}
