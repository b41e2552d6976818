#include <doctest.h>

#include <cmath>

#include "geofuse/error.hpp"
#include "geofuse/model.hpp"
#include "support.hpp"

using namespace geofuse;
using namespace geofuse::nn;
using geofuse::testing::constant_image;
using geofuse::testing::random_image;

namespace {

ModelConfig small(Mode mode, int image = 32, int patch = 16, int dim = 8) {
  ModelConfig mc;
  mc.mode = mode;
  mc.vit.image_size = image;
  mc.vit.patch_size = patch;
  mc.vit.embed_dim = dim;
  mc.vit.depth = 1;
  mc.vit.heads = 2;
  mc.reduced_dim = 8;
  return mc;
}

ImageTensor random_mask(int s, Rng& rng) {
  auto m = constant_image(s, s, 1, 0.0f);
  for (auto& v : m.data) v = rng.bernoulli(0.3) ? 1.0f : 0.0f;
  return m;
}

void zero_params(FusionModel<double>& model, std::string_view prefix, bool biases_only) {
  for (auto& p : model.params().params()) {
    if (!p.name.starts_with(prefix)) continue;
    if (biases_only && !p.name.ends_with(".bias")) continue;
    p.value.setZero();
  }
}

}  // namespace

TEST_CASE("cnn branch emits 14x14x128 for a 224 input") {
  Rng rng(1);
  CnnConfig cfg;
  cfg.in_channels = 1;
  ParamStore<float> store;
  CnnBranch<float> cnn(store, cfg);
  cnn.init(rng);
  Mat<float> x = Mat<float>::Random(1, 224 * 224);
  const auto map = cnn.forward(x, 224, 224, nullptr);
  CHECK(map.rows() == 128);
  CHECK(map.cols() == 14 * 14);
  CHECK((map.array() >= 0).all());
}

TEST_CASE("cnn branch shape holds for every valid input size") {
  Rng rng(2);
  CnnConfig cfg;
  cfg.in_channels = 3;
  ParamStore<double> store;
  CnnBranch<double> cnn(store, cfg);
  cnn.init(rng);
  for (int s : {28, 29, 31, 40, 57, 64}) {
    const auto map = cnn.forward(Mat<double>::Random(3, s * (s + 3)), s, s + 3, nullptr);
    CHECK(map.rows() == 128);
    CHECK(map.cols() == 196);
  }
  CHECK_THROWS_AS(cnn.forward(Mat<double>::Random(3, 27 * 40), 27, 40, nullptr), Error);
}

TEST_CASE("zero input with zero biases gives a zero map") {
  Rng rng(3);
  CnnConfig cfg;
  cfg.in_channels = 1;
  ParamStore<double> store;
  CnnBranch<double> cnn(store, cfg);
  cnn.init(rng);
  for (auto& p : store.params())
    if (p.name.ends_with(".bias")) p.value.setZero();
  const auto map = cnn.forward(Mat<double>::Zero(1, 56 * 56), 56, 56, nullptr);
  CHECK(map.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("vit patch tokens and attention normalization") {
  ModelConfig mc = small(Mode::Baseline, 224, 16, 24);
  mc.vit.heads = 3;
  FusionModel<float> model(mc, 4);
  Rng rng(4);
  const auto input = make_input<float>(random_image(224, 224, 3, rng), std::nullopt);
  const auto f = model.features(input);
  CHECK(mc.vit.n_patches() == 196);
  CHECK(f.tokens.rows() == 196);
  CHECK(f.tokens.cols() == 24);
  const auto maps = model.vit().attention_maps(input.image, 224, 224);
  REQUIRE(maps.size() == 1);
  REQUIRE(maps[0].size() == 3);
  for (const auto& p : maps[0]) {
    CHECK(p.rows() == 197);
    for (Index r = 0; r < p.rows(); ++r) CHECK(std::abs(p.row(r).sum() - 1.0f) < 1e-5f);
  }
  const auto wrong = make_input<float>(random_image(32, 32, 3, rng), std::nullopt);
  CHECK_THROWS_AS(model.features(wrong), Error);
}

TEST_CASE("pool_cnn averages the grid") {
  Mat<double> map = Mat<double>::Zero(128, 196);
  map(0, 57) = 196.0;
  const auto h = pool_cnn(map);
  CHECK(h.size() == 128);
  CHECK(h(0) == doctest::Approx(1.0));
  CHECK(h.tail(127).cwiseAbs().maxCoeff() == 0.0);
  const auto c = pool_cnn<double>(Mat<double>::Constant(128, 196, 2.5));
  CHECK((c.array() == 2.5).all());
}

TEST_CASE("fuse concatenates vit features first") {
  FusionConfig fc;
  CHECK(fc.fused_dim() == 320);
  CHECK(fuse<double>(RowVec<double>::Zero(192), RowVec<double>::Zero(128), fc).cwiseAbs().maxCoeff() == 0.0);
  Rng rng(5);
  RowVec<double> hv(192), hc(128);
  for (Index i = 0; i < 192; ++i) hv(i) = rng.normal();
  for (Index i = 0; i < 128; ++i) hc(i) = rng.normal();
  const auto z = fuse(hv, hc, fc);
  REQUIRE(z.size() == 320);
  CHECK(z.head(192) == hv);
  CHECK(z.tail(128) == hc);
  CHECK_THROWS_AS(fuse<double>(RowVec<double>::Zero(191), hc, fc), Error);
  CHECK_THROWS_AS(fuse<double>(hv, RowVec<double>::Zero(64), fc), Error);
}

TEST_CASE("classify") {
  FusionModel<double> model(small(Mode::Baseline), 6);
  zero_params(model, "head.", false);
  Rng rng(6);
  RowVec<double> z(8 + 128);
  for (Index i = 0; i < z.size(); ++i) z(i) = rng.normal();
  const auto logits = model.classify(z);
  CHECK(logits.size() == 5);
  CHECK(logits.cwiseAbs().maxCoeff() == 0.0);

  FusionModel<double> other(small(Mode::Baseline), 7);
  const auto l = other.classify(z);
  RowVec<double> shifted = l.array() + 3.7;
  CHECK(argmax(shifted) == argmax(l));
  CHECK_THROWS_AS(other.classify(RowVec<double>::Zero(10)), Error);
}

TEST_CASE("argmax ties go to the lowest index") {
  RowVec<double> l(5);
  l << 0.1, 0.7, 0.2, 0.7, 0.7;
  CHECK(argmax(l) == 1);
}

TEST_CASE("kgml and baseline share the vit branch") {
  Rng rng(8);
  const auto img = random_image(32, 32, 3, rng);
  FusionModel<double> base(small(Mode::Baseline), 11);
  FusionModel<double> kgml(small(Mode::Kgml), 11);
  const auto fb = base.features(make_input<double>(img, std::nullopt));
  const auto fk = kgml.features(make_input<double>(img, constant_image(32, 32, 1, 0.0f)));
  CHECK(fb.tokens == fk.tokens);
  CHECK(fb.h_vit == fk.h_vit);
  CHECK(fb.z.head(8) == fk.z.head(8));
  CHECK(fb.h_cnn != fk.h_cnn);
}

TEST_CASE("baseline ignores the mask; kgml requires it") {
  Rng rng(9);
  const auto img = random_image(32, 32, 3, rng);
  FusionModel<double> base(small(Mode::Baseline), 12);
  const auto ref = base.forward(make_input<double>(img, std::nullopt));
  CHECK(ref.size() == 5);
  for (int i = 0; i < 5; ++i) CHECK(base.forward(make_input<double>(img, random_mask(32, rng))) == ref);

  FusionModel<double> kgml(small(Mode::Kgml), 12);
  CHECK(kgml.forward(make_input<double>(img, random_mask(32, rng))).size() == 5);
  CHECK_THROWS_AS(kgml.forward(make_input<double>(img, std::nullopt)), Error);
  CHECK(kgml.forward(make_input<double>(img, random_mask(32, rng))) !=
        kgml.forward(make_input<double>(img, constant_image(32, 32, 1, 1.0f))));
}

TEST_CASE("both modes emit five logits at full size") {
  Rng rng(10);
  ModelConfig mc;
  for (Mode m : {Mode::Baseline, Mode::Kgml}) {
    mc.mode = m;
    mc.vit.depth = 1;
    FusionModel<float> model(mc, 1);
    const auto in = make_input<float>(random_image(224, 224, 3, rng), random_mask(224, rng));
    CHECK(model.forward(in).size() == 5);
  }
}

TEST_CASE("four-channel kgml variant") {
  ModelConfig mc = small(Mode::Kgml);
  mc.cnn_input = CnnInput::ImageAndMask;
  CHECK(mc.cnn().in_channels == 4);
  FusionModel<double> model(mc, 3);
  Rng rng(13);
  CHECK(model.forward(make_input<double>(random_image(32, 32, 3, rng), random_mask(32, rng))).size() == 5);
  ModelConfig bad = small(Mode::Baseline);
  bad.cnn_input = CnnInput::ImageAndMask;
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("parameter counts") {
  ModelConfig mc = small(Mode::Kgml);
  FusionModel<float> model(mc, 1);
  CHECK(model.params().find("cnn.conv1.weight")->size() + model.params().find("cnn.conv1.bias")->size() == 640);
  CHECK(model.params().find("cnn.conv2.weight")->size() + model.params().find("cnn.conv2.bias")->size() == 73856);
  CHECK(param_count(mc) == model.params().scalar_count());

  ModelConfig full;
  FusionModel<float> full_model(full, 1);
  CHECK(param_count(full) == full_model.params().scalar_count());
  ModelConfig wider = full;
  wider.reduced_dim *= 2;
  CHECK(param_count(wider) > param_count(full));
  CHECK(param_count(full) == param_count(full));
}

TEST_CASE("config validation") {
  ModelConfig mc;
  mc.vit.patch_size = 15;
  CHECK_THROWS_AS(mc.validate(), Error);
  mc = ModelConfig{};
  mc.vit.heads = 5;
  CHECK_THROWS_AS(mc.validate(), Error);
  mc = ModelConfig{};
  mc.reduced_dim = 0;
  CHECK_THROWS_AS(mc.validate(), Error);
  CHECK_NOTHROW(ModelConfig{}.validate());
}

TEST_CASE("initialization and forward are deterministic") {
  Rng rng(14);
  const auto in = make_input<float>(random_image(32, 32, 3, rng), random_mask(32, rng));
  FusionModel<float> a(small(Mode::Kgml), 77), b(small(Mode::Kgml), 77), c(small(Mode::Kgml), 78);
  for (std::size_t i = 0; i < a.params().params().size(); ++i)
    CHECK(a.params().params()[i].value == b.params().params()[i].value);
  CHECK(a.forward(in) == b.forward(in));
  CHECK(a.forward(in) != c.forward(in));
}

TEST_CASE("cls token pooling") {
  ModelConfig mc = small(Mode::Baseline);
  mc.vit.pooling = Pooling::ClsToken;
  FusionModel<double> model(mc, 2);
  Rng rng(15);
  const auto f = model.features(make_input<double>(random_image(32, 32, 3, rng), std::nullopt));
  CHECK(f.h_vit.size() == 8);
  RowVec<double> mean = f.tokens.colwise().mean();
  CHECK((f.h_vit - mean).cwiseAbs().maxCoeff() > 1e-9);
}

TEST_CASE("analytic gradients match finite differences") {
  for (Mode m : {Mode::Baseline, Mode::Kgml}) {
    const auto r = testing::gradient_check(m, 3, 1e-4);
    INFO(mode_name(m) << ": " << r.checked << " checked, max rel " << r.max_rel_error << " at " << r.worst);
    CHECK(r.checked == param_count(small(m)));
    CHECK(r.failed == 0);
  }
}
