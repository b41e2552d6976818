#include <doctest.h>

#include <cmath>

#include "geofuse/error.hpp"
#include "geofuse/train.hpp"
#include "support.hpp"

using namespace geofuse;
using geofuse::testing::desk_model;
using geofuse::testing::desk_train;
using geofuse::testing::synth_samples;

namespace {

std::vector<Sample> tiny_corpus(int per_class, std::uint64_t seed) {
  SynthConfig cfg;
  cfg.per_class = per_class;
  cfg.size = 32;
  cfg.seed = seed;
  return synth_samples(cfg);
}

}  // namespace

TEST_CASE("a single batch of eight samples is memorized") {
  auto samples = tiny_corpus(2, 1);
  samples.resize(8);
  const auto stats = compute_channel_stats([&] {
    std::vector<ImageTensor> imgs;
    for (const auto& s : samples) imgs.push_back(s.image);
    return imgs;
  }());
  std::vector<ModelInput<float>> inputs;
  std::vector<int> labels;
  for (const auto& s : samples) {
    inputs.push_back(make_input<float>(standardize(s.image, stats), std::nullopt));
    labels.push_back(static_cast<int>(index_of(s.label)));
  }
  std::vector<const ModelInput<float>*> batch;
  for (const auto& in : inputs) batch.push_back(&in);
  const std::vector<float> weights(8, 1.0f);

  auto tc = desk_train(Mode::Baseline, 3);
  Trainer trainer(tc, desk_model(Mode::Baseline));
  const double first = trainer.step(batch, labels, weights);
  double loss = first;
  for (int step = 1; step < 500 && loss >= 0.05; ++step) loss = trainer.step(batch, labels, weights);
  INFO("initial " << first << " final " << loss << " after " << trainer.steps() << " steps");
  CHECK(loss < 0.05);
  CHECK(loss < first);
  CHECK(trainer.steps() <= 500);
}

TEST_CASE("zero epochs returns the initialization") {
  const auto samples = tiny_corpus(2, 2);
  auto tc = desk_train(Mode::Kgml, 5);
  tc.epochs = 0;
  const auto mc = desk_model(Mode::Kgml);
  const auto result = train_samples(tc, mc, samples);
  CHECK(result.history.epoch_loss.empty());
  CHECK(result.checkpoint.steps == 0);
  const FusionModel<float> init(mc, 5);
  const auto ref = snapshot(init, result.checkpoint.stats, 5, 0);
  CHECK(result.checkpoint.params == ref.params);
}

TEST_CASE("training is deterministic for a fixed seed") {
  const auto samples = tiny_corpus(6, 3);
  auto tc = desk_train(Mode::Kgml, 8);
  tc.epochs = 2;
  tc.batch_size = 8;
  const auto mc = desk_model(Mode::Kgml);
  const auto a = train_samples(tc, mc, samples);
  const auto b = train_samples(tc, mc, samples);
  CHECK(a.history.epoch_loss == b.history.epoch_loss);
  CHECK(serialize_checkpoint(a.checkpoint) == serialize_checkpoint(b.checkpoint));
  CHECK(format_history(a.history) == format_history(b.history));
  tc.seed = 9;
  CHECK(serialize_checkpoint(train_samples(tc, mc, samples).checkpoint) != serialize_checkpoint(a.checkpoint));
}

TEST_CASE("channel statistics come from the training samples") {
  const auto samples = tiny_corpus(3, 4);
  auto tc = desk_train(Mode::Baseline, 1);
  tc.epochs = 0;
  const auto result = train_samples(tc, desk_model(Mode::Baseline), samples);
  std::vector<ImageTensor> imgs;
  for (const auto& s : samples) imgs.push_back(s.image);
  const auto expect = compute_channel_stats(imgs);
  CHECK(result.checkpoint.stats.mean == expect.mean);
  CHECK(result.checkpoint.stats.std == expect.std);
}

TEST_CASE("history format") {
  History h;
  h.epoch_loss = {1.5, 0.25};
  const auto text = format_history(h);
  CHECK(text.rfind("epoch,mean_loss\n1,", 0) == 0);
  CHECK(text.find("\n2,") != std::string::npos);
}

TEST_CASE("kgml training needs masks") {
  Manifest m = parse_manifest("image_path,mask_path,label,split\na.png,ma.png,WND,\nb.png,,SUN,\n");
  try {
    require_masks(m);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("b.png") != std::string::npos);
  }
  auto samples = tiny_corpus(1, 5);
  samples[2].mask.reset();
  auto tc = desk_train(Mode::Kgml, 1);
  tc.epochs = 1;
  CHECK_THROWS_AS(train_samples(tc, desk_model(Mode::Kgml), samples), Error);
}

TEST_CASE("train config validation") {
  TrainConfig tc;
  tc.batch_size = 0;
  CHECK_THROWS_AS(tc.validate(), Error);
  tc = TrainConfig{};
  tc.learning_rate = 0;
  CHECK_THROWS_AS(tc.validate(), Error);
  tc = TrainConfig{};
  tc.epochs = -1;
  CHECK_THROWS_AS(tc.validate(), Error);
}

TEST_CASE("evaluation is a pure function of checkpoint and samples") {
  const auto samples = tiny_corpus(4, 6);
  auto tc = desk_train(Mode::Kgml, 2);
  tc.epochs = 1;
  const auto result = train_samples(tc, desk_model(Mode::Kgml), samples);
  const auto a = evaluate_samples(result.checkpoint, samples, Mode::Kgml);
  const auto b = evaluate_samples(result.checkpoint, samples, Mode::Kgml);
  CHECK(render_report_csv(a) == render_report_csv(b));
  CHECK(*a.confusion == *b.confusion);
  CHECK(a.total_support() == samples.size());
  CHECK(a.confusion->total() == samples.size());
  CHECK(a.mode == Mode::Kgml);
  CHECK_THROWS_AS(evaluate_samples(result.checkpoint, samples, Mode::Baseline), Error);
}

TEST_CASE("class weights are accepted") {
  const auto samples = tiny_corpus(2, 7);
  auto tc = desk_train(Mode::Baseline, 2);
  tc.epochs = 1;
  tc.class_weights = true;
  const auto r = train_samples(tc, desk_model(Mode::Baseline), samples);
  REQUIRE(r.history.epoch_loss.size() == 1);
  CHECK(std::isfinite(r.history.epoch_loss[0]));
}
