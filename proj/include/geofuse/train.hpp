#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "geofuse/checkpoint.hpp"
#include "geofuse/manifest.hpp"
#include "geofuse/mask.hpp"
#include "geofuse/metrics.hpp"
#include "geofuse/model.hpp"
#include "geofuse/preprocess.hpp"

namespace geofuse {

struct TrainConfig {
  int epochs = 30;
  int batch_size = 32;
  double learning_rate = 3e-4;
  double weight_decay = 1e-4;
  std::uint64_t seed = 0;
  Mode mode = Mode::Baseline;
  bool class_weights = false;
  bool augment = true;

  void validate() const;
};

// How mask_path entries are turned into SpatialMasks.
struct MaskOptions {
  enum class Kind { File, LandCover };
  Kind kind = Kind::File;
  std::set<int> relevant_codes;
  std::map<int, std::string> code_book;
};

/// One resized, not yet standardized sample.
struct Sample {
  ImageTensor image;                 // image_size x image_size x 3, values in [0, 1]
  std::optional<SpatialMask> mask;
  ClassLabel label = ClassLabel::WND;
};

// Throws if any record lacks a mask_path; the message names the first one.
void require_masks(const Manifest& m);

std::vector<Sample> load_samples(const Manifest& m, int image_size, bool with_masks,
                                 const MaskOptions& masks = {});

struct History {
  std::vector<double> epoch_loss;
};

std::string format_history(const History& h);

struct TrainResult {
  Checkpoint checkpoint;
  History history;
};

// Decoupled-weight-decay Adam.
class AdamW {
 public:
  AdamW(double learning_rate, double weight_decay, double beta1 = 0.9, double beta2 = 0.999,
        double eps = 1e-8);
  void step(nn::ParamStore<float>& params);
  std::uint64_t steps() const { return t_; }

 private:
  double lr_, wd_, beta1_, beta2_, eps_;
  std::uint64_t t_ = 0;
  std::vector<nn::Mat<float>> m_;
  std::vector<nn::Mat<float>> v_;
};

/// Owns the model and optimizer for one run. Samples handed to `step` must
/// already be standardized.
class Trainer {
 public:
  Trainer(const TrainConfig& tc, const ModelConfig& mc);

  // One optimizer update on the mean (weighted) cross-entropy of the batch.
  // Returns that mean loss; throws on a non-finite loss.
  double step(const std::vector<const ModelInput<float>*>& inputs, const std::vector<int>& labels,
              const std::vector<float>& weights);

  FusionModel<float>& model() { return model_; }
  const FusionModel<float>& model() const { return model_; }
  std::uint64_t steps() const { return optimizer_.steps(); }

 private:
  TrainConfig tc_;
  FusionModel<float> model_;
  AdamW optimizer_;
};

using EpochCallback = std::function<void(int epoch, double mean_loss)>;

// Full training run on in-memory samples. Channel statistics come from
// `samples` only.
TrainResult train_samples(const TrainConfig& tc, const ModelConfig& mc, const std::vector<Sample>& samples,
                          const EpochCallback& on_epoch = {});

TrainResult train(const TrainConfig& tc, const ModelConfig& mc, const Manifest& train_manifest,
                  const MaskOptions& masks = {}, const EpochCallback& on_epoch = {});

// Single deterministic pass, no augmentation; argmax with ties to the lowest
// class index.
EvalReport evaluate_samples(const Checkpoint& ckpt, const std::vector<Sample>& samples, Mode mode);

EvalReport evaluate(const Checkpoint& ckpt, const Manifest& test, Mode mode, const MaskOptions& masks = {});

}  // namespace geofuse
