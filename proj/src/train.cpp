#include "geofuse/train.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>

#include "geofuse/error.hpp"
#include "geofuse/rng.hpp"

namespace geofuse {

void TrainConfig::validate() const {
  if (epochs < 0) throw Error("epochs must be non-negative");
  if (batch_size < 1) throw Error("batch_size must be at least 1");
  if (!(learning_rate > 0)) throw Error("learning_rate must be positive");
  if (weight_decay < 0) throw Error("weight_decay must be non-negative");
}

void require_masks(const Manifest& m) {
  for (std::size_t i = 0; i < m.records.size(); ++i) {
    if (!m.records[i].mask_path) {
      throw Error("kgml mode requires mask_path for every record; record " + std::to_string(i + 1) + " ('" +
                  m.records[i].image_path.generic_string() + "') has none");
    }
  }
}

std::vector<Sample> load_samples(const Manifest& m, int image_size, bool with_masks, const MaskOptions& masks) {
  if (with_masks) require_masks(m);
  std::vector<Sample> out;
  out.reserve(m.size());
  const Dims dims{image_size, image_size};
  for (const auto& rec : m.records) {
    Sample s;
    s.label = rec.label;
    s.image = resize_image(load_image(m.resolve(rec.image_path)), image_size);
    if (with_masks) {
      const auto path = m.resolve(*rec.mask_path);
      if (masks.kind == MaskOptions::Kind::File) {
        s.mask = load_mask(path, dims);
      } else {
        s.mask = rasterize_landcover(load_landcover(path, masks.code_book), masks.relevant_codes, dims);
      }
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::string format_history(const History& h) {
  std::string out = "epoch,mean_loss\n";
  char buf[64];
  for (std::size_t e = 0; e < h.epoch_loss.size(); ++e) {
    std::snprintf(buf, sizeof buf, "%zu,%.9g\n", e + 1, h.epoch_loss[e]);
    out += buf;
  }
  return out;
}

AdamW::AdamW(double learning_rate, double weight_decay, double beta1, double beta2, double eps)
    : lr_(learning_rate), wd_(weight_decay), beta1_(beta1), beta2_(beta2), eps_(eps) {}

void AdamW::step(nn::ParamStore<float>& params) {
  auto& ps = params.params();
  if (m_.empty()) {
    for (const auto& p : ps) {
      m_.push_back(nn::Mat<float>::Zero(p.value.rows(), p.value.cols()));
      v_.push_back(nn::Mat<float>::Zero(p.value.rows(), p.value.cols()));
    }
  }
  ++t_;
  const auto b1 = static_cast<float>(beta1_), b2 = static_cast<float>(beta2_);
  const auto c1 = static_cast<float>(1.0 - std::pow(beta1_, static_cast<double>(t_)));
  const auto c2 = static_cast<float>(1.0 - std::pow(beta2_, static_cast<double>(t_)));
  const auto lr = static_cast<float>(lr_), eps = static_cast<float>(eps_);
  std::size_t i = 0;
  for (auto& p : ps) {
    auto& m = m_[i];
    auto& v = v_[i];
    ++i;
    m = b1 * m + (1.0f - b1) * p.grad;
    v = b2 * v + (1.0f - b2) * p.grad.cwiseProduct(p.grad);
    if (p.decay && wd_ > 0) p.value *= 1.0f - lr * static_cast<float>(wd_);
    p.value.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
  }
}

Trainer::Trainer(const TrainConfig& tc, const ModelConfig& mc)
    : tc_(tc), model_(mc, tc.seed), optimizer_(tc.learning_rate, tc.weight_decay) {
  tc.validate();
  if (tc.mode != mc.mode) throw Error("train and model configs disagree on mode");
}

double Trainer::step(const std::vector<const ModelInput<float>*>& inputs, const std::vector<int>& labels,
                     const std::vector<float>& weights) {
  if (inputs.empty() || inputs.size() != labels.size() || inputs.size() != weights.size()) {
    throw Error("trainer: batch inputs, labels and weights must be non-empty and aligned");
  }
  model_.params().zero_grad();
  const float scale = 1.0f / static_cast<float>(inputs.size());
  double loss = 0.0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    loss += model_.accumulate_gradients(*inputs[i], labels[i], weights[i] * scale);
  }
  if (!std::isfinite(loss)) {
    throw Error("non-finite loss at step " + std::to_string(optimizer_.steps() + 1));
  }
  optimizer_.step(model_.params());
  return loss;
}

namespace {

std::array<float, kNumClasses> class_weights_for(const std::vector<Sample>& samples, bool enabled) {
  std::array<float, kNumClasses> w;
  w.fill(1.0f);
  if (!enabled) return w;
  ClassCounts counts;
  for (const auto& s : samples) ++counts[s.label];
  const double n = static_cast<double>(samples.size());
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    w[c] = counts.counts[c] == 0 ? 0.0f
                                 : static_cast<float>(n / (kNumClasses * static_cast<double>(counts.counts[c])));
  }
  return w;
}

std::optional<ImageTensor> mask_tensor(const Sample& s, bool needed) {
  if (!needed) return std::nullopt;
  if (!s.mask) throw Error("kgml mode requires a spatial mask for every sample");
  return s.mask->to_tensor();
}

}  // namespace

TrainResult train_samples(const TrainConfig& tc, const ModelConfig& mc, const std::vector<Sample>& samples,
                          const EpochCallback& on_epoch) {
  tc.validate();
  mc.validate();
  const bool kgml = mc.mode == Mode::Kgml;
  for (const auto& s : samples) {
    if (s.image.height != mc.vit.image_size || s.image.width != mc.vit.image_size) {
      throw Error("training sample size does not match image_size");
    }
    if (kgml && !s.mask) throw Error("kgml mode requires a spatial mask for every training sample");
  }
  std::vector<ImageTensor> raw;
  raw.reserve(samples.size());
  for (const auto& s : samples) raw.push_back(s.image);
  const ChannelStats stats = samples.empty() ? ChannelStats{{0, 0, 0}, {1, 1, 1}} : compute_channel_stats(raw);
  raw.clear();

  std::vector<ImageTensor> images;
  std::vector<std::optional<ImageTensor>> masks;
  images.reserve(samples.size());
  for (const auto& s : samples) {
    images.push_back(standardize(s.image, stats));
    masks.push_back(mask_tensor(s, kgml));
  }
  const auto weights = class_weights_for(samples, tc.class_weights);

  Trainer trainer(tc, mc);
  History history;
  const Rng root(tc.seed);
  std::vector<std::size_t> order(samples.size());
  for (int epoch = 0; epoch < tc.epochs && !samples.empty(); ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng = root.split(0x5eed0000ULL + static_cast<std::uint64_t>(epoch));
    shuffle(order.begin(), order.end(), shuffle_rng);
    const Rng aug_root = root.split(0xa0900000ULL + static_cast<std::uint64_t>(epoch));
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(tc.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(tc.batch_size));
      std::vector<ModelInput<float>> inputs;
      inputs.reserve(end - start);
      std::vector<int> labels;
      std::vector<float> w;
      for (std::size_t k = start; k < end; ++k) {
        const std::size_t idx = order[k];
        if (tc.augment) {
          Rng rng = aug_root.split(idx);
          auto [img, mask] = augment(images[idx], masks[idx], sample_augmentation(rng));
          inputs.push_back(make_input<float>(img, mask));
        } else {
          inputs.push_back(make_input<float>(images[idx], masks[idx]));
        }
        labels.push_back(static_cast<int>(index_of(samples[idx].label)));
        w.push_back(weights[index_of(samples[idx].label)]);
      }
      std::vector<const ModelInput<float>*> ptrs;
      for (const auto& in : inputs) ptrs.push_back(&in);
      epoch_loss += trainer.step(ptrs, labels, w) * static_cast<double>(end - start);
    }
    const double mean = epoch_loss / static_cast<double>(samples.size());
    history.epoch_loss.push_back(mean);
    if (on_epoch) on_epoch(epoch + 1, mean);
  }
  return {snapshot(trainer.model(), stats, tc.seed, trainer.steps()), std::move(history)};
}

TrainResult train(const TrainConfig& tc, const ModelConfig& mc, const Manifest& train_manifest,
                  const MaskOptions& masks, const EpochCallback& on_epoch) {
  tc.validate();
  mc.validate();
  const bool kgml = mc.mode == Mode::Kgml;
  if (kgml) require_masks(train_manifest);
  return train_samples(tc, mc, load_samples(train_manifest, mc.vit.image_size, kgml, masks), on_epoch);
}

EvalReport evaluate_samples(const Checkpoint& ckpt, const std::vector<Sample>& samples, Mode mode) {
  if (ckpt.model.mode != mode) {
    throw Error("checkpoint was trained in " + std::string(mode_name(ckpt.model.mode)) +
                " mode and cannot be evaluated in " + std::string(mode_name(mode)) + " mode");
  }
  const auto model = restore(ckpt);
  const bool kgml = mode == Mode::Kgml;
  ConfusionMatrix cm;
  for (const auto& s : samples) {
    if (s.image.height != ckpt.model.vit.image_size || s.image.width != ckpt.model.vit.image_size) {
      throw Error("evaluation sample size does not match the checkpoint image_size");
    }
    const auto input = make_input<float>(standardize(s.image, ckpt.stats), mask_tensor(s, kgml));
    cm.add(index_of(s.label), static_cast<std::size_t>(argmax<float>(model.forward(input))));
  }
  auto report = per_class_metrics(cm);
  report.mode = mode;
  report.seed = ckpt.seed;
  return report;
}

EvalReport evaluate(const Checkpoint& ckpt, const Manifest& test, Mode mode, const MaskOptions& masks) {
  if (ckpt.model.mode != mode) {
    throw Error("checkpoint was trained in " + std::string(mode_name(ckpt.model.mode)) +
                " mode and cannot be evaluated in " + std::string(mode_name(mode)) + " mode");
  }
  return evaluate_samples(ckpt, load_samples(test, ckpt.model.vit.image_size, mode == Mode::Kgml, masks), mode);
}

}  // namespace geofuse
