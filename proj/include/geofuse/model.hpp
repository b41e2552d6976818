#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string_view>
#include <vector>

#include "geofuse/image.hpp"
#include "geofuse/labels.hpp"
#include "geofuse/nn/attention.hpp"
#include "geofuse/nn/layers.hpp"

namespace geofuse {

enum class Mode { Baseline, Kgml };
enum class Pooling { MeanTokens, ClsToken };
// What the CNN branch consumes in KGML mode: the mask alone, or the image
// stacked with the mask (4 channels).
enum class CnnInput { Mask, ImageAndMask };

std::string_view mode_name(Mode m);
Mode parse_mode(std::string_view s);
std::string_view pooling_name(Pooling p);
Pooling parse_pooling(std::string_view s);
std::string_view cnn_input_name(CnnInput c);
CnnInput parse_cnn_input(std::string_view s);

// Conv(64) -> ReLU -> MaxPool(2) -> Conv(128) -> ReLU -> AdaptiveAvgPool(14).
// Filter counts and the output grid are fixed; only the input width varies.
struct CnnConfig {
  int in_channels = 3;
  int conv1_filters = 64;
  int conv2_filters = 128;
  int kernel = 3;
  int output_grid = 14;
  static constexpr int kMinInput = 2 * 14;

  void validate() const;
};

struct VitConfig {
  int image_size = 224;
  int patch_size = 16;
  int embed_dim = 192;
  int depth = 6;
  int heads = 3;
  double mlp_ratio = 4.0;
  Pooling pooling = Pooling::MeanTokens;

  int grid() const { return image_size / patch_size; }
  int n_patches() const { return grid() * grid(); }
  int mlp_dim() const;
  void validate() const;

  bool operator==(const VitConfig&) const = default;
};

struct FusionConfig {
  int vit_dim = 192;
  int cnn_dim = 128;
  int reduced_dim = 128;
  int n_classes = static_cast<int>(kNumClasses);

  int fused_dim() const { return vit_dim + cnn_dim; }
  void validate() const;
};

struct ModelConfig {
  Mode mode = Mode::Baseline;
  CnnInput cnn_input = CnnInput::Mask;
  VitConfig vit;
  int reduced_dim = 128;

  CnnConfig cnn() const;
  FusionConfig fusion() const;
  void validate() const;

  bool operator==(const ModelConfig&) const = default;
};

// Exact learnable-parameter total, computed from layer shapes alone.
std::size_t param_count(const ModelConfig& config);

/// Intermediate features of one forward pass. `cnn_map` is channel-major
/// (128 x 196 for a 14 x 14 grid); `z` is [h_vit ; h_cnn].
template <typename T>
struct FeatureBundle {
  nn::Mat<T> tokens;  // n_patches x D_v, after the final norm
  nn::RowVec<T> h_vit;
  nn::Mat<T> cnn_map;
  nn::RowVec<T> h_cnn;
  nn::RowVec<T> z;
};

// Global average over the spatial grid, one value per channel.
template <typename T>
nn::RowVec<T> pool_cnn(const nn::Mat<T>& map);

// Exact concatenation, ViT features first.
template <typename T>
nn::RowVec<T> fuse(const nn::RowVec<T>& h_vit, const nn::RowVec<T>& h_cnn, const FusionConfig& config);

/// Planar model input: image is 3 x (H*W); mask, when present, 1 x (H*W).
template <typename T>
struct ModelInput {
  nn::Mat<T> image;
  std::optional<nn::Mat<T>> mask;
  int height = 0;
  int width = 0;
};

template <typename T>
nn::Mat<T> to_planar(const ImageTensor& img);

template <typename T>
ModelInput<T> make_input(const ImageTensor& img, const std::optional<ImageTensor>& mask);

template <typename T>
class CnnBranch {
 public:
  struct Cache {
    int height = 0;
    int width = 0;
    typename nn::Conv2d<T>::Cache conv1;
    nn::Mat<T> act1;
    typename nn::MaxPool2<T>::Cache pool;
    nn::Mat<T> pooled;  // conv2 input
    typename nn::Conv2d<T>::Cache conv2;
    nn::Mat<T> pre2;  // conv2 output before ReLU
    nn::Mat<T> act2;
  };

  CnnBranch() = default;
  CnnBranch(nn::ParamStore<T>& store, const CnnConfig& config);

  void init(Rng& rng);

  // x: in_channels x (H*W); returns conv2_filters x (grid*grid).
  nn::Mat<T> forward(const nn::Mat<T>& x, int height, int width, Cache* cache) const;
  void backward(const Cache& cache, const nn::Mat<T>& dmap);

  // Stages after conv2, exposed for staged evaluation in tests.
  nn::Mat<T> from_conv2_preactivation(const nn::Mat<T>& pre2, int height, int width) const;

  const CnnConfig& config() const { return config_; }
  const nn::Conv2d<T>& conv1() const { return conv1_; }
  const nn::Conv2d<T>& conv2() const { return conv2_; }

 private:
  CnnConfig config_;
  nn::Conv2d<T> conv1_;
  nn::Conv2d<T> conv2_;
};

template <typename T>
class VitBranch {
 public:
  struct Output {
    nn::Mat<T> tokens;  // patch tokens only
    nn::RowVec<T> h_vit;
  };
  struct Cache {
    nn::Mat<T> patches;
    std::vector<typename nn::TransformerBlock<T>::Cache> blocks;
    typename nn::LayerNorm<T>::Cache norm;
  };

  VitBranch() = default;
  VitBranch(nn::ParamStore<T>& store, const VitConfig& config);

  void init(Rng& rng);

  // image: 3 x (H*W) with H = W = image_size.
  Output forward(const nn::Mat<T>& image, int height, int width, Cache* cache) const;
  void backward(const Cache& cache, const nn::RowVec<T>& dh_vit);

  // Attention probabilities of every block for one image (test hook).
  std::vector<std::vector<nn::Mat<T>>> attention_maps(const nn::Mat<T>& image, int height, int width) const;

  const VitConfig& config() const { return config_; }

 private:
  nn::Mat<T> patchify(const nn::Mat<T>& image, int height, int width) const;

  VitConfig config_;
  nn::Linear<T> patch_embed_;
  nn::Param<T>* cls_token_ = nullptr;  // 1 x D
  nn::Param<T>* pos_embed_ = nullptr;  // (n_patches + 1) x D
  std::vector<nn::TransformerBlock<T>> blocks_;
  nn::LayerNorm<T> norm_;
};

// FC(D_v + D_c -> reduced) -> ReLU -> FC(reduced -> 5); raw logits.
template <typename T>
class FusionHead {
 public:
  struct Cache {
    nn::Mat<T> z;
    nn::Mat<T> hidden;
  };

  FusionHead() = default;
  FusionHead(nn::ParamStore<T>& store, const FusionConfig& config);

  void init(Rng& rng);

  nn::RowVec<T> classify(const nn::RowVec<T>& z, Cache* cache) const;
  nn::RowVec<T> backward(const Cache& cache, const nn::RowVec<T>& dlogits);

 private:
  FusionConfig config_;
  nn::Linear<T> fc1_;
  nn::Linear<T> fc2_;
};

/// CNN + ViT fusion classifier in baseline or KGML mode.
///
/// Baseline feeds the RGB image to both branches. KGML feeds the image to
/// the ViT and the binary mask to the CNN. Parameters live in one store,
/// initialized deterministically from the seed.
template <typename T>
class FusionModel {
 public:
  struct Cache {
    typename CnnBranch<T>::Cache cnn;
    typename VitBranch<T>::Cache vit;
    typename FusionHead<T>::Cache head;
  };

  FusionModel(const ModelConfig& config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  nn::ParamStore<T>& params() { return *store_; }
  const nn::ParamStore<T>& params() const { return *store_; }

  // Selects the CNN input for the configured mode; throws in KGML mode
  // when the mask is absent.
  nn::Mat<T> cnn_input(const ModelInput<T>& input) const;

  FeatureBundle<T> features(const ModelInput<T>& input, Cache* cache = nullptr) const;
  nn::RowVec<T> classify(const nn::RowVec<T>& z) const { return head_.classify(z, nullptr); }
  nn::RowVec<T> forward(const ModelInput<T>& input) const;

  // Adds weight * dL/dtheta for one labeled sample; returns weight * loss.
  T accumulate_gradients(const ModelInput<T>& input, int target, T weight);

  const CnnBranch<T>& cnn() const { return cnn_; }
  const VitBranch<T>& vit() const { return vit_; }

 private:
  ModelConfig config_;
  std::unique_ptr<nn::ParamStore<T>> store_;
  CnnBranch<T> cnn_;
  VitBranch<T> vit_;
  FusionHead<T> head_;
};

// Index of the largest logit; ties resolve to the lowest index.
template <typename T>
int argmax(const nn::RowVec<T>& logits) {
  int best = 0;
  for (int i = 1; i < logits.size(); ++i) {
    if (logits(i) > logits(best)) best = i;
  }
  return best;
}

}  // namespace geofuse
