#include "geofuse/model.hpp"

#include <cmath>

#include "geofuse/error.hpp"

namespace geofuse {

using nn::Index;
using nn::Mat;
using nn::RowVec;

std::string_view mode_name(Mode m) { return m == Mode::Baseline ? "baseline" : "kgml"; }

Mode parse_mode(std::string_view s) {
  if (s == "baseline") return Mode::Baseline;
  if (s == "kgml") return Mode::Kgml;
  throw Error("unknown mode '" + std::string(s) + "' (expected baseline or kgml)");
}

std::string_view pooling_name(Pooling p) { return p == Pooling::MeanTokens ? "mean_tokens" : "cls_token"; }

Pooling parse_pooling(std::string_view s) {
  if (s == "mean_tokens") return Pooling::MeanTokens;
  if (s == "cls_token") return Pooling::ClsToken;
  throw Error("unknown pooling '" + std::string(s) + "' (expected mean_tokens or cls_token)");
}

std::string_view cnn_input_name(CnnInput c) { return c == CnnInput::Mask ? "mask" : "image_mask"; }

CnnInput parse_cnn_input(std::string_view s) {
  if (s == "mask") return CnnInput::Mask;
  if (s == "image_mask") return CnnInput::ImageAndMask;
  throw Error("unknown cnn_input '" + std::string(s) + "' (expected mask or image_mask)");
}

void CnnConfig::validate() const {
  if (conv1_filters != 64 || conv2_filters != 128 || kernel != 3 || output_grid != 14) {
    throw Error("cnn: filter counts 64/128, 3x3 kernels and a 14x14 output grid are fixed");
  }
  if (in_channels != 1 && in_channels != 3 && in_channels != 4) {
    throw Error("cnn: in_channels must be 1, 3 or 4");
  }
}

int VitConfig::mlp_dim() const { return static_cast<int>(std::lround(embed_dim * mlp_ratio)); }

void VitConfig::validate() const {
  if (image_size <= 0 || patch_size <= 0 || image_size % patch_size != 0) {
    throw Error("vit: image_size must be a positive multiple of patch_size");
  }
  if (embed_dim <= 0 || heads <= 0 || embed_dim % heads != 0) {
    throw Error("vit: embed_dim must be divisible by heads");
  }
  if (depth < 0) throw Error("vit: depth must be non-negative");
  if (!(mlp_ratio > 0) || mlp_dim() <= 0) throw Error("vit: mlp_ratio must be positive");
}

void FusionConfig::validate() const {
  if (vit_dim <= 0 || cnn_dim <= 0) throw Error("fusion: feature widths must be positive");
  if (reduced_dim <= 0) throw Error("fusion: reduced_dim must be positive");
  if (n_classes != static_cast<int>(kNumClasses)) throw Error("fusion: exactly five classes");
}

CnnConfig ModelConfig::cnn() const {
  CnnConfig c;
  if (mode == Mode::Baseline) {
    c.in_channels = 3;
  } else {
    c.in_channels = cnn_input == CnnInput::Mask ? 1 : 4;
  }
  return c;
}

FusionConfig ModelConfig::fusion() const {
  FusionConfig f;
  f.vit_dim = vit.embed_dim;
  f.cnn_dim = cnn().conv2_filters;
  f.reduced_dim = reduced_dim;
  return f;
}

void ModelConfig::validate() const {
  vit.validate();
  cnn().validate();
  fusion().validate();
  if (vit.image_size < CnnConfig::kMinInput) {
    throw Error("image_size must be at least " + std::to_string(CnnConfig::kMinInput));
  }
  if (mode == Mode::Baseline && cnn_input != CnnInput::Mask) {
    throw Error("cnn_input=image_mask is only meaningful in kgml mode");
  }
}

std::size_t param_count(const ModelConfig& config) {
  config.validate();
  const auto cnn = config.cnn();
  const std::size_t k2 = static_cast<std::size_t>(cnn.kernel) * cnn.kernel;
  std::size_t n = 0;
  n += static_cast<std::size_t>(cnn.in_channels) * cnn.conv1_filters * k2 + cnn.conv1_filters;
  n += static_cast<std::size_t>(cnn.conv1_filters) * cnn.conv2_filters * k2 + cnn.conv2_filters;

  const auto& v = config.vit;
  const std::size_t d = v.embed_dim;
  const std::size_t m = v.mlp_dim();
  const std::size_t patch_in = 3ULL * v.patch_size * v.patch_size;
  n += patch_in * d + d;                      // patch embedding
  n += d;                                     // class token
  n += (static_cast<std::size_t>(v.n_patches()) + 1) * d;  // position embedding
  const std::size_t block = 2 * d             // ln1
                            + d * 3 * d + 3 * d  // qkv
                            + d * d + d          // proj
                            + 2 * d              // ln2
                            + d * m + m          // fc1
                            + m * d + d;         // fc2
  n += static_cast<std::size_t>(v.depth) * block;
  n += 2 * d;  // final norm

  const auto f = config.fusion();
  n += static_cast<std::size_t>(f.fused_dim()) * f.reduced_dim + f.reduced_dim;
  n += static_cast<std::size_t>(f.reduced_dim) * f.n_classes + f.n_classes;
  return n;
}

template <typename T>
RowVec<T> pool_cnn(const Mat<T>& map) {
  if (map.cols() == 0) throw Error("pool_cnn: empty map");
  return map.rowwise().mean().transpose();
}

template <typename T>
RowVec<T> fuse(const RowVec<T>& h_vit, const RowVec<T>& h_cnn, const FusionConfig& config) {
  if (h_vit.size() != config.vit_dim || h_cnn.size() != config.cnn_dim) {
    throw Error("fuse: expected widths " + std::to_string(config.vit_dim) + " + " +
                std::to_string(config.cnn_dim) + ", got " + std::to_string(h_vit.size()) + " + " +
                std::to_string(h_cnn.size()));
  }
  RowVec<T> z(h_vit.size() + h_cnn.size());
  z << h_vit, h_cnn;
  return z;
}

template <typename T>
Mat<T> to_planar(const ImageTensor& img) {
  Mat<T> out(img.channels, static_cast<Index>(img.pixels()));
  for (std::size_t i = 0; i < img.pixels(); ++i) {
    for (int c = 0; c < img.channels; ++c) {
      out(c, static_cast<Index>(i)) = static_cast<T>(img.data[i * img.channels + c]);
    }
  }
  return out;
}

template <typename T>
ModelInput<T> make_input(const ImageTensor& img, const std::optional<ImageTensor>& mask) {
  if (img.channels != 3) throw Error("model input image must have 3 channels");
  ModelInput<T> in;
  in.image = to_planar<T>(img);
  in.height = img.height;
  in.width = img.width;
  if (mask) {
    if (mask->channels != 1 || mask->height != img.height || mask->width != img.width) {
      throw Error("model input mask must be single-channel and match the image size");
    }
    in.mask = to_planar<T>(*mask);
  }
  return in;
}

// ---- CNN branch -------------------------------------------------------------

template <typename T>
CnnBranch<T>::CnnBranch(nn::ParamStore<T>& store, const CnnConfig& config)
    : config_(config),
      conv1_(store, "cnn.conv1", config.in_channels, config.conv1_filters, config.kernel),
      conv2_(store, "cnn.conv2", config.conv1_filters, config.conv2_filters, config.kernel) {
  config.validate();
}

template <typename T>
void CnnBranch<T>::init(Rng& rng) {
  Rng a = rng.split(0), b = rng.split(1);
  conv1_.init_fan_in_uniform(a);
  conv2_.init_fan_in_uniform(b);
}

template <typename T>
Mat<T> CnnBranch<T>::forward(const Mat<T>& x, int height, int width, Cache* cache) const {
  if (height < CnnConfig::kMinInput || width < CnnConfig::kMinInput) {
    throw Error("cnn_forward: input " + std::to_string(height) + "x" + std::to_string(width) +
                " is smaller than 28x28");
  }
  if (x.rows() != config_.in_channels) {
    throw Error("cnn_forward: expected " + std::to_string(config_.in_channels) + " channels, got " +
                std::to_string(x.rows()));
  }
  typename nn::Conv2d<T>::Cache c1, c2;
  typename nn::MaxPool2<T>::Cache pc;
  Mat<T> act1 = nn::relu<T>(conv1_.forward(x, height, width, cache ? &c1 : nullptr));
  Mat<T> pooled = nn::MaxPool2<T>::forward(act1, height, width, cache ? &pc : nullptr);
  const int ph = height / 2, pw = width / 2;
  Mat<T> pre2 = conv2_.forward(pooled, ph, pw, cache ? &c2 : nullptr);
  Mat<T> act2 = nn::relu<T>(pre2);
  Mat<T> map = nn::AdaptiveAvgPool<T>::forward(act2, ph, pw, config_.output_grid);
  if (cache) {
    cache->height = height;
    cache->width = width;
    cache->conv1 = std::move(c1);
    cache->act1 = std::move(act1);
    cache->pool = std::move(pc);
    cache->pooled = std::move(pooled);
    cache->conv2 = std::move(c2);
    cache->pre2 = std::move(pre2);
    cache->act2 = std::move(act2);
  }
  return map;
}

template <typename T>
Mat<T> CnnBranch<T>::from_conv2_preactivation(const Mat<T>& pre2, int height, int width) const {
  return nn::AdaptiveAvgPool<T>::forward(nn::relu<T>(pre2), height / 2, width / 2, config_.output_grid);
}

template <typename T>
void CnnBranch<T>::backward(const Cache& cache, const Mat<T>& dmap) {
  const int ph = cache.height / 2, pw = cache.width / 2;
  const Mat<T> dact2 = nn::AdaptiveAvgPool<T>::backward(dmap, ph, pw, config_.output_grid);
  const Mat<T> dpre2 = nn::relu_backward<T>(cache.act2, dact2);
  const Mat<T> dpooled = conv2_.backward(cache.conv2, dpre2, ph, pw, true);
  const Mat<T> dact1 = nn::MaxPool2<T>::backward(cache.pool, dpooled);
  const Mat<T> dpre1 = nn::relu_backward<T>(cache.act1, dact1);
  conv1_.backward(cache.conv1, dpre1, cache.height, cache.width, false);
}

// ---- ViT branch -------------------------------------------------------------

template <typename T>
VitBranch<T>::VitBranch(nn::ParamStore<T>& store, const VitConfig& config)
    : config_(config),
      patch_embed_(store, "vit.patch_embed", 3 * config.patch_size * config.patch_size, config.embed_dim) {
  config.validate();
  cls_token_ = store.add("vit.cls_token", 1, config.embed_dim, false);
  pos_embed_ = store.add("vit.pos_embed", config.n_patches() + 1, config.embed_dim, false);
  blocks_.reserve(config.depth);
  for (int i = 0; i < config.depth; ++i) {
    blocks_.emplace_back(store, "vit.block" + std::to_string(i), config.embed_dim, config.heads,
                         config.mlp_dim());
  }
  norm_ = nn::LayerNorm<T>(store, "vit.norm", config.embed_dim);
}

template <typename T>
void VitBranch<T>::init(Rng& rng) {
  Rng pe = rng.split(0), cls = rng.split(1), pos = rng.split(2);
  patch_embed_.init_trunc_normal(pe, 0.02);
  for (Index i = 0; i < cls_token_->value.size(); ++i) {
    cls_token_->value.data()[i] = static_cast<T>(cls.truncated_normal(0.02));
  }
  for (Index i = 0; i < pos_embed_->value.size(); ++i) {
    pos_embed_->value.data()[i] = static_cast<T>(pos.truncated_normal(0.02));
  }
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    Rng b = rng.split(100 + i);
    blocks_[i].init(b);
  }
}

template <typename T>
Mat<T> VitBranch<T>::patchify(const Mat<T>& image, int height, int width) const {
  if (height != config_.image_size || width != config_.image_size || image.rows() != 3) {
    throw Error("vit_forward: expected 3x" + std::to_string(config_.image_size) + "x" +
                std::to_string(config_.image_size) + " image, got " + std::to_string(image.rows()) + "x" +
                std::to_string(height) + "x" + std::to_string(width));
  }
  const int p = config_.patch_size, g = config_.grid();
  Mat<T> patches(config_.n_patches(), 3 * p * p);
  for (int gy = 0; gy < g; ++gy) {
    for (int gx = 0; gx < g; ++gx) {
      const Index row = static_cast<Index>(gy) * g + gx;
      for (int c = 0; c < 3; ++c) {
        for (int dy = 0; dy < p; ++dy) {
          for (int dx = 0; dx < p; ++dx) {
            patches(row, (static_cast<Index>(c) * p + dy) * p + dx) =
                image(c, static_cast<Index>(gy * p + dy) * width + gx * p + dx);
          }
        }
      }
    }
  }
  return patches;
}

template <typename T>
typename VitBranch<T>::Output VitBranch<T>::forward(const Mat<T>& image, int height, int width,
                                                    Cache* cache) const {
  Mat<T> patches = patchify(image, height, width);
  const Index n = config_.n_patches();
  Mat<T> x(n + 1, config_.embed_dim);
  x.row(0) = cls_token_->value.row(0);
  x.bottomRows(n) = patch_embed_.forward(patches);
  x += pos_embed_->value;
  std::vector<typename nn::TransformerBlock<T>::Cache> block_caches(cache ? blocks_.size() : 0);
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    x = blocks_[i].forward(x, cache ? &block_caches[i] : nullptr);
  }
  typename nn::LayerNorm<T>::Cache norm_cache;
  const Mat<T> normed = norm_.forward(x, cache ? &norm_cache : nullptr);
  Output out;
  out.tokens = normed.bottomRows(n);
  out.h_vit = config_.pooling == Pooling::MeanTokens ? RowVec<T>(out.tokens.colwise().mean())
                                                     : RowVec<T>(normed.row(0));
  if (cache) {
    cache->patches = std::move(patches);
    cache->blocks = std::move(block_caches);
    cache->norm = std::move(norm_cache);
  }
  return out;
}

template <typename T>
void VitBranch<T>::backward(const Cache& cache, const RowVec<T>& dh_vit) {
  const Index n = config_.n_patches();
  Mat<T> dnormed = Mat<T>::Zero(n + 1, config_.embed_dim);
  if (config_.pooling == Pooling::MeanTokens) {
    dnormed.bottomRows(n).rowwise() = dh_vit / static_cast<T>(n);
  } else {
    dnormed.row(0) = dh_vit;
  }
  Mat<T> dx = norm_.backward(cache.norm, dnormed);
  for (std::size_t i = blocks_.size(); i-- > 0;) dx = blocks_[i].backward(cache.blocks[i], dx);
  pos_embed_->grad += dx;
  cls_token_->grad.row(0) += dx.row(0);
  patch_embed_.backward(cache.patches, dx.bottomRows(n));
}

template <typename T>
std::vector<std::vector<Mat<T>>> VitBranch<T>::attention_maps(const Mat<T>& image, int height, int width) const {
  Cache cache;
  forward(image, height, width, &cache);
  std::vector<std::vector<Mat<T>>> maps;
  for (const auto& b : cache.blocks) maps.push_back(b.attn.probs);
  return maps;
}

// ---- fusion head ------------------------------------------------------------

template <typename T>
FusionHead<T>::FusionHead(nn::ParamStore<T>& store, const FusionConfig& config)
    : config_(config),
      fc1_(store, "head.fc1", config.fused_dim(), config.reduced_dim),
      fc2_(store, "head.fc2", config.reduced_dim, config.n_classes) {
  config.validate();
}

template <typename T>
void FusionHead<T>::init(Rng& rng) {
  Rng a = rng.split(0), b = rng.split(1);
  fc1_.init_trunc_normal(a, 0.02);
  fc2_.init_trunc_normal(b, 0.02);
}

template <typename T>
RowVec<T> FusionHead<T>::classify(const RowVec<T>& z, Cache* cache) const {
  if (z.size() != config_.fused_dim()) {
    throw Error("classify: expected fused width " + std::to_string(config_.fused_dim()) + ", got " +
                std::to_string(z.size()));
  }
  Mat<T> zm = z;
  Mat<T> hidden = nn::relu<T>(fc1_.forward(zm));
  RowVec<T> logits = fc2_.forward(hidden).row(0);
  if (cache) {
    cache->z = std::move(zm);
    cache->hidden = std::move(hidden);
  }
  return logits;
}

template <typename T>
RowVec<T> FusionHead<T>::backward(const Cache& cache, const RowVec<T>& dlogits) {
  const Mat<T> dl = dlogits;
  const Mat<T> dhidden = fc2_.backward(cache.hidden, dl);
  const Mat<T> dpre = nn::relu_backward<T>(cache.hidden, dhidden);
  return fc1_.backward(cache.z, dpre).row(0);
}

// ---- full model -------------------------------------------------------------

template <typename T>
FusionModel<T>::FusionModel(const ModelConfig& config, std::uint64_t seed)
    : config_(config), store_(std::make_unique<nn::ParamStore<T>>()) {
  config.validate();
  cnn_ = CnnBranch<T>(*store_, config.cnn());
  vit_ = VitBranch<T>(*store_, config.vit);
  head_ = FusionHead<T>(*store_, config.fusion());
  const Rng root(seed);
  Rng a = root.split(1), b = root.split(2), c = root.split(3);
  cnn_.init(a);
  vit_.init(b);
  head_.init(c);
}

template <typename T>
Mat<T> FusionModel<T>::cnn_input(const ModelInput<T>& input) const {
  if (config_.mode == Mode::Baseline) return input.image;
  if (!input.mask) throw Error("kgml mode requires a spatial mask");
  if (config_.cnn_input == CnnInput::Mask) return *input.mask;
  Mat<T> stacked(4, input.image.cols());
  stacked << input.image, *input.mask;
  return stacked;
}

template <typename T>
FeatureBundle<T> FusionModel<T>::features(const ModelInput<T>& input, Cache* cache) const {
  FeatureBundle<T> f;
  const Mat<T> cnn_in = cnn_input(input);
  auto vit_out = vit_.forward(input.image, input.height, input.width, cache ? &cache->vit : nullptr);
  f.tokens = std::move(vit_out.tokens);
  f.h_vit = std::move(vit_out.h_vit);
  f.cnn_map = cnn_.forward(cnn_in, input.height, input.width, cache ? &cache->cnn : nullptr);
  f.h_cnn = pool_cnn<T>(f.cnn_map);
  f.z = fuse<T>(f.h_vit, f.h_cnn, config_.fusion());
  return f;
}

template <typename T>
RowVec<T> FusionModel<T>::forward(const ModelInput<T>& input) const {
  return head_.classify(features(input).z, nullptr);
}

template <typename T>
T FusionModel<T>::accumulate_gradients(const ModelInput<T>& input, int target, T weight) {
  Cache cache;
  const auto f = features(input, &cache);
  const RowVec<T> logits = head_.classify(f.z, &cache.head);
  RowVec<T> dlogits;
  const T loss = nn::cross_entropy<T>(logits, target, weight, &dlogits);
  const RowVec<T> dz = head_.backward(cache.head, dlogits);
  const Index dv = f.h_vit.size();
  vit_.backward(cache.vit, dz.head(dv));
  const RowVec<T> dh_cnn = dz.tail(f.h_cnn.size());
  Mat<T> dmap(f.cnn_map.rows(), f.cnn_map.cols());
  dmap.colwise() = (dh_cnn / static_cast<T>(f.cnn_map.cols())).transpose();
  cnn_.backward(cache.cnn, dmap);
  return loss;
}

#define GEOFUSE_INSTANTIATE(T)                                                                 \
  template RowVec<T> pool_cnn<T>(const Mat<T>&);                                               \
  template RowVec<T> fuse<T>(const RowVec<T>&, const RowVec<T>&, const FusionConfig&);         \
  template Mat<T> to_planar<T>(const ImageTensor&);                                            \
  template ModelInput<T> make_input<T>(const ImageTensor&, const std::optional<ImageTensor>&); \
  template class CnnBranch<T>;                                                                 \
  template class VitBranch<T>;                                                                 \
  template class FusionHead<T>;                                                                \
  template class FusionModel<T>;

GEOFUSE_INSTANTIATE(float)
GEOFUSE_INSTANTIATE(double)

#undef GEOFUSE_INSTANTIATE

}  // namespace geofuse
