#pragma once

#include <string>
#include <vector>

#include "geofuse/nn/layers.hpp"

namespace geofuse::nn {

/// Multi-head self-attention over an N x D token matrix with a fused QKV
/// projection. Scores are scaled by 1/sqrt(D / heads).
template <typename T>
class MultiHeadAttention {
 public:
  struct Cache {
    Mat<T> x;
    Mat<T> qkv;                 // N x 3D, blocks [Q | K | V]
    std::vector<Mat<T>> probs;  // per head, N x N, rows sum to 1
    Mat<T> context;             // N x D, heads concatenated
  };

  MultiHeadAttention() = default;
  MultiHeadAttention(ParamStore<T>& store, const std::string& name, int dim, int heads);

  void init(Rng& rng);

  Mat<T> forward(const Mat<T>& x, Cache* cache) const;
  Mat<T> backward(const Cache& cache, const Mat<T>& dy);

  int heads() const { return heads_; }

 private:
  int dim_ = 0;
  int heads_ = 1;
  Linear<T> qkv_;
  Linear<T> proj_;
};

// Pre-norm encoder block: x + MHA(LN(x)), then + MLP(LN(.)) with GELU.
template <typename T>
class TransformerBlock {
 public:
  struct Cache {
    typename LayerNorm<T>::Cache ln1;
    Mat<T> ln1_out;
    typename MultiHeadAttention<T>::Cache attn;
    Mat<T> x1;
    typename LayerNorm<T>::Cache ln2;
    Mat<T> ln2_out;
    Mat<T> hidden_pre;  // fc1 output before GELU
    Mat<T> hidden;      // after GELU
  };

  TransformerBlock() = default;
  TransformerBlock(ParamStore<T>& store, const std::string& name, int dim, int heads, int mlp_dim);

  void init(Rng& rng);

  Mat<T> forward(const Mat<T>& x, Cache* cache) const;
  Mat<T> backward(const Cache& cache, const Mat<T>& dy);

 private:
  LayerNorm<T> ln1_;
  MultiHeadAttention<T> attn_;
  LayerNorm<T> ln2_;
  Linear<T> fc1_;
  Linear<T> fc2_;
};

}  // namespace geofuse::nn
