#pragma once

#include <string>
#include <vector>

#include "geofuse/nn/tensor.hpp"
#include "geofuse/rng.hpp"

namespace geofuse::nn {

// Token-major tensors are N x D matrices; feature maps are C x (H*W) with
// row-major spatial order.

template <typename T>
class Linear {
 public:
  Linear() = default;
  Linear(ParamStore<T>& store, const std::string& name, int in, int out);

  int in_features() const { return in_; }
  int out_features() const { return out_; }

  void init_trunc_normal(Rng& rng, double stddev);

  Mat<T> forward(const Mat<T>& x) const;
  // Accumulates parameter gradients; returns dL/dx.
  Mat<T> backward(const Mat<T>& x, const Mat<T>& dy);

  Param<T>* weight = nullptr;  // out x in
  Param<T>* bias = nullptr;    // 1 x out

 private:
  int in_ = 0;
  int out_ = 0;
};

template <typename T>
class LayerNorm {
 public:
  struct Cache {
    Mat<T> xhat;
    Mat<T> rstd;  // N x 1
  };

  LayerNorm() = default;
  LayerNorm(ParamStore<T>& store, const std::string& name, int dim);

  Mat<T> forward(const Mat<T>& x, Cache* cache) const;
  Mat<T> backward(const Cache& cache, const Mat<T>& dy);

  Param<T>* gamma = nullptr;
  Param<T>* beta = nullptr;
  static constexpr double kEps = 1e-5;

 private:
  int dim_ = 0;
};

template <typename T>
Mat<T> relu(const Mat<T>& x);
// dL/dx given the forward output (positive where the input was positive).
template <typename T>
Mat<T> relu_backward(const Mat<T>& out, const Mat<T>& dy);

// Exact (erf) GELU.
template <typename T>
Mat<T> gelu(const Mat<T>& x);
template <typename T>
Mat<T> gelu_backward(const Mat<T>& x, const Mat<T>& dy);

/// 3x3 convolution, stride 1, zero "same" padding, lowered to im2col + GEMM.
template <typename T>
class Conv2d {
 public:
  struct Cache {
    Mat<T> cols;  // (in * k * k) x (H * W)
  };

  Conv2d() = default;
  Conv2d(ParamStore<T>& store, const std::string& name, int in_channels, int out_channels,
         int kernel = 3);

  // Uniform on +-1/sqrt(fan_in) for weights, zero bias.
  void init_fan_in_uniform(Rng& rng);

  int in_channels() const { return in_; }
  int out_channels() const { return out_; }

  Mat<T> forward(const Mat<T>& x, int height, int width, Cache* cache) const;
  // Returns dL/dx when `need_input_grad`, otherwise an empty matrix.
  Mat<T> backward(const Cache& cache, const Mat<T>& dy, int height, int width,
                  bool need_input_grad);

  Param<T>* weight = nullptr;  // out x (in * k * k), columns ordered (c, ky, kx)
  Param<T>* bias = nullptr;    // 1 x out

 private:
  int in_ = 0;
  int out_ = 0;
  int kernel_ = 3;
};

template <typename T>
Mat<T> im2col(const Mat<T>& x, int height, int width, int kernel);
template <typename T>
Mat<T> col2im(const Mat<T>& cols, int channels, int height, int width, int kernel);

// 2x2 max pooling with stride 2 (odd trailing rows/columns are dropped).
template <typename T>
struct MaxPool2 {
  struct Cache {
    std::vector<Index> argmax;  // flat input index per output cell
    int in_height = 0;
    int in_width = 0;
  };
  static Mat<T> forward(const Mat<T>& x, int height, int width, Cache* cache);
  static Mat<T> backward(const Cache& cache, const Mat<T>& dy);
};

// Adaptive average pooling to a fixed out x out grid. Window i covers
// [floor(i * in / out), ceil((i + 1) * in / out)).
template <typename T>
struct AdaptiveAvgPool {
  static Mat<T> forward(const Mat<T>& x, int height, int width, int out);
  static Mat<T> backward(const Mat<T>& dy, int height, int width, int out);
};

// Softmax cross-entropy for one sample. Writes dL/dlogits scaled by `weight`.
template <typename T>
T cross_entropy(const RowVec<T>& logits, int target, T weight, RowVec<T>* dlogits);

template <typename T>
RowVec<T> softmax(const RowVec<T>& logits);

}  // namespace geofuse::nn
