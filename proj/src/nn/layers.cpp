#include "geofuse/nn/layers.hpp"

#include <cmath>
#include <numbers>

#include "geofuse/error.hpp"

namespace geofuse::nn {

// ---- Linear ---------------------------------------------------------------

template <typename T>
Linear<T>::Linear(ParamStore<T>& store, const std::string& name, int in, int out) : in_(in), out_(out) {
  weight = store.add(name + ".weight", out, in, true);
  bias = store.add(name + ".bias", 1, out, false);
}

template <typename T>
void Linear<T>::init_trunc_normal(Rng& rng, double stddev) {
  for (Index i = 0; i < weight->value.size(); ++i) {
    weight->value.data()[i] = static_cast<T>(rng.truncated_normal(stddev));
  }
  bias->value.setZero();
}

template <typename T>
Mat<T> Linear<T>::forward(const Mat<T>& x) const {
  if (x.cols() != in_) {
    throw Error("linear: expected " + std::to_string(in_) + " input features, got " +
                std::to_string(x.cols()));
  }
  Mat<T> y = x * weight->value.transpose();
  y.rowwise() += bias->value.row(0);
  return y;
}

template <typename T>
Mat<T> Linear<T>::backward(const Mat<T>& x, const Mat<T>& dy) {
  weight->grad.noalias() += dy.transpose() * x;
  bias->grad.row(0) += dy.colwise().sum();
  return dy * weight->value;
}

// ---- LayerNorm ------------------------------------------------------------

template <typename T>
LayerNorm<T>::LayerNorm(ParamStore<T>& store, const std::string& name, int dim) : dim_(dim) {
  gamma = store.add(name + ".gamma", 1, dim, false);
  beta = store.add(name + ".beta", 1, dim, false);
  gamma->value.setOnes();
}

template <typename T>
Mat<T> LayerNorm<T>::forward(const Mat<T>& x, Cache* cache) const {
  const Index n = x.rows();
  Mat<T> xhat(n, dim_);
  Mat<T> rstd(n, 1);
  for (Index i = 0; i < n; ++i) {
    const T mean = x.row(i).mean();
    const T var = (x.row(i).array() - mean).square().mean();
    rstd(i, 0) = T(1) / std::sqrt(var + static_cast<T>(kEps));
    xhat.row(i) = (x.row(i).array() - mean) * rstd(i, 0);
  }
  Mat<T> y = (xhat.array().rowwise() * gamma->value.row(0).array()).matrix();
  y.rowwise() += beta->value.row(0);
  if (cache) {
    cache->xhat = std::move(xhat);
    cache->rstd = std::move(rstd);
  }
  return y;
}

template <typename T>
Mat<T> LayerNorm<T>::backward(const Cache& cache, const Mat<T>& dy) {
  gamma->grad.row(0) += (dy.array() * cache.xhat.array()).matrix().colwise().sum();
  beta->grad.row(0) += dy.colwise().sum();
  const Mat<T> dxhat = (dy.array().rowwise() * gamma->value.row(0).array()).matrix();
  Mat<T> dx(dy.rows(), dy.cols());
  for (Index i = 0; i < dy.rows(); ++i) {
    const T m1 = dxhat.row(i).mean();
    const T m2 = (dxhat.row(i).array() * cache.xhat.row(i).array()).mean();
    dx.row(i) = cache.rstd(i, 0) * (dxhat.row(i).array() - m1 - cache.xhat.row(i).array() * m2);
  }
  return dx;
}

// ---- activations ----------------------------------------------------------

template <typename T>
Mat<T> relu(const Mat<T>& x) {
  return x.cwiseMax(T(0));
}

template <typename T>
Mat<T> relu_backward(const Mat<T>& out, const Mat<T>& dy) {
  return (out.array() > T(0)).select(dy, T(0));
}

template <typename T>
Mat<T> gelu(const Mat<T>& x) {
  return x.unaryExpr([](T v) { return T(0.5) * v * (T(1) + std::erf(v / std::numbers::sqrt2_v<T>)); });
}

template <typename T>
Mat<T> gelu_backward(const Mat<T>& x, const Mat<T>& dy) {
  const T inv_sqrt_2pi = T(1) / std::sqrt(T(2) * std::numbers::pi_v<T>);
  const Mat<T> d = x.unaryExpr([&](T v) {
    const T cdf = T(0.5) * (T(1) + std::erf(v / std::numbers::sqrt2_v<T>));
    return cdf + v * inv_sqrt_2pi * std::exp(T(-0.5) * v * v);
  });
  return d.cwiseProduct(dy);
}

// ---- convolution ----------------------------------------------------------

template <typename T>
Mat<T> im2col(const Mat<T>& x, int height, int width, int kernel) {
  const int channels = static_cast<int>(x.rows());
  const int pad = kernel / 2;
  const Index hw = static_cast<Index>(height) * width;
  Mat<T> cols = Mat<T>::Zero(static_cast<Index>(channels) * kernel * kernel, hw);
  for (int c = 0; c < channels; ++c) {
    const T* src = x.row(c).data();
    for (int ky = 0; ky < kernel; ++ky) {
      for (int kx = 0; kx < kernel; ++kx) {
        T* dst = cols.row((static_cast<Index>(c) * kernel + ky) * kernel + kx).data();
        for (int y = 0; y < height; ++y) {
          const int sy = y + ky - pad;
          if (sy < 0 || sy >= height) continue;
          const int x_lo = std::max(0, pad - kx);
          const int x_hi = std::min(width, width + pad - kx);
          for (int xx = x_lo; xx < x_hi; ++xx) {
            dst[static_cast<Index>(y) * width + xx] = src[static_cast<Index>(sy) * width + xx + kx - pad];
          }
        }
      }
    }
  }
  return cols;
}

template <typename T>
Mat<T> col2im(const Mat<T>& cols, int channels, int height, int width, int kernel) {
  const int pad = kernel / 2;
  Mat<T> x = Mat<T>::Zero(channels, static_cast<Index>(height) * width);
  for (int c = 0; c < channels; ++c) {
    T* dst = x.row(c).data();
    for (int ky = 0; ky < kernel; ++ky) {
      for (int kx = 0; kx < kernel; ++kx) {
        const T* src = cols.row((static_cast<Index>(c) * kernel + ky) * kernel + kx).data();
        for (int y = 0; y < height; ++y) {
          const int sy = y + ky - pad;
          if (sy < 0 || sy >= height) continue;
          const int x_lo = std::max(0, pad - kx);
          const int x_hi = std::min(width, width + pad - kx);
          for (int xx = x_lo; xx < x_hi; ++xx) {
            dst[static_cast<Index>(sy) * width + xx + kx - pad] += src[static_cast<Index>(y) * width + xx];
          }
        }
      }
    }
  }
  return x;
}

template <typename T>
Conv2d<T>::Conv2d(ParamStore<T>& store, const std::string& name, int in_channels, int out_channels,
                  int kernel)
    : in_(in_channels), out_(out_channels), kernel_(kernel) {
  weight = store.add(name + ".weight", out_channels, static_cast<Index>(in_channels) * kernel * kernel, true);
  bias = store.add(name + ".bias", 1, out_channels, false);
}

template <typename T>
void Conv2d<T>::init_fan_in_uniform(Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in_ * kernel_ * kernel_));
  for (Index i = 0; i < weight->value.size(); ++i) {
    weight->value.data()[i] = static_cast<T>(rng.uniform(-bound, bound));
  }
  bias->value.setZero();
}

template <typename T>
Mat<T> Conv2d<T>::forward(const Mat<T>& x, int height, int width, Cache* cache) const {
  if (x.rows() != in_ || x.cols() != static_cast<Index>(height) * width) {
    throw Error("conv2d: input shape mismatch");
  }
  Mat<T> cols = im2col(x, height, width, kernel_);
  Mat<T> y = weight->value * cols;
  y.colwise() += bias->value.row(0).transpose();
  if (cache) cache->cols = std::move(cols);
  return y;
}

template <typename T>
Mat<T> Conv2d<T>::backward(const Cache& cache, const Mat<T>& dy, int height, int width,
                           bool need_input_grad) {
  weight->grad.noalias() += dy * cache.cols.transpose();
  bias->grad.row(0) += dy.rowwise().sum().transpose();
  if (!need_input_grad) return {};
  const Mat<T> dcols = weight->value.transpose() * dy;
  return col2im(dcols, in_, height, width, kernel_);
}

// ---- pooling --------------------------------------------------------------

template <typename T>
Mat<T> MaxPool2<T>::forward(const Mat<T>& x, int height, int width, Cache* cache) {
  const int oh = height / 2, ow = width / 2;
  Mat<T> y(x.rows(), static_cast<Index>(oh) * ow);
  if (cache) {
    cache->argmax.assign(static_cast<std::size_t>(x.rows() * oh * ow), 0);
    cache->in_height = height;
    cache->in_width = width;
  }
  for (Index c = 0; c < x.rows(); ++c) {
    const T* src = x.row(c).data();
    for (int y0 = 0; y0 < oh; ++y0) {
      for (int x0 = 0; x0 < ow; ++x0) {
        Index best = static_cast<Index>(2 * y0) * width + 2 * x0;
        for (int dy = 0; dy < 2; ++dy) {
          for (int dx = 0; dx < 2; ++dx) {
            const Index i = static_cast<Index>(2 * y0 + dy) * width + 2 * x0 + dx;
            if (src[i] > src[best]) best = i;
          }
        }
        const Index o = static_cast<Index>(y0) * ow + x0;
        y(c, o) = src[best];
        if (cache) cache->argmax[static_cast<std::size_t>(c * oh * ow + o)] = best;
      }
    }
  }
  return y;
}

template <typename T>
Mat<T> MaxPool2<T>::backward(const Cache& cache, const Mat<T>& dy) {
  Mat<T> dx = Mat<T>::Zero(dy.rows(), static_cast<Index>(cache.in_height) * cache.in_width);
  for (Index c = 0; c < dy.rows(); ++c) {
    for (Index o = 0; o < dy.cols(); ++o) {
      dx(c, cache.argmax[static_cast<std::size_t>(c * dy.cols() + o)]) += dy(c, o);
    }
  }
  return dx;
}

namespace {
int window_start(int i, int in, int out) { return (i * in) / out; }
int window_end(int i, int in, int out) { return ((i + 1) * in + out - 1) / out; }
}  // namespace

template <typename T>
Mat<T> AdaptiveAvgPool<T>::forward(const Mat<T>& x, int height, int width, int out) {
  Mat<T> y(x.rows(), static_cast<Index>(out) * out);
  for (Index c = 0; c < x.rows(); ++c) {
    const T* src = x.row(c).data();
    for (int i = 0; i < out; ++i) {
      const int y0 = window_start(i, height, out), y1 = window_end(i, height, out);
      for (int j = 0; j < out; ++j) {
        const int x0 = window_start(j, width, out), x1 = window_end(j, width, out);
        T sum = 0;
        for (int yy = y0; yy < y1; ++yy) {
          for (int xx = x0; xx < x1; ++xx) sum += src[static_cast<Index>(yy) * width + xx];
        }
        y(c, static_cast<Index>(i) * out + j) = sum / static_cast<T>((y1 - y0) * (x1 - x0));
      }
    }
  }
  return y;
}

template <typename T>
Mat<T> AdaptiveAvgPool<T>::backward(const Mat<T>& dy, int height, int width, int out) {
  Mat<T> dx = Mat<T>::Zero(dy.rows(), static_cast<Index>(height) * width);
  for (Index c = 0; c < dy.rows(); ++c) {
    T* dst = dx.row(c).data();
    for (int i = 0; i < out; ++i) {
      const int y0 = window_start(i, height, out), y1 = window_end(i, height, out);
      for (int j = 0; j < out; ++j) {
        const int x0 = window_start(j, width, out), x1 = window_end(j, width, out);
        const T g = dy(c, static_cast<Index>(i) * out + j) / static_cast<T>((y1 - y0) * (x1 - x0));
        for (int yy = y0; yy < y1; ++yy) {
          for (int xx = x0; xx < x1; ++xx) dst[static_cast<Index>(yy) * width + xx] += g;
        }
      }
    }
  }
  return dx;
}

// ---- loss -----------------------------------------------------------------

template <typename T>
RowVec<T> softmax(const RowVec<T>& logits) {
  const T m = logits.maxCoeff();
  RowVec<T> e = (logits.array() - m).exp().matrix();
  return e / e.sum();
}

template <typename T>
T cross_entropy(const RowVec<T>& logits, int target, T weight, RowVec<T>* dlogits) {
  if (target < 0 || target >= logits.size()) throw Error("cross_entropy: target out of range");
  const T m = logits.maxCoeff();
  const T lse = m + std::log((logits.array() - m).exp().sum());
  if (dlogits) {
    *dlogits = (logits.array() - lse).exp().matrix() * weight;
    (*dlogits)(target) -= weight;
  }
  return weight * (lse - logits(target));
}

#define GEOFUSE_INSTANTIATE(T)                                                      \
  template class Linear<T>;                                                         \
  template class LayerNorm<T>;                                                      \
  template class Conv2d<T>;                                                         \
  template struct MaxPool2<T>;                                                      \
  template struct AdaptiveAvgPool<T>;                                               \
  template Mat<T> relu<T>(const Mat<T>&);                                           \
  template Mat<T> relu_backward<T>(const Mat<T>&, const Mat<T>&);                   \
  template Mat<T> gelu<T>(const Mat<T>&);                                           \
  template Mat<T> gelu_backward<T>(const Mat<T>&, const Mat<T>&);                   \
  template Mat<T> im2col<T>(const Mat<T>&, int, int, int);                          \
  template Mat<T> col2im<T>(const Mat<T>&, int, int, int, int);                     \
  template RowVec<T> softmax<T>(const RowVec<T>&);                                  \
  template T cross_entropy<T>(const RowVec<T>&, int, T, RowVec<T>*);

GEOFUSE_INSTANTIATE(float)
GEOFUSE_INSTANTIATE(double)

#undef GEOFUSE_INSTANTIATE

}  // namespace geofuse::nn
