#include "geofuse/nn/attention.hpp"

#include <cmath>

#include "geofuse/error.hpp"

namespace geofuse::nn {

template <typename T>
MultiHeadAttention<T>::MultiHeadAttention(ParamStore<T>& store, const std::string& name, int dim, int heads)
    : dim_(dim), heads_(heads), qkv_(store, name + ".qkv", dim, 3 * dim), proj_(store, name + ".proj", dim, dim) {
  if (heads <= 0 || dim % heads != 0) throw Error("attention: dim must be divisible by heads");
}

template <typename T>
void MultiHeadAttention<T>::init(Rng& rng) {
  Rng a = rng.split(0), b = rng.split(1);
  qkv_.init_trunc_normal(a, 0.02);
  proj_.init_trunc_normal(b, 0.02);
}

template <typename T>
Mat<T> MultiHeadAttention<T>::forward(const Mat<T>& x, Cache* cache) const {
  const Index n = x.rows();
  const int hd = dim_ / heads_;
  const T scale = T(1) / std::sqrt(static_cast<T>(hd));
  Mat<T> qkv = qkv_.forward(x);
  Mat<T> context(n, dim_);
  std::vector<Mat<T>> probs;
  if (cache) probs.reserve(heads_);
  for (int h = 0; h < heads_; ++h) {
    const auto q = qkv.middleCols(h * hd, hd);
    const auto k = qkv.middleCols(dim_ + h * hd, hd);
    const auto v = qkv.middleCols(2 * dim_ + h * hd, hd);
    Mat<T> s = (q * k.transpose()) * scale;
    for (Index i = 0; i < n; ++i) {
      const T m = s.row(i).maxCoeff();
      s.row(i) = (s.row(i).array() - m).exp().matrix();
      s.row(i) /= s.row(i).sum();
    }
    context.middleCols(h * hd, hd).noalias() = s * v;
    if (cache) probs.push_back(std::move(s));
  }
  Mat<T> y = proj_.forward(context);
  if (cache) {
    cache->x = x;
    cache->qkv = std::move(qkv);
    cache->probs = std::move(probs);
    cache->context = std::move(context);
  }
  return y;
}

template <typename T>
Mat<T> MultiHeadAttention<T>::backward(const Cache& cache, const Mat<T>& dy) {
  const Index n = cache.x.rows();
  const int hd = dim_ / heads_;
  const T scale = T(1) / std::sqrt(static_cast<T>(hd));
  const Mat<T> dcontext = proj_.backward(cache.context, dy);
  Mat<T> dqkv(n, 3 * dim_);
  for (int h = 0; h < heads_; ++h) {
    const auto q = cache.qkv.middleCols(h * hd, hd);
    const auto k = cache.qkv.middleCols(dim_ + h * hd, hd);
    const auto v = cache.qkv.middleCols(2 * dim_ + h * hd, hd);
    const Mat<T>& p = cache.probs[h];
    const auto dctx = dcontext.middleCols(h * hd, hd);
    const Mat<T> dp = dctx * v.transpose();
    dqkv.middleCols(2 * dim_ + h * hd, hd).noalias() = p.transpose() * dctx;
    // Softmax Jacobian, row by row.
    Mat<T> ds = p.cwiseProduct(dp);
    const Mat<T> row_dot = ds.rowwise().sum();
    ds -= (p.array().colwise() * row_dot.col(0).array()).matrix();
    ds *= scale;
    dqkv.middleCols(h * hd, hd).noalias() = ds * k;
    dqkv.middleCols(dim_ + h * hd, hd).noalias() = ds.transpose() * q;
  }
  return qkv_.backward(cache.x, dqkv);
}

template <typename T>
TransformerBlock<T>::TransformerBlock(ParamStore<T>& store, const std::string& name, int dim, int heads,
                                      int mlp_dim)
    : ln1_(store, name + ".ln1", dim),
      attn_(store, name + ".attn", dim, heads),
      ln2_(store, name + ".ln2", dim),
      fc1_(store, name + ".mlp.fc1", dim, mlp_dim),
      fc2_(store, name + ".mlp.fc2", mlp_dim, dim) {}

template <typename T>
void TransformerBlock<T>::init(Rng& rng) {
  Rng a = rng.split(0), b = rng.split(1), c = rng.split(2);
  attn_.init(a);
  fc1_.init_trunc_normal(b, 0.02);
  fc2_.init_trunc_normal(c, 0.02);
}

template <typename T>
Mat<T> TransformerBlock<T>::forward(const Mat<T>& x, Cache* cache) const {
  typename LayerNorm<T>::Cache ln1c, ln2c;
  typename MultiHeadAttention<T>::Cache attnc;
  Mat<T> a = ln1_.forward(x, cache ? &ln1c : nullptr);
  Mat<T> x1 = x + attn_.forward(a, cache ? &attnc : nullptr);
  Mat<T> b = ln2_.forward(x1, cache ? &ln2c : nullptr);
  Mat<T> pre = fc1_.forward(b);
  Mat<T> hidden = gelu(pre);
  Mat<T> y = x1 + fc2_.forward(hidden);
  if (cache) {
    cache->ln1 = std::move(ln1c);
    cache->ln1_out = std::move(a);
    cache->attn = std::move(attnc);
    cache->x1 = std::move(x1);
    cache->ln2 = std::move(ln2c);
    cache->ln2_out = std::move(b);
    cache->hidden_pre = std::move(pre);
    cache->hidden = std::move(hidden);
  }
  return y;
}

template <typename T>
Mat<T> TransformerBlock<T>::backward(const Cache& cache, const Mat<T>& dy) {
  const Mat<T> dhidden = fc2_.backward(cache.hidden, dy);
  const Mat<T> dpre = gelu_backward(cache.hidden_pre, dhidden);
  const Mat<T> db = fc1_.backward(cache.ln2_out, dpre);
  const Mat<T> dx1 = dy + ln2_.backward(cache.ln2, db);
  const Mat<T> da = attn_.backward(cache.attn, dx1);
  return dx1 + ln1_.backward(cache.ln1, da);
}

template class MultiHeadAttention<float>;
template class MultiHeadAttention<double>;
template class TransformerBlock<float>;
template class TransformerBlock<double>;

}  // namespace geofuse::nn
