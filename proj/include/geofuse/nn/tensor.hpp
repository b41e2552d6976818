#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <deque>
#include <string>
#include <string_view>

namespace geofuse::nn {

using Index = Eigen::Index;

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T>
using RowVec = Eigen::Matrix<T, 1, Eigen::Dynamic>;

// A learnable array with its accumulated gradient. Biases and 1-D arrays are
// stored as 1 x n.
template <typename T>
struct Param {
  std::string name;
  Mat<T> value;
  Mat<T> grad;
  bool decay = true;  // subject to weight decay

  Index size() const { return value.size(); }
};

/// Owns every parameter of a model. Elements never move once added, so
/// layers keep raw pointers into the store.
template <typename T>
class ParamStore {
 public:
  ParamStore() = default;
  ParamStore(const ParamStore&) = delete;
  ParamStore& operator=(const ParamStore&) = delete;

  Param<T>* add(std::string name, Index rows, Index cols, bool decay) {
    auto& p = params_.emplace_back();
    p.name = std::move(name);
    p.value = Mat<T>::Zero(rows, cols);
    p.grad = Mat<T>::Zero(rows, cols);
    p.decay = decay;
    return &p;
  }

  std::deque<Param<T>>& params() { return params_; }
  const std::deque<Param<T>>& params() const { return params_; }

  Param<T>* find(std::string_view name) {
    for (auto& p : params_) {
      if (p.name == name) return &p;
    }
    return nullptr;
  }

  void zero_grad() {
    for (auto& p : params_) p.grad.setZero();
  }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += static_cast<std::size_t>(p.value.size());
    return n;
  }

 private:
  std::deque<Param<T>> params_;
};

}  // namespace geofuse::nn
