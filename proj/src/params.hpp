#pragma once

#include <deque>
#include <string>
#include <utility>
#include <vector>

#include "autodiff.hpp"
#include "rng.hpp"

namespace loga {

// Named parameter tensors (autodiff leaves) plus non-trainable buffers
// (batchnorm running statistics). Insertion order is preserved so that
// initialization, optimizer updates and checkpoints are reproducible.
// Buffers live in a deque: batchnorm nodes hold raw pointers into it.
template <class T>
class ParamStore {
 public:
  NodePtr<T> add_param(const std::string& name, Tensor<T> init) {
    require(find_param(name) == nullptr, ErrCode::internal, "duplicate parameter ", name);
    params_.emplace_back(name, param(std::move(init)));
    return params_.back().second;
  }

  Tensor<T>* add_buffer(const std::string& name, Tensor<T> init) {
    require(find_buffer(name) == nullptr, ErrCode::internal, "duplicate buffer ", name);
    buffers_.emplace_back(name, std::move(init));
    return &buffers_.back().second;
  }

  NodePtr<T> find_param(const std::string& name) const {
    for (const auto& [n, p] : params_)
      if (n == name) return p;
    return nullptr;
  }

  Tensor<T>* find_buffer(const std::string& name) {
    for (auto& [n, b] : buffers_)
      if (n == name) return &b;
    return nullptr;
  }

  const std::vector<std::pair<std::string, NodePtr<T>>>& params() const { return params_; }
  std::vector<std::pair<std::string, NodePtr<T>>>& params() { return params_; }
  const std::deque<std::pair<std::string, Tensor<T>>>& buffers() const { return buffers_; }
  std::deque<std::pair<std::string, Tensor<T>>>& buffers() { return buffers_; }

  void zero_grads() {
    for (auto& [n, p] : params_) zero_grad(p);
  }

  long total_size() const {
    long s = 0;
    for (const auto& [n, p] : params_) s += p->value.size();
    return s;
  }

 private:
  std::vector<std::pair<std::string, NodePtr<T>>> params_;
  std::deque<std::pair<std::string, Tensor<T>>> buffers_;
};

// uniform(-1/sqrt(fan_in), +1/sqrt(fan_in))
template <class T>
Tensor<T> uniform_init(std::vector<long> shape, long fan_in, Rng& rng) {
  Tensor<T> t(std::move(shape));
  double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (long i = 0; i < t.size(); ++i) t[i] = static_cast<T>(rng.uniform(-bound, bound));
  return t;
}

}  // namespace loga
