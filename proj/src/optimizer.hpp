#pragma once

#include <vector>

#include "params.hpp"

namespace loga {

// Adam with decoupled weight decay:
//   theta -= lr * (m_hat / (sqrt(v_hat) + eps) + weight_decay * theta)
template <class T>
class AdamW {
 public:
  AdamW(const ParamStore<T>& store, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8,
        double weight_decay = 5e-4);

  // applies one update from the accumulated gradients; missing gradients
  // count as zero
  void step(ParamStore<T>& store, double lr);

  long step_count() const { return step_; }
  std::vector<Tensor<T>>& moments_m() { return m_; }
  std::vector<Tensor<T>>& moments_v() { return v_; }
  const std::vector<Tensor<T>>& moments_m() const { return m_; }
  const std::vector<Tensor<T>>& moments_v() const { return v_; }
  void restore_step_count(long t) { step_ = t; }

 private:
  double beta1_, beta2_, eps_, weight_decay_;
  long step_ = 0;
  std::vector<Tensor<T>> m_, v_;
};

// step-decay learning rate: base * factor^floor(epoch / every)
double scheduled_lr(double base, double factor, int every, int epoch);

extern template class AdamW<float>;
extern template class AdamW<double>;

}  // namespace loga
