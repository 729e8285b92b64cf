#include "optimizer.hpp"

#include <cmath>

namespace loga {

template <class T>
AdamW<T>::AdamW(const ParamStore<T>& store, double beta1, double beta2, double eps,
                double weight_decay)
    : beta1_(beta1), beta2_(beta2), eps_(eps), weight_decay_(weight_decay) {
  for (const auto& [name, p] : store.params()) {
    m_.push_back(Tensor<T>::zeros(p->value.shape()));
    v_.push_back(Tensor<T>::zeros(p->value.shape()));
  }
}

template <class T>
void AdamW<T>::step(ParamStore<T>& store, double lr) {
  require(m_.size() == store.params().size(), ErrCode::internal,
          "optimizer state does not match the parameter store");
  ++step_;
  double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(step_));
  double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(step_));
  for (size_t k = 0; k < m_.size(); ++k) {
    auto& p = store.params()[k].second;
    const bool has_grad = p->has_grad;
    Tensor<T>& m = m_[k];
    Tensor<T>& v = v_[k];
    for (long i = 0; i < p->value.size(); ++i) {
      double g = has_grad ? static_cast<double>(p->grad[i]) : 0.0;
      double mi = beta1_ * static_cast<double>(m[i]) + (1.0 - beta1_) * g;
      double vi = beta2_ * static_cast<double>(v[i]) + (1.0 - beta2_) * g * g;
      m[i] = static_cast<T>(mi);
      v[i] = static_cast<T>(vi);
      double update = (mi / bc1) / (std::sqrt(vi / bc2) + eps_) +
                      weight_decay_ * static_cast<double>(p->value[i]);
      p->value[i] = static_cast<T>(static_cast<double>(p->value[i]) - lr * update);
    }
  }
}

double scheduled_lr(double base, double factor, int every, int epoch) {
  require(every >= 1, ErrCode::config, "lr decay interval must be >= 1");
  return base * std::pow(factor, static_cast<double>(epoch / every));
}

template class AdamW<float>;
template class AdamW<double>;

}  // namespace loga
