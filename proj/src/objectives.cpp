#include "objectives.hpp"

#include <cmath>

namespace loga {

template <class T>
Classifier<T> Classifier<T>::create(long feature_dim, long num_classes, ParamStore<T>& store,
                                    Rng& rng) {
  require(num_classes >= 1, ErrCode::config, "classifier needs at least one class");
  Classifier<T> c;
  c.w = store.add_param("cls.w", uniform_init<T>({num_classes, feature_dim}, feature_dim, rng));
  c.b = store.add_param("cls.b", uniform_init<T>({num_classes}, feature_dim, rng));
  return c;
}

template struct Classifier<float>;
template struct Classifier<double>;

template <class T>
NodePtr<T> id_loss(const NodePtr<T>& x, long label, const Classifier<T>& cls) {
  long c = cls.num_classes();
  require(label >= 0 && label < c, ErrCode::data, "identity label ", label,
          " out of range [0,", c, ")");
  auto z = flatten(add_bias_cols(matmul(cls.w, x), cls.b));  // [C]
  // loss = logsumexp(z) - z[y], with the max folded out as a constant shift
  T m = z->value[0];
  for (long i = 1; i < c; ++i) m = std::max(m, z->value[i]);
  auto lse = add_scalar(log_el(reduce_sum(exp_el(add_scalar(z, -m)))), m);
  return sub(lse, select(z, label));
}

template <class T>
NodePtr<T> triplet_loss(const NodePtr<T>& anchor, const NodePtr<T>& positive,
                        const NodePtr<T>& negative, T margin) {
  require(margin >= T(0), ErrCode::config, "triplet margin must be non-negative");
  auto d_pos = euclidean_distance(anchor, positive);
  auto d_neg = euclidean_distance(anchor, negative);
  return relu(add_scalar(sub(d_pos, d_neg), margin));
}

namespace {

template <class T>
double plain_distance(const Tensor<T>& a, const Tensor<T>& b) {
  double s = 0;
  for (long i = 0; i < a.size(); ++i) {
    double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    s += d * d;
  }
  return std::sqrt(s);
}

}  // namespace

template <class T>
BatchLossResult<T> batch_loss(const std::vector<NodePtr<T>>& descriptors,
                              const std::vector<long>& labels, const Classifier<T>& cls,
                              T margin, Rng& step_rng, TripletMining mining) {
  size_t n = descriptors.size();
  require(n >= 1, ErrCode::data, "batch_loss: empty batch");
  require(labels.size() == n, ErrCode::data, "batch_loss: ", n, " descriptors but ",
          labels.size(), " labels");

  BatchLossResult<T> result;
  NodePtr<T> acc;
  for (size_t i = 0; i < n; ++i) {
    auto term = id_loss(descriptors[i], labels[i], cls);
    result.id_component += static_cast<double>(term->value[0]);

    std::vector<size_t> positives, negatives;
    for (size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      (labels[j] == labels[i] ? positives : negatives).push_back(j);
    }
    // negatives may include any index, positives must be a different sample
    if (!positives.empty() && !negatives.empty()) {
      size_t pos, neg;
      if (mining == TripletMining::random) {
        pos = positives[step_rng.below(static_cast<uint32_t>(positives.size()))];
        neg = negatives[step_rng.below(static_cast<uint32_t>(negatives.size()))];
      } else {
        pos = positives[0];
        neg = negatives[0];
        double dpos = plain_distance(descriptors[i]->value, descriptors[pos]->value);
        for (size_t j : positives) {
          double d = plain_distance(descriptors[i]->value, descriptors[j]->value);
          if (d > dpos) {
            dpos = d;
            pos = j;
          }
        }
        double dneg = plain_distance(descriptors[i]->value, descriptors[neg]->value);
        for (size_t j : negatives) {
          double d = plain_distance(descriptors[i]->value, descriptors[j]->value);
          if (d < dneg) {
            dneg = d;
            neg = j;
          }
        }
      }
      auto trip = triplet_loss(descriptors[i], descriptors[pos], descriptors[neg], margin);
      result.triplet_component += static_cast<double>(trip->value[0]);
      term = add(term, trip);
    } else {
      ++result.missing_triplets;
    }
    acc = acc ? add(acc, term) : term;
  }
  result.total = scale(acc, T(1) / static_cast<T>(n));
  result.id_component /= static_cast<double>(n);
  result.triplet_component /= static_cast<double>(n);
  return result;
}

#define LOGA_INSTANTIATE(T)                                                                   \
  template NodePtr<T> id_loss(const NodePtr<T>&, long, const Classifier<T>&);                 \
  template NodePtr<T> triplet_loss(const NodePtr<T>&, const NodePtr<T>&, const NodePtr<T>&,   \
                                   T);                                                        \
  template BatchLossResult<T> batch_loss(const std::vector<NodePtr<T>>&,                      \
                                         const std::vector<long>&, const Classifier<T>&, T,   \
                                         Rng&, TripletMining);

LOGA_INSTANTIATE(float)
LOGA_INSTANTIATE(double)
#undef LOGA_INSTANTIATE

}  // namespace loga
