#pragma once

#include <vector>

#include "autodiff.hpp"
#include "params.hpp"
#include "rng.hpp"

namespace loga {

enum class TripletMining { random, batch_hard };

// linear classifier D -> C for the identity loss
template <class T>
struct Classifier {
  NodePtr<T> w;  // [C x D]
  NodePtr<T> b;  // [C]

  static Classifier create(long feature_dim, long num_classes, ParamStore<T>& store, Rng& rng);
  long num_classes() const { return w->value.extent(0); }
};

// -log softmax(FC(x))[y], log-sum-exp stabilized. x is a [D x 1] column.
template <class T>
NodePtr<T> id_loss(const NodePtr<T>& x, long label, const Classifier<T>& cls);

// max(0, margin + d(a, pos) - d(a, neg)) with Euclidean d
template <class T>
NodePtr<T> triplet_loss(const NodePtr<T>& anchor, const NodePtr<T>& positive,
                        const NodePtr<T>& negative, T margin);

template <class T>
struct BatchLossResult {
  NodePtr<T> total;       // (1/n) sum_i (id_i + trip_i)
  double id_component = 0;
  double triplet_component = 0;
  int missing_triplets = 0;  // anchors without a valid positive or negative
};

// Mean over the batch of id_loss + triplet_loss. Triplet partners come from
// the batch itself: for each anchor, in batch order, one positive index and
// one negative index are drawn from the step rng (random mining), or the
// hardest positive / hardest negative are picked (batch_hard). Anchors
// without a valid partner contribute only their id term.
template <class T>
BatchLossResult<T> batch_loss(const std::vector<NodePtr<T>>& descriptors,
                              const std::vector<long>& labels, const Classifier<T>& cls,
                              T margin, Rng& step_rng,
                              TripletMining mining = TripletMining::random);

extern template struct Classifier<float>;
extern template struct Classifier<double>;

}  // namespace loga
