#include "model.hpp"

namespace loga {

namespace {
constexpr uint64_t kTagInit = 0x1417b00c;
}

template <class T>
LogaModel<T>::LogaModel(const ModelConfig& config, uint64_t seed)
    : config_(config),
      store_(),
      init_rng_(mix_seed(seed, kTagInit)),
      encoder_(config.height, config.width, config.channels, config.feature_dim, store_,
               init_rng_),
      laq_(LaqParams<T>::create(config.clip_len, config.part_size, store_, init_rng_)),
      gcq_(GcqParams<T>::create(config.feature_dim, store_, init_rng_)),
      classifier_(
          Classifier<T>::create(config.feature_dim, config.num_classes, store_, init_rng_)) {
  gcq_.attention_scale = config.attention_scale;
}

template <class T>
TrackletDescriptor<T> LogaModel<T>::forward_clip(const std::vector<float>& pixels, Mode mode,
                                                 Strategy strategy) const {
  auto laq_input = constant(encoder_.flatten_for_laq(pixels, config_.clip_len));
  auto E = encoder_.encode_clip(pixels, config_.clip_len);
  return assemble_strategy(laq_input, E, laq_, gcq_, strategy, mode);
}

template <class T>
std::vector<TrackletDescriptor<T>> LogaModel<T>::forward_batch(
    const std::vector<const std::vector<float>*>& clips, Mode mode, Strategy strategy) const {
  require(!clips.empty(), ErrCode::data, "forward_batch: empty batch");
  size_t b = clips.size();
  long l = config_.clip_len;

  if (strategy == Strategy::mean_pool || strategy == Strategy::laq_only) {
    std::vector<TrackletDescriptor<T>> out;
    out.reserve(b);
    for (const auto* px : clips) out.push_back(forward_clip(*px, mode, strategy));
    return out;
  }

  // per-clip pieces feeding the shared batchnorm
  std::vector<NodePtr<T>> attended(b);  // A_i: key/value source matrix
  std::vector<NodePtr<T>> queries(b);   // g_i: query source column
  std::vector<NodePtr<T>> bases(b);     // residual base term
  std::vector<NodePtr<T>> extras(b);    // second branch (dual_branch only)
  auto uniform = constant(Tensor<T>::full({l}, T(1) / static_cast<T>(l)));

  for (size_t i = 0; i < b; ++i) {
    auto laq_input = constant(encoder_.flatten_for_laq(*clips[i], l));
    auto E = encoder_.encode_clip(*clips[i], l);
    switch (strategy) {
      case Strategy::associative: {
        auto w_l = laq_scores(laq_input, laq_).w_local;
        auto p = prototype(E, w_l);
        attended[i] = E;
        queries[i] = p;
        bases[i] = p;
        break;
      }
      case Strategy::gcq_only: {
        auto p_u = prototype(E, uniform);
        attended[i] = E;
        queries[i] = p_u;
        bases[i] = p_u;
        break;
      }
      case Strategy::dual_branch: {
        auto w_l = laq_scores(laq_input, laq_).w_local;
        auto p = prototype(E, w_l);
        auto p_u = prototype(E, uniform);
        attended[i] = E;
        queries[i] = p_u;
        bases[i] = p_u;
        extras[i] = p;
        break;
      }
      case Strategy::direct_connect: {
        auto w_l = laq_scores(laq_input, laq_).w_local;
        auto rescaled = scale_cols(E, scale(w_l, static_cast<T>(l)));
        auto p_m = prototype(rescaled, uniform);
        attended[i] = rescaled;
        queries[i] = p_m;
        bases[i] = p_m;
        break;
      }
      default:
        raise(ErrCode::config, "unknown strategy in forward_batch");
    }
  }

  // batch-level batchnorm: D channels normalized over all columns of the step
  auto G_all = concat2d(queries, 1);   // [D x B]
  auto A_all = concat2d(attended, 1);  // [D x L*B]
  auto bn = [&](const NodePtr<T>& x, int which) {
    return batchnorm(x, gcq_.bn_gamma[which], gcq_.bn_beta[which], gcq_.bn_mean[which],
                     gcq_.bn_var[which], mode, gcq_.bn_momentum, gcq_.bn_eps);
  };
  auto Q_all = bn(matmul(gcq_.wq, G_all), 0);
  auto K_all = bn(matmul(gcq_.wk, A_all), 1);
  auto V_all = bn(matmul(gcq_.wv, A_all), 2);

  std::vector<TrackletDescriptor<T>> out;
  out.reserve(b);
  for (size_t i = 0; i < b; ++i) {
    auto q = slice_cols(Q_all, static_cast<long>(i), 1);
    auto K = slice_cols(K_all, static_cast<long>(i) * l, l);
    auto V = slice_cols(V_all, static_cast<long>(i) * l, l);
    auto w_g = correlation_weights(q, K, gcq_.attention_scale);
    auto p_hat = weighted_aggregate(V, w_g);
    auto x = residual_fuse(bases[i], p_hat, gcq_);
    if (extras[i]) x = add(extras[i], x);
    out.push_back({x, extras[i] ? extras[i] : bases[i], p_hat});
  }
  return out;
}

template <class T>
std::pair<std::vector<double>, std::vector<double>> LogaModel<T>::scores_for_clip(
    const std::vector<float>& pixels, Mode mode) const {
  auto laq_input = constant(encoder_.flatten_for_laq(pixels, config_.clip_len));
  auto E = encoder_.encode_clip(pixels, config_.clip_len);
  auto w_l = laq_scores(laq_input, laq_).w_local;
  auto w_g = gcq_scores(E, prototype(E, w_l), gcq_, mode);
  std::vector<double> local(w_l->value.vec().begin(), w_l->value.vec().end());
  std::vector<double> global(w_g->value.vec().begin(), w_g->value.vec().end());
  return {std::move(local), std::move(global)};
}

template class LogaModel<float>;
template class LogaModel<double>;

}  // namespace loga
