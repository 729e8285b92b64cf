#include "assembler.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace loga {

const char* strategy_name(Strategy s) {
  switch (s) {
    case Strategy::mean_pool: return "mean_pool";
    case Strategy::laq_only: return "laq_only";
    case Strategy::gcq_only: return "gcq_only";
    case Strategy::dual_branch: return "dual_branch";
    case Strategy::direct_connect: return "direct_connect";
    case Strategy::associative: return "associative";
  }
  return "?";
}

Strategy strategy_from_name(const std::string& name) {
  for (int i = 0; i < kNumStrategies; ++i)
    if (name == strategy_name(strategy_at(i))) return strategy_at(i);
  raise(ErrCode::config, "unknown strategy '", name,
        "' (expected mean_pool, laq_only, gcq_only, dual_branch, direct_connect or associative)");
}

Strategy strategy_at(int index) {
  static constexpr Strategy all[] = {Strategy::mean_pool,   Strategy::laq_only,
                                     Strategy::gcq_only,    Strategy::dual_branch,
                                     Strategy::direct_connect, Strategy::associative};
  require(index >= 0 && index < kNumStrategies, ErrCode::config, "strategy index out of range");
  return all[index];
}

template <class T>
LaqParams<T> LaqParams<T>::create(long clip_len, long part_size, ParamStore<T>& store, Rng& rng) {
  require(clip_len >= 1 && part_size >= 1, ErrCode::config,
          "LAQ needs positive clip length and part size");
  LaqParams<T> p;
  p.part_size = part_size;
  p.kernel = store.add_param(
      "laq.kernel", uniform_init<T>({clip_len, clip_len, part_size}, clip_len * part_size, rng));
  p.mlp_w = store.add_param("laq.mlp.w", uniform_init<T>({clip_len, clip_len}, clip_len, rng));
  p.mlp_b = store.add_param("laq.mlp.b", uniform_init<T>({clip_len}, clip_len, rng));
  return p;
}

template <class T>
GcqParams<T> GcqParams<T>::create(long feature_dim, ParamStore<T>& store, Rng& rng) {
  GcqParams<T> p;
  const char* names[3] = {"q", "k", "v"};
  NodePtr<T>* weights[3] = {&p.wq, &p.wk, &p.wv};
  for (int i = 0; i < 3; ++i) {
    *weights[i] = store.add_param(std::string("gcq.") + names[i] + ".w",
                                  uniform_init<T>({feature_dim, feature_dim}, feature_dim, rng));
    std::string bn = std::string("gcq.bn_") + names[i];
    p.bn_gamma[i] = store.add_param(bn + ".gamma", Tensor<T>::full({feature_dim}, T(1)));
    p.bn_beta[i] = store.add_param(bn + ".beta", Tensor<T>::zeros({feature_dim}));
    p.bn_mean[i] = store.add_buffer(bn + ".running_mean", Tensor<T>::zeros({feature_dim}));
    p.bn_var[i] = store.add_buffer(bn + ".running_var", Tensor<T>::full({feature_dim}, T(1)));
  }
  // zero-initialized so training starts from the pure local-assembled prototype
  p.fc_w = store.add_param("gcq.fc.w", Tensor<T>::zeros({feature_dim, feature_dim}));
  p.fc_b = store.add_param("gcq.fc.b", Tensor<T>::zeros({feature_dim}));
  return p;
}

template struct LaqParams<float>;
template struct LaqParams<double>;
template struct GcqParams<float>;
template struct GcqParams<double>;

template <class T>
LaqScores<T> laq_scores(const NodePtr<T>& laq_input, const LaqParams<T>& params) {
  require(laq_input->value.rank() == 2, ErrCode::dim, "laq_scores: input must be [L x H*W]");
  long l = laq_input->value.extent(0);
  long hw = laq_input->value.extent(1);
  require(params.kernel->value.extent(0) == l, ErrCode::config,
          "laq_scores: clip length ", l, " does not match kernel ",
          params.kernel->value.shape_str());
  require(hw >= params.part_size, ErrCode::config, "laq_scores: spatial size ", hw,
          " smaller than part size ", params.part_size);
  // stride = part size: non-overlapping parts, trailing remainder dropped
  auto conv = conv1d(laq_input, params.kernel, params.part_size);  // [L x M]
  auto part_scores = transpose2d(conv);                            // [M x L]
  auto pooled = mean_axis(part_scores, 0);                         // [L]
  auto z = add_bias_cols(matmul(params.mlp_w, reshape(pooled, {l, 1})), params.mlp_b);
  auto w = softmax_vec(flatten(relu(z)));
  return {w, part_scores};
}

template <class T>
NodePtr<T> prototype(const NodePtr<T>& E, const NodePtr<T>& w_local) {
  long l = E->value.extent(1);
  require(w_local->value.size() == l, ErrCode::dim, "prototype: weights ",
          w_local->value.shape_str(), " vs E ", E->value.shape_str());
  return matmul(E, reshape(w_local, {l, 1}));  // [D x 1]
}

namespace {

template <class T>
NodePtr<T> bn_branch(const NodePtr<T>& x, const GcqParams<T>& p, int which, Mode mode) {
  return batchnorm(x, p.bn_gamma[which], p.bn_beta[which], p.bn_mean[which], p.bn_var[which],
                   mode, p.bn_momentum, p.bn_eps);
}

template <class T>
NodePtr<T> uniform_weights(long l) {
  return constant(Tensor<T>::full({l}, T(1) / static_cast<T>(l)));
}

}  // namespace

template <class T>
NodePtr<T> correlation_weights(const NodePtr<T>& q, const NodePtr<T>& K, bool attention_scale) {
  auto logits = flatten(matmul(transpose2d(K), q));  // [L]
  if (attention_scale)
    logits = scale(logits, T(1) / std::sqrt(static_cast<T>(K->value.extent(0))));
  return softmax_vec(logits);
}

template <class T>
NodePtr<T> weighted_aggregate(const NodePtr<T>& V, const NodePtr<T>& w) {
  return matmul(V, reshape(w, {w->value.size(), 1}));  // [D x 1]
}

template <class T>
NodePtr<T> residual_fuse(const NodePtr<T>& base, const NodePtr<T>& p_hat,
                         const GcqParams<T>& params) {
  return add(base, add_bias_cols(matmul(params.fc_w, p_hat), params.fc_b));
}

template <class T>
NodePtr<T> gcq_scores(const NodePtr<T>& E, const NodePtr<T>& p, const GcqParams<T>& params,
                      Mode mode) {
  auto q = bn_branch(matmul(params.wq, p), params, 0, mode);
  auto K = bn_branch(matmul(params.wk, E), params, 1, mode);
  return correlation_weights(q, K, params.attention_scale);
}

template <class T>
TrackletDescriptor<T> assemble(const NodePtr<T>& E, const NodePtr<T>& w_local,
                               const NodePtr<T>& w_global, const GcqParams<T>& params,
                               Mode mode) {
  auto p = prototype(E, w_local);
  auto V = bn_branch(matmul(params.wv, E), params, 2, mode);
  auto p_hat = weighted_aggregate(V, w_global);
  auto x = residual_fuse(p, p_hat, params);
  return {x, p, p_hat};
}

template <class T>
TrackletDescriptor<T> assemble_strategy(const NodePtr<T>& laq_input, const NodePtr<T>& E,
                                        const LaqParams<T>& laq, const GcqParams<T>& gcq,
                                        Strategy strategy, Mode mode) {
  long d = E->value.extent(0);
  long l = E->value.extent(1);
  switch (strategy) {
    case Strategy::mean_pool: {
      auto x = reshape(mean_axis(E, 1), {d, 1});
      return {x, nullptr, nullptr};
    }
    case Strategy::laq_only: {
      auto w_l = laq_scores(laq_input, laq).w_local;
      auto p = prototype(E, w_l);
      return {p, p, nullptr};
    }
    case Strategy::gcq_only: {
      // LAQ ablated: the prototype degenerates to the uniform-weight mean
      auto u = uniform_weights<T>(l);
      auto w_g = gcq_scores(E, prototype(E, u), gcq, mode);
      return assemble(E, u, w_g, gcq, mode);
    }
    case Strategy::dual_branch: {
      auto w_l = laq_scores(laq_input, laq).w_local;
      auto p = prototype(E, w_l);
      auto u = uniform_weights<T>(l);
      auto w_g = gcq_scores(E, prototype(E, u), gcq, mode);
      auto global_desc = assemble(E, u, w_g, gcq, mode);
      return {add(p, global_desc.x), p, global_desc.p_hat};
    }
    case Strategy::direct_connect: {
      auto w_l = laq_scores(laq_input, laq).w_local;
      auto rescaled = scale_cols(E, scale(w_l, static_cast<T>(l)));
      auto u = uniform_weights<T>(l);
      auto w_g = gcq_scores(rescaled, prototype(rescaled, u), gcq, mode);
      return assemble(rescaled, u, w_g, gcq, mode);
    }
    case Strategy::associative: {
      auto w_l = laq_scores(laq_input, laq).w_local;
      auto p = prototype(E, w_l);
      auto w_g = gcq_scores(E, p, gcq, mode);
      return assemble(E, w_l, w_g, gcq, mode);
    }
  }
  raise(ErrCode::config, "unknown strategy");
}

std::string format_score_records(const std::vector<ScoreRecord>& records, bool amplify) {
  std::ostringstream os;
  os << "clip,frame,w_local,w_global,flag\n";
  double mult = amplify ? 1000.0 : 1.0;
  uint32_t current = records.empty() ? 0 : records.front().clip_id;
  double lmin = 1e300, lmax = -1e300, gmin = 1e300, gmax = -1e300;
  auto flush_summary = [&](uint32_t clip) {
    char line[160];
    std::snprintf(line, sizeof(line), "# clip %u ratio_local=%.6g ratio_global=%.6g\n", clip,
                  lmin > 0 ? lmax / lmin : 0.0, gmin > 0 ? gmax / gmin : 0.0);
    os << line;
  };
  for (size_t i = 0; i < records.size(); ++i) {
    const ScoreRecord& r = records[i];
    if (r.clip_id != current) {
      flush_summary(current);
      current = r.clip_id;
      lmin = gmin = 1e300;
      lmax = gmax = -1e300;
    }
    lmin = std::min(lmin, r.w_local);
    lmax = std::max(lmax, r.w_local);
    gmin = std::min(gmin, r.w_global);
    gmax = std::max(gmax, r.w_global);
    char line[160];
    std::snprintf(line, sizeof(line), "%u,%u,%.9g,%.9g,%s\n", r.clip_id, r.frame,
                  r.w_local * mult, r.w_global * mult,
                  r.flag == FrameFlag::clean ? "" : flag_name(r.flag));
    os << line;
  }
  if (!records.empty()) flush_summary(current);
  return os.str();
}

std::vector<ScoreRecord> parse_score_records(const std::string& text) {
  std::vector<ScoreRecord> out;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#' || line.rfind("clip,", 0) == 0) continue;
    ScoreRecord r;
    char flag[32] = {0};
    int n = std::sscanf(line.c_str(), "%u,%u,%lf,%lf,%31s", &r.clip_id, &r.frame, &r.w_local,
                        &r.w_global, flag);
    require(n >= 4, ErrCode::data, "malformed score record: ", line);
    std::string f(flag);
    if (f.empty() || f == "clean") r.flag = FrameFlag::clean;
    else if (f == "occluded") r.flag = FrameFlag::occluded;
    else if (f == "misaligned") r.flag = FrameFlag::misaligned;
    else if (f == "id_switch") r.flag = FrameFlag::id_switch;
    else raise(ErrCode::data, "unknown flag in score record: ", f);
    out.push_back(r);
  }
  return out;
}

// explicit instantiations
#define LOGA_INSTANTIATE(T)                                                                       \
  template LaqScores<T> laq_scores(const NodePtr<T>&, const LaqParams<T>&);                       \
  template NodePtr<T> prototype(const NodePtr<T>&, const NodePtr<T>&);                            \
  template NodePtr<T> correlation_weights(const NodePtr<T>&, const NodePtr<T>&, bool);            \
  template NodePtr<T> weighted_aggregate(const NodePtr<T>&, const NodePtr<T>&);                   \
  template NodePtr<T> residual_fuse(const NodePtr<T>&, const NodePtr<T>&, const GcqParams<T>&);   \
  template NodePtr<T> gcq_scores(const NodePtr<T>&, const NodePtr<T>&, const GcqParams<T>&,       \
                                 Mode);                                                           \
  template TrackletDescriptor<T> assemble(const NodePtr<T>&, const NodePtr<T>&,                   \
                                          const NodePtr<T>&, const GcqParams<T>&, Mode);          \
  template TrackletDescriptor<T> assemble_strategy(const NodePtr<T>&, const NodePtr<T>&,          \
                                                   const LaqParams<T>&, const GcqParams<T>&,      \
                                                   Strategy, Mode);

LOGA_INSTANTIATE(float)
LOGA_INSTANTIATE(double)
#undef LOGA_INSTANTIATE

}  // namespace loga
