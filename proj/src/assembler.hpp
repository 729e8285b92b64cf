#pragma once

#include <string>
#include <vector>

#include "autodiff.hpp"
#include "data_types.hpp"
#include "params.hpp"

namespace loga {

// Frame assembling strategies. `associative` is the full mechanism; the
// others are the ablation baselines. dual_branch and direct_connect are
// approximate reconstructions of the compared strategies (see README).
enum class Strategy {
  mean_pool,
  laq_only,
  gcq_only,
  dual_branch,
  direct_connect,
  associative,
};

const char* strategy_name(Strategy s);
Strategy strategy_from_name(const std::string& name);  // ErrCode::config on unknown name
inline constexpr int kNumStrategies = 6;
Strategy strategy_at(int index);

// Local aligned quality: cross-frame 1D convolution over the flattened
// spatial axis, stride = kernel width (non-overlapping parts), then
// part-mean, linear L->L, ReLU and softmax.
template <class T>
struct LaqParams {
  NodePtr<T> kernel;  // [L x L x S]
  NodePtr<T> mlp_w;   // [L x L]
  NodePtr<T> mlp_b;   // [L]
  long part_size = 0;

  static LaqParams create(long clip_len, long part_size, ParamStore<T>& store, Rng& rng);
};

// Global correlated quality: q/k/v linear maps D->D each followed by
// batchnorm, plus the residual fusion FC (zero-initialized).
template <class T>
struct GcqParams {
  NodePtr<T> wq, wk, wv;              // [D x D]
  NodePtr<T> bn_gamma[3], bn_beta[3]; // q, k, v
  Tensor<T>* bn_mean[3];
  Tensor<T>* bn_var[3];
  NodePtr<T> fc_w;  // [D x D], zero at init
  NodePtr<T> fc_b;  // [D], zero at init
  bool attention_scale = false;      // optional 1/sqrt(D) inside the softmax
  T bn_momentum = T(0.1);
  T bn_eps = T(1e-5);

  static GcqParams create(long feature_dim, ParamStore<T>& store, Rng& rng);
};

template <class T>
struct LaqScores {
  NodePtr<T> w_local;      // [L]
  NodePtr<T> part_scores;  // [M x L]
};

template <class T>
struct TrackletDescriptor {
  NodePtr<T> x;      // [D x 1] final representation
  NodePtr<T> p;      // [D x 1] local-assembled prototype (null for mean_pool)
  NodePtr<T> p_hat;  // [D x 1] globally aggregated feature (null when unused)
};

// laq_input: [L x H*W] (one channel-collapsed flattened frame per row)
template <class T>
LaqScores<T> laq_scores(const NodePtr<T>& laq_input, const LaqParams<T>& params);

// p = sum_i w_local[i] * e_i
template <class T>
NodePtr<T> prototype(const NodePtr<T>& E, const NodePtr<T>& w_local);

// attention pieces shared by the per-clip ops and the batched training path
template <class T>
NodePtr<T> correlation_weights(const NodePtr<T>& q, const NodePtr<T>& K, bool attention_scale);
template <class T>
NodePtr<T> weighted_aggregate(const NodePtr<T>& V, const NodePtr<T>& w);
template <class T>
NodePtr<T> residual_fuse(const NodePtr<T>& base, const NodePtr<T>& p_hat,
                         const GcqParams<T>& params);

// w_global = softmax(K^T q) with q = BN(Wq p), K = BN(Wk E)
template <class T>
NodePtr<T> gcq_scores(const NodePtr<T>& E, const NodePtr<T>& p, const GcqParams<T>& params,
                      Mode mode);

// V = BN(Wv E); p_hat = V w_global; x = p + FC(p_hat)
template <class T>
TrackletDescriptor<T> assemble(const NodePtr<T>& E, const NodePtr<T>& w_local,
                               const NodePtr<T>& w_global, const GcqParams<T>& params, Mode mode);

// Full per-clip pipeline for one strategy.
template <class T>
TrackletDescriptor<T> assemble_strategy(const NodePtr<T>& laq_input, const NodePtr<T>& E,
                                        const LaqParams<T>& laq, const GcqParams<T>& gcq,
                                        Strategy strategy, Mode mode);

// ---------------------------------------------------------------------------
// score-dump records (the `inspect` text format)
// ---------------------------------------------------------------------------

struct ScoreRecord {
  uint32_t clip_id = 0;
  uint32_t frame = 0;
  double w_local = 0;
  double w_global = 0;
  FrameFlag flag = FrameFlag::clean;
};

// CSV with header "clip,frame,w_local,w_global,flag"; the flag column is
// empty for clean frames; a "# clip <id> ..." summary comment follows each
// clip. amplify=true multiplies the scores by 1000.
std::string format_score_records(const std::vector<ScoreRecord>& records, bool amplify);
std::vector<ScoreRecord> parse_score_records(const std::string& text);

extern template struct LaqParams<float>;
extern template struct LaqParams<double>;
extern template struct GcqParams<float>;
extern template struct GcqParams<double>;

}  // namespace loga
