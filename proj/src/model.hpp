#pragma once

#include <utility>
#include <vector>

#include "assembler.hpp"
#include "encoder.hpp"
#include "objectives.hpp"

namespace loga {

struct ModelConfig {
  int feature_dim = 64;  // D
  int clip_len = 10;     // L
  int part_size = 10;    // S
  int height = 32;
  int width = 16;
  int channels = 1;
  int num_classes = 1;   // C, train identities
  Strategy strategy = Strategy::associative;
  bool attention_scale = false;
};

// The full tracklet representation model: encoder + LAQ + GCQ + classifier.
// forward_clip handles a single clip; forward_batch runs a whole mini-batch
// so that the batchnorm statistics cover every frame of every clip in the
// step (per-clip and batched paths agree in eval mode, where frozen running
// statistics are used).
template <class T>
class LogaModel {
 public:
  LogaModel(const ModelConfig& config, uint64_t seed);

  const ModelConfig& config() const { return config_; }
  ParamStore<T>& store() { return store_; }
  const ParamStore<T>& store() const { return store_; }
  const Encoder<T>& encoder() const { return encoder_; }
  const LaqParams<T>& laq() const { return laq_; }
  const GcqParams<T>& gcq() const { return gcq_; }
  const Classifier<T>& classifier() const { return classifier_; }

  TrackletDescriptor<T> forward_clip(const std::vector<float>& pixels, Mode mode) const {
    return forward_clip(pixels, mode, config_.strategy);
  }
  TrackletDescriptor<T> forward_clip(const std::vector<float>& pixels, Mode mode,
                                     Strategy strategy) const;

  std::vector<TrackletDescriptor<T>> forward_batch(
      const std::vector<const std::vector<float>*>& clips, Mode mode) const {
    return forward_batch(clips, mode, config_.strategy);
  }
  std::vector<TrackletDescriptor<T>> forward_batch(
      const std::vector<const std::vector<float>*>& clips, Mode mode, Strategy strategy) const;

  // per-frame LAQ / GCQ importance scores of one clip (w_local, w_global)
  std::pair<std::vector<double>, std::vector<double>> scores_for_clip(
      const std::vector<float>& pixels, Mode mode) const;

 private:
  ModelConfig config_;
  ParamStore<T> store_;
  Rng init_rng_;  // consumed during construction; member order matters here
  Encoder<T> encoder_;
  LaqParams<T> laq_;
  GcqParams<T> gcq_;
  Classifier<T> classifier_;
};

extern template class LogaModel<float>;
extern template class LogaModel<double>;

}  // namespace loga
