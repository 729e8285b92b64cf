#pragma once

#include "autodiff.hpp"
#include "data_types.hpp"
#include "params.hpp"

namespace loga {

// Per-frame visual encoder producing the holistic feature matrix E [D x L]
// for a clip. Stack: conv(Cc->8, 3x3, stride 2) -> ReLU ->
// conv(8->16, 3x3, stride 2) -> ReLU -> global average pool -> linear(16->D).
// Applied to each frame independently; column i of E embeds frame i.
template <class T>
class Encoder {
 public:
  static constexpr long kConv1Out = 8;
  static constexpr long kConv2Out = 16;

  Encoder(int height, int width, int channels, int feature_dim, ParamStore<T>& store, Rng& rng);

  // frame pixels as a [Cc x H x W] tensor -> feature column [D x 1]
  NodePtr<T> encode_frame(const NodePtr<T>& frame) const;

  // clip pixels (L*Cc*H*W floats) -> E [D x L]
  NodePtr<T> encode_clip(const std::vector<float>& clip_pixels, long clip_len) const;

  // frame tensor from raw pixels, shape-checked against the configuration
  NodePtr<T> frame_tensor(const float* px) const;

  // LAQ input: color channels collapsed by mean, frames flattened row-major
  // into a [L x H*W] matrix (row i is frame i)
  Tensor<T> flatten_for_laq(const std::vector<float>& clip_pixels, long clip_len) const;

  int height() const { return height_; }
  int width() const { return width_; }
  int channels() const { return channels_; }
  int feature_dim() const { return feature_dim_; }

 private:
  int height_, width_, channels_, feature_dim_;
  NodePtr<T> conv1_w_, conv1_b_, conv2_w_, conv2_b_, fc_w_, fc_b_;
};

extern template class Encoder<float>;
extern template class Encoder<double>;

}  // namespace loga
