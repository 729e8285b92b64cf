#include "encoder.hpp"

namespace loga {

namespace {

long conv_out(long in, long k, long stride) { return (in - k) / stride + 1; }

}  // namespace

template <class T>
Encoder<T>::Encoder(int height, int width, int channels, int feature_dim, ParamStore<T>& store,
                    Rng& rng)
    : height_(height), width_(width), channels_(channels), feature_dim_(feature_dim) {
  require(channels == 1 || channels == 3, ErrCode::config, "encoder: channels must be 1 or 3");
  long h1 = conv_out(height, 3, 2), w1 = conv_out(width, 3, 2);
  require(height >= 3 && width >= 3 && h1 >= 3 && w1 >= 3, ErrCode::config,
          "encoder: frame ", height, "x", width, " too small for two 3x3 stride-2 convs");
  conv1_w_ = store.add_param(
      "enc.conv1.w", uniform_init<T>({kConv1Out, channels, 3, 3}, channels * 9, rng));
  conv1_b_ = store.add_param("enc.conv1.b", uniform_init<T>({kConv1Out}, channels * 9, rng));
  conv2_w_ = store.add_param(
      "enc.conv2.w", uniform_init<T>({kConv2Out, kConv1Out, 3, 3}, kConv1Out * 9, rng));
  conv2_b_ = store.add_param("enc.conv2.b", uniform_init<T>({kConv2Out}, kConv1Out * 9, rng));
  fc_w_ = store.add_param("enc.fc.w", uniform_init<T>({feature_dim, kConv2Out}, kConv2Out, rng));
  fc_b_ = store.add_param("enc.fc.b", uniform_init<T>({feature_dim}, kConv2Out, rng));
}

template <class T>
NodePtr<T> Encoder<T>::frame_tensor(const float* px) const {
  Tensor<T> t({channels_, height_, width_});
  for (long i = 0; i < t.size(); ++i) t[i] = static_cast<T>(px[i]);
  return constant(std::move(t));
}

template <class T>
NodePtr<T> Encoder<T>::encode_frame(const NodePtr<T>& frame) const {
  require(frame->value.rank() == 3 && frame->value.extent(0) == channels_ &&
              frame->value.extent(1) == height_ && frame->value.extent(2) == width_,
          ErrCode::config, "encoder: frame shape ", frame->value.shape_str(),
          " does not match configured ", channels_, "x", height_, "x", width_);
  auto biased = [](const NodePtr<T>& fm, const NodePtr<T>& b) {
    long c = fm->value.extent(0);
    long hw = fm->value.extent(1) * fm->value.extent(2);
    return add_bias_cols(reshape(fm, {c, hw}), b);
  };
  auto h1 = relu(biased(conv2d(frame, conv1_w_, 2), conv1_b_));
  long h1h = conv_out(height_, 3, 2), h1w = conv_out(width_, 3, 2);
  auto h2 = relu(biased(conv2d(reshape(h1, {kConv1Out, h1h, h1w}), conv2_w_, 2), conv2_b_));
  auto pooled = mean_axis(h2, 1);  // global average pool -> [16]
  auto col = add_bias_cols(matmul(fc_w_, reshape(pooled, {kConv2Out, 1})), fc_b_);
  return col;  // [D x 1]
}

template <class T>
NodePtr<T> Encoder<T>::encode_clip(const std::vector<float>& clip_pixels, long clip_len) const {
  long fp = static_cast<long>(channels_) * height_ * width_;
  require(static_cast<long>(clip_pixels.size()) == clip_len * fp, ErrCode::config,
          "encoder: clip has ", clip_pixels.size(), " values, expected ", clip_len * fp);
  std::vector<NodePtr<T>> cols;
  cols.reserve(static_cast<size_t>(clip_len));
  for (long f = 0; f < clip_len; ++f)
    cols.push_back(encode_frame(frame_tensor(clip_pixels.data() + f * fp)));
  return concat2d(cols, 1);  // [D x L]
}

template <class T>
Tensor<T> Encoder<T>::flatten_for_laq(const std::vector<float>& clip_pixels,
                                      long clip_len) const {
  long hw = static_cast<long>(height_) * width_;
  long fp = static_cast<long>(channels_) * hw;
  require(static_cast<long>(clip_pixels.size()) == clip_len * fp, ErrCode::config,
          "flatten_for_laq: clip has ", clip_pixels.size(), " values, expected ", clip_len * fp);
  Tensor<T> out({clip_len, hw});
  for (long f = 0; f < clip_len; ++f) {
    const float* frame = clip_pixels.data() + f * fp;
    for (long i = 0; i < hw; ++i) {
      T acc = 0;
      for (long c = 0; c < channels_; ++c) acc += static_cast<T>(frame[c * hw + i]);
      out.at(f, i) = acc / static_cast<T>(channels_);
    }
  }
  return out;
}

template class Encoder<float>;
template class Encoder<double>;

}  // namespace loga
