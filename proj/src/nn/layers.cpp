#include "liftkit/nn/layers.hpp"

#include <cmath>

#include "liftkit/error.hpp"

namespace liftkit::nn {

template <typename T>
LinearParams<T> make_linear(std::size_t in, std::size_t out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
  std::vector<T> w(in * out);
  for (T& x : w) x = static_cast<T>((2.0 * uniform01(rng) - 1.0) * limit);
  return {Tensor<T>::parameter({in, out}, std::move(w)), Tensor<T>::parameter({out}, std::vector<T>(out, T(0)))};
}

template <typename T>
NormParams<T> make_norm(std::size_t width) {
  return {Tensor<T>::parameter({width}, std::vector<T>(width, T(1))),
          Tensor<T>::parameter({width}, std::vector<T>(width, T(0)))};
}

template <typename T>
AttentionParams<T> make_attention(std::size_t width, Rng& rng) {
  AttentionParams<T> p;
  p.query = make_linear<T>(width, width, rng);
  p.key = make_linear<T>(width, width, rng);
  p.value = make_linear<T>(width, width, rng);
  p.output = make_linear<T>(width, width, rng);
  return p;
}

template <typename T>
FeedForwardParams<T> make_feed_forward(std::size_t width, std::size_t inner_width, Rng& rng) {
  FeedForwardParams<T> p;
  p.inner = make_linear<T>(width, inner_width, rng);
  p.outer = make_linear<T>(inner_width, width, rng);
  return p;
}

template <typename T>
Tensor<T> multi_head_attention(const Tensor<T>& x, const AttentionParams<T>& params, std::size_t heads,
                               std::size_t seq_len, bool causal) {
  const auto q = apply(params.query, x);
  const auto k = apply(params.key, x);
  const auto v = apply(params.value, x);
  return apply(params.output, attention(q, k, v, heads, seq_len, causal));
}

template <typename T>
Tensor<T> feed_forward(const Tensor<T>& x, const FeedForwardParams<T>& params) {
  return apply(params.outer, relu(apply(params.inner, x)));
}

template <typename T>
Tensor<T> encoder_block(const Tensor<T>& x, const EncoderBlockParams<T>& params, const BlockOptions& options,
                        Rng& rng) {
  const auto attended = multi_head_attention(x, params.attention, options.heads, options.seq_len, options.causal);
  const auto y = layer_norm(add(x, dropout(attended, options.dropout, options.training, rng)), params.norm1.gain,
                            params.norm1.bias);
  const auto transformed = feed_forward(y, params.ffn);
  return layer_norm(add(y, dropout(transformed, options.dropout, options.training, rng)), params.norm2.gain,
                    params.norm2.bias);
}

template <typename T>
Tensor<T> temporal_encoding(std::size_t length, std::size_t width) {
  if (width == 0 || width % 2 != 0) fail_config("temporal_encoding: width must be even, got " + std::to_string(width));
  std::vector<T> table(length * width);
  for (std::size_t pos = 0; pos < length; ++pos) {
    for (std::size_t i = 0; i < width / 2; ++i) {
      const double freq = std::pow(10000.0, -static_cast<double>(2 * i) / static_cast<double>(width));
      const double angle = static_cast<double>(pos) * freq;
      table[pos * width + 2 * i] = static_cast<T>(std::sin(angle));
      table[pos * width + 2 * i + 1] = static_cast<T>(std::cos(angle));
    }
  }
  return Tensor<T>({length, width}, std::move(table));
}

#define LIFTKIT_INSTANTIATE_LAYERS(T)                                                                            \
  template LinearParams<T> make_linear(std::size_t, std::size_t, Rng&);                                         \
  template NormParams<T> make_norm(std::size_t);                                                                \
  template AttentionParams<T> make_attention(std::size_t, Rng&);                                                \
  template FeedForwardParams<T> make_feed_forward(std::size_t, std::size_t, Rng&);                              \
  template Tensor<T> multi_head_attention(const Tensor<T>&, const AttentionParams<T>&, std::size_t, std::size_t, \
                                          bool);                                                                \
  template Tensor<T> feed_forward(const Tensor<T>&, const FeedForwardParams<T>&);                               \
  template Tensor<T> encoder_block(const Tensor<T>&, const EncoderBlockParams<T>&, const BlockOptions&, Rng&);  \
  template Tensor<T> temporal_encoding(std::size_t, std::size_t);

LIFTKIT_INSTANTIATE_LAYERS(float)
LIFTKIT_INSTANTIATE_LAYERS(double)

}  // namespace liftkit::nn
