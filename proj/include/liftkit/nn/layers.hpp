#pragma once

#include <cstddef>

#include "liftkit/nn/ops.hpp"
#include "liftkit/nn/tensor.hpp"

namespace liftkit::nn {

template <typename T>
struct LinearParams {
  Tensor<T> weight;  // [in, out]
  Tensor<T> bias;    // [out]
};

template <typename T>
struct AttentionParams {
  LinearParams<T> query, key, value, output;
};

template <typename T>
struct FeedForwardParams {
  LinearParams<T> inner;  // d -> d_ff
  LinearParams<T> outer;  // d_ff -> d
};

template <typename T>
struct NormParams {
  Tensor<T> gain;
  Tensor<T> bias;
};

// Copies of AttentionParams alias the same tensors, which is how blocks share
// one attention parameter set.
template <typename T>
struct EncoderBlockParams {
  AttentionParams<T> attention;
  FeedForwardParams<T> ffn;
  NormParams<T> norm1, norm2;
};

// Xavier-uniform weight, zero bias.
template <typename T>
LinearParams<T> make_linear(std::size_t in, std::size_t out, Rng& rng);

template <typename T>
NormParams<T> make_norm(std::size_t width);

template <typename T>
AttentionParams<T> make_attention(std::size_t width, Rng& rng);

template <typename T>
FeedForwardParams<T> make_feed_forward(std::size_t width, std::size_t inner_width, Rng& rng);

template <typename T>
Tensor<T> apply(const LinearParams<T>& p, const Tensor<T>& x) {
  return linear(x, p.weight, p.bias);
}

// x is [groups * seq_len, d]; output has the same shape.
template <typename T>
Tensor<T> multi_head_attention(const Tensor<T>& x, const AttentionParams<T>& params, std::size_t heads,
                               std::size_t seq_len, bool causal);

// outer(relu(inner(x)))
template <typename T>
Tensor<T> feed_forward(const Tensor<T>& x, const FeedForwardParams<T>& params);

struct BlockOptions {
  std::size_t heads = 8;
  std::size_t seq_len = 1;
  bool causal = false;
  double dropout = 0.0;
  bool training = false;
};

// Post-norm block: y = LN(x + Drop(MHA(x))), z = LN(y + Drop(FFN(y))).
// `rng` is only drawn from when training with a positive dropout rate.
template <typename T>
Tensor<T> encoder_block(const Tensor<T>& x, const EncoderBlockParams<T>& params, const BlockOptions& options, Rng& rng);

// Fixed sinusoidal table [length, width]: sin on even columns, cos on odd,
// frequency 10000^(-2i/width). Throws on odd width.
template <typename T>
Tensor<T> temporal_encoding(std::size_t length, std::size_t width);

}  // namespace liftkit::nn
