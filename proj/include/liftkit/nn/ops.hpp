#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "liftkit/nn/tensor.hpp"

namespace liftkit::nn {

// Differentiable primitives. Every op records a backward closure when grad
// mode is on and at least one input requires grad. Row-major throughout;
// "rows" means the tensor viewed as [size / last_dim, last_dim].

// [m, k] x [k, n] -> [m, n]
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);

// x [..., in] * weight [in, out] + bias [out] -> [..., out]. Bias may be undefined.
template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias);

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);

// x [R, d] plus `tile` [r, d] repeated down the rows; R must be a multiple of r.
template <typename T>
Tensor<T> add_tiled(const Tensor<T>& x, const Tensor<T>& tile);

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T factor);

template <typename T>
Tensor<T> relu(const Tensor<T>& x);

// Softmax along the last axis with max subtraction.
template <typename T>
Tensor<T> softmax(const Tensor<T>& x);

// Per-row normalization over the last axis; eps sits inside the square root.
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& bias, T eps = T(1e-5));

// Scaled dot-product attention. q, k, v are [groups * seq_len, d]; each group of
// seq_len rows is an independent sequence. Heads split the feature axis into
// d / heads slices, scores are scaled by 1/sqrt(d / heads). With `causal`,
// position i only sees positions j <= i.
template <typename T>
Tensor<T> attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v, std::size_t heads,
                    std::size_t seq_len, bool causal);

// Attention probabilities [groups, heads, seq_len, seq_len] for inspection.
template <typename T>
std::vector<T> attention_weights(const Tensor<T>& q, const Tensor<T>& k, std::size_t heads, std::size_t seq_len,
                                 bool causal);

// Inverted dropout; identity when !training or p == 0. Throws on p outside [0, 1).
template <typename T>
Tensor<T> dropout(const Tensor<T>& x, double p, bool training, Rng& rng);

// Gathers rows of x viewed as [R, d] -> [rows.size(), d].
template <typename T>
Tensor<T> select_rows(const Tensor<T>& x, std::span<const std::size_t> rows);

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape);

template <typename T>
Tensor<T> sum(const Tensor<T>& x);

template <typename T>
Tensor<T> mean(const Tensor<T>& x);

// Mean Euclidean distance over consecutive (x, y, z) triples of pred against a
// constant target. Gradient is zero at coincident points.
template <typename T>
Tensor<T> mpjpe_loss(const Tensor<T>& pred, const Tensor<T>& target);

}  // namespace liftkit::nn
