#include "liftkit/nn/ops.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <initializer_list>
#include <limits>

#include <cblas.h>

#include "liftkit/error.hpp"

namespace liftkit::nn {

namespace {

template <typename T>
using NodePtr = std::shared_ptr<detail::Node<T>>;

template <typename T>
NodePtr<T> make_result(Shape shape, std::initializer_list<const Tensor<T>*> inputs) {
  auto node = std::make_shared<detail::Node<T>>();
  node->value.assign(shape_size(shape), T(0));
  node->shape = std::move(shape);
  bool track = false;
  if (grad_enabled()) {
    for (const Tensor<T>* in : inputs)
      if (in->defined() && in->requires_grad()) track = true;
  }
  node->requires_grad = track;
  if (track) {
    for (const Tensor<T>* in : inputs)
      if (in->defined()) node->inputs.push_back(in->node());
  }
  return node;
}

template <typename T>
void debug_check_finite([[maybe_unused]] const std::vector<T>& v) {
#ifndef NDEBUG
  for (T x : v) assert(std::isfinite(x) && "non-finite value produced by a forward op");
#endif
}

std::size_t last_dim(const Shape& s) { return s.empty() ? 1 : s.back(); }

// c[m, n] += op(a) * op(b), row-major, where op(x) is x or x^T.
void gemm_acc(bool ta, bool tb, std::size_t m, std::size_t n, std::size_t k, const float* a, const float* b, float* c) {
  cblas_sgemm(CblasRowMajor, ta ? CblasTrans : CblasNoTrans, tb ? CblasTrans : CblasNoTrans, static_cast<int>(m),
              static_cast<int>(n), static_cast<int>(k), 1.0f, a, static_cast<int>(ta ? m : k), b,
              static_cast<int>(tb ? k : n), 1.0f, c, static_cast<int>(n));
}

void gemm_acc(bool ta, bool tb, std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
              double* c) {
  cblas_dgemm(CblasRowMajor, ta ? CblasTrans : CblasNoTrans, tb ? CblasTrans : CblasNoTrans, static_cast<int>(m),
              static_cast<int>(n), static_cast<int>(k), 1.0, a, static_cast<int>(ta ? m : k), b,
              static_cast<int>(tb ? k : n), 1.0, c, static_cast<int>(n));
}

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (a.shape() != b.shape()) {
    fail_config(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  }
}

}  // namespace

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    fail_config("matmul: incompatible shapes " + shape_string(a.shape()) + " x " + shape_string(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  auto out = make_result<T>({m, n}, {&a, &b});
  gemm_acc(false, false, m, n, k, a.values().data(), b.values().data(), out->value.data());
  if (out->requires_grad) {
    auto* an = a.node().get();
    auto* bn = b.node().get();
    out->backward = [an, bn, m, k, n](detail::Node<T>& self) {
      if (an->requires_grad) gemm_acc(false, true, m, k, n, self.grad.data(), bn->value.data(), an->grad_buffer().data());
      if (bn->requires_grad) gemm_acc(true, false, k, n, m, an->value.data(), self.grad.data(), bn->grad_buffer().data());
    };
  }
  debug_check_finite(out->value);
  return Tensor<T>(out);
}

template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias) {
  if (weight.rank() != 2) fail_config("linear: weight must be 2-D, got " + shape_string(weight.shape()));
  const std::size_t in = weight.dim(0), out_dim = weight.dim(1);
  if (x.rank() == 0 || last_dim(x.shape()) != in) {
    fail_config("linear: input " + shape_string(x.shape()) + " does not match weight " + shape_string(weight.shape()));
  }
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != out_dim)) {
    fail_config("linear: bias " + shape_string(bias.shape()) + " does not match weight " + shape_string(weight.shape()));
  }
  const std::size_t rows = x.size() / in;
  Shape shape = x.shape();
  shape.back() = out_dim;
  auto out = make_result<T>(std::move(shape), {&x, &weight, &bias});
  T* y = out->value.data();
  if (bias.defined()) {
    const T* b = bias.values().data();
    for (std::size_t r = 0; r < rows; ++r) std::copy(b, b + out_dim, y + r * out_dim);
  }
  gemm_acc(false, false, rows, out_dim, in, x.values().data(), weight.values().data(), y);
  if (out->requires_grad) {
    auto* xn = x.node().get();
    auto* wn = weight.node().get();
    auto* bn = bias.defined() ? bias.node().get() : nullptr;
    out->backward = [xn, wn, bn, rows, in, out_dim](detail::Node<T>& self) {
      const T* dy = self.grad.data();
      if (xn->requires_grad) gemm_acc(false, true, rows, in, out_dim, dy, wn->value.data(), xn->grad_buffer().data());
      if (wn->requires_grad) gemm_acc(true, false, in, out_dim, rows, xn->value.data(), dy, wn->grad_buffer().data());
      if (bn && bn->requires_grad) {
        T* db = bn->grad_buffer().data();
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t j = 0; j < out_dim; ++j) db[j] += dy[r * out_dim + j];
      }
    };
  }
  debug_check_finite(out->value);
  return Tensor<T>(out);
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "add");
  auto out = make_result<T>(a.shape(), {&a, &b});
  const auto av = a.values();
  const auto bv = b.values();
  for (std::size_t i = 0; i < av.size(); ++i) out->value[i] = av[i] + bv[i];
  if (out->requires_grad) {
    auto* an = a.node().get();
    auto* bn = b.node().get();
    out->backward = [an, bn](detail::Node<T>& self) {
      for (auto* in : {an, bn}) {
        if (!in->requires_grad) continue;
        auto& g = in->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
      }
    };
  }
  return Tensor<T>(out);
}

template <typename T>
Tensor<T> add_tiled(const Tensor<T>& x, const Tensor<T>& tile) {
  if (x.rank() != 2 || tile.rank() != 2 || x.dim(1) != tile.dim(1) || tile.dim(0) == 0 ||
      x.dim(0) % tile.dim(0) != 0) {
    fail_config("add_tiled: cannot tile " + shape_string(tile.shape()) + " over " + shape_string(x.shape()));
  }
  auto out = make_result<T>(x.shape(), {&x, &tile});
  const std::size_t period = tile.size();
  const auto xv = x.values();
  const auto tv = tile.values();
  for (std::size_t i = 0; i < xv.size(); ++i) out->value[i] = xv[i] + tv[i % period];
  if (out->requires_grad) {
    auto* xn = x.node().get();
    auto* tn = tile.node().get();
    out->backward = [xn, tn, period](detail::Node<T>& self) {
      if (xn->requires_grad) {
        auto& g = xn->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
      }
      if (tn->requires_grad) {
        auto& g = tn->grad_buffer();
        for (std::size_t i = 0; i < self.grad.size(); ++i) g[i % period] += self.grad[i];
      }
    };
  }
  return Tensor<T>(out);
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "mul");
  auto out = make_result<T>(a.shape(), {&a, &b});
  const auto av = a.values();
  const auto bv = b.values();
  for (std::size_t i = 0; i < av.size(); ++i) out->value[i] = av[i] * bv[i];
  if (out->requires_grad) {
    auto* an = a.node().get();
    auto* bn = b.node().get();
    out->backward = [an, bn](detail::Node<T>& self) {
      // a and b may alias (x * x); read values before either grad is written
      if (an->requires_grad) {
        auto& g = an->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * bn->value[i];
      }
      if (bn->requires_grad) {
        auto& g = bn->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * an->value[i];
      }
    };
  }
  return Tensor<T>(out);
}

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T factor) {
  auto out = make_result<T>(x.shape(), {&x});
  const auto xv = x.values();
  for (std::size_t i = 0; i < xv.size(); ++i) out->value[i] = xv[i] * factor;
  if (out->requires_grad) {
    auto* xn = x.node().get();
    out->backward = [xn, factor](detail::Node<T>& self) {
      auto& g = xn->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * factor;
    };
  }
  return Tensor<T>(out);
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  auto out = make_result<T>(x.shape(), {&x});
  const auto xv = x.values();
  for (std::size_t i = 0; i < xv.size(); ++i) out->value[i] = xv[i] > T(0) ? xv[i] : T(0);
  if (out->requires_grad) {
    auto* xn = x.node().get();
    out->backward = [xn](detail::Node<T>& self) {
      auto& g = xn->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i)
        if (xn->value[i] > T(0)) g[i] += self.grad[i];
    };
  }
  return Tensor<T>(out);
}

template <typename T>
Tensor<T> softmax(const Tensor<T>& x) {
  const std::size_t width = last_dim(x.shape());
  const std::size_t rows = x.size() / width;
  auto out = make_result<T>(x.shape(), {&x});
  const T* xv = x.values().data();
  T* y = out->value.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const T* in = xv + r * width;
    T* o = y + r * width;
    const T peak = *std::max_element(in, in + width);
    T total = T(0);
    for (std::size_t j = 0; j < width; ++j) {
      o[j] = std::exp(in[j] - peak);
      total += o[j];
    }
    for (std::size_t j = 0; j < width; ++j) o[j] /= total;
  }
  if (out->requires_grad) {
    auto* xn = x.node().get();
    out->backward = [xn, rows, width](detail::Node<T>& self) {
      auto& g = xn->grad_buffer();
      for (std::size_t r = 0; r < rows; ++r) {
        const T* p = self.value.data() + r * width;
        const T* dy = self.grad.data() + r * width;
        T dot = T(0);
        for (std::size_t j = 0; j < width; ++j) dot += p[j] * dy[j];
        for (std::size_t j = 0; j < width; ++j) g[r * width + j] += p[j] * (dy[j] - dot);
      }
    };
  }
  debug_check_finite(out->value);
  return Tensor<T>(out);
}

template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& bias, T eps) {
  const std::size_t width = last_dim(x.shape());
  if (width < 2) fail_config("layer_norm: normalized dimension must be at least 2");
  if (gain.size() != width || bias.size() != width) fail_config("layer_norm: gain/bias size must equal " + std::to_string(width));
  const std::size_t rows = x.size() / width;
  auto out = make_result<T>(x.shape(), {&x, &gain, &bias});

  std::vector<T> normalized(x.size());
  std::vector<T> inv_std(rows);
  const T* xv = x.values().data();
  const T* gv = gain.values().data();
  const T* bv = bias.values().data();
  for (std::size_t r = 0; r < rows; ++r) {
    const T* in = xv + r * width;
    T mu = T(0);
    for (std::size_t j = 0; j < width; ++j) mu += in[j];
    mu /= static_cast<T>(width);
    T var = T(0);
    for (std::size_t j = 0; j < width; ++j) var += (in[j] - mu) * (in[j] - mu);
    var /= static_cast<T>(width);
    const T rstd = T(1) / std::sqrt(var + eps);
    inv_std[r] = rstd;
    for (std::size_t j = 0; j < width; ++j) {
      const T xhat = (in[j] - mu) * rstd;
      normalized[r * width + j] = xhat;
      out->value[r * width + j] = gv[j] * xhat + bv[j];
    }
  }
  if (out->requires_grad) {
    auto* xn = x.node().get();
    auto* gn = gain.node().get();
    auto* bn = bias.node().get();
    out->backward = [xn, gn, bn, rows, width, normalized = std::move(normalized),
                     inv_std = std::move(inv_std)](detail::Node<T>& self) {
      const T* dy = self.grad.data();
      if (gn->requires_grad) {
        auto& dg = gn->grad_buffer();
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t j = 0; j < width; ++j) dg[j] += dy[r * width + j] * normalized[r * width + j];
      }
      if (bn->requires_grad) {
        auto& db = bn->grad_buffer();
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t j = 0; j < width; ++j) db[j] += dy[r * width + j];
      }
      if (xn->requires_grad) {
        auto& dx = xn->grad_buffer();
        const T* g = gn->value.data();
        const T inv_width = T(1) / static_cast<T>(width);
        for (std::size_t r = 0; r < rows; ++r) {
          const T* xhat = normalized.data() + r * width;
          const T* d = dy + r * width;
          T mean_d = T(0), mean_dx = T(0);
          for (std::size_t j = 0; j < width; ++j) {
            const T dxhat = d[j] * g[j];
            mean_d += dxhat;
            mean_dx += dxhat * xhat[j];
          }
          mean_d *= inv_width;
          mean_dx *= inv_width;
          for (std::size_t j = 0; j < width; ++j) {
            dx[r * width + j] += inv_std[r] * (d[j] * g[j] - mean_d - xhat[j] * mean_dx);
          }
        }
      }
    };
  }
  debug_check_finite(out->value);
  return Tensor<T>(out);
}

namespace {

struct AttentionGeometry {
  std::size_t groups, seq_len, heads, width, head_dim;
};

template <typename T>
AttentionGeometry check_attention(const Tensor<T>& q, const Tensor<T>& k, std::size_t heads, std::size_t seq_len) {
  if (q.rank() != 2 || k.shape() != q.shape()) {
    fail_config("attention: q/k/v must share a 2-D shape, got " + shape_string(q.shape()) + " and " +
                shape_string(k.shape()));
  }
  const std::size_t width = q.dim(1);
  if (heads == 0 || width % heads != 0) {
    fail_config("attention: hidden dim " + std::to_string(width) + " not divisible by " + std::to_string(heads) +
                " heads");
  }
  if (seq_len == 0 || q.dim(0) % seq_len != 0) fail_config("attention: rows not a multiple of sequence length");
  return {q.dim(0) / seq_len, seq_len, heads, width, width / heads};
}

// Fills probabilities [groups, heads, n, n]; masked entries are exactly zero.
template <typename T>
void attention_probs(const AttentionGeometry& g, const T* q, const T* k, bool causal, T* probs) {
  const T scale_factor = T(1) / std::sqrt(static_cast<T>(g.head_dim));
  const std::size_t n = g.seq_len;
  std::vector<T> row(n);
  for (std::size_t b = 0; b < g.groups; ++b) {
    for (std::size_t h = 0; h < g.heads; ++h) {
      T* p = probs + (b * g.heads + h) * n * n;
      for (std::size_t i = 0; i < n; ++i) {
        const T* qi = q + (b * n + i) * g.width + h * g.head_dim;
        const std::size_t visible = causal ? i + 1 : n;
        T peak = -std::numeric_limits<T>::infinity();
        for (std::size_t j = 0; j < visible; ++j) {
          const T* kj = k + (b * n + j) * g.width + h * g.head_dim;
          T s = T(0);
          for (std::size_t c = 0; c < g.head_dim; ++c) s += qi[c] * kj[c];
          row[j] = s * scale_factor;
          peak = std::max(peak, row[j]);
        }
        T total = T(0);
        for (std::size_t j = 0; j < visible; ++j) {
          row[j] = std::exp(row[j] - peak);
          total += row[j];
        }
        for (std::size_t j = 0; j < visible; ++j) p[i * n + j] = row[j] / total;
        for (std::size_t j = visible; j < n; ++j) p[i * n + j] = T(0);
      }
    }
  }
}

}  // namespace

template <typename T>
std::vector<T> attention_weights(const Tensor<T>& q, const Tensor<T>& k, std::size_t heads, std::size_t seq_len,
                                 bool causal) {
  const auto g = check_attention(q, k, heads, seq_len);
  std::vector<T> probs(g.groups * g.heads * seq_len * seq_len);
  attention_probs(g, q.values().data(), k.values().data(), causal, probs.data());
  return probs;
}

template <typename T>
Tensor<T> attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v, std::size_t heads,
                    std::size_t seq_len, bool causal) {
  const auto g = check_attention(q, k, heads, seq_len);
  require_same_shape(q, v, "attention");
  const std::size_t n = seq_len;
  std::vector<T> probs(g.groups * g.heads * n * n);
  attention_probs(g, q.values().data(), k.values().data(), causal, probs.data());

  auto out = make_result<T>(q.shape(), {&q, &k, &v});
  const T* vv = v.values().data();
  T* o = out->value.data();
  for (std::size_t b = 0; b < g.groups; ++b) {
    for (std::size_t h = 0; h < g.heads; ++h) {
      const T* p = probs.data() + (b * g.heads + h) * n * n;
      for (std::size_t i = 0; i < n; ++i) {
        T* oi = o + (b * n + i) * g.width + h * g.head_dim;
        const std::size_t visible = causal ? i + 1 : n;
        for (std::size_t j = 0; j < visible; ++j) {
          const T pij = p[i * n + j];
          const T* vj = vv + (b * n + j) * g.width + h * g.head_dim;
          for (std::size_t c = 0; c < g.head_dim; ++c) oi[c] += pij * vj[c];
        }
      }
    }
  }
  if (out->requires_grad) {
    auto* qn = q.node().get();
    auto* kn = k.node().get();
    auto* vn = v.node().get();
    out->backward = [qn, kn, vn, g, causal, probs = std::move(probs)](detail::Node<T>& self) {
      const std::size_t n = g.seq_len;
      const T scale_factor = T(1) / std::sqrt(static_cast<T>(g.head_dim));
      const T* dout = self.grad.data();
      const T* qv = qn->value.data();
      const T* kv = kn->value.data();
      const T* vv = vn->value.data();
      T* dq = qn->requires_grad ? qn->grad_buffer().data() : nullptr;
      T* dk = kn->requires_grad ? kn->grad_buffer().data() : nullptr;
      T* dv = vn->requires_grad ? vn->grad_buffer().data() : nullptr;
      std::vector<T> dp(n);
      for (std::size_t b = 0; b < g.groups; ++b) {
        for (std::size_t h = 0; h < g.heads; ++h) {
          const T* p = probs.data() + (b * g.heads + h) * n * n;
          const std::size_t off = h * g.head_dim;
          for (std::size_t i = 0; i < n; ++i) {
            const std::size_t visible = causal ? i + 1 : n;
            const T* doi = dout + (b * n + i) * g.width + off;
            T weighted = T(0);
            for (std::size_t j = 0; j < visible; ++j) {
              const T* vj = vv + (b * n + j) * g.width + off;
              T s = T(0);
              for (std::size_t c = 0; c < g.head_dim; ++c) s += doi[c] * vj[c];
              dp[j] = s;
              weighted += p[i * n + j] * s;
              if (dv) {
                T* dvj = dv + (b * n + j) * g.width + off;
                const T pij = p[i * n + j];
                for (std::size_t c = 0; c < g.head_dim; ++c) dvj[c] += pij * doi[c];
              }
            }
            if (!dq && !dk) continue;
            const T* qi = qv + (b * n + i) * g.width + off;
            for (std::size_t j = 0; j < visible; ++j) {
              const T ds = p[i * n + j] * (dp[j] - weighted) * scale_factor;
              if (ds == T(0)) continue;
              const T* kj = kv + (b * n + j) * g.width + off;
              if (dq) {
                T* dqi = dq + (b * n + i) * g.width + off;
                for (std::size_t c = 0; c < g.head_dim; ++c) dqi[c] += ds * kj[c];
              }
              if (dk) {
                T* dkj = dk + (b * n + j) * g.width + off;
                for (std::size_t c = 0; c < g.head_dim; ++c) dkj[c] += ds * qi[c];
              }
            }
          }
        }
      }
    };
  }
  debug_check_finite(out->value);
  return Tensor<T>(out);
}

template <typename T>
Tensor<T> dropout(const Tensor<T>& x, double p, bool training, Rng& rng) {
  if (!(p >= 0.0 && p < 1.0)) fail_config("dropout: rate must lie in [0, 1), got " + std::to_string(p));
  if (!training || p == 0.0) return x;
  auto out = make_result<T>(x.shape(), {&x});
  std::vector<T> mask(x.size());
  const T keep_scale = static_cast<T>(1.0 / (1.0 - p));
  const auto xv = x.values();
  for (std::size_t i = 0; i < mask.size(); ++i) {
    mask[i] = uniform01(rng) >= p ? keep_scale : T(0);
    out->value[i] = xv[i] * mask[i];
  }
  if (out->requires_grad) {
    auto* xn = x.node().get();
    out->backward = [xn, mask = std::move(mask)](detail::Node<T>& self) {
      auto& g = xn->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * mask[i];
    };
  }
  return Tensor<T>(out);
}

template <typename T>
Tensor<T> select_rows(const Tensor<T>& x, std::span<const std::size_t> rows) {
  const std::size_t width = last_dim(x.shape());
  const std::size_t total_rows = x.size() / width;
  for (std::size_t r : rows)
    if (r >= total_rows) fail_config("select_rows: row " + std::to_string(r) + " out of range");
  auto out = make_result<T>({rows.size(), width}, {&x});
  const T* xv = x.values().data();
  for (std::size_t i = 0; i < rows.size(); ++i)
    std::copy(xv + rows[i] * width, xv + (rows[i] + 1) * width, out->value.data() + i * width);
  if (out->requires_grad) {
    auto* xn = x.node().get();
    out->backward = [xn, width, rows = std::vector<std::size_t>(rows.begin(), rows.end())](detail::Node<T>& self) {
      auto& g = xn->grad_buffer();
      for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t c = 0; c < width; ++c) g[rows[i] * width + c] += self.grad[i * width + c];
    };
  }
  return Tensor<T>(out);
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
  if (shape_size(shape) != x.size()) {
    fail_config("reshape: cannot view " + shape_string(x.shape()) + " as " + shape_string(shape));
  }
  auto out = make_result<T>(std::move(shape), {&x});
  std::copy(x.values().begin(), x.values().end(), out->value.begin());
  if (out->requires_grad) {
    auto* xn = x.node().get();
    out->backward = [xn](detail::Node<T>& self) {
      auto& g = xn->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    };
  }
  return Tensor<T>(out);
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
  auto out = make_result<T>({1}, {&x});
  T total = T(0);
  for (T v : x.values()) total += v;
  out->value[0] = total;
  if (out->requires_grad) {
    auto* xn = x.node().get();
    out->backward = [xn](detail::Node<T>& self) {
      auto& g = xn->grad_buffer();
      for (T& gi : g) gi += self.grad[0];
    };
  }
  return Tensor<T>(out);
}

template <typename T>
Tensor<T> mean(const Tensor<T>& x) {
  return scale(sum(x), T(1) / static_cast<T>(x.size()));
}

template <typename T>
Tensor<T> mpjpe_loss(const Tensor<T>& pred, const Tensor<T>& target) {
  require_same_shape(pred, target, "mpjpe_loss");
  if (pred.size() == 0 || pred.size() % 3 != 0) fail_config("mpjpe_loss: size must be a positive multiple of 3");
  const std::size_t points = pred.size() / 3;
  auto out = make_result<T>({1}, {&pred, &target});
  std::vector<T> dist(points);
  const T* p = pred.values().data();
  const T* g = target.values().data();
  T total = T(0);
  for (std::size_t i = 0; i < points; ++i) {
    const T dx = p[3 * i] - g[3 * i], dy = p[3 * i + 1] - g[3 * i + 1], dz = p[3 * i + 2] - g[3 * i + 2];
    dist[i] = std::sqrt(dx * dx + dy * dy + dz * dz);
    total += dist[i];
  }
  out->value[0] = total / static_cast<T>(points);
  if (out->requires_grad) {
    auto* pn = pred.node().get();
    auto* tn = target.node().get();
    out->backward = [pn, tn, points, dist = std::move(dist)](detail::Node<T>& self) {
      const T upstream = self.grad[0] / static_cast<T>(points);
      T* dp = pn->requires_grad ? pn->grad_buffer().data() : nullptr;
      T* dt = tn->requires_grad ? tn->grad_buffer().data() : nullptr;
      for (std::size_t i = 0; i < points; ++i) {
        if (dist[i] == T(0)) continue;
        for (std::size_t c = 0; c < 3; ++c) {
          const T d = upstream * (pn->value[3 * i + c] - tn->value[3 * i + c]) / dist[i];
          if (dp) dp[3 * i + c] += d;
          if (dt) dt[3 * i + c] -= d;
        }
      }
    };
  }
  return Tensor<T>(out);
}

#define LIFTKIT_INSTANTIATE_OPS(T)                                                                              \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                                               \
  template Tensor<T> linear(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);                             \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                                  \
  template Tensor<T> add_tiled(const Tensor<T>&, const Tensor<T>&);                                            \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                                  \
  template Tensor<T> scale(const Tensor<T>&, T);                                                               \
  template Tensor<T> relu(const Tensor<T>&);                                                                   \
  template Tensor<T> softmax(const Tensor<T>&);                                                                \
  template Tensor<T> layer_norm(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, T);                      \
  template Tensor<T> attention(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, std::size_t, std::size_t, \
                               bool);                                                                          \
  template std::vector<T> attention_weights(const Tensor<T>&, const Tensor<T>&, std::size_t, std::size_t, bool); \
  template Tensor<T> dropout(const Tensor<T>&, double, bool, Rng&);                                            \
  template Tensor<T> select_rows(const Tensor<T>&, std::span<const std::size_t>);                              \
  template Tensor<T> reshape(const Tensor<T>&, Shape);                                                         \
  template Tensor<T> sum(const Tensor<T>&);                                                                    \
  template Tensor<T> mean(const Tensor<T>&);                                                                   \
  template Tensor<T> mpjpe_loss(const Tensor<T>&, const Tensor<T>&);

LIFTKIT_INSTANTIATE_OPS(float)
LIFTKIT_INSTANTIATE_OPS(double)

}  // namespace liftkit::nn
