#pragma once

#include <algorithm>
#include <functional>
#include <memory>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "tensor.hpp"

namespace loga {

enum class Mode { train, eval };

// Reverse-mode autodiff over a dynamically built acyclic graph. Nodes own
// their parents via shared_ptr, so releasing the root frees the whole graph
// while parameter leaves (held by the ParamStore) survive across steps.
template <class T>
struct Node {
  Tensor<T> value;
  Tensor<T> grad;             // accumulated across backward() calls
  bool has_grad = false;
  bool requires_grad = false; // leaf parameter
  bool needs_grad = false;    // this node or an ancestor requires grad
  std::vector<std::shared_ptr<Node>> parents;
  // Propagates the incoming gradient `g` into the parents' buffers. sink(i)
  // returns the accumulation buffer for parent i or nullptr when that parent
  // subtree needs no gradient.
  std::function<void(const Tensor<T>& g, const std::function<Tensor<T>*(size_t)>& sink)> backward_fn;
};

template <class T>
using NodePtr = std::shared_ptr<Node<T>>;

template <class T>
NodePtr<T> constant(Tensor<T> value) {
  auto n = std::make_shared<Node<T>>();
  n->value = std::move(value);
  return n;
}

template <class T>
NodePtr<T> param(Tensor<T> value) {
  auto n = std::make_shared<Node<T>>();
  n->value = std::move(value);
  n->requires_grad = true;
  n->needs_grad = true;
  return n;
}

template <class T, class Fn>
NodePtr<T> make_node(Tensor<T> value, std::vector<NodePtr<T>> parents, Fn&& fn) {
  auto n = std::make_shared<Node<T>>();
  n->value = std::move(value);
  n->parents = std::move(parents);
  for (const auto& p : n->parents)
    if (p->needs_grad) n->needs_grad = true;
  if (n->needs_grad) n->backward_fn = std::forward<Fn>(fn);
  return n;
}

// ---------------------------------------------------------------------------
// elementwise
// ---------------------------------------------------------------------------

template <class T>
NodePtr<T> add(const NodePtr<T>& a, const NodePtr<T>& b) {
  check_same_shape(a->value, b->value, "add");
  Tensor<T> out = a->value;
  for (long i = 0; i < out.size(); ++i) out[i] += b->value[i];
  return make_node<T>(std::move(out), {a, b},
                      [](const Tensor<T>& g, const std::function<Tensor<T>*(size_t)>& sink) {
                        for (size_t p = 0; p < 2; ++p)
                          if (Tensor<T>* gp = sink(p))
                            for (long i = 0; i < g.size(); ++i) (*gp)[i] += g[i];
                      });
}

template <class T>
NodePtr<T> sub(const NodePtr<T>& a, const NodePtr<T>& b) {
  check_same_shape(a->value, b->value, "sub");
  Tensor<T> out = a->value;
  for (long i = 0; i < out.size(); ++i) out[i] -= b->value[i];
  return make_node<T>(std::move(out), {a, b},
                      [](const Tensor<T>& g, const std::function<Tensor<T>*(size_t)>& sink) {
                        if (Tensor<T>* ga = sink(0))
                          for (long i = 0; i < g.size(); ++i) (*ga)[i] += g[i];
                        if (Tensor<T>* gb = sink(1))
                          for (long i = 0; i < g.size(); ++i) (*gb)[i] -= g[i];
                      });
}

template <class T>
NodePtr<T> mul(const NodePtr<T>& a, const NodePtr<T>& b) {
  check_same_shape(a->value, b->value, "mul");
  Tensor<T> out = a->value;
  for (long i = 0; i < out.size(); ++i) out[i] *= b->value[i];
  return make_node<T>(std::move(out), {a, b},
                      [a, b](const Tensor<T>& g, const std::function<Tensor<T>*(size_t)>& sink) {
                        if (Tensor<T>* ga = sink(0))
                          for (long i = 0; i < g.size(); ++i) (*ga)[i] += g[i] * b->value[i];
                        if (Tensor<T>* gb = sink(1))
                          for (long i = 0; i < g.size(); ++i) (*gb)[i] += g[i] * a->value[i];
                      });
}

template <class T>
NodePtr<T> scale(const NodePtr<T>& a, T s) {
  Tensor<T> out = a->value;
  for (long i = 0; i < out.size(); ++i) out[i] *= s;
  return make_node<T>(std::move(out), {a},
                      [s](const Tensor<T>& g, const std::function<Tensor<T>*(size_t)>& sink) {
                        if (Tensor<T>* ga = sink(0))
                          for (long i = 0; i < g.size(); ++i) (*ga)[i] += s * g[i];
                      });
}

template <class T>
NodePtr<T> add_scalar(const NodePtr<T>& a, T c) {
  Tensor<T> out = a->value;
  for (long i = 0; i < out.size(); ++i) out[i] += c;
  return make_node<T>(std::move(out), {a},
                      [](const Tensor<T>& g, const std::function<Tensor<T>*(size_t)>& sink) {
                        if (Tensor<T>* ga = sink(0))
                          for (long i = 0; i < g.size(); ++i) (*ga)[i] += g[i];
                      });
}

template <class T>
NodePtr<T> relu(const NodePtr<T>& a) {
  Tensor<T> out = a->value;
  for (long i = 0; i < out.size(); ++i) out[i] = out[i] > T(0) ? out[i] : T(0);
  return make_node<T>(std::move(out), {a},
                      [a](const Tensor<T>& g, const std::function<Tensor<T>*(size_t)>& sink) {
                        // subgradient at exactly 0 is 0
                        if (Tensor<T>* ga = sink(0))
                          for (long i = 0; i < g.size(); ++i)
                            (*ga)[i] += a->value[i] > T(0) ? g[i] : T(0);
                      });
}

template <class T>
NodePtr<T> log_el(const NodePtr<T>& a) {
  Tensor<T> out = a->value;
  for (long i = 0; i < out.size(); ++i) out[i] = std::log(out[i]);
  return make_node<T>(std::move(out), {a},
                      [a](const Tensor<T>& g, const std::function<Tensor<T>*(size_t)>& sink) {
                        if (Tensor<T>* ga = sink(0))
                          for (long i = 0; i < g.size(); ++i) (*ga)[i] += g[i] / a->value[i];
                      });
}

template <class T>
NodePtr<T> exp_el(const NodePtr<T>& a) {
  Tensor<T> out = a->value;
  for (long i = 0; i < out.size(); ++i) out[i] = std::exp(out[i]);
  Tensor<T> saved = out;
  return make_node<T>(std::move(out), {a},
                      [saved](const Tensor<T>& g, const std::function<Tensor<T>*(size_t)>& sink) {
                        if (Tensor<T>* ga = sink(0))
                          for (long i = 0; i < g.size(); ++i) (*ga)[i] += g[i] * saved[i];
                      });
}

// ---------------------------------------------------------------------------
// shape ops
// ---------------------------------------------------------------------------

template <class T>
NodePtr<T> reshape(const NodePtr<T>& a, std::vector<long> shape) {
  long n = 1;
  for (long e : shape) n *= e;
  require(n == a->value.size(), ErrCode::dim, "reshape: size mismatch ", a->value.shape_str());
  Tensor<T> out(std::move(shape), a->value.vec());
  return make_node<T>(std::move(out), {a},
                      [](const Tensor<T>& g, const std::function<Tensor<T>*(size_t)>& sink) {
                        if (Tensor<T>* ga = sink(0))
                          for (long i = 0; i < g.size(); ++i) (*ga)[i] += g[i];
                      });
}

template <class T>
NodePtr<T> flatten(const NodePtr<T>& a) {
  return reshape(a, {a->value.size()});
}

template <class T>
NodePtr<T> transpose2d(const NodePtr<T>& a) {
  require(a->value.rank() == 2, ErrCode::dim, "transpose: rank-2 required, got ",
          a->value.shape_str());
  long m = a->value.extent(0), n = a->value.extent(1);
  Tensor<T> out({n, m});
  for (long i = 0; i < m; ++i)
    for (long j = 0; j < n; ++j) out.at(j, i) = a->value.at(i, j);
  return make_node<T>(std::move(out), {a},
                      [m, n](const Tensor<T>& g, const std::function<Tensor<T>*(size_t)>& sink) {
                        if (Tensor<T>* ga = sink(0))
                          for (long i = 0; i < m; ++i)
                            for (long j = 0; j < n; ++j) ga->at(i, j) += g.at(j, i);
                      });
}

template <class T>
NodePtr<T> concat2d(const std::vector<NodePtr<T>>& parts, long axis) {
  require(!parts.empty(), ErrCode::dim, "concat: no inputs");
  require(axis == 0 || axis == 1, ErrCode::dim, "concat: axis must be 0 or 1");
  long other = axis == 0 ? 1 : 0;
  long fixed = parts[0]->value.extent(other);
  long total = 0;
  for (const auto& p : parts) {
    require(p->value.rank() == 2, ErrCode::dim, "concat: rank-2 required");
    require(p->value.extent(other) == fixed, ErrCode::dim, "concat: extent mismatch ",
            p->value.shape_str());
    total += p->value.extent(axis);
  }
  Tensor<T> out(axis == 0 ? std::vector<long>{total, fixed} : std::vector<long>{fixed, total});
  std::vector<long> offsets(parts.size());
  long off = 0;
  for (size_t k = 0; k < parts.size(); ++k) {
    offsets[k] = off;
    const Tensor<T>& v = parts[k]->value;
    if (axis == 0) {
      for (long i = 0; i < v.extent(0); ++i)
        for (long j = 0; j < fixed; ++j) out.at(off + i, j) = v.at(i, j);
    } else {
      for (long i = 0; i < fixed; ++i)
        for (long j = 0; j < v.extent(1); ++j) out.at(i, off + j) = v.at(i, j);
    }
    off += v.extent(axis);
  }
  std::vector<long> widths(parts.size());
  for (size_t k = 0; k < parts.size(); ++k) widths[k] = parts[k]->value.extent(axis);
  std::vector<NodePtr<T>> ps(parts.begin(), parts.end());
  return make_node<T>(
      std::move(out), std::move(ps),
      [axis, fixed, offsets, widths](const Tensor<T>& g,
                                     const std::function<Tensor<T>*(size_t)>& sink) {
        for (size_t k = 0; k < offsets.size(); ++k) {
          Tensor<T>* gp = sink(k);
          if (!gp) continue;
          if (axis == 0) {
            for (long i = 0; i < widths[k]; ++i)
              for (long j = 0; j < fixed; ++j) gp->at(i, j) += g.at(offsets[k] + i, j);
          } else {
            for (long i = 0; i < fixed; ++i)
              for (long j = 0; j < widths[k]; ++j) gp->at(i, j) += g.at(i, offsets[k] + j);
          }
        }
      });
}

template <class T>
NodePtr<T> slice_cols(const NodePtr<T>& a, long start, long count) {
  require(a->value.rank() == 2, ErrCode::dim, "slice_cols: rank-2 required");
  long m = a->value.extent(0), n = a->value.extent(1);
  require(start >= 0 && count > 0 && start + count <= n, ErrCode::dim,
          "slice_cols: [", start, ",", start + count, ") out of range for ", a->value.shape_str());
  Tensor<T> out({m, count});
  for (long i = 0; i < m; ++i)
    for (long j = 0; j < count; ++j) out.at(i, j) = a->value.at(i, start + j);
  return make_node<T>(std::move(out), {a},
                      [m, start, count](const Tensor<T>& g,
                                        const std::function<Tensor<T>*(size_t)>& sink) {
                        if (Tensor<T>* ga = sink(0))
                          for (long i = 0; i < m; ++i)
                            for (long j = 0; j < count; ++j) ga->at(i, start + j) += g.at(i, j);
                      });
}

template <class T>
NodePtr<T> select(const NodePtr<T>& a, long index) {
  require(a->value.rank() == 1, ErrCode::dim, "select: rank-1 required");
  require(index >= 0 && index < a->value.size(), ErrCode::dim, "select: index ", index,
          " out of range for ", a->value.shape_str());
  Tensor<T> out = Tensor<T>::scalar(a->value[index]);
  return make_node<T>(std::move(out), {a},
                      [index](const Tensor<T>& g, const std::function<Tensor<T>*(size_t)>& sink) {
                        if (Tensor<T>* ga = sink(0)) (*ga)[index] += g[0];
                      });
}

// ---------------------------------------------------------------------------
// reductions
// ---------------------------------------------------------------------------

template <class T>
NodePtr<T> reduce_sum(const NodePtr<T>& a) {
  T s = 0;
  for (long i = 0; i < a->value.size(); ++i) s += a->value[i];
  return make_node<T>(Tensor<T>::scalar(s), {a},
                      [](const Tensor<T>& g, const std::function<Tensor<T>*(size_t)>& sink) {
                        if (Tensor<T>* ga = sink(0))
                          for (long i = 0; i < ga->size(); ++i) (*ga)[i] += g[0];
                      });
}

// arithmetic mean along one axis of a rank-2 tensor
template <class T>
NodePtr<T> mean_axis(const NodePtr<T>& a, long axis) {
  require(a->value.rank() == 2, ErrCode::dim, "mean_axis: rank-2 required, got ",
          a->value.shape_str());
  require(axis == 0 || axis == 1, ErrCode::dim, "mean_axis: invalid axis ", axis);
  long m = a->value.extent(0), n = a->value.extent(1);
  if (axis == 0) {
    Tensor<T> out({n});
    for (long j = 0; j < n; ++j) {
      T s = 0;
      for (long i = 0; i < m; ++i) s += a->value.at(i, j);
      out[j] = s / static_cast<T>(m);
    }
    return make_node<T>(std::move(out), {a},
                        [m, n](const Tensor<T>& g, const std::function<Tensor<T>*(size_t)>& sink) {
                          if (Tensor<T>* ga = sink(0))
                            for (long i = 0; i < m; ++i)
                              for (long j = 0; j < n; ++j)
                                ga->at(i, j) += g[j] / static_cast<T>(m);
                        });
  }
  Tensor<T> out({m});
  for (long i = 0; i < m; ++i) {
    T s = 0;
    for (long j = 0; j < n; ++j) s += a->value.at(i, j);
    out[i] = s / static_cast<T>(n);
  }
  return make_node<T>(std::move(out), {a},
                      [m, n](const Tensor<T>& g, const std::function<Tensor<T>*(size_t)>& sink) {
                        if (Tensor<T>* ga = sink(0))
                          for (long i = 0; i < m; ++i)
                            for (long j = 0; j < n; ++j) ga->at(i, j) += g[i] / static_cast<T>(n);
                      });
}

// ---------------------------------------------------------------------------
// linear algebra
// ---------------------------------------------------------------------------

template <class T>
NodePtr<T> matmul(const NodePtr<T>& a, const NodePtr<T>& b) {
  require(a->value.rank() == 2 && b->value.rank() == 2, ErrCode::dim,
          "matmul: rank-2 required, got ", a->value.shape_str(), " and ", b->value.shape_str());
  long m = a->value.extent(0), k = a->value.extent(1);
  long k2 = b->value.extent(0), n = b->value.extent(1);
  require(k == k2, ErrCode::dim, "matmul: inner extents differ, ", a->value.shape_str(), " vs ",
          b->value.shape_str());
  Tensor<T> out({m, n});
  const T* A = a->value.data();
  const T* B = b->value.data();
  T* C = out.data();
  for (long i = 0; i < m; ++i)
    for (long p = 0; p < k; ++p) {
      T av = A[i * k + p];
      if (av == T(0)) continue;
      const T* brow = B + p * n;
      T* crow = C + i * n;
      for (long j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  return make_node<T>(
      std::move(out), {a, b},
      [a, b, m, k, n](const Tensor<T>& g, const std::function<Tensor<T>*(size_t)>& sink) {
        const T* A = a->value.data();
        const T* B = b->value.data();
        const T* G = g.data();
        if (Tensor<T>* ga = sink(0)) {  // dA = G * B^T
          T* GA = ga->data();
          for (long i = 0; i < m; ++i)
            for (long p = 0; p < k; ++p) {
              const T* grow = G + i * n;
              const T* brow = B + p * n;
              T s = 0;
              for (long j = 0; j < n; ++j) s += grow[j] * brow[j];
              GA[i * k + p] += s;
            }
        }
        if (Tensor<T>* gb = sink(1)) {  // dB = A^T * G
          T* GB = gb->data();
          for (long i = 0; i < m; ++i)
            for (long p = 0; p < k; ++p) {
              T av = A[i * k + p];
              if (av == T(0)) continue;
              const T* grow = G + i * n;
              T* gbrow = GB + p * n;
              for (long j = 0; j < n; ++j) gbrow[j] += av * grow[j];
            }
        }
      });
}

// per-column rescale: out[i][j] = x[i][j] * s[j]
template <class T>
NodePtr<T> scale_cols(const NodePtr<T>& x, const NodePtr<T>& s) {
  require(x->value.rank() == 2 && s->value.rank() == 1, ErrCode::dim,
          "scale_cols: need [m x n] and [n]");
  long m = x->value.extent(0), n = x->value.extent(1);
  require(s->value.size() == n, ErrCode::dim, "scale_cols: scale length ", s->value.shape_str(),
          " vs columns of ", x->value.shape_str());
  Tensor<T> out = x->value;
  for (long i = 0; i < m; ++i)
    for (long j = 0; j < n; ++j) out.at(i, j) *= s->value[j];
  return make_node<T>(std::move(out), {x, s},
                      [x, s, m, n](const Tensor<T>& g,
                                   const std::function<Tensor<T>*(size_t)>& sink) {
                        if (Tensor<T>* gx = sink(0))
                          for (long i = 0; i < m; ++i)
                            for (long j = 0; j < n; ++j) gx->at(i, j) += g.at(i, j) * s->value[j];
                        if (Tensor<T>* gs = sink(1))
                          for (long j = 0; j < n; ++j) {
                            T acc = 0;
                            for (long i = 0; i < m; ++i) acc += g.at(i, j) * x->value.at(i, j);
                            (*gs)[j] += acc;
                          }
                      });
}

// bias broadcast over columns: out[i][j] = x[i][j] + b[i]
template <class T>
NodePtr<T> add_bias_cols(const NodePtr<T>& x, const NodePtr<T>& b) {
  require(x->value.rank() == 2 && b->value.rank() == 1, ErrCode::dim,
          "add_bias_cols: need [m x n] and [m]");
  long m = x->value.extent(0), n = x->value.extent(1);
  require(b->value.size() == m, ErrCode::dim, "add_bias_cols: bias length ", b->value.shape_str(),
          " vs rows of ", x->value.shape_str());
  Tensor<T> out = x->value;
  for (long i = 0; i < m; ++i)
    for (long j = 0; j < n; ++j) out.at(i, j) += b->value[i];
  return make_node<T>(std::move(out), {x, b},
                      [m, n](const Tensor<T>& g, const std::function<Tensor<T>*(size_t)>& sink) {
                        if (Tensor<T>* gx = sink(0))
                          for (long i = 0; i < g.size(); ++i) (*gx)[i] += g[i];
                        if (Tensor<T>* gb = sink(1))
                          for (long i = 0; i < m; ++i) {
                            T s = 0;
                            for (long j = 0; j < n; ++j) s += g.at(i, j);
                            (*gb)[i] += s;
                          }
                      });
}

// ---------------------------------------------------------------------------
// convolutions (cross-correlation, no padding)
// ---------------------------------------------------------------------------

template <class T>
NodePtr<T> conv1d(const NodePtr<T>& x, const NodePtr<T>& kernel, long stride) {
  require(x->value.rank() == 2, ErrCode::dim, "conv1d: input must be [Cin x W], got ",
          x->value.shape_str());
  require(kernel->value.rank() == 3, ErrCode::dim, "conv1d: kernel must be [Cout x Cin x S], got ",
          kernel->value.shape_str());
  require(stride >= 1, ErrCode::dim, "conv1d: stride must be >= 1, got ", stride);
  long cin = x->value.extent(0), w = x->value.extent(1);
  long cout = kernel->value.extent(0), kcin = kernel->value.extent(1), s = kernel->value.extent(2);
  require(kcin == cin, ErrCode::dim, "conv1d: channel mismatch, input ", x->value.shape_str(),
          " kernel ", kernel->value.shape_str());
  require(w >= s, ErrCode::dim, "conv1d: window ", s, " exceeds input width ", w,
          " (empty output)");
  long m = (w - s) / stride + 1;
  Tensor<T> out({cout, m});
  for (long co = 0; co < cout; ++co)
    for (long j = 0; j < m; ++j) {
      T acc = 0;
      for (long ci = 0; ci < cin; ++ci) {
        const T* xr = x->value.data() + ci * w + j * stride;
        const T* kr = kernel->value.data() + (co * cin + ci) * s;
        for (long t = 0; t < s; ++t) acc += xr[t] * kr[t];
      }
      out.at(co, j) = acc;
    }
  return make_node<T>(
      std::move(out), {x, kernel},
      [x, kernel, stride, cin, w, cout, s, m](const Tensor<T>& g,
                                              const std::function<Tensor<T>*(size_t)>& sink) {
        if (Tensor<T>* gx = sink(0)) {
          for (long co = 0; co < cout; ++co)
            for (long j = 0; j < m; ++j) {
              T gv = g.at(co, j);
              if (gv == T(0)) continue;
              for (long ci = 0; ci < cin; ++ci) {
                T* gxr = gx->data() + ci * w + j * stride;
                const T* kr = kernel->value.data() + (co * cin + ci) * s;
                for (long t = 0; t < s; ++t) gxr[t] += gv * kr[t];
              }
            }
        }
        if (Tensor<T>* gk = sink(1)) {
          for (long co = 0; co < cout; ++co)
            for (long j = 0; j < m; ++j) {
              T gv = g.at(co, j);
              if (gv == T(0)) continue;
              for (long ci = 0; ci < cin; ++ci) {
                const T* xr = x->value.data() + ci * w + j * stride;
                T* gkr = gk->data() + (co * cin + ci) * s;
                for (long t = 0; t < s; ++t) gkr[t] += gv * xr[t];
              }
            }
        }
      });
}

template <class T>
NodePtr<T> conv2d(const NodePtr<T>& x, const NodePtr<T>& kernel, long stride) {
  require(x->value.rank() == 3, ErrCode::dim, "conv2d: input must be [Cin x H x W], got ",
          x->value.shape_str());
  require(kernel->value.rank() == 4, ErrCode::dim,
          "conv2d: kernel must be [Cout x Cin x KH x KW], got ", kernel->value.shape_str());
  require(stride >= 1, ErrCode::dim, "conv2d: stride must be >= 1");
  long cin = x->value.extent(0), h = x->value.extent(1), w = x->value.extent(2);
  long cout = kernel->value.extent(0), kh = kernel->value.extent(2), kw = kernel->value.extent(3);
  require(kernel->value.extent(1) == cin, ErrCode::dim, "conv2d: channel mismatch, input ",
          x->value.shape_str(), " kernel ", kernel->value.shape_str());
  require(h >= kh && w >= kw, ErrCode::dim, "conv2d: kernel ", kh, "x", kw,
          " exceeds input ", h, "x", w, " (empty output)");
  long oh = (h - kh) / stride + 1;
  long ow = (w - kw) / stride + 1;
  Tensor<T> out({cout, oh, ow});
  for (long co = 0; co < cout; ++co)
    for (long oy = 0; oy < oh; ++oy)
      for (long ox = 0; ox < ow; ++ox) {
        T acc = 0;
        for (long ci = 0; ci < cin; ++ci)
          for (long ky = 0; ky < kh; ++ky) {
            const T* xr = x->value.data() + (ci * h + oy * stride + ky) * w + ox * stride;
            const T* kr = kernel->value.data() + ((co * cin + ci) * kh + ky) * kw;
            for (long kx = 0; kx < kw; ++kx) acc += xr[kx] * kr[kx];
          }
        out.at(co, oy, ox) = acc;
      }
  return make_node<T>(
      std::move(out), {x, kernel},
      [x, kernel, stride, cin, h, w, cout, kh, kw, oh, ow](
          const Tensor<T>& g, const std::function<Tensor<T>*(size_t)>& sink) {
        Tensor<T>* gx = sink(0);
        Tensor<T>* gk = sink(1);
        if (!gx && !gk) return;
        for (long co = 0; co < cout; ++co)
          for (long oy = 0; oy < oh; ++oy)
            for (long ox = 0; ox < ow; ++ox) {
              T gv = g.at(co, oy, ox);
              if (gv == T(0)) continue;
              for (long ci = 0; ci < cin; ++ci)
                for (long ky = 0; ky < kh; ++ky) {
                  long xoff = (ci * h + oy * stride + ky) * w + ox * stride;
                  long koff = ((co * cin + ci) * kh + ky) * kw;
                  if (gx) {
                    const T* kr = kernel->value.data() + koff;
                    T* gxr = gx->data() + xoff;
                    for (long kx = 0; kx < kw; ++kx) gxr[kx] += gv * kr[kx];
                  }
                  if (gk) {
                    const T* xr = x->value.data() + xoff;
                    T* gkr = gk->data() + koff;
                    for (long kx = 0; kx < kw; ++kx) gkr[kx] += gv * xr[kx];
                  }
                }
            }
      });
}

// ---------------------------------------------------------------------------
// softmax / batchnorm
// ---------------------------------------------------------------------------

template <class T>
NodePtr<T> softmax_vec(const NodePtr<T>& a) {
  require(a->value.rank() == 1, ErrCode::dim, "softmax: rank-1 required, got ",
          a->value.shape_str());
  long n = a->value.size();
  T mx = a->value[0];
  for (long i = 1; i < n; ++i) mx = std::max(mx, a->value[i]);
  Tensor<T> out({n});
  T denom = 0;
  for (long i = 0; i < n; ++i) {
    out[i] = std::exp(a->value[i] - mx);
    denom += out[i];
  }
  for (long i = 0; i < n; ++i) out[i] /= denom;
  Tensor<T> y = out;
  return make_node<T>(std::move(out), {a},
                      [y, n](const Tensor<T>& g, const std::function<Tensor<T>*(size_t)>& sink) {
                        Tensor<T>* ga = sink(0);
                        if (!ga) return;
                        T dot = 0;
                        for (long i = 0; i < n; ++i) dot += g[i] * y[i];
                        for (long i = 0; i < n; ++i) (*ga)[i] += y[i] * (g[i] - dot);
                      });
}

// Batch normalization over the column axis of a [D x N] matrix. In train
// mode the biased batch variance is used both for normalization and for the
// running-stat EMA update (new = (1-momentum)*old + momentum*batch), so after
// many identical batches the eval output converges to the train output.
template <class T>
NodePtr<T> batchnorm(const NodePtr<T>& x, const NodePtr<T>& gamma, const NodePtr<T>& beta,
                     Tensor<T>* running_mean, Tensor<T>* running_var, Mode mode,
                     T momentum = T(0.1), T eps = T(1e-5)) {
  require(x->value.rank() == 2, ErrCode::dim, "batchnorm: input must be [D x N], got ",
          x->value.shape_str());
  long d = x->value.extent(0), n = x->value.extent(1);
  require(gamma->value.size() == d && beta->value.size() == d, ErrCode::dim,
          "batchnorm: scale/shift length must be ", d);
  require(running_mean && running_var && running_mean->size() == d && running_var->size() == d,
          ErrCode::dim, "batchnorm: running stats length must be ", d);

  if (mode == Mode::train) {
    Tensor<T> mu({d}), sigma({d});
    Tensor<T> xhat({d, n});
    for (long i = 0; i < d; ++i) {
      T s = 0;
      for (long j = 0; j < n; ++j) s += x->value.at(i, j);
      mu[i] = s / static_cast<T>(n);
      T v = 0;
      for (long j = 0; j < n; ++j) {
        T dxi = x->value.at(i, j) - mu[i];
        v += dxi * dxi;
      }
      v /= static_cast<T>(n);
      sigma[i] = std::sqrt(v + eps);
      for (long j = 0; j < n; ++j) xhat.at(i, j) = (x->value.at(i, j) - mu[i]) / sigma[i];
      (*running_mean)[i] = (T(1) - momentum) * (*running_mean)[i] + momentum * mu[i];
      (*running_var)[i] = (T(1) - momentum) * (*running_var)[i] + momentum * v;
    }
    Tensor<T> out({d, n});
    for (long i = 0; i < d; ++i)
      for (long j = 0; j < n; ++j) out.at(i, j) = gamma->value[i] * xhat.at(i, j) + beta->value[i];
    return make_node<T>(
        std::move(out), {x, gamma, beta},
        [gamma, xhat, sigma, d, n](const Tensor<T>& g,
                                   const std::function<Tensor<T>*(size_t)>& sink) {
          Tensor<T>* gx = sink(0);
          Tensor<T>* gg = sink(1);
          Tensor<T>* gb = sink(2);
          for (long i = 0; i < d; ++i) {
            T sum_g = 0, sum_gx = 0, sum_raw = 0;
            for (long j = 0; j < n; ++j) {
              T gij = g.at(i, j);
              sum_raw += gij;
              sum_g += gij * gamma->value[i];
              sum_gx += gij * gamma->value[i] * xhat.at(i, j);
            }
            if (gb) (*gb)[i] += sum_raw;
            if (gg) {
              T s = 0;
              for (long j = 0; j < n; ++j) s += g.at(i, j) * xhat.at(i, j);
              (*gg)[i] += s;
            }
            if (gx) {
              T invn = T(1) / static_cast<T>(n);
              for (long j = 0; j < n; ++j) {
                T gxhat = g.at(i, j) * gamma->value[i];
                gx->at(i, j) += (gxhat - invn * (sum_g + xhat.at(i, j) * sum_gx)) / sigma[i];
              }
            }
          }
        });
  }

  // eval mode: per-channel affine from frozen statistics
  Tensor<T> inv_sigma({d});
  for (long i = 0; i < d; ++i) inv_sigma[i] = T(1) / std::sqrt((*running_var)[i] + eps);
  Tensor<T> out({d, n});
  Tensor<T> xhat({d, n});
  for (long i = 0; i < d; ++i)
    for (long j = 0; j < n; ++j) {
      xhat.at(i, j) = (x->value.at(i, j) - (*running_mean)[i]) * inv_sigma[i];
      out.at(i, j) = gamma->value[i] * xhat.at(i, j) + beta->value[i];
    }
  return make_node<T>(std::move(out), {x, gamma, beta},
                      [gamma, xhat, inv_sigma, d, n](const Tensor<T>& g,
                                                     const std::function<Tensor<T>*(size_t)>& sink) {
                        Tensor<T>* gx = sink(0);
                        Tensor<T>* gg = sink(1);
                        Tensor<T>* gb = sink(2);
                        for (long i = 0; i < d; ++i) {
                          T sg = 0, sgx = 0;
                          for (long j = 0; j < n; ++j) {
                            T gij = g.at(i, j);
                            sg += gij;
                            sgx += gij * xhat.at(i, j);
                            if (gx) gx->at(i, j) += gij * gamma->value[i] * inv_sigma[i];
                          }
                          if (gg) (*gg)[i] += sgx;
                          if (gb) (*gb)[i] += sg;
                        }
                      });
}

// ---------------------------------------------------------------------------
// distances
// ---------------------------------------------------------------------------

template <class T>
NodePtr<T> euclidean_distance(const NodePtr<T>& a, const NodePtr<T>& b) {
  check_same_shape(a->value, b->value, "euclidean_distance");
  long n = a->value.size();
  Tensor<T> diff({n});
  T s = 0;
  for (long i = 0; i < n; ++i) {
    diff[i] = a->value[i] - b->value[i];
    s += diff[i] * diff[i];
  }
  T dist = std::sqrt(s);
  return make_node<T>(Tensor<T>::scalar(dist), {a, b},
                      [diff, dist, n](const Tensor<T>& g,
                                      const std::function<Tensor<T>*(size_t)>& sink) {
                        // subgradient 0 at coincident points
                        if (dist <= T(0)) return;
                        T c = g[0] / dist;
                        if (Tensor<T>* ga = sink(0))
                          for (long i = 0; i < n; ++i) (*ga)[i] += c * diff[i];
                        if (Tensor<T>* gb = sink(1))
                          for (long i = 0; i < n; ++i) (*gb)[i] -= c * diff[i];
                      });
}

template <class T>
NodePtr<T> l2_norm(const NodePtr<T>& a) {
  long n = a->value.size();
  T s = 0;
  for (long i = 0; i < n; ++i) s += a->value[i] * a->value[i];
  T norm = std::sqrt(s);
  return make_node<T>(Tensor<T>::scalar(norm), {a},
                      [a, norm, n](const Tensor<T>& g,
                                   const std::function<Tensor<T>*(size_t)>& sink) {
                        if (norm <= T(0)) return;
                        if (Tensor<T>* ga = sink(0)) {
                          T c = g[0] / norm;
                          for (long i = 0; i < n; ++i) (*ga)[i] += c * a->value[i];
                        }
                      });
}

template <class T>
NodePtr<T> cosine_similarity(const NodePtr<T>& a, const NodePtr<T>& b) {
  check_same_shape(a->value, b->value, "cosine_similarity");
  long n = a->value.size();
  T dot = 0, na = 0, nb = 0;
  for (long i = 0; i < n; ++i) {
    dot += a->value[i] * b->value[i];
    na += a->value[i] * a->value[i];
    nb += b->value[i] * b->value[i];
  }
  na = std::sqrt(na);
  nb = std::sqrt(nb);
  T denom = na * nb;
  T c = denom > T(0) ? dot / denom : T(0);
  return make_node<T>(Tensor<T>::scalar(c), {a, b},
                      [a, b, c, na, nb, denom, n](const Tensor<T>& g,
                                                  const std::function<Tensor<T>*(size_t)>& sink) {
                        if (denom <= T(0)) return;
                        if (Tensor<T>* ga = sink(0))
                          for (long i = 0; i < n; ++i)
                            (*ga)[i] += g[0] * (b->value[i] / denom - c * a->value[i] / (na * na));
                        if (Tensor<T>* gb = sink(1))
                          for (long i = 0; i < n; ++i)
                            (*gb)[i] += g[0] * (a->value[i] / denom - c * b->value[i] / (nb * nb));
                      });
}

// ---------------------------------------------------------------------------
// backward pass
// ---------------------------------------------------------------------------

template <class T>
std::vector<Node<T>*> topo_order(Node<T>* root) {
  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> seen;
  // iterative post-order; child is appended after all its parents
  std::vector<std::pair<Node<T>*, size_t>> stack;
  stack.emplace_back(root, 0);
  seen.insert(root);
  while (!stack.empty()) {
    auto& [node, idx] = stack.back();
    if (idx < node->parents.size()) {
      Node<T>* p = node->parents[idx++].get();
      if (p->needs_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  return order;  // parents precede children
}

// Accumulates d(root)/d(node) into every reachable grad-requiring node's
// grad tensor. Repeated calls without resetting grads accumulate.
template <class T>
void backward(const NodePtr<T>& root) {
  require(root->value.size() == 1, ErrCode::contract,
          "backward: root must be scalar-valued, got ", root->value.shape_str());
  if (!root->needs_grad && !root->requires_grad) return;  // nothing depends on parameters

  std::vector<Node<T>*> order = topo_order(root.get());
  std::unordered_map<Node<T>*, Tensor<T>> tmp;
  tmp.reserve(order.size() * 2);
  auto buf = [&tmp](Node<T>* n) -> Tensor<T>& {
    auto it = tmp.find(n);
    if (it == tmp.end()) it = tmp.emplace(n, Tensor<T>::zeros(n->value.shape())).first;
    return it->second;
  };

  buf(root.get())[0] = T(1);

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* node = *it;
    if (!node->backward_fn) continue;
    auto found = tmp.find(node);
    if (found == tmp.end()) continue;  // no gradient reached this node
    const Tensor<T>& g = found->second;
    auto sink = [&](size_t i) -> Tensor<T>* {
      Node<T>* p = node->parents[i].get();
      if (!p->needs_grad) return nullptr;
      return &buf(p);
    };
    node->backward_fn(g, sink);
  }

  for (Node<T>* node : order) {
    if (!node->has_grad) {
      node->grad = Tensor<T>::zeros(node->value.shape());
      node->has_grad = true;
    }
    auto found = tmp.find(node);
    if (found == tmp.end()) continue;
    for (long i = 0; i < node->grad.size(); ++i) node->grad[i] += found->second[i];
  }
}

template <class T>
void zero_grad(const NodePtr<T>& n) {
  n->has_grad = false;
  n->grad = Tensor<T>();
}

}  // namespace loga
