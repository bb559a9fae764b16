#include "dsx/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>

namespace dsx {

namespace {

size_t shape_numel(const std::vector<long>& shape) {
  size_t n = 1;
  for (long d : shape) {
    if (d < 0) fail(ErrorKind::Shape, "negative dimension");
    n *= static_cast<size_t>(d);
  }
  return n;
}

thread_local Tape* g_active_tape = nullptr;

std::shared_ptr<TensorNode> make_node(std::vector<long> shape) {
  auto n = std::make_shared<TensorNode>();
  n->shape = std::move(shape);
  n->value.assign(shape_numel(n->shape), 0.0);
  return n;
}

// Create the output node of an op and register it if gradients are flowing.
Tensor make_result(std::vector<long> shape,
                   std::vector<std::shared_ptr<TensorNode>> parents,
                   std::function<void(TensorNode&)> backward_fn) {
  auto node = make_node(std::move(shape));
  bool needs = false;
  if (g_active_tape != nullptr)
    for (const auto& p : parents)
      if (p->requires_grad) needs = true;
  if (needs) {
    node->requires_grad = true;
    node->parents = std::move(parents);
    node->backward_fn = std::move(backward_fn);
    Tape::record(node);
  }
  return Tensor(node);
}

}  // namespace

Tensor make_op_result(std::vector<long> shape,
                      std::vector<std::shared_ptr<TensorNode>> parents,
                      std::function<void(TensorNode&)> backward_fn) {
  return make_result(std::move(shape), std::move(parents), std::move(backward_fn));
}

void TensorNode::accumulate(const double* g, size_t n) {
  if (grad.empty()) grad.assign(value.size(), 0.0);
  for (size_t i = 0; i < n; ++i) grad[i] += g[i];
}

double* TensorNode::grad_data() {
  if (grad.empty()) grad.assign(value.size(), 0.0);
  return grad.data();
}

Tensor Tensor::zeros(std::vector<long> shape, bool requires_grad) {
  auto n = make_node(std::move(shape));
  n->requires_grad = requires_grad;
  return Tensor(n);
}

Tensor Tensor::full(std::vector<long> shape, double v, bool requires_grad) {
  auto n = make_node(std::move(shape));
  std::fill(n->value.begin(), n->value.end(), v);
  n->requires_grad = requires_grad;
  return Tensor(n);
}

Tensor Tensor::from(std::vector<double> data, std::vector<long> shape,
                    bool requires_grad) {
  if (data.size() != shape_numel(shape)) fail(ErrorKind::Shape, "data/shape mismatch");
  auto n = std::make_shared<TensorNode>();
  n->shape = std::move(shape);
  n->value = std::move(data);
  n->requires_grad = requires_grad;
  return Tensor(n);
}

Tensor Tensor::scalar(double v, bool requires_grad) {
  return from({v}, {1}, requires_grad);
}

double Tensor::item() const {
  if (numel() != 1) fail(ErrorKind::Shape, "item() on non-scalar");
  return node_->value[0];
}

const std::vector<double>& Tensor::grad() const {
  if (node_->grad.empty()) node_->grad.assign(node_->value.size(), 0.0);
  return node_->grad;
}

Tape::Tape() {
  prev_ = g_active_tape;
  g_active_tape = this;
}

Tape::~Tape() { g_active_tape = prev_; }

Tape* Tape::active() { return g_active_tape; }

void Tape::record(const std::shared_ptr<TensorNode>& node) {
  if (g_active_tape) g_active_tape->nodes_.push_back(node);
}

void Tape::backward(Tensor loss) {
  if (loss.numel() != 1) fail(ErrorKind::Argument, "backward needs a scalar loss");
  auto& root = *loss.node();
  if (!root.requires_grad)
    fail(ErrorKind::Argument, "loss does not depend on any tracked tensor");
  root.grad.assign(1, 1.0);

  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    TensorNode& n = **it;
    if (n.backward_fn && !n.grad.empty()) n.backward_fn(n);
    // Release saved activations and this node's gradient; parents keep theirs.
    n.backward_fn = nullptr;
    if (&n != &root) n.grad = std::vector<double>();
  }
  nodes_.clear();
}

// ---------------------------------------------------------------------------
// broadcasting elementwise
// ---------------------------------------------------------------------------

namespace {

// b must be a scalar or equal the suffix of a's shape (leading-dim broadcast).
void check_suffix(const std::vector<long>& a, const std::vector<long>& b) {
  size_t bn = 1;
  for (long d : b) bn *= static_cast<size_t>(d);
  if (bn == 1) return;
  if (b.size() > a.size()) fail(ErrorKind::Shape, "broadcast: operand rank too high");
  for (size_t i = 0; i < b.size(); ++i)
    if (b[b.size() - 1 - i] != a[a.size() - 1 - i])
      fail(ErrorKind::Shape, "broadcast: shapes not suffix-compatible");
}

enum class BinOp { Add, Sub, Mul, Div };

Tensor binary_op(const Tensor& a, const Tensor& b, BinOp op) {
  const bool swap_ok = (op == BinOp::Add || op == BinOp::Mul);
  const Tensor& big = (a.numel() >= b.numel() || !swap_ok) ? a : b;
  const Tensor& small = (&big == &a) ? b : a;
  // For Sub/Div only a >= b broadcasting is supported.
  check_suffix(big.shape(), small.shape());
  const bool a_is_big = (&big == &a);

  const size_t n = big.numel();
  const size_t m = small.numel();
  auto an = a.node();
  auto bn = b.node();

  Tensor out = make_result(
      big.shape(), {an, bn},
      [an, bn, op, a_is_big, n, m](TensorNode& node) {
        const double* g = node.grad.data();
        const TensorNode* big_n = a_is_big ? an.get() : bn.get();
        const TensorNode* small_n = a_is_big ? bn.get() : an.get();
        auto& big_mut = a_is_big ? *an : *bn;
        auto& small_mut = a_is_big ? *bn : *an;

        auto add_big = [&](auto f) {
          if (!big_mut.requires_grad) return;
          double* dst = big_mut.grad_data();
          for (size_t i = 0; i < n; ++i) dst[i] += f(i);
        };
        auto add_small = [&](auto f) {
          if (!small_mut.requires_grad) return;
          double* dst = small_mut.grad_data();
          for (size_t i = 0; i < n; ++i) dst[i % m] += f(i);
        };

        const double* bv = big_n->value.data();
        const double* sv = small_n->value.data();
        switch (op) {
          case BinOp::Add:
            add_big([&](size_t i) { return g[i]; });
            add_small([&](size_t i) { return g[i]; });
            break;
          case BinOp::Sub:  // out = big - small (a is big by construction)
            add_big([&](size_t i) { return g[i]; });
            add_small([&](size_t i) { return -g[i]; });
            break;
          case BinOp::Mul:
            add_big([&](size_t i) { return g[i] * sv[i % m]; });
            add_small([&](size_t i) { return g[i] * bv[i]; });
            break;
          case BinOp::Div:  // out = big / small
            add_big([&](size_t i) { return g[i] / sv[i % m]; });
            add_small([&](size_t i) {
              const double s = sv[i % m];
              return -g[i] * bv[i] / (s * s);
            });
            break;
        }
      });

  double* y = out.data();
  const double* bv = big.data();
  const double* sv = small.data();
  switch (op) {
    case BinOp::Add:
      for (size_t i = 0; i < n; ++i) y[i] = bv[i] + sv[i % m];
      break;
    case BinOp::Sub:
      for (size_t i = 0; i < n; ++i) y[i] = bv[i] - sv[i % m];
      break;
    case BinOp::Mul:
      for (size_t i = 0; i < n; ++i) y[i] = bv[i] * sv[i % m];
      break;
    case BinOp::Div:
      for (size_t i = 0; i < n; ++i) y[i] = bv[i] / sv[i % m];
      break;
  }
  return out;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return binary_op(a, b, BinOp::Add); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary_op(a, b, BinOp::Sub); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary_op(a, b, BinOp::Mul); }
Tensor div(const Tensor& a, const Tensor& b) { return binary_op(a, b, BinOp::Div); }

Tensor scale(const Tensor& a, double c) {
  auto an = a.node();
  const size_t n = a.numel();
  Tensor out = make_result(a.shape(), {an}, [an, c, n](TensorNode& node) {
    if (!an->requires_grad) return;
    double* dst = an->grad_data();
    const double* g = node.grad.data();
    for (size_t i = 0; i < n; ++i) dst[i] += c * g[i];
  });
  const double* x = a.data();
  double* y = out.data();
  for (size_t i = 0; i < n; ++i) y[i] = c * x[i];
  return out;
}

// ---------------------------------------------------------------------------
// matmul
// ---------------------------------------------------------------------------

namespace detail {

// C += or = A(m,k) * B(k,n). Row accumulation order is ascending in k for
// every (i, j), independent of m, so batched and single-row calls agree
// bitwise.
void matmul_value(const double* a, const double* b, double* c, long m, long k,
                  long n, bool accumulate) {
  for (long i = 0; i < m; ++i) {
    double* crow = c + i * n;
    if (!accumulate) std::fill(crow, crow + n, 0.0);
    const double* arow = a + i * k;
    for (long kk = 0; kk < k; ++kk) {
      const double av = arow[kk];
      const double* brow = b + kk * n;
      for (long j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// dA += dC(m,n) * B^T  => dA[i,kk] = sum_j dC[i,j] B[kk,j]
// Lane-wise partial sums keep the reduction vectorizable.
void matmul_grad_a(const double* dc, const double* b, double* da, long m, long k,
                   long n) {
  constexpr long kLanes = 8;
  for (long i = 0; i < m; ++i) {
    const double* gr = dc + i * n;
    double* dar = da + i * k;
    for (long kk = 0; kk < k; ++kk) {
      const double* brow = b + kk * n;
      double lanes[kLanes] = {0, 0, 0, 0, 0, 0, 0, 0};
      long j = 0;
      for (; j + kLanes <= n; j += kLanes)
        for (long w = 0; w < kLanes; ++w) lanes[w] += gr[j + w] * brow[j + w];
      double acc = 0.0;
      for (; j < n; ++j) acc += gr[j] * brow[j];
      for (long w = 0; w < kLanes; ++w) acc += lanes[w];
      dar[kk] += acc;
    }
  }
}

// dB += A^T * dC  => dB[kk,j] = sum_i A[i,kk] dC[i,j]
void matmul_grad_b(const double* a, const double* dc, double* db, long m, long k,
                   long n) {
  for (long i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    const double* gr = dc + i * n;
    for (long kk = 0; kk < k; ++kk) {
      const double av = arow[kk];
      if (av == 0.0) continue;
      double* dbr = db + kk * n;
      for (long j = 0; j < n; ++j) dbr[j] += av * gr[j];
    }
  }
}

}  // namespace detail

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.ndim() != 2 || b.ndim() != 2 || a.dim(1) != b.dim(0))
    fail(ErrorKind::Shape, "matmul shape mismatch");
  const long m = a.dim(0), k = a.dim(1), n = b.dim(1);
  auto an = a.node();
  auto bn = b.node();

  Tensor out =
      make_result({m, n}, {an, bn}, [an, bn, m, k, n](TensorNode& node) {
        const double* g = node.grad.data();
        if (an->requires_grad)
          detail::matmul_grad_a(g, bn->value.data(), an->grad_data(), m, k, n);
        if (bn->requires_grad)
          detail::matmul_grad_b(an->value.data(), g, bn->grad_data(), m, k, n);
      });
  detail::matmul_value(a.data(), b.data(), out.data(), m, k, n, false);
  return out;
}

// ---------------------------------------------------------------------------
// convolutions, channels-last
// ---------------------------------------------------------------------------

Tensor conv2d(const Tensor& x, const Tensor& w, int stride_h, int stride_w,
              int pad_h, int pad_w) {
  if (x.ndim() != 4 || w.ndim() != 4 || x.dim(3) != w.dim(2))
    fail(ErrorKind::Shape, "conv2d shape mismatch");
  const long B = x.dim(0), H = x.dim(1), W = x.dim(2), Ci = x.dim(3);
  const long KH = w.dim(0), KW = w.dim(1), Co = w.dim(3);
  const long Ho = (H + 2 * pad_h - KH) / stride_h + 1;
  const long Wo = (W + 2 * pad_w - KW) / stride_w + 1;
  if (Ho < 1 || Wo < 1) fail(ErrorKind::Shape, "conv2d output would be empty");

  auto xn = x.node();
  auto wn = w.node();
  Tensor out = make_result(
      {B, Ho, Wo, Co}, {xn, wn},
      [xn, wn, B, H, W, Ci, KH, KW, Co, Ho, Wo, stride_h, stride_w, pad_h,
       pad_w](TensorNode& node) {
        const double* g = node.grad.data();
        const double* xv = xn->value.data();
        const double* wv = wn->value.data();
        double* dx = xn->requires_grad ? xn->grad_data() : nullptr;
        double* dw = wn->requires_grad ? wn->grad_data() : nullptr;
        for (long b = 0; b < B; ++b) {
          for (long ho = 0; ho < Ho; ++ho) {
            for (long wo = 0; wo < Wo; ++wo) {
              const double* grow = g + ((b * Ho + ho) * Wo + wo) * Co;
              for (long kh = 0; kh < KH; ++kh) {
                const long hi = ho * stride_h + kh - pad_h;
                if (hi < 0 || hi >= H) continue;
                for (long kw = 0; kw < KW; ++kw) {
                  const long wi = wo * stride_w + kw - pad_w;
                  if (wi < 0 || wi >= W) continue;
                  const size_t xoff = ((b * H + hi) * W + wi) * Ci;
                  const size_t woff = ((kh * KW + kw) * Ci) * Co;
                  for (long ci = 0; ci < Ci; ++ci) {
                    const double xval = xv[xoff + ci];
                    const double* wrow = wv + woff + ci * Co;
                    double acc = 0.0;
                    for (long co = 0; co < Co; ++co) acc += grow[co] * wrow[co];
                    if (dx) dx[xoff + ci] += acc;
                    if (dw) {
                      double* dwrow = dw + woff + ci * Co;
                      for (long co = 0; co < Co; ++co)
                        dwrow[co] += xval * grow[co];
                    }
                  }
                }
              }
            }
          }
        }
      });

  const double* xv = x.data();
  const double* wv = w.data();
  double* y = out.data();
  for (long b = 0; b < B; ++b) {
    for (long ho = 0; ho < Ho; ++ho) {
      for (long wo = 0; wo < Wo; ++wo) {
        double* yrow = y + ((b * Ho + ho) * Wo + wo) * Co;
        for (long kh = 0; kh < KH; ++kh) {
          const long hi = ho * stride_h + kh - pad_h;
          if (hi < 0 || hi >= H) continue;
          for (long kw = 0; kw < KW; ++kw) {
            const long wi = wo * stride_w + kw - pad_w;
            if (wi < 0 || wi >= W) continue;
            const double* xrow = xv + ((b * H + hi) * W + wi) * Ci;
            const double* wbase = wv + (kh * KW + kw) * Ci * Co;
            for (long ci = 0; ci < Ci; ++ci) {
              const double xval = xrow[ci];
              const double* wrow = wbase + ci * Co;
              for (long co = 0; co < Co; ++co) yrow[co] += xval * wrow[co];
            }
          }
        }
      }
    }
  }
  return out;
}

Tensor conv1d(const Tensor& x, const Tensor& w, int stride, int pad) {
  if (x.ndim() != 3 || w.ndim() != 3) fail(ErrorKind::Shape, "conv1d expects 3-d");
  // Reuse conv2d with H = 1.
  Tensor x4 = reshape(x, {x.dim(0), 1, x.dim(1), x.dim(2)});
  Tensor w4 = reshape(w, {1, w.dim(0), w.dim(1), w.dim(2)});
  Tensor y = conv2d(x4, w4, 1, stride, 0, pad);
  return reshape(y, {y.dim(0), y.dim(2), y.dim(3)});
}

Tensor conv_transpose2d(const Tensor& x, const Tensor& w, int stride_h,
                        int stride_w) {
  if (x.ndim() != 4 || w.ndim() != 4 || x.dim(3) != w.dim(2))
    fail(ErrorKind::Shape, "conv_transpose2d shape mismatch");
  const long B = x.dim(0), H = x.dim(1), W = x.dim(2), Ci = x.dim(3);
  const long KH = w.dim(0), KW = w.dim(1), Co = w.dim(3);
  const long Ho = (H - 1) * stride_h + KH;
  const long Wo = (W - 1) * stride_w + KW;

  auto xn = x.node();
  auto wn = w.node();
  Tensor out = make_result(
      {B, Ho, Wo, Co}, {xn, wn},
      [xn, wn, B, H, W, Ci, KH, KW, Co, Ho, Wo, stride_h,
       stride_w](TensorNode& node) {
        const double* g = node.grad.data();
        const double* xv = xn->value.data();
        const double* wv = wn->value.data();
        double* dx = xn->requires_grad ? xn->grad_data() : nullptr;
        double* dw = wn->requires_grad ? wn->grad_data() : nullptr;
        for (long b = 0; b < B; ++b) {
          for (long h = 0; h < H; ++h) {
            for (long ww = 0; ww < W; ++ww) {
              const size_t xoff = ((b * H + h) * W + ww) * Ci;
              for (long kh = 0; kh < KH; ++kh) {
                for (long kw = 0; kw < KW; ++kw) {
                  const long ho = h * stride_h + kh;
                  const long wo = ww * stride_w + kw;
                  const double* grow = g + ((b * Ho + ho) * Wo + wo) * Co;
                  const double* wbase = wv + (kh * KW + kw) * Ci * Co;
                  for (long ci = 0; ci < Ci; ++ci) {
                    const double xval = xv[xoff + ci];
                    const double* wrow = wbase + ci * Co;
                    double acc = 0.0;
                    for (long co = 0; co < Co; ++co) acc += grow[co] * wrow[co];
                    if (dx) dx[xoff + ci] += acc;
                    if (dw) {
                      double* dwrow = dw + (kh * KW + kw) * Ci * Co + ci * Co;
                      for (long co = 0; co < Co; ++co)
                        dwrow[co] += xval * grow[co];
                    }
                  }
                }
              }
            }
          }
        }
      });

  const double* xv = x.data();
  const double* wv = w.data();
  double* y = out.data();
  for (long b = 0; b < B; ++b) {
    for (long h = 0; h < H; ++h) {
      for (long ww = 0; ww < W; ++ww) {
        const double* xrow = xv + ((b * H + h) * W + ww) * Ci;
        for (long kh = 0; kh < KH; ++kh) {
          for (long kw = 0; kw < KW; ++kw) {
            const long ho = h * stride_h + kh;
            const long wo = ww * stride_w + kw;
            double* yrow = y + ((b * Ho + ho) * Wo + wo) * Co;
            const double* wbase = wv + (kh * KW + kw) * Ci * Co;
            for (long ci = 0; ci < Ci; ++ci) {
              const double xval = xrow[ci];
              const double* wrow = wbase + ci * Co;
              for (long co = 0; co < Co; ++co) yrow[co] += xval * wrow[co];
            }
          }
        }
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// shape ops
// ---------------------------------------------------------------------------

namespace {

// Split a shape at `axis` into (outer, axis_len, inner).
void axis_strides(const std::vector<long>& shape, int axis, size_t& outer,
                  size_t& alen, size_t& inner) {
  outer = 1;
  inner = 1;
  for (int i = 0; i < axis; ++i) outer *= shape[i];
  alen = shape[axis];
  for (size_t i = axis + 1; i < shape.size(); ++i) inner *= shape[i];
}

}  // namespace

Tensor concat(const std::vector<Tensor>& parts, int axis) {
  if (parts.empty()) fail(ErrorKind::Argument, "concat of nothing");
  const int nd = parts[0].ndim();
  if (axis < 0 || axis >= nd) fail(ErrorKind::Shape, "concat axis out of range");
  std::vector<long> shape = parts[0].shape();
  long total = 0;
  for (const auto& p : parts) {
    if (p.ndim() != nd) fail(ErrorKind::Shape, "concat rank mismatch");
    for (int i = 0; i < nd; ++i)
      if (i != axis && p.dim(i) != shape[i])
        fail(ErrorKind::Shape, "concat shape mismatch");
    total += p.dim(axis);
  }
  shape[axis] = total;

  std::vector<std::shared_ptr<TensorNode>> parents;
  for (const auto& p : parts) parents.push_back(p.node());

  size_t outer, alen, inner;
  axis_strides(shape, axis, outer, alen, inner);
  std::vector<size_t> part_alen;
  for (const auto& p : parts) part_alen.push_back(p.dim(axis));

  auto parents_copy = parents;
  Tensor out = make_result(
      shape, std::move(parents),
      [parents_copy, outer, alen, inner, part_alen](TensorNode& node) {
        const double* g = node.grad.data();
        size_t a0 = 0;
        for (size_t pi = 0; pi < parents_copy.size(); ++pi) {
          auto& p = *parents_copy[pi];
          const size_t pa = part_alen[pi];
          if (p.requires_grad) {
            double* dst = p.grad_data();
            for (size_t o = 0; o < outer; ++o)
              for (size_t a = 0; a < pa; ++a)
                for (size_t i = 0; i < inner; ++i)
                  dst[(o * pa + a) * inner + i] +=
                      g[(o * alen + a0 + a) * inner + i];
          }
          a0 += pa;
        }
      });

  double* y = out.data();
  size_t a0 = 0;
  for (size_t pi = 0; pi < parts.size(); ++pi) {
    const double* src = parts[pi].data();
    const size_t pa = part_alen[pi];
    for (size_t o = 0; o < outer; ++o)
      for (size_t a = 0; a < pa; ++a)
        std::memcpy(y + ((o * alen + a0 + a) * inner),
                    src + (o * pa + a) * inner, inner * sizeof(double));
    a0 += pa;
  }
  return out;
}

Tensor slice(const Tensor& x, int axis, long start, long len) {
  if (axis < 0 || axis >= x.ndim()) fail(ErrorKind::Shape, "slice axis out of range");
  if (start < 0 || len < 1 || start + len > x.dim(axis))
    fail(ErrorKind::Shape, "slice range out of bounds");
  std::vector<long> shape = x.shape();
  shape[axis] = len;

  size_t outer, alen, inner;
  axis_strides(x.shape(), axis, outer, alen, inner);
  auto xn = x.node();

  Tensor out = make_result(
      shape, {xn}, [xn, outer, alen, inner, start, len](TensorNode& node) {
        if (!xn->requires_grad) return;
        double* dst = xn->grad_data();
        const double* g = node.grad.data();
        for (size_t o = 0; o < outer; ++o)
          for (long a = 0; a < len; ++a)
            for (size_t i = 0; i < inner; ++i)
              dst[(o * alen + start + a) * inner + i] +=
                  g[(o * len + a) * inner + i];
      });

  const double* src = x.data();
  double* y = out.data();
  for (size_t o = 0; o < outer; ++o)
    for (long a = 0; a < len; ++a)
      std::memcpy(y + (o * len + a) * inner, src + (o * alen + start + a) * inner,
                  inner * sizeof(double));
  return out;
}

Tensor reshape(const Tensor& x, std::vector<long> shape) {
  if (shape_numel(shape) != x.numel()) fail(ErrorKind::Shape, "reshape numel mismatch");
  auto xn = x.node();
  const size_t n = x.numel();
  Tensor out = make_result(std::move(shape), {xn}, [xn, n](TensorNode& node) {
    if (!xn->requires_grad) return;
    xn->accumulate(node.grad.data(), n);
  });
  std::memcpy(out.data(), x.data(), n * sizeof(double));
  return out;
}

// ---------------------------------------------------------------------------
// nonlinearities
// ---------------------------------------------------------------------------

Tensor sigmoid(const Tensor& x) {
  auto xn = x.node();
  const size_t n = x.numel();
  Tensor out = make_result(x.shape(), {xn}, [xn, n](TensorNode& node) {
    if (!xn->requires_grad) return;
    double* dst = xn->grad_data();
    const double* g = node.grad.data();
    const double* y = node.value.data();
    for (size_t i = 0; i < n; ++i) dst[i] += g[i] * y[i] * (1.0 - y[i]);
  });
  const double* xv = x.data();
  double* y = out.data();
  for (size_t i = 0; i < n; ++i) y[i] = 1.0 / (1.0 + std::exp(-xv[i]));
  return out;
}

Tensor tanh_t(const Tensor& x) {
  auto xn = x.node();
  const size_t n = x.numel();
  Tensor out = make_result(x.shape(), {xn}, [xn, n](TensorNode& node) {
    if (!xn->requires_grad) return;
    double* dst = xn->grad_data();
    const double* g = node.grad.data();
    const double* y = node.value.data();
    for (size_t i = 0; i < n; ++i) dst[i] += g[i] * (1.0 - y[i] * y[i]);
  });
  const double* xv = x.data();
  double* y = out.data();
  for (size_t i = 0; i < n; ++i) y[i] = std::tanh(xv[i]);
  return out;
}

Tensor prelu(const Tensor& x, const Tensor& alpha) {
  const long C = x.dim(x.ndim() - 1);
  if (alpha.ndim() != 1 || alpha.dim(0) != C)
    fail(ErrorKind::Shape, "prelu alpha must be (channels)");
  auto xn = x.node();
  auto an = alpha.node();
  const size_t n = x.numel();

  Tensor out = make_result(x.shape(), {xn, an}, [xn, an, n, C](TensorNode& node) {
    const double* g = node.grad.data();
    const double* xv = xn->value.data();
    const double* av = an->value.data();
    if (xn->requires_grad) {
      double* dst = xn->grad_data();
      for (size_t i = 0; i < n; ++i)
        dst[i] += g[i] * (xv[i] >= 0.0 ? 1.0 : av[i % C]);
    }
    if (an->requires_grad) {
      double* dst = an->grad_data();
      for (size_t i = 0; i < n; ++i)
        if (xv[i] < 0.0) dst[i % C] += g[i] * xv[i];
    }
  });
  const double* xv = x.data();
  const double* av = alpha.data();
  double* y = out.data();
  for (size_t i = 0; i < n; ++i)
    y[i] = xv[i] >= 0.0 ? xv[i] : av[i % C] * xv[i];
  return out;
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double eps) {
  const long C = x.dim(x.ndim() - 1);
  if (gamma.ndim() != 1 || gamma.dim(0) != C || beta.ndim() != 1 || beta.dim(0) != C)
    fail(ErrorKind::Shape, "layer_norm affine must be (channels)");
  const size_t rows = x.numel() / static_cast<size_t>(C);
  auto xn = x.node();
  auto gn = gamma.node();
  auto bn = beta.node();

  // Save per-row mean and inverse stddev for the backward pass.
  auto saved = std::make_shared<std::vector<double>>(rows * 2);

  Tensor out = make_result(
      x.shape(), {xn, gn, bn}, [xn, gn, bn, saved, rows, C](TensorNode& node) {
        const double* g = node.grad.data();
        const double* xv = xn->value.data();
        const double* gv = gn->value.data();
        double* dx = xn->requires_grad ? xn->grad_data() : nullptr;
        double* dgamma = gn->requires_grad ? gn->grad_data() : nullptr;
        double* dbeta = bn->requires_grad ? bn->grad_data() : nullptr;
        const double invC = 1.0 / static_cast<double>(C);
        for (size_t r = 0; r < rows; ++r) {
          const double mean = (*saved)[2 * r];
          const double istd = (*saved)[2 * r + 1];
          const double* xr = xv + r * C;
          const double* gr = g + r * C;
          double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
          for (long c = 0; c < C; ++c) {
            const double xhat = (xr[c] - mean) * istd;
            const double dxhat = gr[c] * gv[c];
            sum_dxhat += dxhat;
            sum_dxhat_xhat += dxhat * xhat;
            if (dgamma) dgamma[c] += gr[c] * xhat;
            if (dbeta) dbeta[c] += gr[c];
          }
          if (dx) {
            double* dxr = dx + r * C;
            for (long c = 0; c < C; ++c) {
              const double xhat = (xr[c] - mean) * istd;
              const double dxhat = gr[c] * gv[c];
              dxr[c] += istd * (dxhat - invC * sum_dxhat - invC * xhat * sum_dxhat_xhat);
            }
          }
        }
      });

  const double* xv = x.data();
  const double* gv = gamma.data();
  const double* bv = beta.data();
  double* y = out.data();
  for (size_t r = 0; r < rows; ++r) {
    const double* xr = xv + r * C;
    double mean = 0.0;
    for (long c = 0; c < C; ++c) mean += xr[c];
    mean /= static_cast<double>(C);
    double var = 0.0;
    for (long c = 0; c < C; ++c) var += (xr[c] - mean) * (xr[c] - mean);
    var /= static_cast<double>(C);
    const double istd = 1.0 / std::sqrt(var + eps);
    (*saved)[2 * r] = mean;
    (*saved)[2 * r + 1] = istd;
    double* yr = y + r * C;
    for (long c = 0; c < C; ++c) yr[c] = (xr[c] - mean) * istd * gv[c] + bv[c];
  }
  return out;
}

// ---------------------------------------------------------------------------
// reductions and scalar math
// ---------------------------------------------------------------------------

Tensor sum_all(const Tensor& x) {
  auto xn = x.node();
  const size_t n = x.numel();
  Tensor out = make_result({1}, {xn}, [xn, n](TensorNode& node) {
    if (!xn->requires_grad) return;
    double* dst = xn->grad_data();
    const double g = node.grad[0];
    for (size_t i = 0; i < n; ++i) dst[i] += g;
  });
  double acc = 0.0;
  const double* xv = x.data();
  for (size_t i = 0; i < n; ++i) acc += xv[i];
  out.data()[0] = acc;
  return out;
}

Tensor mean_all(const Tensor& x) {
  return scale(sum_all(x), 1.0 / static_cast<double>(x.numel()));
}

Tensor abs_t(const Tensor& x) {
  auto xn = x.node();
  const size_t n = x.numel();
  Tensor out = make_result(x.shape(), {xn}, [xn, n](TensorNode& node) {
    if (!xn->requires_grad) return;
    double* dst = xn->grad_data();
    const double* g = node.grad.data();
    const double* xv = xn->value.data();
    for (size_t i = 0; i < n; ++i)
      dst[i] += g[i] * (xv[i] >= 0.0 ? 1.0 : -1.0);
  });
  const double* xv = x.data();
  double* y = out.data();
  for (size_t i = 0; i < n; ++i) y[i] = std::abs(xv[i]);
  return out;
}

Tensor log10_clamped(const Tensor& x, double lo, double hi) {
  auto xn = x.node();
  const size_t n = x.numel();
  const double ln10 = std::log(10.0);
  Tensor out = make_result(x.shape(), {xn}, [xn, n, lo, hi, ln10](TensorNode& node) {
    if (!xn->requires_grad) return;
    double* dst = xn->grad_data();
    const double* g = node.grad.data();
    const double* xv = xn->value.data();
    for (size_t i = 0; i < n; ++i) {
      if (xv[i] > lo && xv[i] < hi) dst[i] += g[i] / (xv[i] * ln10);
    }
  });
  const double* xv = x.data();
  double* y = out.data();
  for (size_t i = 0; i < n; ++i)
    y[i] = std::log10(std::clamp(xv[i], lo, hi));
  return out;
}

}  // namespace dsx
