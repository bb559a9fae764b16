#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "dsx/common.hpp"

namespace dsx {

// Dense row-major f64 tensor participating in reverse-mode autodiff.
// Values are shared; gradients live on the node and accumulate additively.
struct TensorNode {
  std::vector<long> shape;
  std::vector<double> value;
  std::vector<double> grad;  // allocated on first accumulation
  bool requires_grad = false;
  std::function<void(TensorNode&)> backward_fn;  // pullback into parents
  std::vector<std::shared_ptr<TensorNode>> parents;

  size_t numel() const { return value.size(); }
  void accumulate(const double* g, size_t n);
  double* grad_data();
};

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<TensorNode> node) : node_(std::move(node)) {}

  static Tensor zeros(std::vector<long> shape, bool requires_grad = false);
  static Tensor full(std::vector<long> shape, double v, bool requires_grad = false);
  static Tensor from(std::vector<double> data, std::vector<long> shape,
                     bool requires_grad = false);
  static Tensor scalar(double v, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const std::vector<long>& shape() const { return node_->shape; }
  long dim(int i) const { return node_->shape[i]; }
  int ndim() const { return static_cast<int>(node_->shape.size()); }
  size_t numel() const { return node_->numel(); }
  bool requires_grad() const { return node_->requires_grad; }

  double* data() { return node_->value.data(); }
  const double* data() const { return node_->value.data(); }
  double item() const;

  const std::vector<double>& grad() const;

  std::shared_ptr<TensorNode>& node() { return node_; }
  const std::shared_ptr<TensorNode>& node() const { return node_; }

 private:
  std::shared_ptr<TensorNode> node_;
};

// Define-by-run recording context. While alive, ops whose inputs require
// gradients append their output nodes in creation order; backward() visits
// that list exactly once in reverse, freeing saved state as it goes.
class Tape {
 public:
  Tape();
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  void backward(Tensor loss);
  size_t size() const { return nodes_.size(); }

  static Tape* active();
  static void record(const std::shared_ptr<TensorNode>& node);

 private:
  std::vector<std::shared_ptr<TensorNode>> nodes_;
  Tape* prev_ = nullptr;
};

// --- elementwise with suffix broadcasting (smaller shape must be a suffix) --
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);

// --- linear algebra ---------------------------------------------------------
Tensor matmul(const Tensor& a, const Tensor& b);  // (m,k) x (k,n)

// --- convolutions (channels-last) -------------------------------------------
// x: (B, L, Cin), w: (K, Cin, Cout) -> (B, L', Cout)
Tensor conv1d(const Tensor& x, const Tensor& w, int stride = 1, int pad = 0);
// x: (B, H, W, Cin), w: (KH, KW, Cin, Cout) -> (B, H', W', Cout)
Tensor conv2d(const Tensor& x, const Tensor& w, int stride_h, int stride_w,
              int pad_h = 0, int pad_w = 0);
// x: (B, H, W, Cin), w: (KH, KW, Cin, Cout) -> (B, (H-1)*sh+KH, (W-1)*sw+KW, Cout)
Tensor conv_transpose2d(const Tensor& x, const Tensor& w, int stride_h,
                        int stride_w);

// --- shape ------------------------------------------------------------------
Tensor concat(const std::vector<Tensor>& parts, int axis);
Tensor slice(const Tensor& x, int axis, long start, long len);
Tensor reshape(const Tensor& x, std::vector<long> shape);

// --- nonlinearities & normalization ----------------------------------------
Tensor sigmoid(const Tensor& x);
Tensor tanh_t(const Tensor& x);
// alpha: one slope per channel (last dim); slope at exactly 0 is the positive side.
Tensor prelu(const Tensor& x, const Tensor& alpha);
// Normalizes the last dim; gamma/beta: (C).
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double eps = 1e-5);

// --- reductions and scalar math ---------------------------------------------
Tensor sum_all(const Tensor& x);
Tensor mean_all(const Tensor& x);
Tensor abs_t(const Tensor& x);
// log10(clamp(x, lo, hi)); gradient is zero outside the clamp window.
Tensor log10_clamped(const Tensor& x, double lo, double hi);

// Output node for a fused op with a custom pullback; records on the active
// tape when any parent requires a gradient, otherwise stays a plain value.
Tensor make_op_result(std::vector<long> shape,
                      std::vector<std::shared_ptr<TensorNode>> parents,
                      std::function<void(TensorNode&)> backward_fn);

namespace detail {
// Shared dense kernels. Accumulation order per output element is ascending in
// the contraction index regardless of row count, so batched and row-at-a-time
// calls agree bitwise.
void matmul_value(const double* a, const double* b, double* c, long m, long k,
                  long n, bool accumulate);
void matmul_grad_a(const double* dc, const double* b, double* da, long m, long k,
                   long n);
void matmul_grad_b(const double* a, const double* dc, double* db, long m, long k,
                   long n);
}  // namespace detail

}  // namespace dsx
