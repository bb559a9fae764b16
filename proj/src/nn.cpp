#include "dsx/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace dsx {

std::pair<Tensor, Tensor> lstm_cell(const Tensor& x, const Tensor& h_prev,
                                    const Tensor& c_prev, const LstmWeights& w) {
  if (x.ndim() != 2 || h_prev.ndim() != 2 || c_prev.ndim() != 2)
    fail(ErrorKind::Shape, "lstm_cell expects 2-d (batch, features)");
  const long h = w.hidden();
  if (x.dim(1) != w.input() || h_prev.dim(1) != h || c_prev.dim(1) != h)
    fail(ErrorKind::Shape, "lstm_cell weight shapes inconsistent");

  Tensor gates = add(add(matmul(x, w.wx), matmul(h_prev, w.wh)), w.b);
  Tensor gi = sigmoid(slice(gates, 1, 0, h));
  Tensor gf = sigmoid(slice(gates, 1, h, h));
  Tensor gg = tanh_t(slice(gates, 1, 2 * h, h));
  Tensor go = sigmoid(slice(gates, 1, 3 * h, h));
  Tensor c = add(mul(gf, c_prev), mul(gi, gg));
  Tensor hh = mul(go, tanh_t(c));
  return {hh, c};
}

namespace {

inline double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Activate gate pre-activations in place: [i f g o] blocks of width H.
void activate_gates(double* gates, long rows, long H) {
  for (long r = 0; r < rows; ++r) {
    double* g = gates + r * 4 * H;
    for (long j = 0; j < H; ++j) g[j] = sig(g[j]);
    for (long j = H; j < 2 * H; ++j) g[j] = sig(g[j]);
    for (long j = 2 * H; j < 3 * H; ++j) g[j] = std::tanh(g[j]);
    for (long j = 3 * H; j < 4 * H; ++j) g[j] = sig(g[j]);
  }
}

void add_bias_rows(double* gates, const double* bias, long rows, long cols) {
  for (long r = 0; r < rows; ++r) {
    double* g = gates + r * cols;
    for (long j = 0; j < cols; ++j) g[j] += bias[j];
  }
}

// Shared recurrent sweep used by both fused directions.
//
// Layout contract: the caller provides gather/scatter callables that move a
// step's rows (N x width) between the packed tensors and dense step buffers.
// `steps` indexes the recurrence axis in execution order. `scatter` overwrites
// (forward outputs); `scatter_add` accumulates (gradients).
struct LstmSweep {
  long N, C, H, steps;
  std::function<void(const double*, long, long, double*)> gather;       // src,width,step,dst
  std::function<void(const double*, long, long, double*)> scatter;      // overwrite
  std::function<void(const double*, long, long, double*)> scatter_add;  // accumulate
};

void lstm_forward_sweep(const LstmSweep& s, const double* x, const double* wx,
                        const double* wh, const double* b, const double* h0,
                        const double* c0, double* h_out, double* c_save,
                        double* h_final, double* c_final) {
  const long N = s.N, C = s.C, H = s.H;
  std::vector<double> xt(N * C), gates(N * 4 * H);
  std::vector<double> h_prev(N * H, 0.0), c_prev(N * H, 0.0);
  if (h0) std::memcpy(h_prev.data(), h0, h_prev.size() * sizeof(double));
  if (c0) std::memcpy(c_prev.data(), c0, c_prev.size() * sizeof(double));
  std::vector<double> h_cur(N * H), c_cur(N * H);

  for (long step = 0; step < s.steps; ++step) {
    s.gather(x, C, step, xt.data());
    detail::matmul_value(xt.data(), wx, gates.data(), N, C, 4 * H, false);
    detail::matmul_value(h_prev.data(), wh, gates.data(), N, H, 4 * H, true);
    add_bias_rows(gates.data(), b, N, 4 * H);
    activate_gates(gates.data(), N, H);
    for (long r = 0; r < N; ++r) {
      const double* g = gates.data() + r * 4 * H;
      double* cc = c_cur.data() + r * H;
      double* hc = h_cur.data() + r * H;
      const double* cp = c_prev.data() + r * H;
      for (long j = 0; j < H; ++j) {
        const double i = g[j], f = g[H + j], gg = g[2 * H + j], o = g[3 * H + j];
        cc[j] = f * cp[j] + i * gg;
        hc[j] = o * std::tanh(cc[j]);
      }
    }
    s.scatter(h_cur.data(), H, step, h_out);
    s.scatter(c_cur.data(), H, step, c_save);
    std::swap(h_prev, h_cur);
    std::swap(c_prev, c_cur);
  }
  if (h_final) std::memcpy(h_final, h_prev.data(), h_prev.size() * sizeof(double));
  if (c_final) std::memcpy(c_final, c_prev.data(), c_prev.size() * sizeof(double));
}

// Backward sweep re-computing gate pre-activations from the stored h/c
// trajectories. Accumulates into dx, dwx, dwh, db.
void lstm_backward_sweep(const LstmSweep& s, const double* x, const double* wx,
                         const double* wh, const double* b, const double* h0,
                         const double* c0, const double* h_all,
                         const double* c_all, const double* dout, double* dx,
                         double* dwx, double* dwh, double* db) {
  const long N = s.N, C = s.C, H = s.H;
  std::vector<double> xt(N * C), gates(N * 4 * H), dgates(N * 4 * H);
  std::vector<double> h_prev(N * H), c_prev(N * H), c_cur(N * H), dh(N * H),
      dc(N * H, 0.0), dh_carry(N * H, 0.0), dxt(N * C);

  for (long step = s.steps - 1; step >= 0; --step) {
    s.gather(x, C, step, xt.data());
    s.gather(c_all, H, step, c_cur.data());
    if (step > 0) {
      s.gather(h_all, H, step - 1, h_prev.data());
      s.gather(c_all, H, step - 1, c_prev.data());
    } else {
      if (h0) std::memcpy(h_prev.data(), h0, h_prev.size() * sizeof(double));
      else std::fill(h_prev.begin(), h_prev.end(), 0.0);
      if (c0) std::memcpy(c_prev.data(), c0, c_prev.size() * sizeof(double));
      else std::fill(c_prev.begin(), c_prev.end(), 0.0);
    }

    detail::matmul_value(xt.data(), wx, gates.data(), N, C, 4 * H, false);
    detail::matmul_value(h_prev.data(), wh, gates.data(), N, H, 4 * H, true);
    add_bias_rows(gates.data(), b, N, 4 * H);
    activate_gates(gates.data(), N, H);

    s.gather(dout, H, step, dh.data());
    for (size_t i = 0; i < dh.size(); ++i) dh[i] += dh_carry[i];

    for (long r = 0; r < N; ++r) {
      const double* g = gates.data() + r * 4 * H;
      double* dg = dgates.data() + r * 4 * H;
      const double* cc = c_cur.data() + r * H;
      const double* cp = c_prev.data() + r * H;
      const double* dhr = dh.data() + r * H;
      double* dcr = dc.data() + r * H;
      for (long j = 0; j < H; ++j) {
        const double i = g[j], f = g[H + j], gg = g[2 * H + j], o = g[3 * H + j];
        const double tc = std::tanh(cc[j]);
        const double do_ = dhr[j] * tc;
        const double dtc = dhr[j] * o * (1.0 - tc * tc) + dcr[j];
        const double di = dtc * gg;
        const double df = dtc * cp[j];
        const double dgg = dtc * i;
        dcr[j] = dtc * f;  // becomes dc_carry for step-1
        dg[j] = di * i * (1.0 - i);
        dg[H + j] = df * f * (1.0 - f);
        dg[2 * H + j] = dgg * (1.0 - gg * gg);
        dg[3 * H + j] = do_ * o * (1.0 - o);
      }
    }

    if (dwx) detail::matmul_grad_b(xt.data(), dgates.data(), dwx, N, C, 4 * H);
    if (dwh) detail::matmul_grad_b(h_prev.data(), dgates.data(), dwh, N, H, 4 * H);
    if (db)
      for (long r = 0; r < N; ++r)
        for (long j = 0; j < 4 * H; ++j) db[j] += dgates[r * 4 * H + j];

    if (dx) {
      std::fill(dxt.begin(), dxt.end(), 0.0);
      detail::matmul_grad_a(dgates.data(), wx, dxt.data(), N, C, 4 * H);
      // Accumulate the step's input gradient back into the packed layout.
      s.scatter_add(dxt.data(), C, step, dx);
    }
    std::fill(dh_carry.begin(), dh_carry.end(), 0.0);
    detail::matmul_grad_a(dgates.data(), wh, dh_carry.data(), N, H, 4 * H);
  }
}

}  // namespace

Tensor lstm_time(const Tensor& x, const LstmWeights& w, const Tensor* h0,
                 const Tensor* c0, Tensor* h_last, Tensor* c_last) {
  if (x.ndim() != 4) fail(ErrorKind::Shape, "lstm_time expects (B, T, F, C)");
  const long B = x.dim(0), T = x.dim(1), F = x.dim(2), C = x.dim(3);
  const long H = w.hidden();
  if (w.input() != C) fail(ErrorKind::Shape, "lstm_time input width mismatch");
  if (h0 && (h0->ndim() != 3 || h0->dim(0) != B || h0->dim(1) != F || h0->dim(2) != H))
    fail(ErrorKind::Shape, "lstm_time initial state shape mismatch");

  LstmSweep sweep;
  sweep.N = B * F;
  sweep.C = C;
  sweep.H = H;
  sweep.steps = T;
  // Rows are (b, f); time t lives at offset ((b*T + t)*F + f) * width.
  sweep.gather = [B, T, F](const double* src, long width, long t, double* dst) {
    for (long b = 0; b < B; ++b)
      std::memcpy(dst + b * F * width, src + ((b * T + t) * F) * width,
                  static_cast<size_t>(F) * width * sizeof(double));
  };
  sweep.scatter = [B, T, F](const double* src, long width, long t, double* dst) {
    for (long b = 0; b < B; ++b)
      std::memcpy(dst + ((b * T + t) * F) * width, src + b * F * width,
                  static_cast<size_t>(F) * width * sizeof(double));
  };
  sweep.scatter_add = [B, T, F](const double* src, long width, long t, double* dst) {
    for (long b = 0; b < B; ++b) {
      double* d = dst + ((b * T + t) * F) * width;
      const double* sp = src + b * F * width;
      for (long i = 0; i < F * width; ++i) d[i] += sp[i];
    }
  };

  auto xn = x.node();
  auto wxn = w.wx.node();
  auto whn = w.wh.node();
  auto bn = w.b.node();

  auto c_all = std::make_shared<std::vector<double>>(
      static_cast<size_t>(B) * T * F * H, 0.0);
  auto h0_saved = std::make_shared<std::vector<double>>();
  auto c0_saved = std::make_shared<std::vector<double>>();
  if (h0) h0_saved->assign(h0->data(), h0->data() + h0->numel());
  if (c0) c0_saved->assign(c0->data(), c0->data() + c0->numel());

  Tensor out = make_op_result(
      {B, T, F, H}, {xn, wxn, whn, bn},
      [xn, wxn, whn, bn, c_all, h0_saved, c0_saved, sweep](TensorNode& node) {
        double* dx = xn->requires_grad ? xn->grad_data() : nullptr;
        double* dwx = wxn->requires_grad ? wxn->grad_data() : nullptr;
        double* dwh = whn->requires_grad ? whn->grad_data() : nullptr;
        double* db = bn->requires_grad ? bn->grad_data() : nullptr;
        lstm_backward_sweep(sweep, xn->value.data(), wxn->value.data(),
                            whn->value.data(), bn->value.data(),
                            h0_saved->empty() ? nullptr : h0_saved->data(),
                            c0_saved->empty() ? nullptr : c0_saved->data(),
                            node.value.data(), c_all->data(), node.grad.data(),
                            dx, dwx, dwh, db);
      });

  std::vector<double> h_final(static_cast<size_t>(B) * F * H);
  std::vector<double> c_final(h_final.size());
  lstm_forward_sweep(sweep, x.data(), w.wx.data(), w.wh.data(), w.b.data(),
                     h0 ? h0->data() : nullptr, c0 ? c0->data() : nullptr,
                     out.data(), c_all->data(), h_final.data(), c_final.data());
  if (h_last) *h_last = Tensor::from(std::move(h_final), {B, F, H});
  if (c_last) *c_last = Tensor::from(std::move(c_final), {B, F, H});
  return out;
}

Tensor lstm_freq_bidir(const Tensor& x, const LstmWeights& fwd,
                       const LstmWeights& bwd) {
  if (x.ndim() != 4) fail(ErrorKind::Shape, "lstm_freq_bidir expects (B, T, F, C)");
  const long B = x.dim(0), T = x.dim(1), F = x.dim(2), C = x.dim(3);
  const long H = fwd.hidden();
  if (fwd.input() != C || bwd.input() != C || bwd.hidden() != H)
    fail(ErrorKind::Shape, "lstm_freq_bidir weight shapes inconsistent");

  // Rows are (b, t); frequency f lives at offset ((b*T + t)*F + f) * width.
  // Each direction runs over dense per-direction buffers; the two hidden
  // trajectories are interleaved into the output channel axis afterwards.
  auto make_sweep = [&](bool reverse) {
    LstmSweep s;
    s.N = B * T;
    s.C = C;
    s.H = H;
    s.steps = F;
    s.gather = [B, T, F, reverse](const double* src, long width, long step,
                                  double* dst) {
      const long f = reverse ? (F - 1 - step) : step;
      for (long r = 0; r < B * T; ++r)
        std::memcpy(dst + r * width, src + (r * F + f) * width,
                    static_cast<size_t>(width) * sizeof(double));
    };
    s.scatter = [B, T, F, reverse](const double* src, long width, long step,
                                   double* dst) {
      const long f = reverse ? (F - 1 - step) : step;
      for (long r = 0; r < B * T; ++r)
        std::memcpy(dst + (r * F + f) * width, src + r * width,
                    static_cast<size_t>(width) * sizeof(double));
    };
    s.scatter_add = [B, T, F, reverse](const double* src, long width, long step,
                                       double* dst) {
      const long f = reverse ? (F - 1 - step) : step;
      for (long r = 0; r < B * T; ++r) {
        double* d = dst + (r * F + f) * width;
        const double* sp = src + r * width;
        for (long i = 0; i < width; ++i) d[i] += sp[i];
      }
    };
    return s;
  };

  auto xn = x.node();
  std::vector<std::shared_ptr<TensorNode>> parents = {
      xn,            fwd.wx.node(), fwd.wh.node(), fwd.b.node(),
      bwd.wx.node(), bwd.wh.node(), bwd.b.node()};

  // Saved trajectories per direction (dense width-H layout).
  const size_t traj = static_cast<size_t>(B) * T * F * H;
  auto c_fwd = std::make_shared<std::vector<double>>(traj, 0.0);
  auto c_bwd = std::make_shared<std::vector<double>>(traj, 0.0);
  auto h_fwd = std::make_shared<std::vector<double>>(traj, 0.0);
  auto h_bwd = std::make_shared<std::vector<double>>(traj, 0.0);

  const LstmSweep sweep_f = make_sweep(false);
  const LstmSweep sweep_b = make_sweep(true);

  auto fw = fwd;  // capture weight tensors by value (shared nodes)
  auto bw = bwd;

  Tensor out = make_op_result(
      {B, T, F, 2 * H}, parents,
      [xn, fw, bw, c_fwd, c_bwd, h_fwd, h_bwd, sweep_f, sweep_b, B, T, F,
       H](TensorNode& node) {
        // Split the output gradient per direction.
        const size_t n = static_cast<size_t>(B) * T * F * H;
        std::vector<double> dh_f(n), dh_b(n);
        const double* g = node.grad.data();
        for (long r = 0; r < B * T * F; ++r) {
          std::memcpy(dh_f.data() + r * H, g + r * 2 * H, H * sizeof(double));
          std::memcpy(dh_b.data() + r * H, g + r * 2 * H + H, H * sizeof(double));
        }
        auto grad_of = [](const Tensor& t) -> double* {
          return t.node()->requires_grad ? t.node()->grad_data() : nullptr;
        };
        double* dx = xn->requires_grad ? xn->grad_data() : nullptr;
        lstm_backward_sweep(sweep_f, xn->value.data(), fw.wx.data(), fw.wh.data(),
                            fw.b.data(), nullptr, nullptr, h_fwd->data(),
                            c_fwd->data(), dh_f.data(), dx, grad_of(fw.wx),
                            grad_of(fw.wh), grad_of(fw.b));
        lstm_backward_sweep(sweep_b, xn->value.data(), bw.wx.data(), bw.wh.data(),
                            bw.b.data(), nullptr, nullptr, h_bwd->data(),
                            c_bwd->data(), dh_b.data(), dx, grad_of(bw.wx),
                            grad_of(bw.wh), grad_of(bw.b));
      });

  lstm_forward_sweep(sweep_f, x.data(), fwd.wx.data(), fwd.wh.data(), fwd.b.data(),
                     nullptr, nullptr, h_fwd->data(), c_fwd->data(), nullptr,
                     nullptr);
  lstm_forward_sweep(sweep_b, x.data(), bwd.wx.data(), bwd.wh.data(), bwd.b.data(),
                     nullptr, nullptr, h_bwd->data(), c_bwd->data(), nullptr,
                     nullptr);
  double* y = out.data();
  for (long r = 0; r < B * T * F; ++r) {
    std::memcpy(y + r * 2 * H, h_fwd->data() + r * H, H * sizeof(double));
    std::memcpy(y + r * 2 * H + H, h_bwd->data() + r * H, H * sizeof(double));
  }
  return out;
}

Tensor wola_synthesis(const Tensor& y, const FrameSpec& frame, size_t out_len) {
  if (y.ndim() != 4 || y.dim(3) != 2 || y.dim(2) != frame.bins())
    fail(ErrorKind::Shape, "wola_synthesis expects (B, T, bins, 2)");
  const long B = y.dim(0), T = y.dim(1), F = y.dim(2);
  const int n = frame.window_len;
  auto yn = y.node();
  const FrameSpec spec = frame;

  Tensor out = make_op_result(
      {B, static_cast<long>(out_len)}, {yn},
      [yn, spec, B, T, F, n, out_len](TensorNode& node) {
        if (!yn->requires_grad) return;
        double* dy = yn->grad_data();
        const double* g = node.grad.data();
        std::vector<double> frame_grad(n);
        std::vector<std::complex<double>> bin_grad(F);
        for (long b = 0; b < B; ++b) {
          const double* grow = g + b * out_len;
          for (long t = 0; t < T; ++t) {
            const long start = t * spec.hop - spec.pad;
            for (int i = 0; i < n; ++i) {
              const long idx = start + i;
              frame_grad[i] = (idx >= 0 && idx < static_cast<long>(out_len))
                                  ? grow[idx] * spec.synthesis_window[i]
                                  : 0.0;
            }
            idft_frame_adjoint(frame_grad.data(), n, bin_grad.data());
            double* drow = dy + ((b * T + t) * F) * 2;
            for (long f = 0; f < F; ++f) {
              drow[2 * f] += bin_grad[f].real();
              drow[2 * f + 1] += bin_grad[f].imag();
            }
          }
        }
      });

  const double* yv = y.data();
  double* o = out.data();
  std::vector<std::complex<double>> bins(F);
  std::vector<double> samples(n);
  for (long b = 0; b < B; ++b) {
    double* orow = o + b * out_len;
    for (long t = 0; t < T; ++t) {
      const double* yrow = yv + ((b * T + t) * F) * 2;
      for (long f = 0; f < F; ++f) bins[f] = {yrow[2 * f], yrow[2 * f + 1]};
      idft_frame(bins.data(), n, samples.data());
      const long start = t * spec.hop - spec.pad;
      for (int i = 0; i < n; ++i) {
        const long idx = start + i;
        if (idx >= 0 && idx < static_cast<long>(out_len))
          orow[idx] += samples[i] * spec.synthesis_window[i];
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

void adam_step(std::map<std::string, Tensor>& params, AdamState& state,
               const AdamConfig& config) {
  state.step += 1;
  const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.step));
  for (auto& [name, p] : params) {
    auto& node = *p.node();
    if (node.grad.empty()) node.grad.assign(node.value.size(), 0.0);
    auto& m = state.m[name];
    auto& v = state.v[name];
    if (m.size() != node.value.size()) m.assign(node.value.size(), 0.0);
    if (v.size() != node.value.size()) v.assign(node.value.size(), 0.0);
    for (size_t i = 0; i < node.value.size(); ++i) {
      const double g = node.grad[i];
      m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g;
      v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g * g;
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      node.value[i] -= config.lr * mhat / (std::sqrt(vhat) + config.eps);
    }
  }
}

void zero_grads(std::map<std::string, Tensor>& params) {
  for (auto& [name, p] : params) {
    (void)name;
    auto& g = p.node()->grad;
    std::fill(g.begin(), g.end(), 0.0);
  }
}

double grad_check(const std::function<Tensor(std::vector<Tensor>&)>& f,
                  std::vector<Tensor>& inputs, double eps) {
  // Analytic pass.
  for (auto& t : inputs) t.node()->grad.clear();
  std::vector<std::vector<double>> analytic;
  {
    Tape tape;
    Tensor loss = f(inputs);
    tape.backward(loss);
  }
  for (auto& t : inputs) analytic.push_back(t.grad());

  double worst = 0.0;
  for (size_t ti = 0; ti < inputs.size(); ++ti) {
    if (!inputs[ti].requires_grad()) continue;
    auto& value = inputs[ti].node()->value;
    for (size_t i = 0; i < value.size(); ++i) {
      const double keep = value[i];
      value[i] = keep + eps;
      const double up = f(inputs).item();
      value[i] = keep - eps;
      const double dn = f(inputs).item();
      value[i] = keep;
      const double numeric = (up - dn) / (2.0 * eps);
      const double a = analytic[ti][i];
      const double rel =
          std::abs(a - numeric) / std::max(1e-8, std::abs(a) + std::abs(numeric));
      worst = std::max(worst, rel);
    }
  }
  return worst;
}

Tensor init_uniform(std::vector<long> shape, long fan_in, Rng& rng) {
  const double limit = 1.0 / std::sqrt(static_cast<double>(std::max(1L, fan_in)));
  size_t n = 1;
  for (long d : shape) n *= static_cast<size_t>(d);
  std::vector<double> data(n);
  for (auto& v : data) v = rng.uniform(-limit, limit);
  return Tensor::from(std::move(data), std::move(shape), true);
}

LstmWeights init_lstm(long input, long hidden, Rng& rng) {
  LstmWeights w;
  w.wx = init_uniform({input, 4 * hidden}, input, rng);
  w.wh = init_uniform({hidden, 4 * hidden}, hidden, rng);
  w.b = Tensor::zeros({4 * hidden}, true);
  return w;
}

}  // namespace dsx
