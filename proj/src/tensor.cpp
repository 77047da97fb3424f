#include "hgcl/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>

#include "hgcl/kernels.hpp"

namespace hgcl {

namespace {

[[noreturn]] void fail(const std::string& op, const std::string& msg) {
  throw std::runtime_error(op + ": " + msg);
}

thread_local Tape* g_active_tape = nullptr;

void check_finite(const Tensor& t, const char* op) {
  const double* p = t.data();
  const std::size_t n = t.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(p[i])) fail(op, "non-finite result");
  }
}

bool taping(std::initializer_list<const Tensor*> inputs) {
  if (!Tape::active()) return false;
  for (const Tensor* t : inputs) {
    if (t->requires_grad()) return true;
  }
  return false;
}

void record(const Tensor& out, std::function<void()> fn) {
  Tape::active()->record(out, std::move(fn));
}

}  // namespace

// --- Tensor ------------------------------------------------------------------

Tensor Tensor::make(int rows, int cols, bool requires_grad) {
  if (rows <= 0 || cols <= 0) fail("tensor", "dimensions must be positive");
  Tensor t;
  t.impl_ = std::make_shared<Impl>();
  t.impl_->shape = {rows, cols};
  t.impl_->values.assign(static_cast<std::size_t>(rows) * cols, 0.0);
  t.impl_->requires_grad = requires_grad;
  if (requires_grad) t.impl_->grads.assign(t.impl_->values.size(), 0.0);
  return t;
}

Tensor Tensor::zeros(int rows, int cols, bool requires_grad) { return make(rows, cols, requires_grad); }

Tensor Tensor::full(int rows, int cols, double value, bool requires_grad) {
  Tensor t = make(rows, cols, requires_grad);
  std::fill(t.impl_->values.begin(), t.impl_->values.end(), value);
  return t;
}

Tensor Tensor::ones(int rows, int cols) { return full(rows, cols, 1.0); }

Tensor Tensor::scalar(double value, bool requires_grad) {
  Tensor t = make(1, 1, requires_grad);
  t.impl_->values[0] = value;
  return t;
}

Tensor Tensor::from_data(int rows, int cols, std::vector<double> data, bool requires_grad) {
  if (data.size() != static_cast<std::size_t>(rows) * cols) {
    fail("from_data", "data length does not match shape");
  }
  Tensor t = make(rows, cols, requires_grad);
  t.impl_->values = std::move(data);
  return t;
}

Tensor Tensor::uniform(int rows, int cols, double lo, double hi, Rng& rng, bool requires_grad) {
  Tensor t = make(rows, cols, requires_grad);
  for (double& v : t.impl_->values) v = rng.uniform(lo, hi);
  return t;
}

const std::vector<int>& Tensor::shape() const { return impl_->shape; }
int Tensor::rows() const { return impl_->shape[0]; }
int Tensor::cols() const { return impl_->shape[1]; }
std::size_t Tensor::size() const { return impl_->values.size(); }

double* Tensor::data() const { return impl_->values.data(); }

double Tensor::at(int r, int c) const {
  return impl_->values[static_cast<std::size_t>(r) * cols() + c];
}

double Tensor::value() const {
  if (size() != 1) fail("value", "tensor is not a scalar");
  return impl_->values[0];
}

bool Tensor::requires_grad() const { return impl_ && impl_->requires_grad; }

double* Tensor::grad() const { return impl_->requires_grad ? impl_->grads.data() : nullptr; }

void Tensor::zero_grad() const {
  if (impl_ && impl_->requires_grad) std::fill(impl_->grads.begin(), impl_->grads.end(), 0.0);
}

// --- Tape --------------------------------------------------------------------

Tape::Tape() : prev_(g_active_tape) { g_active_tape = this; }

Tape::~Tape() { g_active_tape = prev_; }

Tape* Tape::active() { return g_active_tape; }

void Tape::record(const Tensor& out, std::function<void()> fn) {
  entries_.push_back({out, std::move(fn)});
}

void Tape::backward(const Tensor& loss) {
  if (loss.size() != 1) fail("backward", "loss must be a scalar");
  if (entries_.empty()) fail("backward", "tape is empty");
  if (!loss.requires_grad()) fail("backward", "loss does not require grad");
  // Intermediate grads are owned by this pass; leaves keep accumulating.
  for (Entry& e : entries_) e.out.zero_grad();
  Tensor seed = loss;
  seed.grad()[0] = 1.0;
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) it->fn();
}

// --- op helpers ---------------------------------------------------------------

namespace {

Tensor unary_op(const Tensor& a, const char* name, const std::function<double(double)>& f,
                const std::function<double(double, double)>& dfdx_from_x_and_y) {
  const bool rg = taping({&a});
  Tensor out = Tensor::zeros(a.rows(), a.cols(), rg);
  const double* x = a.data();
  double* y = out.data();
  const std::size_t n = a.size();
  for (std::size_t i = 0; i < n; ++i) y[i] = f(x[i]);
  check_finite(out, name);
  if (rg) {
    record(out, [a, out, dfdx_from_x_and_y]() mutable {
      if (!a.requires_grad()) return;
      const double* x = a.data();
      const double* y = out.data();
      const double* go = out.grad();
      double* ga = a.grad();
      const std::size_t n = a.size();
      for (std::size_t i = 0; i < n; ++i) ga[i] += go[i] * dfdx_from_x_and_y(x[i], y[i]);
    });
  }
  return out;
}

enum class Broadcast { None, BOverA, AOverB };

Broadcast classify_broadcast(const Tensor& a, const Tensor& b, const char* name) {
  if (a.rows() == b.rows() && a.cols() == b.cols()) return Broadcast::None;
  const auto fits = [](const Tensor& big, const Tensor& small) {
    return small.size() == 1 || (small.rows() == 1 && small.cols() == big.cols());
  };
  if (fits(a, b)) return Broadcast::BOverA;
  if (fits(b, a)) return Broadcast::AOverB;
  fail(name, "shape mismatch");
}

}  // namespace

// --- primitive ops -------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) fail("matmul", "inner dimensions do not match");
  const int m = a.rows(), k = a.cols(), n = b.cols();
  const bool rg = taping({&a, &b});
  Tensor out = Tensor::zeros(m, n, rg);
  kernels::matmul_nn(a.data(), b.data(), out.data(), m, k, n);
  check_finite(out, "matmul");
  if (rg) {
    record(out, [a, b, out, m, k, n]() mutable {
      if (a.requires_grad()) kernels::matmul_nt(out.grad(), b.data(), a.grad(), m, n, k, true);
      if (b.requires_grad()) kernels::matmul_tn(a.data(), out.grad(), b.grad(), k, m, n, true);
    });
  }
  return out;
}

Tensor transpose(const Tensor& a) {
  const int r = a.rows(), c = a.cols();
  const bool rg = taping({&a});
  Tensor out = Tensor::zeros(c, r, rg);
  const double* x = a.data();
  double* y = out.data();
  for (int i = 0; i < r; ++i) {
    for (int j = 0; j < c; ++j) y[static_cast<std::size_t>(j) * r + i] = x[static_cast<std::size_t>(i) * c + j];
  }
  if (rg) {
    record(out, [a, out, r, c]() mutable {
      if (!a.requires_grad()) return;
      const double* go = out.grad();
      double* ga = a.grad();
      for (int i = 0; i < r; ++i) {
        for (int j = 0; j < c; ++j) {
          ga[static_cast<std::size_t>(i) * c + j] += go[static_cast<std::size_t>(j) * r + i];
        }
      }
    });
  }
  return out;
}

namespace {

// Shared body for add/sub/mul. db_scale handles the sign for sub.
Tensor binary_op(const Tensor& a, const Tensor& b, const char* name,
                 const std::function<double(double, double)>& f, bool is_mul, double db_sign) {
  const Broadcast bc = classify_broadcast(a, b, name);
  const Tensor& big = (bc == Broadcast::AOverB) ? b : a;
  const bool rg = taping({&a, &b});
  Tensor out = Tensor::zeros(big.rows(), big.cols(), rg);
  const std::size_t n = out.size();
  const std::size_t sa = a.size(), sb = b.size();
  const double* pa = a.data();
  const double* pb = b.data();
  double* po = out.data();
  for (std::size_t i = 0; i < n; ++i) po[i] = f(pa[i % sa], pb[i % sb]);
  check_finite(out, name);
  if (rg) {
    record(out, [a, b, out, is_mul, db_sign]() mutable {
      const std::size_t n = out.size();
      const std::size_t sa = a.size(), sb = b.size();
      const double* go = out.grad();
      const double* pa = a.data();
      const double* pb = b.data();
      if (a.requires_grad()) {
        double* ga = a.grad();
        for (std::size_t i = 0; i < n; ++i) ga[i % sa] += go[i] * (is_mul ? pb[i % sb] : 1.0);
      }
      if (b.requires_grad()) {
        double* gb = b.grad();
        for (std::size_t i = 0; i < n; ++i) gb[i % sb] += go[i] * (is_mul ? pa[i % sa] : db_sign);
      }
    });
  }
  return out;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_op(a, b, "add", [](double x, double y) { return x + y; }, false, 1.0);
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_op(a, b, "sub", [](double x, double y) { return x - y; }, false, -1.0);
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_op(a, b, "mul", [](double x, double y) { return x * y; }, true, 1.0);
}

Tensor scale(const Tensor& a, double k) {
  return unary_op(a, "scale", [k](double x) { return k * x; }, [k](double, double) { return k; });
}

Tensor add_scalar(const Tensor& a, double k) {
  return unary_op(a, "add_scalar", [k](double x) { return x + k; }, [](double, double) { return 1.0; });
}

Tensor neg(const Tensor& a) {
  return unary_op(a, "neg", [](double x) { return -x; }, [](double, double) { return -1.0; });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) fail("concat_cols", "no inputs");
  const int r = parts[0].rows();
  int total = 0;
  bool rg = false;
  for (const Tensor& p : parts) {
    if (p.rows() != r) fail("concat_cols", "row counts differ");
    total += p.cols();
    rg = rg || p.requires_grad();
  }
  rg = rg && Tape::active() != nullptr;
  Tensor out = Tensor::zeros(r, total, rg);
  double* po = out.data();
  int off = 0;
  for (const Tensor& p : parts) {
    const double* pp = p.data();
    for (int i = 0; i < r; ++i) {
      std::memcpy(po + static_cast<std::size_t>(i) * total + off, pp + static_cast<std::size_t>(i) * p.cols(),
                  sizeof(double) * p.cols());
    }
    off += p.cols();
  }
  if (rg) {
    record(out, [parts, out, r, total]() mutable {
      const double* go = out.grad();
      int off = 0;
      for (const Tensor& p : parts) {
        if (p.requires_grad()) {
          double* gp = p.grad();
          for (int i = 0; i < r; ++i) {
            for (int j = 0; j < p.cols(); ++j) {
              gp[static_cast<std::size_t>(i) * p.cols() + j] += go[static_cast<std::size_t>(i) * total + off + j];
            }
          }
        }
        off += p.cols();
      }
    });
  }
  return out;
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) fail("concat_rows", "no inputs");
  const int c = parts[0].cols();
  int total = 0;
  bool rg = false;
  for (const Tensor& p : parts) {
    if (p.cols() != c) fail("concat_rows", "column counts differ");
    total += p.rows();
    rg = rg || p.requires_grad();
  }
  rg = rg && Tape::active() != nullptr;
  Tensor out = Tensor::zeros(total, c, rg);
  double* po = out.data();
  std::size_t off = 0;
  for (const Tensor& p : parts) {
    std::memcpy(po + off, p.data(), sizeof(double) * p.size());
    off += p.size();
  }
  if (rg) {
    record(out, [parts, out]() mutable {
      const double* go = out.grad();
      std::size_t off = 0;
      for (const Tensor& p : parts) {
        if (p.requires_grad()) {
          double* gp = p.grad();
          for (std::size_t i = 0; i < p.size(); ++i) gp[i] += go[off + i];
        }
        off += p.size();
      }
    });
  }
  return out;
}

Tensor gather_rows(const Tensor& a, const std::vector<int>& indices) {
  if (indices.empty()) fail("gather_rows", "no indices");
  const int c = a.cols();
  for (int idx : indices) {
    if (idx < 0 || idx >= a.rows()) fail("gather_rows", "index out of range");
  }
  const bool rg = taping({&a});
  Tensor out = Tensor::zeros(static_cast<int>(indices.size()), c, rg);
  double* po = out.data();
  const double* pa = a.data();
  for (std::size_t t = 0; t < indices.size(); ++t) {
    std::memcpy(po + t * c, pa + static_cast<std::size_t>(indices[t]) * c, sizeof(double) * c);
  }
  if (rg) {
    record(out, [a, out, indices, c]() mutable {
      if (!a.requires_grad()) return;
      const double* go = out.grad();
      double* ga = a.grad();
      for (std::size_t t = 0; t < indices.size(); ++t) {
        double* dst = ga + static_cast<std::size_t>(indices[t]) * c;
        const double* src = go + t * c;
        for (int j = 0; j < c; ++j) dst[j] += src[j];
      }
    });
  }
  return out;
}

Tensor reshape(const Tensor& a, int rows, int cols) {
  if (static_cast<std::size_t>(rows) * cols != a.size()) fail("reshape", "element count mismatch");
  const bool rg = taping({&a});
  Tensor out = Tensor::zeros(rows, cols, rg);
  std::memcpy(out.data(), a.data(), sizeof(double) * a.size());
  if (rg) {
    record(out, [a, out]() mutable {
      if (!a.requires_grad()) return;
      const double* go = out.grad();
      double* ga = a.grad();
      for (std::size_t i = 0; i < a.size(); ++i) ga[i] += go[i];
    });
  }
  return out;
}

namespace {

// Softmax over the masked entries of each row; mask == nullptr means all.
// Rows sum to 1 on the mask and are exactly 0 off it.
Tensor softmax_impl(const Tensor& a, const Tensor* mask, const char* name) {
  const int r = a.rows(), c = a.cols();
  if (mask) {
    if (mask->rows() != r || mask->cols() != c) fail(name, "mask shape mismatch");
    if (mask->requires_grad()) fail(name, "mask must not require grad");
    const double* pm = mask->data();
    for (std::size_t i = 0; i < mask->size(); ++i) {
      if (pm[i] != 0.0 && pm[i] != 1.0) fail(name, "mask entries must be 0 or 1");
    }
  }
  const bool rg = taping({&a});
  Tensor out = Tensor::zeros(r, c, rg);
  const double* x = a.data();
  const double* pm = mask ? mask->data() : nullptr;
  double* y = out.data();
  for (int i = 0; i < r; ++i) {
    const std::size_t base = static_cast<std::size_t>(i) * c;
    double mx = -1e308;
    bool any = false;
    for (int j = 0; j < c; ++j) {
      if (!pm || pm[base + j] == 1.0) {
        mx = std::max(mx, x[base + j]);
        any = true;
      }
    }
    if (!any) fail(name, "empty mask row");
    double z = 0.0;
    for (int j = 0; j < c; ++j) {
      if (!pm || pm[base + j] == 1.0) {
        y[base + j] = std::exp(x[base + j] - mx);
        z += y[base + j];
      } else {
        y[base + j] = 0.0;
      }
    }
    for (int j = 0; j < c; ++j) y[base + j] /= z;
  }
  check_finite(out, name);
  if (rg) {
    record(out, [a, out, r, c]() mutable {
      if (!a.requires_grad()) return;
      const double* y = out.data();
      const double* go = out.grad();
      double* ga = a.grad();
      for (int i = 0; i < r; ++i) {
        const std::size_t base = static_cast<std::size_t>(i) * c;
        double dot = 0.0;
        for (int j = 0; j < c; ++j) dot += go[base + j] * y[base + j];
        for (int j = 0; j < c; ++j) ga[base + j] += y[base + j] * (go[base + j] - dot);
      }
    });
  }
  return out;
}

}  // namespace

Tensor row_softmax(const Tensor& a) { return softmax_impl(a, nullptr, "row_softmax"); }

Tensor masked_row_softmax(const Tensor& a, const Tensor& mask) {
  return softmax_impl(a, &mask, "masked_row_softmax");
}

Tensor relu(const Tensor& a) {
  return unary_op(a, "relu", [](double x) { return x > 0.0 ? x : 0.0; },
                  [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor leaky_relu(const Tensor& a, double slope) {
  return unary_op(a, "leaky_relu", [slope](double x) { return x > 0.0 ? x : slope * x; },
                  [slope](double x, double) { return x > 0.0 ? 1.0 : slope; });
}

Tensor elu(const Tensor& a) {
  return unary_op(a, "elu", [](double x) { return x > 0.0 ? x : std::expm1(x); },
                  [](double x, double y) { return x > 0.0 ? 1.0 : y + 1.0; });
}

Tensor tanh(const Tensor& a) {
  return unary_op(a, "tanh", [](double x) { return std::tanh(x); },
                  [](double, double y) { return 1.0 - y * y; });
}

Tensor exp(const Tensor& a) {
  return unary_op(a, "exp", [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& a) {
  return unary_op(a, "log", [](double x) { return std::log(x); },
                  [](double x, double) { return 1.0 / x; });
}

Tensor sum(const Tensor& a) {
  const bool rg = taping({&a});
  Tensor out = Tensor::zeros(1, 1, rg);
  const double* x = a.data();
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += x[i];
  out.data()[0] = s;
  check_finite(out, "sum");
  if (rg) {
    record(out, [a, out]() mutable {
      if (!a.requires_grad()) return;
      const double g = out.grad()[0];
      double* ga = a.grad();
      for (std::size_t i = 0; i < a.size(); ++i) ga[i] += g;
    });
  }
  return out;
}

Tensor mean(const Tensor& a) { return scale(sum(a), 1.0 / static_cast<double>(a.size())); }

Tensor sum_cols(const Tensor& a) {
  const int r = a.rows(), c = a.cols();
  const bool rg = taping({&a});
  Tensor out = Tensor::zeros(r, 1, rg);
  const double* x = a.data();
  double* y = out.data();
  for (int i = 0; i < r; ++i) {
    double s = 0.0;
    const std::size_t base = static_cast<std::size_t>(i) * c;
    for (int j = 0; j < c; ++j) s += x[base + j];
    y[i] = s;
  }
  check_finite(out, "sum_cols");
  if (rg) {
    record(out, [a, out, r, c]() mutable {
      if (!a.requires_grad()) return;
      const double* go = out.grad();
      double* ga = a.grad();
      for (int i = 0; i < r; ++i) {
        const std::size_t base = static_cast<std::size_t>(i) * c;
        for (int j = 0; j < c; ++j) ga[base + j] += go[i];
      }
    });
  }
  return out;
}

Tensor diag_part(const Tensor& a) {
  if (a.rows() != a.cols()) fail("diag_part", "matrix is not square");
  const int n = a.rows();
  const bool rg = taping({&a});
  Tensor out = Tensor::zeros(n, 1, rg);
  for (int i = 0; i < n; ++i) out.data()[i] = a.data()[static_cast<std::size_t>(i) * n + i];
  if (rg) {
    record(out, [a, out, n]() mutable {
      if (!a.requires_grad()) return;
      const double* go = out.grad();
      double* ga = a.grad();
      for (int i = 0; i < n; ++i) ga[static_cast<std::size_t>(i) * n + i] += go[i];
    });
  }
  return out;
}

Tensor l2_normalize_rows(const Tensor& a) {
  const int r = a.rows(), c = a.cols();
  const bool rg = taping({&a});
  Tensor out = Tensor::zeros(r, c, rg);
  std::vector<double> norms(r);
  const double* x = a.data();
  double* y = out.data();
  for (int i = 0; i < r; ++i) {
    const std::size_t base = static_cast<std::size_t>(i) * c;
    double s = 0.0;
    for (int j = 0; j < c; ++j) s += x[base + j] * x[base + j];
    const double norm = std::sqrt(s);
    if (!(norm > 0.0)) fail("l2_normalize_rows", "zero row");
    norms[i] = norm;
    for (int j = 0; j < c; ++j) y[base + j] = x[base + j] / norm;
  }
  check_finite(out, "l2_normalize_rows");
  if (rg) {
    record(out, [a, out, norms, r, c]() mutable {
      if (!a.requires_grad()) return;
      const double* y = out.data();
      const double* go = out.grad();
      double* ga = a.grad();
      for (int i = 0; i < r; ++i) {
        const std::size_t base = static_cast<std::size_t>(i) * c;
        double dot = 0.0;
        for (int j = 0; j < c; ++j) dot += go[base + j] * y[base + j];
        for (int j = 0; j < c; ++j) ga[base + j] += (go[base + j] - y[base + j] * dot) / norms[i];
      }
    });
  }
  return out;
}

// --- Adam ----------------------------------------------------------------------

AdamState adam_init(const std::vector<Tensor>& params, double lr, double beta1, double beta2,
                    double eps) {
  AdamState s;
  s.lr = lr;
  s.beta1 = beta1;
  s.beta2 = beta2;
  s.eps = eps;
  for (const Tensor& p : params) {
    s.m.emplace_back(p.size(), 0.0);
    s.v.emplace_back(p.size(), 0.0);
  }
  return s;
}

void adam_step(std::vector<Tensor>& params, AdamState& state) {
  if (params.size() != state.m.size()) fail("adam_step", "state does not match parameter list");
  state.step += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Tensor& p = params[pi];
    if (!p.requires_grad()) fail("adam_step", "parameter does not require grad");
    if (state.m[pi].size() != p.size()) fail("adam_step", "moment buffer shape mismatch");
    const double* g = p.grad();
    double* x = p.data();
    double* m = state.m[pi].data();
    double* v = state.v[pi].data();
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      x[i] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
    }
  }
}

void zero_grads(std::vector<Tensor>& params) {
  for (Tensor& p : params) p.zero_grad();
}

}  // namespace hgcl
