#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "hgcl/rng.hpp"

namespace hgcl {

/// Dense row-major float64 matrix participating in reverse-mode autodiff.
/// Shape is always {rows, cols}; a scalar is 1x1. Copies share storage, so a
/// Tensor behaves as a cheap handle. Values are treated as immutable once an
/// op has produced them; only leaf parameters are updated in place by the
/// optimizer, and grad buffers are owned by the tape machinery.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(int rows, int cols, bool requires_grad = false);
  static Tensor full(int rows, int cols, double value, bool requires_grad = false);
  static Tensor ones(int rows, int cols);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor from_data(int rows, int cols, std::vector<double> data, bool requires_grad = false);
  static Tensor uniform(int rows, int cols, double lo, double hi, Rng& rng, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const std::vector<int>& shape() const;
  int rows() const;
  int cols() const;
  std::size_t size() const;

  // Storage is shared between copies, so constness here is shallow: these are
  // const members returning mutable views of the shared buffer.
  double* data() const;
  double at(int r, int c) const;
  /// Scalar extraction; throws unless the tensor is 1x1.
  double value() const;

  bool requires_grad() const;
  double* grad() const;
  void zero_grad() const;

  /// Identity of the underlying storage (used by tests).
  const void* storage_id() const { return impl_.get(); }

 private:
  struct Impl {
    std::vector<int> shape;  // {rows, cols}
    std::vector<double> values;
    std::vector<double> grads;  // allocated iff requires_grad
    bool requires_grad = false;
  };
  std::shared_ptr<Impl> impl_;

  static Tensor make(int rows, int cols, bool requires_grad);
  friend class Tape;
};

/// Reverse-mode gradient tape. Ops executed while a tape is active record a
/// backward closure in creation order, which is a topological order of the
/// computation. backward() replays the closures once, in reverse. Leaf grads
/// accumulate across backward() calls; intermediate grads are reset on each
/// call. One tape per training step, single-threaded.
class Tape {
 public:
  Tape();
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  void backward(const Tensor& loss);
  std::size_t num_ops() const { return entries_.size(); }
  void clear() { entries_.clear(); }

  static Tape* active();
  void record(const Tensor& out, std::function<void()> fn);

 private:
  struct Entry {
    Tensor out;
    std::function<void()> fn;
  };
  std::vector<Entry> entries_;
  Tape* prev_ = nullptr;
};

// --- primitive ops ----------------------------------------------------------
// Every op validates shapes, checks the result for NaN/Inf (throwing
// std::runtime_error on either), and records its backward closure when a tape
// is active and any input requires grad.

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

// add/sub/mul support equal shapes, a 1x1 scalar on either side, or a 1 x c
// row broadcast against an r x c matrix.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);

Tensor scale(const Tensor& a, double k);
Tensor add_scalar(const Tensor& a, double k);
Tensor neg(const Tensor& a);

Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor gather_rows(const Tensor& a, const std::vector<int>& indices);
Tensor reshape(const Tensor& a, int rows, int cols);

Tensor row_softmax(const Tensor& a);
/// Softmax restricted to mask==1 entries per row; exact zeros elsewhere.
/// The mask must be a 0/1 tensor of the same shape and is not differentiated.
Tensor masked_row_softmax(const Tensor& a, const Tensor& mask);

Tensor relu(const Tensor& a);
Tensor leaky_relu(const Tensor& a, double slope);
Tensor elu(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);

Tensor sum(const Tensor& a);        // 1x1
Tensor mean(const Tensor& a);       // 1x1
Tensor sum_cols(const Tensor& a);   // row sums, r x 1
Tensor diag_part(const Tensor& a);  // n x n -> n x 1
Tensor l2_normalize_rows(const Tensor& a);

// --- optimizer ---------------------------------------------------------------

struct AdamState {
  double lr = 5e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long step = 0;
  std::vector<std::vector<double>> m;  // first moments, one buffer per parameter
  std::vector<std::vector<double>> v;  // second moments
};

AdamState adam_init(const std::vector<Tensor>& params, double lr = 5e-3, double beta1 = 0.9,
                    double beta2 = 0.999, double eps = 1e-8);
/// Standard Adam update with bias correction, reading grads from the
/// parameters' grad buffers.
void adam_step(std::vector<Tensor>& params, AdamState& state);
void zero_grads(std::vector<Tensor>& params);

}  // namespace hgcl
