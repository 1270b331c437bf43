#pragma once

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "laviter/core/error.hpp"
#include "laviter/core/rng.hpp"

namespace laviter {

namespace detail {

struct Node;
using NodePtr = std::shared_ptr<Node>;

// One vertex of the computation graph. Forward results live in `data`;
// `grad` is filled during backward. Leaves (no parents) keep their gradient
// across backward calls so it accumulates until explicitly zeroed.
struct Node {
  std::vector<int> shape;
  std::vector<double> data;
  std::vector<double> grad;
  bool requires_grad = false;
  std::vector<NodePtr> parents;
  std::function<void(Node&)> backprop;

  bool is_leaf() const { return parents.empty(); }
  size_t size() const { return data.size(); }
  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
  }
};

}  // namespace detail

// Scoped switch that disables graph recording. While active, all ops run
// forward-only regardless of requires_grad flags.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

  static bool recording();

 private:
  bool previous_;
};

// Dense row-major tensor of doubles with reverse-mode autodiff. Value
// semantics on the handle; the underlying node is shared. Data is immutable
// after construction except through raw() (parameter updates) and grad
// buffers.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::vector<int> shape, bool requires_grad = false);
  static Tensor full(std::vector<int> shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor from_data(std::vector<int> shape, std::vector<double> data,
                          bool requires_grad = false);
  static Tensor randn(std::vector<int> shape, Rng& rng, double stddev = 1.0,
                      bool requires_grad = false);
  static Tensor uniform(std::vector<int> shape, Rng& rng, double lo, double hi,
                        bool requires_grad = false);
  // Xavier/Glorot uniform for a (fan_out x fan_in) weight matrix.
  static Tensor xavier(std::vector<int> shape, Rng& rng, int fan_in, int fan_out,
                       bool requires_grad = false);

  bool defined() const { return static_cast<bool>(node_); }
  int ndim() const;
  int dim(int axis) const;
  int size() const;
  const std::vector<int>& shape() const;

  const std::vector<double>& data() const;
  // Mutable access to the raw buffer; only meaningful for leaves (parameters).
  std::vector<double>& raw();

  double value() const;  // scalar tensors only
  double at(int i) const;
  double at(int i, int j) const;
  double at(int c, int i, int j) const;

  bool requires_grad() const;
  void set_requires_grad(bool value);
  const std::vector<double>& grad() const;
  bool has_grad() const;
  void zero_grad();

  // New leaf with a copy of the data and no graph history.
  Tensor detach() const;

  // Reverse-mode backward from a scalar root. Gradients accumulate into the
  // grad buffers of every reachable leaf with requires_grad set.
  void backward() const;

  detail::NodePtr node() const { return node_; }
  static Tensor wrap(detail::NodePtr n);

 private:
  explicit Tensor(detail::NodePtr n) : node_(std::move(n)) {}
  detail::NodePtr node_;
};

// ---- elementwise arithmetic ----
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor neg(const Tensor& a);
Tensor add_scalar(const Tensor& a, double s);
Tensor mul_scalar(const Tensor& a, double s);

// Broadcast adds over a 2-D tensor: a is (R x C).
Tensor add_colvec(const Tensor& a, const Tensor& b);  // b has length R, added to each column
Tensor add_rowvec(const Tensor& a, const Tensor& b);  // b has length C, added to each row

// ---- linear algebra ----
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

// ---- pointwise functions ----
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor sqrt(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor leaky_relu(const Tensor& a, double slope);
Tensor clamp(const Tensor& a, double lo, double hi);
// max(a, c) elementwise against a constant; gradient passes where a > c.
Tensor max_scalar(const Tensor& a, double c);

// ---- reductions ----
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor sum_axis(const Tensor& a, int axis);  // 2-D only

// ---- structure ----
Tensor reshape(const Tensor& a, std::vector<int> shape);
Tensor concat_rows(std::span<const Tensor> parts);  // stack along axis 0
Tensor slice_rows(const Tensor& a, int row_begin, int row_end);
Tensor select_col(const Tensor& a, int col);  // (R x C) -> vector of length R
Tensor select_item(const Tensor& a, int i, int j);  // scalar from a 2-D tensor
// Assemble a tensor from scalar graph nodes; gradients route back to each.
Tensor pack_scalars(std::vector<int> shape, std::span<const Tensor> elements);
// Columns of `table` (D x V) selected by ids; duplicate ids accumulate grads.
Tensor gather_cols(const Tensor& table, const std::vector<int>& ids);

// Non-differentiable helpers.
double max_value(const Tensor& a);

}  // namespace laviter
