#include "laviter/core/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace laviter {

using detail::Node;
using detail::NodePtr;

namespace {

thread_local bool g_recording = true;

size_t shape_count(const std::vector<int>& shape) {
  size_t n = 1;
  for (int d : shape) {
    if (d < 0) throw ShapeError("negative dimension in shape " + shape_to_string(shape));
    n *= static_cast<size_t>(d);
  }
  return n;
}

NodePtr new_leaf(std::vector<int> shape, std::vector<double> data, bool requires_grad) {
  if (shape_count(shape) != data.size())
    throw ShapeError("data length " + std::to_string(data.size()) +
                     " does not match shape " + shape_to_string(shape));
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->data = std::move(data);
  n->requires_grad = requires_grad;
  return n;
}

// Raw matmul kernels, row-major. C must be zero-initialized by the caller.
void mm_nn(const double* a, const double* b, double* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    const double* arow = a + static_cast<size_t>(i) * k;
    double* crow = c + static_cast<size_t>(i) * n;
    for (int p = 0; p < k; ++p) {
      double av = arow[p];
      if (av == 0.0) continue;
      const double* brow = b + static_cast<size_t>(p) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// c(m x n) += a(m x k) * b(n x k)^T
void mm_nt_acc(const double* a, const double* b, double* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    const double* arow = a + static_cast<size_t>(i) * k;
    double* crow = c + static_cast<size_t>(i) * n;
    for (int j = 0; j < n; ++j) {
      const double* brow = b + static_cast<size_t>(j) * k;
      double acc = 0.0;
      for (int p = 0; p < k; ++p) acc += arow[p] * brow[p];
      crow[j] += acc;
    }
  }
}

// c(k x n) += a(m x k)^T * b(m x n)
void mm_tn_acc(const double* a, const double* b, double* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    const double* arow = a + static_cast<size_t>(i) * k;
    const double* brow = b + static_cast<size_t>(i) * n;
    for (int p = 0; p < k; ++p) {
      double av = arow[p];
      if (av == 0.0) continue;
      double* crow = c + static_cast<size_t>(p) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

}  // namespace

NoGradGuard::NoGradGuard() : previous_(g_recording) { g_recording = false; }
NoGradGuard::~NoGradGuard() { g_recording = previous_; }
bool NoGradGuard::recording() { return g_recording; }

// Builds an op result node. Parents and the closure are only retained when
// the result actually participates in a gradient computation.
static Tensor make_op(std::vector<int> shape, std::vector<double> data,
                      std::vector<NodePtr> parents, std::function<void(Node&)> backprop) {
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->data = std::move(data);
  bool rg = false;
  if (g_recording) {
    for (const auto& p : parents)
      if (p && p->requires_grad) rg = true;
  }
  n->requires_grad = rg;
  if (rg) {
    n->parents = std::move(parents);
    n->backprop = std::move(backprop);
  }
  return Tensor::wrap(n);
}

Tensor Tensor::wrap(NodePtr n) { return Tensor(std::move(n)); }

Tensor Tensor::zeros(std::vector<int> shape, bool requires_grad) {
  size_t n = shape_count(shape);
  return Tensor(new_leaf(std::move(shape), std::vector<double>(n, 0.0), requires_grad));
}

Tensor Tensor::full(std::vector<int> shape, double value, bool requires_grad) {
  size_t n = shape_count(shape);
  return Tensor(new_leaf(std::move(shape), std::vector<double>(n, value), requires_grad));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor(new_leaf({}, {value}, requires_grad));
}

Tensor Tensor::from_data(std::vector<int> shape, std::vector<double> data, bool requires_grad) {
  return Tensor(new_leaf(std::move(shape), std::move(data), requires_grad));
}

Tensor Tensor::randn(std::vector<int> shape, Rng& rng, double stddev, bool requires_grad) {
  size_t n = shape_count(shape);
  std::vector<double> data(n);
  for (auto& v : data) v = rng.normal(0.0, stddev);
  return Tensor(new_leaf(std::move(shape), std::move(data), requires_grad));
}

Tensor Tensor::uniform(std::vector<int> shape, Rng& rng, double lo, double hi, bool requires_grad) {
  size_t n = shape_count(shape);
  std::vector<double> data(n);
  for (auto& v : data) v = rng.uniform(lo, hi);
  return Tensor(new_leaf(std::move(shape), std::move(data), requires_grad));
}

Tensor Tensor::xavier(std::vector<int> shape, Rng& rng, int fan_in, int fan_out,
                      bool requires_grad) {
  double bound = std::sqrt(6.0 / (fan_in + fan_out));
  return uniform(std::move(shape), rng, -bound, bound, requires_grad);
}

int Tensor::ndim() const { return static_cast<int>(node_->shape.size()); }

int Tensor::dim(int axis) const {
  if (axis < 0 || axis >= ndim())
    throw ShapeError("axis " + std::to_string(axis) + " invalid for shape " +
                     shape_to_string(node_->shape));
  return node_->shape[axis];
}

int Tensor::size() const { return static_cast<int>(node_->data.size()); }
const std::vector<int>& Tensor::shape() const { return node_->shape; }
const std::vector<double>& Tensor::data() const { return node_->data; }

std::vector<double>& Tensor::raw() { return node_->data; }

double Tensor::value() const {
  if (node_->data.size() != 1)
    throw ContractError("value() requires a scalar tensor, got shape " +
                        shape_to_string(node_->shape));
  return node_->data[0];
}

double Tensor::at(int i) const { return node_->data.at(static_cast<size_t>(i)); }

double Tensor::at(int i, int j) const {
  if (ndim() != 2) throw ShapeError("at(i,j) requires a 2-D tensor");
  return node_->data[static_cast<size_t>(i) * node_->shape[1] + j];
}

double Tensor::at(int c, int i, int j) const {
  if (ndim() != 3) throw ShapeError("at(c,i,j) requires a 3-D tensor");
  return node_->data[(static_cast<size_t>(c) * node_->shape[1] + i) * node_->shape[2] + j];
}

bool Tensor::requires_grad() const { return node_->requires_grad; }

void Tensor::set_requires_grad(bool value) {
  if (!node_->is_leaf())
    throw ContractError("requires_grad can only be toggled on leaf tensors");
  node_->requires_grad = value;
}

const std::vector<double>& Tensor::grad() const {
  node_->ensure_grad();
  return node_->grad;
}

bool Tensor::has_grad() const { return node_->grad.size() == node_->data.size(); }

void Tensor::zero_grad() { node_->grad.assign(node_->data.size(), 0.0); }

Tensor Tensor::detach() const {
  return Tensor(new_leaf(node_->shape, node_->data, false));
}

void Tensor::backward() const {
  if (node_->data.size() != 1)
    throw ContractError("backward() requires a scalar root, got shape " +
                        shape_to_string(node_->shape));
  if (!node_->requires_grad) return;  // fully detached graph, nothing to do

  // Topological order via iterative DFS over grad-requiring parents.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  struct Frame {
    Node* node;
    size_t next_parent;
  };
  std::vector<Frame> stack;
  stack.push_back({node_.get(), 0});
  visited.insert(node_.get());
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next_parent < f.node->parents.size()) {
      Node* p = f.node->parents[f.next_parent++].get();
      if (p->requires_grad && !visited.count(p)) {
        visited.insert(p);
        stack.push_back({p, 0});
      }
    } else {
      order.push_back(f.node);
      stack.pop_back();
    }
  }

  // Non-leaf grads are scratch space for this backward pass; leaf grads
  // accumulate across passes until zero_grad.
  for (Node* n : order) {
    if (n->is_leaf())
      n->ensure_grad();
    else
      n->grad.assign(n->data.size(), 0.0);
  }
  node_->grad[0] = 1.0;

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backprop) n->backprop(*n);
  }
}

// ---------------------------------------------------------------------------
// elementwise arithmetic

static void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_to_string(a.shape()) +
                     " vs " + shape_to_string(b.shape()));
}

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "add");
  std::vector<double> out(a.data());
  const auto& bd = b.data();
  for (size_t i = 0; i < out.size(); ++i) out[i] += bd[i];
  auto pa = a.node(), pb = b.node();
  return make_op(a.shape(), std::move(out), {pa, pb}, [pa, pb](Node& n) {
    if (pa->requires_grad) {
      pa->ensure_grad();
      for (size_t i = 0; i < n.grad.size(); ++i) pa->grad[i] += n.grad[i];
    }
    if (pb->requires_grad) {
      pb->ensure_grad();
      for (size_t i = 0; i < n.grad.size(); ++i) pb->grad[i] += n.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "sub");
  std::vector<double> out(a.data());
  const auto& bd = b.data();
  for (size_t i = 0; i < out.size(); ++i) out[i] -= bd[i];
  auto pa = a.node(), pb = b.node();
  return make_op(a.shape(), std::move(out), {pa, pb}, [pa, pb](Node& n) {
    if (pa->requires_grad) {
      pa->ensure_grad();
      for (size_t i = 0; i < n.grad.size(); ++i) pa->grad[i] += n.grad[i];
    }
    if (pb->requires_grad) {
      pb->ensure_grad();
      for (size_t i = 0; i < n.grad.size(); ++i) pb->grad[i] -= n.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "mul");
  std::vector<double> out(a.data());
  const auto& bd = b.data();
  for (size_t i = 0; i < out.size(); ++i) out[i] *= bd[i];
  auto pa = a.node(), pb = b.node();
  return make_op(a.shape(), std::move(out), {pa, pb}, [pa, pb](Node& n) {
    if (pa->requires_grad) {
      pa->ensure_grad();
      for (size_t i = 0; i < n.grad.size(); ++i) pa->grad[i] += n.grad[i] * pb->data[i];
    }
    if (pb->requires_grad) {
      pb->ensure_grad();
      for (size_t i = 0; i < n.grad.size(); ++i) pb->grad[i] += n.grad[i] * pa->data[i];
    }
  });
}

Tensor div(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "div");
  std::vector<double> out(a.data());
  const auto& bd = b.data();
  for (size_t i = 0; i < out.size(); ++i) out[i] /= bd[i];
  auto pa = a.node(), pb = b.node();
  return make_op(a.shape(), std::move(out), {pa, pb}, [pa, pb](Node& n) {
    if (pa->requires_grad) {
      pa->ensure_grad();
      for (size_t i = 0; i < n.grad.size(); ++i) pa->grad[i] += n.grad[i] / pb->data[i];
    }
    if (pb->requires_grad) {
      pb->ensure_grad();
      for (size_t i = 0; i < n.grad.size(); ++i)
        pb->grad[i] -= n.grad[i] * n.data[i] / pb->data[i];
    }
  });
}

Tensor neg(const Tensor& a) { return mul_scalar(a, -1.0); }

Tensor add_scalar(const Tensor& a, double s) {
  std::vector<double> out(a.data());
  for (auto& v : out) v += s;
  auto pa = a.node();
  return make_op(a.shape(), std::move(out), {pa}, [pa](Node& n) {
    pa->ensure_grad();
    for (size_t i = 0; i < n.grad.size(); ++i) pa->grad[i] += n.grad[i];
  });
}

Tensor mul_scalar(const Tensor& a, double s) {
  std::vector<double> out(a.data());
  for (auto& v : out) v *= s;
  auto pa = a.node();
  return make_op(a.shape(), std::move(out), {pa}, [pa, s](Node& n) {
    pa->ensure_grad();
    for (size_t i = 0; i < n.grad.size(); ++i) pa->grad[i] += s * n.grad[i];
  });
}

Tensor add_colvec(const Tensor& a, const Tensor& b) {
  if (a.ndim() != 2 || b.ndim() != 1 || b.dim(0) != a.dim(0))
    throw ShapeError("add_colvec: shapes " + shape_to_string(a.shape()) + " vs " +
                     shape_to_string(b.shape()));
  int rows = a.dim(0), cols = a.dim(1);
  std::vector<double> out(a.data());
  const auto& bd = b.data();
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) out[static_cast<size_t>(i) * cols + j] += bd[i];
  auto pa = a.node(), pb = b.node();
  return make_op(a.shape(), std::move(out), {pa, pb}, [pa, pb, rows, cols](Node& n) {
    if (pa->requires_grad) {
      pa->ensure_grad();
      for (size_t i = 0; i < n.grad.size(); ++i) pa->grad[i] += n.grad[i];
    }
    if (pb->requires_grad) {
      pb->ensure_grad();
      for (int i = 0; i < rows; ++i) {
        double acc = 0.0;
        for (int j = 0; j < cols; ++j) acc += n.grad[static_cast<size_t>(i) * cols + j];
        pb->grad[i] += acc;
      }
    }
  });
}

Tensor add_rowvec(const Tensor& a, const Tensor& b) {
  if (a.ndim() != 2 || b.ndim() != 1 || b.dim(0) != a.dim(1))
    throw ShapeError("add_rowvec: shapes " + shape_to_string(a.shape()) + " vs " +
                     shape_to_string(b.shape()));
  int rows = a.dim(0), cols = a.dim(1);
  std::vector<double> out(a.data());
  const auto& bd = b.data();
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) out[static_cast<size_t>(i) * cols + j] += bd[j];
  auto pa = a.node(), pb = b.node();
  return make_op(a.shape(), std::move(out), {pa, pb}, [pa, pb, rows, cols](Node& n) {
    if (pa->requires_grad) {
      pa->ensure_grad();
      for (size_t i = 0; i < n.grad.size(); ++i) pa->grad[i] += n.grad[i];
    }
    if (pb->requires_grad) {
      pb->ensure_grad();
      for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) pb->grad[j] += n.grad[static_cast<size_t>(i) * cols + j];
    }
  });
}

// ---------------------------------------------------------------------------
// linear algebra

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.ndim() != 2 || b.ndim() != 2 || a.dim(1) != b.dim(0))
    throw ShapeError("matmul: incompatible shapes " + shape_to_string(a.shape()) + " and " +
                     shape_to_string(b.shape()));
  int m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<double> out(static_cast<size_t>(m) * n, 0.0);
  mm_nn(a.data().data(), b.data().data(), out.data(), m, k, n);
  auto pa = a.node(), pb = b.node();
  return make_op({m, n}, std::move(out), {pa, pb}, [pa, pb, m, k, n](Node& node) {
    if (pa->requires_grad) {
      pa->ensure_grad();
      // dA += dC * B^T
      mm_nt_acc(node.grad.data(), pb->data.data(), pa->grad.data(), m, n, k);
    }
    if (pb->requires_grad) {
      pb->ensure_grad();
      // dB += A^T * dC
      mm_tn_acc(pa->data.data(), node.grad.data(), pb->grad.data(), m, k, n);
    }
  });
}

Tensor transpose(const Tensor& a) {
  if (a.ndim() != 2) throw ShapeError("transpose requires a 2-D tensor");
  int rows = a.dim(0), cols = a.dim(1);
  std::vector<double> out(a.data().size());
  const auto& ad = a.data();
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j)
      out[static_cast<size_t>(j) * rows + i] = ad[static_cast<size_t>(i) * cols + j];
  auto pa = a.node();
  return make_op({cols, rows}, std::move(out), {pa}, [pa, rows, cols](Node& n) {
    pa->ensure_grad();
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j)
        pa->grad[static_cast<size_t>(i) * cols + j] += n.grad[static_cast<size_t>(j) * rows + i];
  });
}

// ---------------------------------------------------------------------------
// pointwise functions

Tensor exp(const Tensor& a) {
  std::vector<double> out(a.data());
  for (auto& v : out) v = std::exp(v);
  auto pa = a.node();
  return make_op(a.shape(), std::move(out), {pa}, [pa](Node& n) {
    pa->ensure_grad();
    for (size_t i = 0; i < n.grad.size(); ++i) pa->grad[i] += n.grad[i] * n.data[i];
  });
}

Tensor log(const Tensor& a) {
  std::vector<double> out(a.data());
  for (auto& v : out) v = std::log(v);
  auto pa = a.node();
  return make_op(a.shape(), std::move(out), {pa}, [pa](Node& n) {
    pa->ensure_grad();
    for (size_t i = 0; i < n.grad.size(); ++i) pa->grad[i] += n.grad[i] / pa->data[i];
  });
}

Tensor sqrt(const Tensor& a) {
  std::vector<double> out(a.data());
  for (auto& v : out) v = std::sqrt(v);
  auto pa = a.node();
  return make_op(a.shape(), std::move(out), {pa}, [pa](Node& n) {
    pa->ensure_grad();
    for (size_t i = 0; i < n.grad.size(); ++i) pa->grad[i] += n.grad[i] * 0.5 / n.data[i];
  });
}

Tensor tanh(const Tensor& a) {
  std::vector<double> out(a.data());
  for (auto& v : out) v = std::tanh(v);
  auto pa = a.node();
  return make_op(a.shape(), std::move(out), {pa}, [pa](Node& n) {
    pa->ensure_grad();
    for (size_t i = 0; i < n.grad.size(); ++i)
      pa->grad[i] += n.grad[i] * (1.0 - n.data[i] * n.data[i]);
  });
}

Tensor sigmoid(const Tensor& a) {
  std::vector<double> out(a.data());
  for (auto& v : out) v = 1.0 / (1.0 + std::exp(-v));
  auto pa = a.node();
  return make_op(a.shape(), std::move(out), {pa}, [pa](Node& n) {
    pa->ensure_grad();
    for (size_t i = 0; i < n.grad.size(); ++i)
      pa->grad[i] += n.grad[i] * n.data[i] * (1.0 - n.data[i]);
  });
}

Tensor relu(const Tensor& a) {
  std::vector<double> out(a.data());
  for (auto& v : out) v = v > 0.0 ? v : 0.0;
  auto pa = a.node();
  return make_op(a.shape(), std::move(out), {pa}, [pa](Node& n) {
    pa->ensure_grad();
    for (size_t i = 0; i < n.grad.size(); ++i)
      if (pa->data[i] > 0.0) pa->grad[i] += n.grad[i];
  });
}

Tensor leaky_relu(const Tensor& a, double slope) {
  std::vector<double> out(a.data());
  for (auto& v : out) v = v > 0.0 ? v : slope * v;
  auto pa = a.node();
  return make_op(a.shape(), std::move(out), {pa}, [pa, slope](Node& n) {
    pa->ensure_grad();
    for (size_t i = 0; i < n.grad.size(); ++i)
      pa->grad[i] += n.grad[i] * (pa->data[i] > 0.0 ? 1.0 : slope);
  });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
  std::vector<double> out(a.data());
  for (auto& v : out) v = std::min(hi, std::max(lo, v));
  auto pa = a.node();
  return make_op(a.shape(), std::move(out), {pa}, [pa, lo, hi](Node& n) {
    pa->ensure_grad();
    for (size_t i = 0; i < n.grad.size(); ++i)
      if (pa->data[i] > lo && pa->data[i] < hi) pa->grad[i] += n.grad[i];
  });
}

Tensor max_scalar(const Tensor& a, double c) {
  std::vector<double> out(a.data());
  for (auto& v : out) v = std::max(v, c);
  auto pa = a.node();
  return make_op(a.shape(), std::move(out), {pa}, [pa, c](Node& n) {
    pa->ensure_grad();
    for (size_t i = 0; i < n.grad.size(); ++i)
      if (pa->data[i] > c) pa->grad[i] += n.grad[i];
  });
}

// ---------------------------------------------------------------------------
// reductions

Tensor sum(const Tensor& a) {
  double acc = 0.0;
  for (double v : a.data()) acc += v;
  auto pa = a.node();
  return make_op({}, {acc}, {pa}, [pa](Node& n) {
    pa->ensure_grad();
    for (auto& g : pa->grad) g += n.grad[0];
  });
}

Tensor mean(const Tensor& a) {
  if (a.size() == 0) throw ContractError("mean of an empty tensor");
  double acc = 0.0;
  for (double v : a.data()) acc += v;
  double inv = 1.0 / a.size();
  auto pa = a.node();
  return make_op({}, {acc * inv}, {pa}, [pa, inv](Node& n) {
    pa->ensure_grad();
    for (auto& g : pa->grad) g += n.grad[0] * inv;
  });
}

Tensor sum_axis(const Tensor& a, int axis) {
  if (a.ndim() != 2) throw ShapeError("sum_axis requires a 2-D tensor");
  if (axis != 0 && axis != 1)
    throw ShapeError("sum_axis: axis " + std::to_string(axis) + " invalid for shape " +
                     shape_to_string(a.shape()));
  int rows = a.dim(0), cols = a.dim(1);
  const auto& ad = a.data();
  auto pa = a.node();
  if (axis == 0) {
    std::vector<double> out(cols, 0.0);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) out[j] += ad[static_cast<size_t>(i) * cols + j];
    return make_op({cols}, std::move(out), {pa}, [pa, rows, cols](Node& n) {
      pa->ensure_grad();
      for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) pa->grad[static_cast<size_t>(i) * cols + j] += n.grad[j];
    });
  }
  std::vector<double> out(rows, 0.0);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) out[i] += ad[static_cast<size_t>(i) * cols + j];
  return make_op({rows}, std::move(out), {pa}, [pa, rows, cols](Node& n) {
    pa->ensure_grad();
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) pa->grad[static_cast<size_t>(i) * cols + j] += n.grad[i];
  });
}

// ---------------------------------------------------------------------------
// structure

Tensor reshape(const Tensor& a, std::vector<int> shape) {
  if (shape_count(shape) != a.data().size())
    throw ShapeError("reshape: cannot view " + shape_to_string(a.shape()) + " as " +
                     shape_to_string(shape));
  auto pa = a.node();
  return make_op(std::move(shape), a.data(), {pa}, [pa](Node& n) {
    pa->ensure_grad();
    for (size_t i = 0; i < n.grad.size(); ++i) pa->grad[i] += n.grad[i];
  });
}

Tensor concat_rows(std::span<const Tensor> parts) {
  if (parts.empty()) throw ContractError("concat_rows of zero tensors");
  int cols = -1;
  int total_rows = 0;
  for (const Tensor& t : parts) {
    int c = t.ndim() == 1 ? 1 : t.dim(1);
    int r = t.dim(0);
    if (t.ndim() > 2) throw ShapeError("concat_rows requires 1-D or 2-D tensors");
    if (cols == -1) cols = c;
    if (c != cols) throw ShapeError("concat_rows: column count mismatch");
    total_rows += r;
  }
  std::vector<double> out;
  out.reserve(static_cast<size_t>(total_rows) * cols);
  std::vector<NodePtr> parents;
  std::vector<size_t> offsets;
  for (const Tensor& t : parts) {
    offsets.push_back(out.size());
    out.insert(out.end(), t.data().begin(), t.data().end());
    parents.push_back(t.node());
  }
  auto parent_copy = parents;
  return make_op({total_rows, cols}, std::move(out), std::move(parents),
                 [parent_copy, offsets](Node& n) {
                   for (size_t p = 0; p < parent_copy.size(); ++p) {
                     auto& par = *parent_copy[p];
                     if (!par.requires_grad) continue;
                     par.ensure_grad();
                     size_t base = offsets[p];
                     for (size_t i = 0; i < par.data.size(); ++i) par.grad[i] += n.grad[base + i];
                   }
                 });
}

Tensor slice_rows(const Tensor& a, int row_begin, int row_end) {
  if (a.ndim() != 2) throw ShapeError("slice_rows requires a 2-D tensor");
  int rows = a.dim(0), cols = a.dim(1);
  if (row_begin < 0 || row_end > rows || row_begin >= row_end)
    throw ShapeError("slice_rows: range [" + std::to_string(row_begin) + "," +
                     std::to_string(row_end) + ") invalid for " + shape_to_string(a.shape()));
  int out_rows = row_end - row_begin;
  const auto& ad = a.data();
  std::vector<double> out(ad.begin() + static_cast<size_t>(row_begin) * cols,
                          ad.begin() + static_cast<size_t>(row_end) * cols);
  auto pa = a.node();
  return make_op({out_rows, cols}, std::move(out), {pa}, [pa, row_begin, cols](Node& n) {
    pa->ensure_grad();
    size_t base = static_cast<size_t>(row_begin) * cols;
    for (size_t i = 0; i < n.grad.size(); ++i) pa->grad[base + i] += n.grad[i];
  });
}

Tensor select_col(const Tensor& a, int col) {
  if (a.ndim() != 2) throw ShapeError("select_col requires a 2-D tensor");
  int rows = a.dim(0), cols = a.dim(1);
  if (col < 0 || col >= cols)
    throw ShapeError("select_col: column " + std::to_string(col) + " invalid for " +
                     shape_to_string(a.shape()));
  std::vector<double> out(rows);
  const auto& ad = a.data();
  for (int i = 0; i < rows; ++i) out[i] = ad[static_cast<size_t>(i) * cols + col];
  auto pa = a.node();
  return make_op({rows}, std::move(out), {pa}, [pa, col, rows, cols](Node& n) {
    pa->ensure_grad();
    for (int i = 0; i < rows; ++i) pa->grad[static_cast<size_t>(i) * cols + col] += n.grad[i];
  });
}

Tensor select_item(const Tensor& a, int i, int j) {
  if (a.ndim() != 2) throw ShapeError("select_item requires a 2-D tensor");
  int rows = a.dim(0), cols = a.dim(1);
  if (i < 0 || i >= rows || j < 0 || j >= cols)
    throw ShapeError("select_item: index out of range for " + shape_to_string(a.shape()));
  auto pa = a.node();
  double v = a.data()[static_cast<size_t>(i) * cols + j];
  return make_op({}, {v}, {pa}, [pa, i, j, cols](Node& n) {
    pa->ensure_grad();
    pa->grad[static_cast<size_t>(i) * cols + j] += n.grad[0];
  });
}

Tensor pack_scalars(std::vector<int> shape, std::span<const Tensor> elements) {
  size_t n = shape_count(shape);
  if (n != elements.size())
    throw ShapeError("pack_scalars: " + std::to_string(elements.size()) +
                     " elements cannot fill shape " + shape_to_string(shape));
  std::vector<double> out(n);
  std::vector<NodePtr> parents;
  parents.reserve(n);
  for (size_t i = 0; i < n; ++i) {
    if (elements[i].size() != 1) throw ContractError("pack_scalars: element is not scalar");
    out[i] = elements[i].data()[0];
    parents.push_back(elements[i].node());
  }
  auto parent_copy = parents;
  return make_op(std::move(shape), std::move(out), std::move(parents), [parent_copy](Node& n) {
    for (size_t i = 0; i < parent_copy.size(); ++i) {
      auto& par = *parent_copy[i];
      if (!par.requires_grad) continue;
      par.ensure_grad();
      par.grad[0] += n.grad[i];
    }
  });
}

Tensor gather_cols(const Tensor& table, const std::vector<int>& ids) {
  if (table.ndim() != 2) throw ShapeError("gather_cols requires a 2-D table");
  int rows = table.dim(0), cols = table.dim(1);
  int n = static_cast<int>(ids.size());
  for (int id : ids)
    if (id < 0 || id >= cols)
      throw VocabError("token id " + std::to_string(id) + " outside table with " +
                       std::to_string(cols) + " columns");
  std::vector<double> out(static_cast<size_t>(rows) * n);
  const auto& td = table.data();
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < n; ++j)
      out[static_cast<size_t>(i) * n + j] = td[static_cast<size_t>(i) * cols + ids[j]];
  auto pt = table.node();
  auto ids_copy = ids;
  return make_op({rows, n}, std::move(out), {pt}, [pt, ids_copy, rows, cols, n](Node& nd) {
    pt->ensure_grad();
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < n; ++j)
        pt->grad[static_cast<size_t>(i) * cols + ids_copy[j]] +=
            nd.grad[static_cast<size_t>(i) * n + j];
  });
}

double max_value(const Tensor& a) {
  double m = a.data()[0];
  for (double v : a.data()) m = std::max(m, v);
  return m;
}

}  // namespace laviter
