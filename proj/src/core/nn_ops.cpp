#include "laviter/core/nn_ops.hpp"

#include <algorithm>
#include <cmath>

namespace laviter {

using detail::Node;

namespace {

struct View2D {
  int rows, cols;
};

View2D as_2d(const Tensor& a, const char* op) {
  if (a.ndim() > 2) throw ShapeError(std::string(op) + " requires at most 2-D input");
  if (a.ndim() == 2) return {a.dim(0), a.dim(1)};
  return {1, a.size()};
}

void im2col(const std::vector<double>& in, int C, int H, int W, int k, int stride, int pad,
            int OH, int OW, std::vector<double>& patches) {
  // patches: (C*k*k) x (OH*OW), row-major
  int cols = OH * OW;
  patches.assign(static_cast<size_t>(C) * k * k * cols, 0.0);
  for (int c = 0; c < C; ++c) {
    for (int ki = 0; ki < k; ++ki) {
      for (int kj = 0; kj < k; ++kj) {
        double* prow = patches.data() + (static_cast<size_t>(c) * k * k + ki * k + kj) * cols;
        for (int oi = 0; oi < OH; ++oi) {
          int ii = oi * stride + ki - pad;
          if (ii < 0 || ii >= H) continue;
          const double* irow = in.data() + (static_cast<size_t>(c) * H + ii) * W;
          double* pr = prow + static_cast<size_t>(oi) * OW;
          for (int oj = 0; oj < OW; ++oj) {
            int jj = oj * stride + kj - pad;
            if (jj >= 0 && jj < W) pr[oj] = irow[jj];
          }
        }
      }
    }
  }
}

void col2im_acc(const std::vector<double>& patches, int C, int H, int W, int k, int stride,
                int pad, int OH, int OW, std::vector<double>& grad_in) {
  int cols = OH * OW;
  for (int c = 0; c < C; ++c) {
    for (int ki = 0; ki < k; ++ki) {
      for (int kj = 0; kj < k; ++kj) {
        const double* prow =
            patches.data() + (static_cast<size_t>(c) * k * k + ki * k + kj) * cols;
        for (int oi = 0; oi < OH; ++oi) {
          int ii = oi * stride + ki - pad;
          if (ii < 0 || ii >= H) continue;
          double* grow = grad_in.data() + (static_cast<size_t>(c) * H + ii) * W;
          const double* pr = prow + static_cast<size_t>(oi) * OW;
          for (int oj = 0; oj < OW; ++oj) {
            int jj = oj * stride + kj - pad;
            if (jj >= 0 && jj < W) grow[jj] += pr[oj];
          }
        }
      }
    }
  }
}

}  // namespace

Tensor softmax(const Tensor& a, int axis) {
  auto [rows, cols] = as_2d(a, "softmax");
  if (a.ndim() == 2 && axis != 0 && axis != 1)
    throw ShapeError("softmax: axis must be 0 or 1");
  bool by_row = a.ndim() < 2 || axis == 1;
  const auto& ad = a.data();
  std::vector<double> out(ad.size());
  int nslices = by_row ? rows : cols;
  int extent = by_row ? cols : rows;
  auto idx = [by_row, cols](int s, int e) {
    return by_row ? static_cast<size_t>(s) * cols + e : static_cast<size_t>(e) * cols + s;
  };
  for (int s = 0; s < nslices; ++s) {
    double m = ad[idx(s, 0)];
    for (int e = 1; e < extent; ++e) m = std::max(m, ad[idx(s, e)]);
    double z = 0.0;
    for (int e = 0; e < extent; ++e) {
      double v = std::exp(ad[idx(s, e)] - m);
      out[idx(s, e)] = v;
      z += v;
    }
    for (int e = 0; e < extent; ++e) out[idx(s, e)] /= z;
  }
  auto pa = a.node();
  auto n = std::make_shared<Node>();
  n->shape = a.shape();
  n->data = std::move(out);
  if (NoGradGuard::recording() && pa->requires_grad) {
    n->requires_grad = true;
    n->parents = {pa};
    n->backprop = [pa, rows, cols, by_row, nslices, extent, idx](Node& nd) {
      pa->ensure_grad();
      (void)rows;
      (void)cols;
      for (int s = 0; s < nslices; ++s) {
        double dot = 0.0;
        for (int e = 0; e < extent; ++e) dot += nd.grad[idx(s, e)] * nd.data[idx(s, e)];
        for (int e = 0; e < extent; ++e) {
          size_t i = idx(s, e);
          pa->grad[i] += nd.data[i] * (nd.grad[i] - dot);
        }
      }
    };
  }
  return Tensor::wrap(n);
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps,
                  int axis) {
  if (x.ndim() != 2) throw ShapeError("layer_norm requires a 2-D input");
  if (axis != 0 && axis != 1) throw ShapeError("layer_norm: axis must be 0 or 1");
  int rows = x.dim(0), cols = x.dim(1);
  int extent = axis == 0 ? rows : cols;
  int nslices = axis == 0 ? cols : rows;
  if (gain.ndim() != 1 || gain.dim(0) != extent || bias.ndim() != 1 || bias.dim(0) != extent)
    throw ShapeError("layer_norm: gain/bias must match normalized extent " +
                     std::to_string(extent));
  auto idx = [axis, cols](int s, int e) {
    return axis == 0 ? static_cast<size_t>(e) * cols + s : static_cast<size_t>(s) * cols + e;
  };
  const auto& xd = x.data();
  const auto& gd = gain.data();
  const auto& bd = bias.data();
  std::vector<double> out(xd.size());
  std::vector<double> mu(nslices), istd(nslices);
  for (int s = 0; s < nslices; ++s) {
    double m = 0.0;
    for (int e = 0; e < extent; ++e) m += xd[idx(s, e)];
    m /= extent;
    double var = 0.0;
    for (int e = 0; e < extent; ++e) {
      double d = xd[idx(s, e)] - m;
      var += d * d;
    }
    var /= extent;
    mu[s] = m;
    istd[s] = 1.0 / std::sqrt(var + eps);
    for (int e = 0; e < extent; ++e)
      out[idx(s, e)] = gd[e] * (xd[idx(s, e)] - m) * istd[s] + bd[e];
  }
  auto px = x.node();
  auto pg = gain.node();
  auto pb = bias.node();
  auto n = std::make_shared<Node>();
  n->shape = x.shape();
  n->data = std::move(out);
  bool rg = NoGradGuard::recording() &&
            (px->requires_grad || pg->requires_grad || pb->requires_grad);
  if (rg) {
    n->requires_grad = true;
    n->parents = {px, pg, pb};
    n->backprop = [px, pg, pb, nslices, extent, idx, mu, istd](Node& nd) {
      for (int s = 0; s < nslices; ++s) {
        double is = istd[s];
        if (pg->requires_grad || pb->requires_grad) {
          if (pg->requires_grad) pg->ensure_grad();
          if (pb->requires_grad) pb->ensure_grad();
          for (int e = 0; e < extent; ++e) {
            size_t i = idx(s, e);
            double xhat = (px->data[i] - mu[s]) * is;
            if (pg->requires_grad) pg->grad[e] += nd.grad[i] * xhat;
            if (pb->requires_grad) pb->grad[e] += nd.grad[i];
          }
        }
        if (px->requires_grad) {
          px->ensure_grad();
          double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
          for (int e = 0; e < extent; ++e) {
            size_t i = idx(s, e);
            double xhat = (px->data[i] - mu[s]) * is;
            double dxhat = nd.grad[i] * pg->data[e];
            sum_dxhat += dxhat;
            sum_dxhat_xhat += dxhat * xhat;
          }
          for (int e = 0; e < extent; ++e) {
            size_t i = idx(s, e);
            double xhat = (px->data[i] - mu[s]) * is;
            double dxhat = nd.grad[i] * pg->data[e];
            px->grad[i] +=
                is * (dxhat - (sum_dxhat + xhat * sum_dxhat_xhat) / extent);
          }
        }
      }
    };
  }
  return Tensor::wrap(n);
}

Tensor cosine_similarity(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape())
    throw ShapeError("cosine_similarity: shape mismatch " + shape_to_string(a.shape()) +
                     " vs " + shape_to_string(b.shape()));
  Tensor dot = sum(mul(a, b));
  Tensor na = sqrt(sum(mul(a, a)));
  Tensor nb = sqrt(sum(mul(b, b)));
  Tensor denom = max_scalar(mul(na, nb), kCosineEps);
  return div(dot, denom);
}

Tensor log_sum_exp(const Tensor& a) {
  double m = max_value(a);
  return add_scalar(log(sum(exp(add_scalar(a, -m)))), m);
}

Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias, int in_channels,
              int out_channels, int ksize, int stride, int pad) {
  if (input.ndim() != 3 || input.dim(0) != in_channels)
    throw ShapeError("conv2d: input shape " + shape_to_string(input.shape()) +
                     " does not carry " + std::to_string(in_channels) + " channels");
  int H = input.dim(1), W = input.dim(2);
  int patch = in_channels * ksize * ksize;
  if (kernel.ndim() != 2 || kernel.dim(0) != out_channels || kernel.dim(1) != patch)
    throw ShapeError("conv2d: kernel shape " + shape_to_string(kernel.shape()) +
                     " does not match (" + std::to_string(out_channels) + "x" +
                     std::to_string(patch) + ")");
  if (bias.ndim() != 1 || bias.dim(0) != out_channels)
    throw ShapeError("conv2d: bias shape " + shape_to_string(bias.shape()));
  int OH = (H + 2 * pad - ksize) / stride + 1;
  int OW = (W + 2 * pad - ksize) / stride + 1;
  if (OH <= 0 || OW <= 0) throw ShapeError("conv2d: output extent would be empty");
  int cols = OH * OW;

  std::vector<double> patches;
  im2col(input.data(), in_channels, H, W, ksize, stride, pad, OH, OW, patches);

  const auto& kd = kernel.data();
  const auto& bd = bias.data();
  std::vector<double> out(static_cast<size_t>(out_channels) * cols);
  for (int o = 0; o < out_channels; ++o) {
    double* orow = out.data() + static_cast<size_t>(o) * cols;
    std::fill(orow, orow + cols, bd[o]);
    const double* krow = kd.data() + static_cast<size_t>(o) * patch;
    for (int p = 0; p < patch; ++p) {
      double kv = krow[p];
      if (kv == 0.0) continue;
      const double* prow = patches.data() + static_cast<size_t>(p) * cols;
      for (int q = 0; q < cols; ++q) orow[q] += kv * prow[q];
    }
  }

  auto pi = input.node();
  auto pk = kernel.node();
  auto pb = bias.node();
  auto n = std::make_shared<Node>();
  n->shape = {out_channels, OH, OW};
  n->data = std::move(out);
  bool rg = NoGradGuard::recording() &&
            (pi->requires_grad || pk->requires_grad || pb->requires_grad);
  if (rg) {
    n->requires_grad = true;
    n->parents = {pi, pk, pb};
    int C = in_channels, OC = out_channels, k = ksize;
    n->backprop = [pi, pk, pb, C, OC, k, stride, pad, H, W, OH, OW, patch, cols](Node& nd) {
      std::vector<double> patches;
      if (pi->requires_grad || pk->requires_grad)
        im2col(pi->data, C, H, W, k, stride, pad, OH, OW, patches);
      if (pb->requires_grad) {
        pb->ensure_grad();
        for (int o = 0; o < OC; ++o) {
          double acc = 0.0;
          const double* grow = nd.grad.data() + static_cast<size_t>(o) * cols;
          for (int q = 0; q < cols; ++q) acc += grow[q];
          pb->grad[o] += acc;
        }
      }
      if (pk->requires_grad) {
        pk->ensure_grad();
        // dK[o,p] += sum_q dY[o,q] * P[p,q]
        for (int o = 0; o < OC; ++o) {
          const double* grow = nd.grad.data() + static_cast<size_t>(o) * cols;
          double* krow = pk->grad.data() + static_cast<size_t>(o) * patch;
          for (int p = 0; p < patch; ++p) {
            const double* prow = patches.data() + static_cast<size_t>(p) * cols;
            double acc = 0.0;
            for (int q = 0; q < cols; ++q) acc += grow[q] * prow[q];
            krow[p] += acc;
          }
        }
      }
      if (pi->requires_grad) {
        pi->ensure_grad();
        // dP = K^T dY, then scatter back through the patch layout
        std::vector<double> dpatches(static_cast<size_t>(patch) * cols, 0.0);
        const auto& kd = pk->data;
        for (int o = 0; o < OC; ++o) {
          const double* grow = nd.grad.data() + static_cast<size_t>(o) * cols;
          const double* krow = kd.data() + static_cast<size_t>(o) * patch;
          for (int p = 0; p < patch; ++p) {
            double kv = krow[p];
            if (kv == 0.0) continue;
            double* drow = dpatches.data() + static_cast<size_t>(p) * cols;
            for (int q = 0; q < cols; ++q) drow[q] += kv * grow[q];
          }
        }
        col2im_acc(dpatches, C, H, W, k, stride, pad, OH, OW, pi->grad);
      }
    };
  }
  return Tensor::wrap(n);
}

Tensor upsample_nearest2(const Tensor& a) {
  if (a.ndim() != 3) throw ShapeError("upsample_nearest2 requires a (C,H,W) tensor");
  int C = a.dim(0), H = a.dim(1), W = a.dim(2);
  int OH = 2 * H, OW = 2 * W;
  const auto& ad = a.data();
  std::vector<double> out(static_cast<size_t>(C) * OH * OW);
  for (int c = 0; c < C; ++c)
    for (int i = 0; i < OH; ++i) {
      const double* irow = ad.data() + (static_cast<size_t>(c) * H + i / 2) * W;
      double* orow = out.data() + (static_cast<size_t>(c) * OH + i) * OW;
      for (int j = 0; j < OW; ++j) orow[j] = irow[j / 2];
    }
  auto pa = a.node();
  auto n = std::make_shared<Node>();
  n->shape = {C, OH, OW};
  n->data = std::move(out);
  if (NoGradGuard::recording() && pa->requires_grad) {
    n->requires_grad = true;
    n->parents = {pa};
    n->backprop = [pa, C, H, W, OH, OW](Node& nd) {
      pa->ensure_grad();
      for (int c = 0; c < C; ++c)
        for (int i = 0; i < OH; ++i) {
          double* grow = pa->grad.data() + (static_cast<size_t>(c) * H + i / 2) * W;
          const double* orow = nd.grad.data() + (static_cast<size_t>(c) * OH + i) * OW;
          for (int j = 0; j < OW; ++j) grow[j / 2] += orow[j];
        }
    };
  }
  return Tensor::wrap(n);
}

Tensor avg_pool2d(const Tensor& a, int factor) {
  if (a.ndim() != 3) throw ShapeError("avg_pool2d requires a (C,H,W) tensor");
  int C = a.dim(0), H = a.dim(1), W = a.dim(2);
  if (factor < 1 || H % factor != 0 || W % factor != 0)
    throw ShapeError("avg_pool2d: factor " + std::to_string(factor) +
                     " does not divide " + shape_to_string(a.shape()));
  int OH = H / factor, OW = W / factor;
  double inv = 1.0 / (factor * factor);
  const auto& ad = a.data();
  std::vector<double> out(static_cast<size_t>(C) * OH * OW, 0.0);
  for (int c = 0; c < C; ++c)
    for (int i = 0; i < H; ++i) {
      const double* irow = ad.data() + (static_cast<size_t>(c) * H + i) * W;
      double* orow = out.data() + (static_cast<size_t>(c) * OH + i / factor) * OW;
      for (int j = 0; j < W; ++j) orow[j / factor] += irow[j] * inv;
    }
  auto pa = a.node();
  auto n = std::make_shared<detail::Node>();
  n->shape = {C, OH, OW};
  n->data = std::move(out);
  if (NoGradGuard::recording() && pa->requires_grad) {
    n->requires_grad = true;
    n->parents = {pa};
    n->backprop = [pa, C, H, W, OH, OW, inv, factor](Node& nd) {
      pa->ensure_grad();
      (void)factor;
      for (int c = 0; c < C; ++c)
        for (int i = 0; i < H; ++i) {
          double* grow = pa->grad.data() + (static_cast<size_t>(c) * H + i) * W;
          const double* orow =
              nd.grad.data() + (static_cast<size_t>(c) * OH + i / factor) * OW;
          for (int j = 0; j < W; ++j) grow[j] += orow[j / factor] * inv;
        }
    };
  }
  return Tensor::wrap(n);
}

Tensor global_avg_pool(const Tensor& a) {
  if (a.ndim() != 3) throw ShapeError("global_avg_pool requires a (C,H,W) tensor");
  int C = a.dim(0), H = a.dim(1), W = a.dim(2);
  int hw = H * W;
  double inv = 1.0 / hw;
  const auto& ad = a.data();
  std::vector<double> out(C, 0.0);
  for (int c = 0; c < C; ++c) {
    const double* base = ad.data() + static_cast<size_t>(c) * hw;
    double acc = 0.0;
    for (int q = 0; q < hw; ++q) acc += base[q];
    out[c] = acc * inv;
  }
  auto pa = a.node();
  auto n = std::make_shared<Node>();
  n->shape = {C};
  n->data = std::move(out);
  if (NoGradGuard::recording() && pa->requires_grad) {
    n->requires_grad = true;
    n->parents = {pa};
    n->backprop = [pa, C, hw, inv](Node& nd) {
      pa->ensure_grad();
      for (int c = 0; c < C; ++c) {
        double g = nd.grad[c] * inv;
        double* base = pa->grad.data() + static_cast<size_t>(c) * hw;
        for (int q = 0; q < hw; ++q) base[q] += g;
      }
    };
  }
  return Tensor::wrap(n);
}

std::vector<double> key_mask_bias(int rows, const std::vector<bool>& key_valid) {
  int n = static_cast<int>(key_valid.size());
  std::vector<double> bias(static_cast<size_t>(rows) * n, 0.0);
  for (int j = 0; j < n; ++j)
    if (!key_valid[j])
      for (int i = 0; i < rows; ++i) bias[static_cast<size_t>(i) * n + j] = kMaskBias;
  return bias;
}

std::vector<double> causal_bias(int n) {
  std::vector<double> bias(static_cast<size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) bias[static_cast<size_t>(i) * n + j] = kMaskBias;
  return bias;
}

}  // namespace laviter
