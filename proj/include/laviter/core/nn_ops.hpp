#pragma once

#include "laviter/core/tensor.hpp"

namespace laviter {

inline constexpr double kMaskBias = -1e30;
inline constexpr double kCosineEps = 1e-8;

// Softmax along one axis of a 2-D tensor (axis 0 = down each column,
// axis 1 = across each row). Scalars and 1-D tensors are treated as a
// single row. Max-subtracted so additive -1e30 biases produce exact zeros.
Tensor softmax(const Tensor& a, int axis);

// Normalizes along `axis` of a 2-D tensor, then applies elementwise
// gain and bias vectors sized like the normalized extent.
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps, int axis);

// cos(a, b) for 1-D vectors with a floor on the denominator, so
// identical nonzero vectors score exactly 1.
Tensor cosine_similarity(const Tensor& a, const Tensor& b);

// log sum exp over all elements, max-subtracted.
Tensor log_sum_exp(const Tensor& a);

// 2-D convolution over a (C,H,W) input with an (OC, C*kh*kw) kernel
// matrix and an (OC) bias, via im2col. Patches are recomputed in the
// backward pass instead of being stored.
Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias, int in_channels,
              int out_channels, int ksize, int stride, int pad);

// Nearest-neighbour 2x upsample of a (C,H,W) tensor.
Tensor upsample_nearest2(const Tensor& a);

// Mean over non-overlapping factor x factor windows of a (C,H,W) tensor.
Tensor avg_pool2d(const Tensor& a, int factor);

// (C,H,W) -> (C) mean over the spatial extent.
Tensor global_avg_pool(const Tensor& a);

// Additive attention biases. Entries are 0 where attention is allowed
// and kMaskBias where it is not.
// key_mask_bias: (rows, n_keys) from a per-key validity vector.
std::vector<double> key_mask_bias(int rows, const std::vector<bool>& key_valid);
// causal_bias: (n, n), position i may attend to j <= i.
std::vector<double> causal_bias(int n);

}  // namespace laviter
