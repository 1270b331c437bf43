#pragma once

#include <string>
#include <vector>

#include "laviter/core/nn_ops.hpp"
#include "laviter/core/params.hpp"

namespace laviter {

struct ImageEncoderConfig {
  int in_channels = 3;
  std::vector<int> channels = {8, 16, 32, 64};
  int model_dim = 64;
  int input_size = 64;
  // Region features are tapped after this block (1-based); the remaining
  // blocks only feed the global vector.
  int region_block = 3;
};

struct ImageEncoding {
  Tensor regions;  // (D x M), one column per spatial cell
  Tensor global_vec;  // (D)
  int map_h = 0, map_w = 0;
};

// Stack of stride-2 3x3 conv blocks with relu. A 1x1 projection lifts the
// tapped feature map to model width for region features; the global vector
// is a linear map of the pooled final block.
class ImageEncoder {
 public:
  ImageEncoder() = default;
  ImageEncoder(const ImageEncoderConfig& config, Rng& rng);

  ImageEncoding encode(const Tensor& image) const;

  void collect(const std::string& prefix, ParamList& out) const;
  // Marks conv blocks 1..k as non-trainable; 0 unfreezes everything.
  void set_frozen_blocks(int k);

  int num_blocks() const { return static_cast<int>(config_.channels.size()); }
  int region_count() const;
  const ImageEncoderConfig& config() const { return config_; }

 private:
  ImageEncoderConfig config_;
  std::vector<Tensor> kernels_, biases_;
  Tensor region_kernel_, region_bias_;  // 1x1 conv to model_dim
  Tensor global_w_, global_b_;          // linear head on pooled features
};

}  // namespace laviter
