#pragma once

#include <string>
#include <vector>

#include "laviter/core/nn_ops.hpp"
#include "laviter/core/params.hpp"

namespace laviter {

struct DiscriminatorConfig {
  int image_size = 32;
  int model_dim = 64;   // sentence feature width for the conditional branch
  int base_channels = 16;
  int min_size = 4;     // downsample until this spatial extent
};

struct DiscriminatorOutput {
  Tensor uncond;  // scalar probability
  Tensor cond;    // scalar probability
};

// Stride-2 conv stack with leaky relu, then two sigmoid heads: one on the
// raw features, one on the features joined with the spatially broadcast
// sentence vector.
class Discriminator {
 public:
  Discriminator() = default;
  Discriminator(const DiscriminatorConfig& config, Rng& rng);

  DiscriminatorOutput score(const Tensor& image, const Tensor& sentence) const;

  void collect(const std::string& prefix, ParamList& out) const;
  const DiscriminatorConfig& config() const { return config_; }

 private:
  DiscriminatorConfig config_;
  std::vector<Tensor> kernels_, biases_;
  std::vector<int> in_c_, out_c_;
  int final_c_ = 0, final_size_ = 0;
  Tensor uncond_w_, uncond_b_;
  Tensor join_kernel_, join_bias_;  // 1x1 conv over features + broadcast sentence
  Tensor cond_w_, cond_b_;
};

}  // namespace laviter
