#pragma once

#include <string>
#include <vector>

#include "laviter/core/nn_ops.hpp"
#include "laviter/core/params.hpp"

namespace laviter {

struct GeneratorConfig {
  int model_dim = 64;  // sentence feature width
  int noise_dim = 16;
  int base_channels = 64;
  int base_size = 4;
  std::vector<int> stage_sizes = {16, 32};  // each a power-of-two multiple of base_size
};

// Noise entries are uniform in [-1, 1].
Tensor sample_noise(int dim, Rng& rng);

// Cascade of upsampling conv stages conditioned on the sentence feature.
// Word features are accepted for interface parity but unused at this scale.
class Generator {
 public:
  Generator() = default;
  Generator(const GeneratorConfig& config, Rng& rng);

  // Returns one tanh-bounded (3 x size x size) image per configured stage.
  std::vector<Tensor> generate(const Tensor& words, const Tensor& sentence,
                               const Tensor& noise) const;

  void collect(const std::string& prefix, ParamList& out) const;
  const GeneratorConfig& config() const { return config_; }
  int num_stages() const { return static_cast<int>(config_.stage_sizes.size()); }

 private:
  GeneratorConfig config_;
  Tensor stem_w_, stem_b_;
  std::vector<Tensor> up_kernels_, up_biases_;  // one conv per doubling
  std::vector<int> up_in_c_, up_out_c_;
  std::vector<Tensor> rgb_kernels_, rgb_biases_;  // 1x1 head per stage
  std::vector<int> rgb_in_c_;
  std::vector<int> stage_after_;  // index into the up chain where each stage taps
};

}  // namespace laviter
