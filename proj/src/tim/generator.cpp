#include "laviter/tim/generator.hpp"

namespace laviter {

Tensor sample_noise(int dim, Rng& rng) {
  std::vector<double> z(dim);
  for (auto& v : z) v = rng.uniform(-1.0, 1.0);
  return Tensor::from_data({dim}, std::move(z));
}

Generator::Generator(const GeneratorConfig& config, Rng& rng) : config_(config) {
  if (config.stage_sizes.empty()) throw ConfigError("generator needs at least one stage");
  int stem_in = config.model_dim + config.noise_dim;
  int stem_out = config.base_channels * config.base_size * config.base_size;
  stem_w_ = Tensor::xavier({stem_out, stem_in}, rng, stem_in, stem_out, true);
  stem_b_ = Tensor::zeros({stem_out}, true);

  int size = config.base_size;
  int channels = config.base_channels;
  for (int stage_size : config.stage_sizes) {
    if (stage_size <= size || (stage_size & (stage_size - 1)) != 0)
      throw ConfigError("generator stage sizes must be increasing powers of two");
    while (size < stage_size) {
      int out_c = std::max(channels / 2, 8);
      int fan_in = channels * 9;
      up_kernels_.push_back(Tensor::xavier({out_c, fan_in}, rng, fan_in, out_c, true));
      up_biases_.push_back(Tensor::zeros({out_c}, true));
      up_in_c_.push_back(channels);
      up_out_c_.push_back(out_c);
      channels = out_c;
      size *= 2;
    }
    stage_after_.push_back(static_cast<int>(up_kernels_.size()));
    rgb_kernels_.push_back(Tensor::xavier({3, channels}, rng, channels, 3, true));
    rgb_biases_.push_back(Tensor::zeros({3}, true));
    rgb_in_c_.push_back(channels);
  }
}

std::vector<Tensor> Generator::generate(const Tensor& words, const Tensor& sentence,
                                        const Tensor& noise) const {
  (void)words;
  if (sentence.size() != config_.model_dim)
    throw ShapeError("generator: sentence feature has size " +
                     std::to_string(sentence.size()) + ", expected " +
                     std::to_string(config_.model_dim));
  if (noise.size() != config_.noise_dim)
    throw ShapeError("generator: noise has size " + std::to_string(noise.size()) +
                     ", expected " + std::to_string(config_.noise_dim));
  std::vector<Tensor> cond = {reshape(sentence, {config_.model_dim, 1}),
                              reshape(noise, {config_.noise_dim, 1})};
  Tensor stem_in = concat_rows(cond);
  Tensor h = relu(add_colvec(matmul(stem_w_, stem_in), stem_b_));
  Tensor x = reshape(h, {config_.base_channels, config_.base_size, config_.base_size});

  std::vector<Tensor> outputs;
  int up = 0;
  for (size_t stage = 0; stage < config_.stage_sizes.size(); ++stage) {
    while (up < stage_after_[stage]) {
      x = upsample_nearest2(x);
      x = relu(conv2d(x, up_kernels_[up], up_biases_[up], up_in_c_[up], up_out_c_[up], 3, 1, 1));
      ++up;
    }
    int side = x.dim(1);
    Tensor flat = reshape(x, {rgb_in_c_[stage], side * side});
    Tensor rgb = add_colvec(matmul(rgb_kernels_[stage], flat), rgb_biases_[stage]);
    outputs.push_back(laviter::tanh(reshape(rgb, {3, side, side})));
  }
  return outputs;
}

void Generator::collect(const std::string& prefix, ParamList& out) const {
  out.push_back({prefix + ".stem.w", stem_w_});
  out.push_back({prefix + ".stem.b", stem_b_});
  for (size_t i = 0; i < up_kernels_.size(); ++i) {
    std::string base = prefix + ".up" + std::to_string(i);
    out.push_back({base + ".kernel", up_kernels_[i]});
    out.push_back({base + ".bias", up_biases_[i]});
  }
  for (size_t i = 0; i < rgb_kernels_.size(); ++i) {
    std::string base = prefix + ".rgb" + std::to_string(i);
    out.push_back({base + ".kernel", rgb_kernels_[i]});
    out.push_back({base + ".bias", rgb_biases_[i]});
  }
}

}  // namespace laviter
