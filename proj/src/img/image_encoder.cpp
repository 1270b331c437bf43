#include "laviter/img/image_encoder.hpp"

#include <cmath>

namespace laviter {

ImageEncoder::ImageEncoder(const ImageEncoderConfig& config, Rng& rng) : config_(config) {
  if (config.channels.empty()) throw ConfigError("image encoder needs at least one block");
  if (config.region_block < 1 || config.region_block > static_cast<int>(config.channels.size()))
    throw ConfigError("image encoder: region_block out of range");
  int size = config.input_size;
  int in_c = config.in_channels;
  for (int out_c : config.channels) {
    int fan_in = in_c * 9;
    kernels_.push_back(Tensor::randn({out_c, fan_in}, rng, std::sqrt(2.0 / fan_in), true));
    biases_.push_back(Tensor::zeros({out_c}, true));
    in_c = out_c;
    size = (size + 2 - 3) / 2 + 1;
    if (size < 1) throw ConfigError("image encoder: input too small for block stack");
  }
  int region_c = config.channels[config.region_block - 1];
  region_kernel_ =
      Tensor::xavier({config.model_dim, region_c}, rng, region_c, config.model_dim, true);
  region_bias_ = Tensor::zeros({config.model_dim}, true);
  int last_c = config.channels.back();
  global_w_ = Tensor::xavier({config.model_dim, last_c}, rng, last_c, config.model_dim, true);
  global_b_ = Tensor::zeros({config.model_dim}, true);
}

int ImageEncoder::region_count() const {
  int size = config_.input_size;
  for (int b = 0; b < config_.region_block; ++b) size = (size + 2 - 3) / 2 + 1;
  return size * size;
}

ImageEncoding ImageEncoder::encode(const Tensor& image) const {
  if (image.ndim() != 3 || image.dim(0) != config_.in_channels ||
      image.dim(1) != config_.input_size || image.dim(2) != config_.input_size)
    throw ShapeError("image encoder expects (" + std::to_string(config_.in_channels) + "x" +
                     std::to_string(config_.input_size) + "x" +
                     std::to_string(config_.input_size) + "), got " +
                     shape_to_string(image.shape()));
  Tensor x = image;
  int in_c = config_.in_channels;
  Tensor tapped;
  int map_h = 0, map_w = 0;
  for (size_t b = 0; b < kernels_.size(); ++b) {
    int out_c = config_.channels[b];
    x = relu(conv2d(x, kernels_[b], biases_[b], in_c, out_c, 3, 2, 1));
    in_c = out_c;
    if (static_cast<int>(b) + 1 == config_.region_block) {
      tapped = x;
      map_h = x.dim(1);
      map_w = x.dim(2);
    }
  }
  ImageEncoding out;
  out.map_h = map_h;
  out.map_w = map_w;
  int m = map_h * map_w;
  int region_c = config_.channels[config_.region_block - 1];
  // 1x1 conv as a matmul over the flattened map
  Tensor flat = reshape(tapped, {region_c, m});
  out.regions = add_colvec(matmul(region_kernel_, flat), region_bias_);
  Tensor pooled = reshape(global_avg_pool(x), {config_.channels.back(), 1});
  out.global_vec =
      reshape(add_colvec(matmul(global_w_, pooled), global_b_), {config_.model_dim});
  return out;
}

void ImageEncoder::collect(const std::string& prefix, ParamList& out) const {
  for (size_t b = 0; b < kernels_.size(); ++b) {
    std::string base = prefix + ".block" + std::to_string(b + 1);
    out.push_back({base + ".kernel", kernels_[b]});
    out.push_back({base + ".bias", biases_[b]});
  }
  out.push_back({prefix + ".region.kernel", region_kernel_});
  out.push_back({prefix + ".region.bias", region_bias_});
  out.push_back({prefix + ".global.w", global_w_});
  out.push_back({prefix + ".global.b", global_b_});
}

void ImageEncoder::set_frozen_blocks(int k) {
  if (k < 0 || k > num_blocks())
    throw ConfigError("image encoder: cannot freeze " + std::to_string(k) + " of " +
                      std::to_string(num_blocks()) + " blocks");
  for (int b = 0; b < num_blocks(); ++b) {
    bool trainable = b >= k;
    kernels_[b].set_requires_grad(trainable);
    biases_[b].set_requires_grad(trainable);
  }
}

}  // namespace laviter
