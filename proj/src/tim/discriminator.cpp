#include "laviter/tim/discriminator.hpp"

namespace laviter {

Discriminator::Discriminator(const DiscriminatorConfig& config, Rng& rng) : config_(config) {
  int size = config.image_size;
  int channels = 3;
  int width = config.base_channels;
  if (size <= config.min_size || (size & (size - 1)) != 0)
    throw ConfigError("discriminator: image size must be a power of two above min_size");
  while (size > config.min_size) {
    int fan_in = channels * 9;
    kernels_.push_back(Tensor::xavier({width, fan_in}, rng, fan_in, width, true));
    biases_.push_back(Tensor::zeros({width}, true));
    in_c_.push_back(channels);
    out_c_.push_back(width);
    channels = width;
    width *= 2;
    size /= 2;
  }
  final_c_ = channels;
  final_size_ = size;
  int flat = final_c_ * final_size_ * final_size_;
  uncond_w_ = Tensor::xavier({1, flat}, rng, flat, 1, true);
  uncond_b_ = Tensor::zeros({1}, true);
  int join_in = final_c_ + config.model_dim;
  join_kernel_ = Tensor::xavier({final_c_, join_in}, rng, join_in, final_c_, true);
  join_bias_ = Tensor::zeros({final_c_}, true);
  cond_w_ = Tensor::xavier({1, flat}, rng, flat, 1, true);
  cond_b_ = Tensor::zeros({1}, true);
}

DiscriminatorOutput Discriminator::score(const Tensor& image, const Tensor& sentence) const {
  if (image.ndim() != 3 || image.dim(0) != 3 || image.dim(1) != config_.image_size ||
      image.dim(2) != config_.image_size)
    throw ShapeError("discriminator expects (3x" + std::to_string(config_.image_size) + "x" +
                     std::to_string(config_.image_size) + "), got " +
                     shape_to_string(image.shape()));
  if (sentence.size() != config_.model_dim)
    throw ShapeError("discriminator: sentence feature size mismatch");

  Tensor x = image;
  for (size_t i = 0; i < kernels_.size(); ++i)
    x = leaky_relu(conv2d(x, kernels_[i], biases_[i], in_c_[i], out_c_[i], 3, 2, 1), 0.2);

  int cells = final_size_ * final_size_;
  int flat = final_c_ * cells;
  DiscriminatorOutput out;
  Tensor flat_col = reshape(x, {flat, 1});
  out.uncond = sigmoid(reshape(add_colvec(matmul(uncond_w_, flat_col), uncond_b_), {}));

  Tensor feat = reshape(x, {final_c_, cells});
  Tensor ones = Tensor::full({1, cells}, 1.0);
  Tensor broadcast = matmul(reshape(sentence, {config_.model_dim, 1}), ones);
  std::vector<Tensor> parts = {feat, broadcast};
  Tensor joined = concat_rows(parts);
  Tensor mixed = leaky_relu(add_colvec(matmul(join_kernel_, joined), join_bias_), 0.2);
  Tensor mixed_col = reshape(mixed, {flat, 1});
  out.cond = sigmoid(reshape(add_colvec(matmul(cond_w_, mixed_col), cond_b_), {}));
  return out;
}

void Discriminator::collect(const std::string& prefix, ParamList& out) const {
  for (size_t i = 0; i < kernels_.size(); ++i) {
    std::string base = prefix + ".down" + std::to_string(i);
    out.push_back({base + ".kernel", kernels_[i]});
    out.push_back({base + ".bias", biases_[i]});
  }
  out.push_back({prefix + ".uncond.w", uncond_w_});
  out.push_back({prefix + ".uncond.b", uncond_b_});
  out.push_back({prefix + ".join.kernel", join_kernel_});
  out.push_back({prefix + ".join.bias", join_bias_});
  out.push_back({prefix + ".cond.w", cond_w_});
  out.push_back({prefix + ".cond.b", cond_b_});
}

}  // namespace laviter
