#pragma once

#include <string>
#include <vector>

#include "laviter/data/config.hpp"
#include "laviter/img/image_encoder.hpp"
#include "laviter/itm/captioner.hpp"
#include "laviter/text/text_encoder.hpp"
#include "laviter/tim/discriminator.hpp"
#include "laviter/tim/generator.hpp"
#include "laviter/vta/matching.hpp"

namespace laviter {

// Full set of module configurations plus the matching temperatures.
// All modules share one model width.
struct ModelConfig {
  TextEncoderConfig text;
  ImageEncoderConfig image;
  GeneratorConfig gen;
  int disc_base_channels = 16;
  int disc_min_size = 4;
  CaptionerConfig cap;  // vocab_size filled in when the model is built
  MatchGammas gammas;

  int model_dim() const { return text.model_dim; }

  // Small defaults sized for minutes-scale CPU runs.
  static ModelConfig desk();
  // Full-size configuration, kept for shape parity checks.
  static ModelConfig paper();
  static ModelConfig named_profile(const std::string& name);

  // Reads recognized keys (model_dim, text_layers, heads, ffn_hidden, n_max,
  // image_size, img_channels, region_block, noise_dim, gan_base_channels,
  // gan_stages, disc_base_channels, cap_enc_layers, cap_dec_layers,
  // gamma1..gamma3) and adjusts dependent fields.
  void apply_overrides(const RunConfig& rc);
};

// Every module is always constructed, in a fixed order with per-module
// seed streams, so parameter layout and initial values do not depend on
// which branches a particular run trains.
class LaviterModel {
 public:
  LaviterModel(const ModelConfig& config, int vocab_size, uint64_t seed);

  const ModelConfig& config() const { return config_; }
  int vocab_size() const { return vocab_size_; }
  uint64_t seed() const { return seed_; }

  TextEncoder& text() { return text_; }
  const TextEncoder& text() const { return text_; }
  ImageEncoder& image() { return image_; }
  const ImageEncoder& image() const { return image_; }
  Generator& generator() { return gen_; }
  const Generator& generator() const { return gen_; }
  std::vector<Discriminator>& discriminators() { return discs_; }
  const std::vector<Discriminator>& discriminators() const { return discs_; }
  Captioner& captioner() { return cap_; }
  const Captioner& captioner() const { return cap_; }

  // Parameter views share the underlying tensors; names are prefixed
  // text. / img. / gen. / disc<k>. / cap.
  ParamList params_all() const;
  ParamList params_text() const;
  ParamList params_image() const;
  ParamList params_matching() const;  // text + image
  ParamList params_generator() const;
  ParamList params_discriminators() const;
  ParamList params_captioner() const;

 private:
  ModelConfig config_;
  int vocab_size_ = 0;
  uint64_t seed_ = 0;
  TextEncoder text_;
  ImageEncoder image_;
  Generator gen_;
  std::vector<Discriminator> discs_;
  Captioner cap_;
};

}  // namespace laviter
