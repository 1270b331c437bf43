#include "laviter/train/model.hpp"

#include <sstream>

#include "laviter/core/error.hpp"
#include "laviter/core/rng.hpp"

namespace laviter {

namespace {

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  std::stringstream in(text);
  std::string piece;
  while (std::getline(in, piece, ',')) {
    if (piece.empty()) continue;
    out.push_back(std::stoi(piece));
  }
  return out;
}

}  // namespace

ModelConfig ModelConfig::desk() {
  ModelConfig cfg;
  cfg.text = {64, 1, 8, 8, 256, 15};
  cfg.image = {3, {8, 16, 32, 64}, 64, 64, 3};
  cfg.gen = {64, 16, 64, 4, {16, 32}};
  cfg.disc_base_channels = 16;
  cfg.disc_min_size = 4;
  cfg.cap = {2, 2, 8, 8, 64, 256, 15, 0};
  cfg.gammas = MatchGammas{};
  return cfg;
}

ModelConfig ModelConfig::paper() {
  ModelConfig cfg;
  cfg.text = {256, 1, 8, 32, 1024, 15};
  cfg.image = {3, {32, 64, 128, 256}, 256, 272, 4};  // 17x17 tap, M = 289
  cfg.gen = {256, 100, 64, 4, {64, 128, 256}};
  cfg.disc_base_channels = 32;
  cfg.disc_min_size = 4;
  cfg.cap = {6, 6, 8, 32, 256, 1024, 15, 0};
  cfg.gammas = MatchGammas{};
  return cfg;
}

ModelConfig ModelConfig::named_profile(const std::string& name) {
  if (name == "desk") return desk();
  if (name == "paper") return paper();
  throw ConfigError("unknown model profile \"" + name + "\" (expected desk or paper)");
}

void ModelConfig::apply_overrides(const RunConfig& rc) {
  if (rc.has("model_dim")) {
    int d = static_cast<int>(rc.get_int("model_dim"));
    text.model_dim = d;
    image.model_dim = d;
    gen.model_dim = d;
    cap.model_dim = d;
  }
  if (rc.has("heads")) {
    int h = static_cast<int>(rc.get_int("heads"));
    text.heads = h;
    cap.heads = h;
  }
  if (text.model_dim % text.heads != 0)
    throw ConfigError("model_dim " + std::to_string(text.model_dim) +
                      " is not divisible by heads " + std::to_string(text.heads));
  text.head_dim = text.model_dim / text.heads;
  cap.head_dim = cap.model_dim / cap.heads;

  if (rc.has("text_layers")) text.layers = static_cast<int>(rc.get_int("text_layers"));
  if (rc.has("ffn_hidden")) {
    int f = static_cast<int>(rc.get_int("ffn_hidden"));
    text.ffn_hidden = f;
    cap.ffn_hidden = f;
  }
  if (rc.has("n_max")) {
    int n = static_cast<int>(rc.get_int("n_max"));
    text.n_max = n;
    cap.max_len = n;
  }
  if (rc.has("image_size")) image.input_size = static_cast<int>(rc.get_int("image_size"));
  if (rc.has("img_channels")) image.channels = parse_int_list(rc.get_string("img_channels"));
  if (rc.has("region_block")) image.region_block = static_cast<int>(rc.get_int("region_block"));
  if (rc.has("noise_dim")) gen.noise_dim = static_cast<int>(rc.get_int("noise_dim"));
  if (rc.has("gan_base_channels")) gen.base_channels = static_cast<int>(rc.get_int("gan_base_channels"));
  if (rc.has("gan_stages")) gen.stage_sizes = parse_int_list(rc.get_string("gan_stages"));
  if (rc.has("disc_base_channels"))
    disc_base_channels = static_cast<int>(rc.get_int("disc_base_channels"));
  if (rc.has("cap_enc_layers")) cap.encoder_layers = static_cast<int>(rc.get_int("cap_enc_layers"));
  if (rc.has("cap_dec_layers")) cap.decoder_layers = static_cast<int>(rc.get_int("cap_dec_layers"));
  if (rc.has("gamma1")) gammas.attention_sharpness = rc.get_double("gamma1");
  if (rc.has("gamma2")) gammas.score_magnification = rc.get_double("gamma2");
  if (rc.has("gamma3")) gammas.posterior_sharpness = rc.get_double("gamma3");
}

LaviterModel::LaviterModel(const ModelConfig& config, int vocab_size, uint64_t seed)
    : config_(config), vocab_size_(vocab_size), seed_(seed) {
  if (vocab_size <= Vocabulary::kReserved)
    throw ConfigError("model needs a vocabulary with at least one word token");
  Rng root(seed);

  Rng text_rng = root.fork(1);
  text_ = TextEncoder(config_.text, vocab_size, text_rng);

  Rng image_rng = root.fork(2);
  image_ = ImageEncoder(config_.image, image_rng);

  Rng gen_rng = root.fork(3);
  gen_ = Generator(config_.gen, gen_rng);

  discs_.reserve(config_.gen.stage_sizes.size());
  for (size_t i = 0; i < config_.gen.stage_sizes.size(); ++i) {
    DiscriminatorConfig dc;
    dc.image_size = config_.gen.stage_sizes[i];
    dc.model_dim = config_.model_dim();
    dc.base_channels = config_.disc_base_channels;
    dc.min_size = config_.disc_min_size;
    Rng disc_rng = root.fork(4 + static_cast<uint64_t>(i));
    discs_.emplace_back(dc, disc_rng);
  }

  CaptionerConfig cc = config_.cap;
  cc.vocab_size = vocab_size;
  config_.cap.vocab_size = vocab_size;
  Rng cap_rng = root.fork(16);
  cap_ = Captioner(cc, cap_rng);
}

ParamList LaviterModel::params_text() const {
  ParamList out;
  text_.collect("text", out);
  return out;
}

ParamList LaviterModel::params_image() const {
  ParamList out;
  image_.collect("img", out);
  return out;
}

ParamList LaviterModel::params_matching() const {
  ParamList out;
  text_.collect("text", out);
  image_.collect("img", out);
  return out;
}

ParamList LaviterModel::params_generator() const {
  ParamList out;
  gen_.collect("gen", out);
  return out;
}

ParamList LaviterModel::params_discriminators() const {
  ParamList out;
  for (size_t i = 0; i < discs_.size(); ++i)
    discs_[i].collect("disc" + std::to_string(i + 1), out);
  return out;
}

ParamList LaviterModel::params_captioner() const {
  ParamList out;
  cap_.collect("cap", out);
  return out;
}

ParamList LaviterModel::params_all() const {
  ParamList out;
  text_.collect("text", out);
  image_.collect("img", out);
  gen_.collect("gen", out);
  for (size_t i = 0; i < discs_.size(); ++i)
    discs_[i].collect("disc" + std::to_string(i + 1), out);
  cap_.collect("cap", out);
  return out;
}

}  // namespace laviter
