#include "laviter/text/text_encoder.hpp"

#include <cmath>

namespace laviter {

TextEncoder::TextEncoder(const TextEncoderConfig& config, int vocab_size, Rng& rng)
    : config_(config), vocab_size_(vocab_size) {
  if (config.model_dim != config.heads * config.head_dim)
    throw ConfigError("text encoder: model_dim must equal heads * head_dim");
  embed_ = Tensor::xavier({config.model_dim, vocab_size}, rng, vocab_size, config.model_dim,
                          true);
  layers_.reserve(config.layers);
  for (int l = 0; l < config.layers; ++l)
    layers_.emplace_back(config.model_dim, config.heads, config.head_dim, config.ffn_hidden,
                         rng);
}

TextEncoding TextEncoder::encode(const std::vector<int>& ids, int pad_to,
                                 bool want_attention) const {
  std::vector<int> toks = ids;
  if (toks.size() > static_cast<size_t>(config_.n_max)) toks.resize(config_.n_max);
  if (toks.empty()) toks.push_back(Vocabulary::kUnk);
  int n_real = static_cast<int>(toks.size());
  int n = std::max(n_real, pad_to);
  if (n > config_.n_max) n = std::max(n_real, config_.n_max);
  while (static_cast<int>(toks.size()) < n) toks.push_back(Vocabulary::kPad);

  TextEncoding out;
  out.n_real = n_real;
  out.real.assign(n, false);
  for (int i = 0; i < n_real; ++i) out.real[i] = true;

  int D = config_.model_dim;
  Tensor x = mul_scalar(gather_cols(embed_, toks), std::sqrt(static_cast<double>(D)));
  x = add(x, sinusoidal_positions(D, n));
  Tensor bias = Tensor::from_data({n, n}, key_mask_bias(n, out.real));

  for (const auto& layer : layers_) {
    if (want_attention) {
      out.attention.emplace_back();
      x = layer.forward(x, bias, Tensor(), &out.attention.back());
    } else {
      x = layer.forward(x, bias);
    }
  }

  Tensor mask_col = Tensor::zeros({n, 1});
  for (int i = 0; i < n_real; ++i) mask_col.raw()[i] = 1.0;
  Tensor s = mul_scalar(reshape(matmul(x, mask_col), {D}), 1.0 / n_real);
  out.words = x;
  out.sentence = s;
  return out;
}

void TextEncoder::collect(const std::string& prefix, ParamList& out) const {
  out.push_back({prefix + ".embed", embed_});
  for (size_t l = 0; l < layers_.size(); ++l)
    layers_[l].collect(prefix + ".layer" + std::to_string(l), out);
}

}  // namespace laviter
