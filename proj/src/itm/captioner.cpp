#include "laviter/itm/captioner.hpp"

#include <cmath>

namespace laviter {

Captioner::Captioner(const CaptionerConfig& config, Rng& rng) : config_(config) {
  if (config.model_dim != config.heads * config.head_dim)
    throw ConfigError("captioner: model_dim must equal heads * head_dim");
  if (config.vocab_size <= Vocabulary::kReserved)
    throw ConfigError("captioner: vocab_size must exceed the reserved ids");
  int D = config.model_dim;
  embed_ = Tensor::xavier({D, config.vocab_size}, rng, config.vocab_size, D, true);
  for (int l = 0; l < config.encoder_layers; ++l)
    enc_layers_.emplace_back(D, config.heads, config.head_dim, config.ffn_hidden, rng);
  for (int l = 0; l < config.decoder_layers; ++l) {
    DecoderLayer layer;
    layer.self_attn = MultiHeadAttention(D, config.heads, config.head_dim, rng);
    layer.cross_attn = MultiHeadAttention(D, config.heads, config.head_dim, rng);
    layer.ffn = FeedForward(D, config.ffn_hidden, rng);
    layer.ln1 = LayerNormParams(D);
    layer.ln2 = LayerNormParams(D);
    layer.ln3 = LayerNormParams(D);
    dec_layers_.push_back(std::move(layer));
  }
  head_w_ = Tensor::xavier({config.vocab_size, D}, rng, D, config.vocab_size, true);
  head_b_ = Tensor::zeros({config.vocab_size}, true);
}

Tensor Captioner::encode_regions(const Tensor& regions) const {
  if (regions.ndim() != 2 || regions.dim(0) != config_.model_dim)
    throw ShapeError("captioner: region features must have " +
                     std::to_string(config_.model_dim) + " rows, got " +
                     shape_to_string(regions.shape()));
  Tensor pe = sinusoidal_positions(config_.model_dim, regions.dim(1));
  Tensor x = regions;
  for (const auto& layer : enc_layers_) x = layer.forward(x, Tensor(), pe);
  return x;
}

Tensor Captioner::prefix_logits(const Tensor& encoded_regions,
                                const std::vector<int>& prefix) const {
  int p = static_cast<int>(prefix.size());
  int D = config_.model_dim;
  Tensor x = mul_scalar(gather_cols(embed_, prefix), std::sqrt(static_cast<double>(D)));
  Tensor text_pe = sinusoidal_positions(D, p);
  Tensor causal = Tensor::from_data({p, p}, causal_bias(p));
  Tensor region_pe = sinusoidal_positions(D, encoded_regions.dim(1));
  Tensor memory = add(encoded_regions, region_pe);
  for (const auto& layer : dec_layers_) {
    Tensor self_in = add(x, text_pe);
    Tensor a = layer.ln1.apply(add(x, layer.self_attn.forward(self_in, self_in, causal)));
    Tensor c = layer.ln2.apply(add(a, layer.cross_attn.forward(a, memory, Tensor())));
    x = layer.ln3.apply(add(c, layer.ffn.forward(c)));
  }
  return add_colvec(matmul(head_w_, x), head_b_);
}

Tensor Captioner::decode_step(const Tensor& encoded_regions,
                              const std::vector<int>& prefix) const {
  if (prefix.empty()) throw ContractError("decode_step: empty prefix");
  if (prefix.front() != Vocabulary::kStart)
    throw ContractError("decode_step: prefix must begin with the start token");
  Tensor logits = prefix_logits(encoded_regions, prefix);
  Tensor last = select_col(logits, static_cast<int>(prefix.size()) - 1);
  return softmax(last, 1);
}

Tensor Captioner::caption_nll(const Tensor& regions, const std::vector<int>& targets) const {
  int real = 0;
  while (real < static_cast<int>(targets.size()) && targets[real] != Vocabulary::kPad) ++real;
  if (real == 0) return Tensor::scalar(0.0);

  std::vector<int> input(real);
  input[0] = Vocabulary::kStart;
  for (int p = 1; p < real; ++p) input[p] = targets[p - 1];

  Tensor encoded = encode_regions(regions);
  Tensor logits = prefix_logits(encoded, input);
  std::vector<Tensor> terms;
  terms.reserve(real);
  for (int p = 0; p < real; ++p) {
    Tensor col = select_col(logits, p);
    Tensor lse = log_sum_exp(col);
    Tensor tgt = select_item(logits, targets[p], p);
    terms.push_back(sub(lse, tgt));
  }
  return sum(pack_scalars({real}, terms));
}

std::vector<int> Captioner::generate(const Tensor& regions) const {
  NoGradGuard guard;
  Tensor encoded = encode_regions(regions);
  std::vector<int> prefix = {Vocabulary::kStart};
  std::vector<int> out;
  for (int step = 0; step < config_.max_len; ++step) {
    Tensor dist = decode_step(encoded, prefix);
    const auto& d = dist.data();
    int best = 0;
    for (int v = 1; v < config_.vocab_size; ++v)
      if (d[v] > d[best]) best = v;
    if (best == Vocabulary::kEnd) break;
    out.push_back(best);
    prefix.push_back(best);
  }
  return out;
}

void Captioner::collect(const std::string& prefix, ParamList& out) const {
  out.push_back({prefix + ".embed", embed_});
  for (size_t l = 0; l < enc_layers_.size(); ++l)
    enc_layers_[l].collect(prefix + ".enc" + std::to_string(l), out);
  for (size_t l = 0; l < dec_layers_.size(); ++l) {
    std::string base = prefix + ".dec" + std::to_string(l);
    dec_layers_[l].self_attn.collect(base + ".self", out);
    dec_layers_[l].cross_attn.collect(base + ".cross", out);
    dec_layers_[l].ffn.collect(base + ".ffn", out);
    dec_layers_[l].ln1.collect(base + ".ln1", out);
    dec_layers_[l].ln2.collect(base + ".ln2", out);
    dec_layers_[l].ln3.collect(base + ".ln3", out);
  }
  out.push_back({prefix + ".head.w", head_w_});
  out.push_back({prefix + ".head.b", head_b_});
}

}  // namespace laviter
