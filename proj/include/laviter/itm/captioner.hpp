#pragma once

#include <string>
#include <vector>

#include "laviter/nn/transformer.hpp"
#include "laviter/text/vocabulary.hpp"

namespace laviter {

struct CaptionerConfig {
  int encoder_layers = 2;
  int decoder_layers = 2;
  int heads = 8;
  int head_dim = 8;
  int model_dim = 64;
  int ffn_hidden = 256;
  int max_len = 15;
  int vocab_size = 0;
};

// Region-conditioned caption model: a self-attention encoder refines the
// region features, a causal decoder with cross-attention to the refined
// regions predicts tokens. Positional encodings are re-added at every
// self-attention input and to the cross-attention memory.
class Captioner {
 public:
  Captioner() = default;
  Captioner(const CaptionerConfig& config, Rng& rng);

  // (D x M) -> (D x M)
  Tensor encode_regions(const Tensor& regions) const;

  // Distribution over the vocabulary for the position following `prefix`.
  // The prefix must be nonempty and begin with the start token.
  Tensor decode_step(const Tensor& encoded_regions, const std::vector<int>& prefix) const;

  // Teacher-forced negative log likelihood summed over real target
  // positions; `targets` may carry trailing pads, which are ignored.
  Tensor caption_nll(const Tensor& regions, const std::vector<int>& targets) const;

  // Greedy decoding from the start token until the end token or max_len.
  // The returned sequence contains neither the start nor the final end token.
  std::vector<int> generate(const Tensor& regions) const;

  void collect(const std::string& prefix, ParamList& out) const;
  const CaptionerConfig& config() const { return config_; }

 private:
  struct DecoderLayer {
    MultiHeadAttention self_attn, cross_attn;
    FeedForward ffn;
    LayerNormParams ln1, ln2, ln3;
  };

  // (V x P) logits for every position of the embedded prefix.
  Tensor prefix_logits(const Tensor& encoded_regions, const std::vector<int>& prefix) const;

  CaptionerConfig config_;
  Tensor embed_;  // (D x V)
  std::vector<EncoderLayer> enc_layers_;
  std::vector<DecoderLayer> dec_layers_;
  Tensor head_w_, head_b_;  // (V x D), (V)
};

}  // namespace laviter
