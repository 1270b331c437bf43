#pragma once

#include <vector>

#include "laviter/nn/transformer.hpp"
#include "laviter/text/vocabulary.hpp"

namespace laviter {

struct TextEncoderConfig {
  int model_dim = 64;
  int layers = 1;
  int heads = 8;
  int head_dim = 8;
  int ffn_hidden = 256;
  int n_max = 15;
};

struct TextEncoding {
  Tensor words;     // (D x n) one column per position, pads included
  Tensor sentence;  // (D)
  std::vector<bool> real;
  int n_real = 0;
  // per layer, per head attention weights, for inspection only
  std::vector<std::vector<Tensor>> attention;
};

// Word and sentence embeddings from token ids. Ids beyond n_max are
// dropped; an empty id list is encoded as a single unknown token. Padded
// positions are masked out of attention and the sentence mean, so the real
// columns are bit-identical whatever the padding length.
class TextEncoder {
 public:
  TextEncoder() = default;
  TextEncoder(const TextEncoderConfig& config, int vocab_size, Rng& rng);

  // pad_to <= 0 keeps the natural length.
  TextEncoding encode(const std::vector<int>& ids, int pad_to = 0,
                      bool want_attention = false) const;

  void collect(const std::string& prefix, ParamList& out) const;

  const TextEncoderConfig& config() const { return config_; }
  int vocab_size() const { return vocab_size_; }

 private:
  TextEncoderConfig config_;
  int vocab_size_ = 0;
  Tensor embed_;  // (D x V)
  std::vector<EncoderLayer> layers_;
};

}  // namespace laviter
