#pragma once

#include <string>
#include <vector>

#include "laviter/core/nn_ops.hpp"
#include "laviter/core/params.hpp"
#include "laviter/core/tensor.hpp"

namespace laviter {

// Sequences are stored feature-major: a batch of N positions with model
// width D is a (D x N) matrix, one column per position.

// (dim x count) sinusoidal table; column p holds the encoding of position p.
Tensor sinusoidal_positions(int dim, int count);

struct LayerNormParams {
  Tensor gain, bias;

  LayerNormParams() = default;
  explicit LayerNormParams(int dim);
  Tensor apply(const Tensor& x) const;
  void collect(const std::string& prefix, ParamList& out) const;
};

// Scaled dot-product attention with h heads packed into single projection
// matrices. Queries come from `query`, keys and values from `memory`, so the
// same block serves self- and cross-attention. `score_bias`, when defined,
// is added to every head's (Nq x Nk) score matrix before the softmax.
class MultiHeadAttention {
 public:
  MultiHeadAttention() = default;
  MultiHeadAttention(int model_dim, int heads, int head_dim, Rng& rng);

  Tensor forward(const Tensor& query, const Tensor& memory, const Tensor& score_bias,
                 std::vector<Tensor>* head_weights = nullptr) const;
  void collect(const std::string& prefix, ParamList& out) const;

  int heads() const { return heads_; }
  int head_dim() const { return head_dim_; }

 private:
  int model_dim_ = 0, heads_ = 0, head_dim_ = 0;
  Tensor wq_, wk_, wv_;  // (h*head_dim x D)
  Tensor bq_, bk_, bv_;  // (h*head_dim)
  Tensor wo_;            // (D x h*head_dim)
  Tensor bo_;            // (D)
};

class FeedForward {
 public:
  FeedForward() = default;
  FeedForward(int model_dim, int hidden_dim, Rng& rng);

  Tensor forward(const Tensor& x) const;
  void collect(const std::string& prefix, ParamList& out) const;

 private:
  Tensor w1_, b1_, w2_, b2_;
};

// Post-norm residual block: LN(x + MH(x)) then LN(. + FFN(.)).
// When `positions` is defined it is added to the attention sublayer input.
class EncoderLayer {
 public:
  EncoderLayer() = default;
  EncoderLayer(int model_dim, int heads, int head_dim, int ffn_hidden, Rng& rng);

  Tensor forward(const Tensor& x, const Tensor& score_bias,
                 const Tensor& positions = Tensor(),
                 std::vector<Tensor>* head_weights = nullptr) const;
  void collect(const std::string& prefix, ParamList& out) const;

  const MultiHeadAttention& attention() const { return attn_; }

 private:
  MultiHeadAttention attn_;
  FeedForward ffn_;
  LayerNormParams ln1_, ln2_;
};

}  // namespace laviter
