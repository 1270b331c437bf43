#include "laviter/nn/transformer.hpp"

#include <cmath>

namespace laviter {

Tensor sinusoidal_positions(int dim, int count) {
  std::vector<double> data(static_cast<size_t>(dim) * count);
  for (int i = 0; i < dim; ++i) {
    int pair = i / 2;
    double rate = std::pow(10000.0, -2.0 * pair / dim);
    for (int p = 0; p < count; ++p) {
      double angle = p * rate;
      data[static_cast<size_t>(i) * count + p] = i % 2 == 0 ? std::sin(angle) : std::cos(angle);
    }
  }
  return Tensor::from_data({dim, count}, std::move(data));
}

LayerNormParams::LayerNormParams(int dim)
    : gain(Tensor::full({dim}, 1.0, true)), bias(Tensor::zeros({dim}, true)) {}

Tensor LayerNormParams::apply(const Tensor& x) const {
  return layer_norm(x, gain, bias, 1e-5, 0);
}

void LayerNormParams::collect(const std::string& prefix, ParamList& out) const {
  out.push_back({prefix + ".gain", gain});
  out.push_back({prefix + ".bias", bias});
}

MultiHeadAttention::MultiHeadAttention(int model_dim, int heads, int head_dim, Rng& rng)
    : model_dim_(model_dim), heads_(heads), head_dim_(head_dim) {
  int packed = heads * head_dim;
  wq_ = Tensor::xavier({packed, model_dim}, rng, model_dim, packed, true);
  wk_ = Tensor::xavier({packed, model_dim}, rng, model_dim, packed, true);
  wv_ = Tensor::xavier({packed, model_dim}, rng, model_dim, packed, true);
  bq_ = Tensor::zeros({packed}, true);
  bk_ = Tensor::zeros({packed}, true);
  bv_ = Tensor::zeros({packed}, true);
  wo_ = Tensor::xavier({model_dim, packed}, rng, packed, model_dim, true);
  bo_ = Tensor::zeros({model_dim}, true);
}

Tensor MultiHeadAttention::forward(const Tensor& query, const Tensor& memory,
                                   const Tensor& score_bias,
                                   std::vector<Tensor>* head_weights) const {
  if (query.dim(0) != model_dim_ || memory.dim(0) != model_dim_)
    throw ShapeError("attention inputs must have " + std::to_string(model_dim_) + " rows");
  Tensor q_all = add_colvec(matmul(wq_, query), bq_);
  Tensor k_all = add_colvec(matmul(wk_, memory), bk_);
  Tensor v_all = add_colvec(matmul(wv_, memory), bv_);
  double scale = 1.0 / std::sqrt(static_cast<double>(head_dim_));
  std::vector<Tensor> outputs;
  outputs.reserve(heads_);
  for (int h = 0; h < heads_; ++h) {
    int r0 = h * head_dim_, r1 = r0 + head_dim_;
    Tensor q = slice_rows(q_all, r0, r1);
    Tensor k = slice_rows(k_all, r0, r1);
    Tensor v = slice_rows(v_all, r0, r1);
    Tensor scores = mul_scalar(matmul(transpose(q), k), scale);
    if (score_bias.defined()) scores = add(scores, score_bias);
    Tensor weights = softmax(scores, 1);
    if (head_weights) head_weights->push_back(weights);
    outputs.push_back(matmul(v, transpose(weights)));
  }
  Tensor packed = concat_rows(outputs);
  return add_colvec(matmul(wo_, packed), bo_);
}

void MultiHeadAttention::collect(const std::string& prefix, ParamList& out) const {
  out.push_back({prefix + ".wq", wq_});
  out.push_back({prefix + ".wk", wk_});
  out.push_back({prefix + ".wv", wv_});
  out.push_back({prefix + ".bq", bq_});
  out.push_back({prefix + ".bk", bk_});
  out.push_back({prefix + ".bv", bv_});
  out.push_back({prefix + ".wo", wo_});
  out.push_back({prefix + ".bo", bo_});
}

FeedForward::FeedForward(int model_dim, int hidden_dim, Rng& rng) {
  w1_ = Tensor::xavier({hidden_dim, model_dim}, rng, model_dim, hidden_dim, true);
  b1_ = Tensor::zeros({hidden_dim}, true);
  w2_ = Tensor::xavier({model_dim, hidden_dim}, rng, hidden_dim, model_dim, true);
  b2_ = Tensor::zeros({model_dim}, true);
}

Tensor FeedForward::forward(const Tensor& x) const {
  Tensor h = relu(add_colvec(matmul(w1_, x), b1_));
  return add_colvec(matmul(w2_, h), b2_);
}

void FeedForward::collect(const std::string& prefix, ParamList& out) const {
  out.push_back({prefix + ".w1", w1_});
  out.push_back({prefix + ".b1", b1_});
  out.push_back({prefix + ".w2", w2_});
  out.push_back({prefix + ".b2", b2_});
}

EncoderLayer::EncoderLayer(int model_dim, int heads, int head_dim, int ffn_hidden, Rng& rng)
    : attn_(model_dim, heads, head_dim, rng),
      ffn_(model_dim, ffn_hidden, rng),
      ln1_(model_dim),
      ln2_(model_dim) {}

Tensor EncoderLayer::forward(const Tensor& x, const Tensor& score_bias,
                             const Tensor& positions,
                             std::vector<Tensor>* head_weights) const {
  Tensor a_in = positions.defined() ? add(x, positions) : x;
  Tensor attended =
      ln1_.apply(add(x, attn_.forward(a_in, a_in, score_bias, head_weights)));
  return ln2_.apply(add(attended, ffn_.forward(attended)));
}

void EncoderLayer::collect(const std::string& prefix, ParamList& out) const {
  attn_.collect(prefix + ".attn", out);
  ffn_.collect(prefix + ".ffn", out);
  ln1_.collect(prefix + ".ln1", out);
  ln2_.collect(prefix + ".ln2", out);
}

}  // namespace laviter
