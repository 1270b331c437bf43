#include "laviter/vta/matching.hpp"

namespace laviter {

WordRegionAttention word_region_attention(const Tensor& words, const Tensor& regions,
                                          const std::vector<bool>& real,
                                          double attention_sharpness) {
  if (words.ndim() != 2 || regions.ndim() != 2 || words.dim(0) != regions.dim(0))
    throw ShapeError("word_region_attention: feature widths differ, " +
                     shape_to_string(words.shape()) + " vs " +
                     shape_to_string(regions.shape()));
  int n = words.dim(1);
  if (static_cast<int>(real.size()) != n)
    throw ContractError("word_region_attention: mask length does not match word count");

  WordRegionAttention out;
  out.scores = matmul(transpose(words), regions);  // (N x M)
  int m = regions.dim(1);
  std::vector<double> row_mask(static_cast<size_t>(n) * m, 0.0);
  for (int i = 0; i < n; ++i)
    if (!real[i])
      for (int j = 0; j < m; ++j) row_mask[static_cast<size_t>(i) * m + j] = kMaskBias;
  Tensor masked = add(out.scores, Tensor::from_data({n, m}, std::move(row_mask)));
  Tensor over_words = softmax(masked, 0);
  out.weights = softmax(mul_scalar(over_words, attention_sharpness), 1);
  out.context = matmul(regions, transpose(out.weights));  // (D x N)
  return out;
}

Tensor word_match_score(const Tensor& words, const Tensor& regions,
                        const std::vector<bool>& real, const MatchGammas& g) {
  WordRegionAttention att =
      word_region_attention(words, regions, real, g.attention_sharpness);
  int n = words.dim(1);
  std::vector<Tensor> scaled;
  for (int i = 0; i < n; ++i) {
    if (!real[i]) continue;
    Tensor rel = cosine_similarity(select_col(att.context, i), select_col(words, i));
    scaled.push_back(mul_scalar(rel, g.score_magnification));
  }
  if (scaled.empty()) throw ContractError("word_match_score: no real words");
  Tensor packed = pack_scalars({static_cast<int>(scaled.size())}, scaled);
  return mul_scalar(log_sum_exp(packed), 1.0 / g.score_magnification);
}

Tensor sentence_match_score(const Tensor& global_vec, const Tensor& sentence) {
  return cosine_similarity(global_vec, sentence);
}

Tensor batch_posterior_loss(const Tensor& scores, double posterior_sharpness, int axis) {
  if (scores.ndim() != 2 || scores.dim(0) != scores.dim(1))
    throw ShapeError("batch_posterior_loss needs a square score matrix, got " +
                     shape_to_string(scores.shape()));
  if (axis != 0 && axis != 1) throw ContractError("batch_posterior_loss: axis must be 0 or 1");
  int b = scores.dim(0);
  Tensor scaled = mul_scalar(scores, posterior_sharpness);
  std::vector<Tensor> losses;
  losses.reserve(b);
  for (int i = 0; i < b; ++i) {
    Tensor line = axis == 1 ? reshape(slice_rows(scaled, i, i + 1), {b})
                            : select_col(scaled, i);
    Tensor diag = select_item(scaled, i, i);
    losses.push_back(sub(log_sum_exp(line), diag));
  }
  Tensor packed = pack_scalars({b}, losses);
  return mean(packed);
}

MatchingLoss total_matching_loss(const MatchingBatch& batch, const MatchGammas& g) {
  size_t b = batch.regions.size();
  if (b == 0 || batch.global_vecs.size() != b || batch.words.size() != b ||
      batch.sentences.size() != b || batch.real.size() != b)
    throw ContractError("total_matching_loss: batch sides do not line up");
  int bi = static_cast<int>(b);
  std::vector<Tensor> word_cells, sent_cells;
  word_cells.reserve(b * b);
  sent_cells.reserve(b * b);
  for (int i = 0; i < bi; ++i) {
    for (int j = 0; j < bi; ++j) {
      word_cells.push_back(
          word_match_score(batch.words[j], batch.regions[i], batch.real[j], g));
      sent_cells.push_back(
          sentence_match_score(batch.global_vecs[i], batch.sentences[j]));
    }
  }
  MatchingLoss out;
  out.word_scores = pack_scalars({bi, bi}, word_cells);
  out.sent_scores = pack_scalars({bi, bi}, sent_cells);
  out.word_image_to_text = batch_posterior_loss(out.word_scores, g.posterior_sharpness, 1);
  out.word_text_to_image = batch_posterior_loss(out.word_scores, g.posterior_sharpness, 0);
  out.sent_image_to_text = batch_posterior_loss(out.sent_scores, g.posterior_sharpness, 1);
  out.sent_text_to_image = batch_posterior_loss(out.sent_scores, g.posterior_sharpness, 0);
  out.total = add(add(out.word_image_to_text, out.word_text_to_image),
                  add(out.sent_image_to_text, out.sent_text_to_image));
  return out;
}

}  // namespace laviter
