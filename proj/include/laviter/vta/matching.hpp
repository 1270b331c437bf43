#pragma once

#include <vector>

#include "laviter/core/nn_ops.hpp"

namespace laviter {

struct MatchGammas {
  double attention_sharpness = 4.0;   // inner softmax scale on word weights
  double score_magnification = 5.0;   // word relevance aggregation scale
  double posterior_sharpness = 10.0;  // batch posterior temperature
};

struct WordRegionAttention {
  Tensor scores;   // (N x M) raw word-region dot products
  Tensor weights;  // (N x M) final attention, rows sum to 1
  Tensor context;  // (D x N) region mixture per word
};

// Attention of each word over image regions: the raw dot products are
// first normalized over words per region (padded words masked out), scaled,
// then normalized over regions per word. Padded rows end up uniform and
// must be ignored by the caller.
WordRegionAttention word_region_attention(const Tensor& words, const Tensor& regions,
                                          const std::vector<bool>& real,
                                          double attention_sharpness);

// Log-mean-exp style pooling of per-word cosine relevance between each
// real word and its region context.
Tensor word_match_score(const Tensor& words, const Tensor& regions,
                        const std::vector<bool>& real, const MatchGammas& g);

Tensor sentence_match_score(const Tensor& global_vec, const Tensor& sentence);

// scores is (B x B) with entry (i, j) scoring image i against text j.
// axis 1 treats each image as the condition (softmax over texts per row),
// axis 0 each text. Returns the mean negative log posterior of the diagonal.
Tensor batch_posterior_loss(const Tensor& scores, double posterior_sharpness, int axis);

struct MatchingBatch {
  std::vector<Tensor> regions;      // (D x M) per image
  std::vector<Tensor> global_vecs;  // (D) per image
  std::vector<Tensor> words;        // (D x N_b) per text
  std::vector<Tensor> sentences;    // (D) per text
  std::vector<std::vector<bool>> real;
};

struct MatchingLoss {
  Tensor word_image_to_text, word_text_to_image;
  Tensor sent_image_to_text, sent_text_to_image;
  Tensor total;
  Tensor word_scores, sent_scores;  // (B x B) diagnostics
};

MatchingLoss total_matching_loss(const MatchingBatch& batch, const MatchGammas& g);

}  // namespace laviter
