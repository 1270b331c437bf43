#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "laviter/core/rng.hpp"
#include "laviter/data/dataset.hpp"
#include "laviter/train/model.hpp"

namespace laviter {

// Generic retrieval harness. For each query the pool holds its positive
// candidate plus pool_size-1 distinct negatives sampled without
// replacement; candidates are ranked by score descending with ties broken
// by candidate index ascending. Returns the fraction of queries whose
// positive lands in the top top_k.
double r_precision(int n_queries, int n_candidates, const std::function<int(int)>& positive_of,
                   const std::function<double(int, int)>& scorer, int pool_size, int top_k,
                   Rng& rng);

struct RetrievalResult {
  double image_to_text = 0.0;
  double text_to_image = 0.0;
  double average = 0.0;
  int queries = 0;
};

// scores[i][j] holds image i against text j; record i's pair is positive.
RetrievalResult r_precision_matrix(const std::vector<std::vector<double>>& scores, int pool_size,
                                   int top_k, uint64_t seed);

struct ScoreWeights {
  double sentence = 1.0;
  double word = 1.0;
};

// Dense pairwise matching scores (no gradients): weighted sum of the
// sentence-level cosine and the word-level attention score.
std::vector<std::vector<double>> matching_score_matrix(const LaviterModel& model,
                                                       const std::vector<Tensor>& images,
                                                       const std::vector<std::vector<int>>& texts,
                                                       const ScoreWeights& weights);

struct AimcosResult {
  double score = 0.0;
  int used = 0;
  int skipped = 0;  // records with no attributes
};

// Mean over images of the mean cosine between the image's global embedding
// and its attribute phrase embeddings.
AimcosResult aimcos(const std::vector<Tensor>& global_vecs,
                    const std::vector<std::vector<Tensor>>& attribute_sents);

// Encodes a dataset subset and computes the score; permute_seed != 0
// reassigns whole attribute sets across the images first.
AimcosResult aimcos_eval(const LaviterModel& model, const Dataset& data,
                         const std::vector<size_t>& records, const std::vector<Tensor>& images,
                         uint64_t permute_seed = 0);

// cell (i,j) = mean cosine of class-i text embedding against class-j image
// embeddings. Throws on an empty image group.
std::vector<std::vector<double>> similarity_map(
    const std::vector<Tensor>& class_sents,
    const std::vector<std::vector<Tensor>>& class_image_globals);

// Groups records by class label (sorted), encodes each label as a short
// text and every image through the image encoder.
std::vector<std::vector<double>> similarity_map_eval(const LaviterModel& model, const Dataset& data,
                                                     const std::vector<Tensor>& images,
                                                     std::vector<std::string>* class_names_out);

struct BleuResult {
  double score = 0.0;
  int empty_candidates = 0;
};

// Corpus-level BLEU-n: clipped modified precision, geometric mean over
// orders 1..max_n (zero if any order has zero matches), brevity penalty
// from closest reference lengths. No smoothing.
BleuResult corpus_bleu(const std::vector<std::vector<int>>& candidates,
                       const std::vector<std::vector<std::vector<int>>>& references, int max_n);

double sentence_bleu(const std::vector<int>& candidate,
                     const std::vector<std::vector<int>>& references, int max_n);

struct EmbeddingRow {
  std::string id;
  std::string modality;
  std::vector<double> values;
};

// Text format: one header line "laviter-embeddings <version> <dim> <count>",
// then "id,modality,v1,...,vD" per row at full precision.
void write_embeddings(const std::string& path, int dim, const std::vector<EmbeddingRow>& rows);
std::vector<EmbeddingRow> read_embeddings(const std::string& path, int* dim_out = nullptr);

// One "image" row per record plus one "text" row per distinct class label.
std::vector<EmbeddingRow> collect_embeddings(const LaviterModel& model, const Dataset& data,
                                             const std::vector<Tensor>& images);

}  // namespace laviter
