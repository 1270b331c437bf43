#include "laviter/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "laviter/core/error.hpp"
#include "laviter/data/image_io.hpp"

namespace laviter {

namespace {

double cosine_value(const Tensor& a, const Tensor& b) {
  const auto& av = a.data();
  const auto& bv = b.data();
  if (av.size() != bv.size()) throw ShapeError("cosine: vector sizes differ");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (size_t i = 0; i < av.size(); ++i) {
    dot += av[i] * bv[i];
    na += av[i] * av[i];
    nb += bv[i] * bv[i];
  }
  return dot / std::max(std::sqrt(na) * std::sqrt(nb), kCosineEps);
}

}  // namespace

double r_precision(int n_queries, int n_candidates, const std::function<int(int)>& positive_of,
                   const std::function<double(int, int)>& scorer, int pool_size, int top_k,
                   Rng& rng) {
  if (pool_size > n_candidates)
    throw ContractError("retrieval pool " + std::to_string(pool_size) + " exceeds the candidate set (" +
                        std::to_string(n_candidates) + ")");
  if (top_k <= 0 || top_k >= pool_size)
    throw ContractError("top_k must be in (0, pool_size)");

  int hits = 0;
  std::vector<int> others(static_cast<size_t>(n_candidates) - 1);
  for (int q = 0; q < n_queries; ++q) {
    int positive = positive_of(q);
    size_t w = 0;
    for (int c = 0; c < n_candidates; ++c)
      if (c != positive) others[w++] = c;

    // Partial Fisher-Yates: the first pool_size-1 entries are a uniform
    // sample without replacement.
    int need = pool_size - 1;
    for (int i = 0; i < need; ++i) {
      int j = i + rng.uniform_int(static_cast<int>(others.size()) - i);
      std::swap(others[static_cast<size_t>(i)], others[static_cast<size_t>(j)]);
    }

    struct Scored {
      double score;
      int index;
    };
    std::vector<Scored> pool;
    pool.reserve(static_cast<size_t>(pool_size));
    pool.push_back({scorer(q, positive), positive});
    for (int i = 0; i < need; ++i) pool.push_back({scorer(q, others[static_cast<size_t>(i)]),
                                                   others[static_cast<size_t>(i)]});
    std::sort(pool.begin(), pool.end(), [](const Scored& a, const Scored& b) {
      if (a.score != b.score) return a.score > b.score;
      return a.index < b.index;
    });
    for (int r = 0; r < top_k; ++r)
      if (pool[static_cast<size_t>(r)].index == positive) {
        ++hits;
        break;
      }
  }
  return static_cast<double>(hits) / static_cast<double>(n_queries);
}

RetrievalResult r_precision_matrix(const std::vector<std::vector<double>>& scores, int pool_size,
                                   int top_k, uint64_t seed) {
  int n = static_cast<int>(scores.size());
  if (n == 0) throw ContractError("r_precision_matrix: empty score matrix");
  for (const auto& row : scores)
    if (static_cast<int>(row.size()) != n)
      throw ContractError("r_precision_matrix: matrix is not square");

  auto identity = [](int q) { return q; };
  RetrievalResult res;
  res.queries = n;
  Rng rng_i2t = Rng(seed).fork(1);
  res.image_to_text = r_precision(
      n, n, identity,
      [&scores](int q, int c) { return scores[static_cast<size_t>(q)][static_cast<size_t>(c)]; },
      pool_size, top_k, rng_i2t);
  Rng rng_t2i = Rng(seed).fork(2);
  res.text_to_image = r_precision(
      n, n, identity,
      [&scores](int q, int c) { return scores[static_cast<size_t>(c)][static_cast<size_t>(q)]; },
      pool_size, top_k, rng_t2i);
  res.average = 0.5 * (res.image_to_text + res.text_to_image);
  return res;
}

std::vector<std::vector<double>> matching_score_matrix(const LaviterModel& model,
                                                       const std::vector<Tensor>& images,
                                                       const std::vector<std::vector<int>>& texts,
                                                       const ScoreWeights& weights) {
  if (images.size() != texts.size())
    throw ContractError("matching_score_matrix: image and text counts differ");
  NoGradGuard guard;
  size_t n = images.size();
  std::vector<ImageEncoding> img_enc;
  std::vector<TextEncoding> txt_enc;
  img_enc.reserve(n);
  txt_enc.reserve(n);
  for (size_t i = 0; i < n; ++i) {
    img_enc.push_back(model.image().encode(images[i]));
    txt_enc.push_back(model.text().encode(texts[i]));
  }
  std::vector<std::vector<double>> scores(n, std::vector<double>(n, 0.0));
  const MatchGammas& g = model.config().gammas;
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = 0; j < n; ++j) {
      double s = 0.0;
      if (weights.sentence != 0.0)
        s += weights.sentence * cosine_value(img_enc[i].global_vec, txt_enc[j].sentence);
      if (weights.word != 0.0)
        s += weights.word *
             word_match_score(txt_enc[j].words, img_enc[i].regions, txt_enc[j].real, g).value();
      scores[i][j] = s;
    }
  }
  return scores;
}

AimcosResult aimcos(const std::vector<Tensor>& global_vecs,
                    const std::vector<std::vector<Tensor>>& attribute_sents) {
  if (global_vecs.size() != attribute_sents.size())
    throw ContractError("aimcos: image and attribute counts differ");
  AimcosResult res;
  double sum = 0.0;
  for (size_t i = 0; i < global_vecs.size(); ++i) {
    if (attribute_sents[i].empty()) {
      ++res.skipped;
      continue;
    }
    double inner = 0.0;
    for (const Tensor& s : attribute_sents[i]) inner += cosine_value(global_vecs[i], s);
    sum += inner / static_cast<double>(attribute_sents[i].size());
    ++res.used;
  }
  if (res.used == 0) throw ContractError("aimcos: every record was skipped");
  res.score = sum / static_cast<double>(res.used);
  return res;
}

AimcosResult aimcos_eval(const LaviterModel& model, const Dataset& data,
                         const std::vector<size_t>& records, const std::vector<Tensor>& images,
                         uint64_t permute_seed) {
  if (records.size() != images.size())
    throw ContractError("aimcos_eval: record and image counts differ");
  NoGradGuard guard;
  std::vector<Tensor> globals;
  globals.reserve(records.size());
  for (const Tensor& img : images) globals.push_back(model.image().encode(img).global_vec);

  std::vector<std::vector<std::string>> attr_sets;
  attr_sets.reserve(records.size());
  for (size_t idx : records) attr_sets.push_back(data.records.at(idx).attributes);
  if (permute_seed != 0) {
    Rng rng(permute_seed);
    rng.shuffle(attr_sets);
  }

  std::vector<std::vector<Tensor>> attr_sents;
  attr_sents.reserve(records.size());
  for (const auto& phrases : attr_sets) {
    std::vector<Tensor> sents;
    for (const std::string& phrase : phrases)
      sents.push_back(model.text().encode(data.vocab.encode(phrase)).sentence);
    attr_sents.push_back(std::move(sents));
  }
  return aimcos(globals, attr_sents);
}

std::vector<std::vector<double>> similarity_map(
    const std::vector<Tensor>& class_sents,
    const std::vector<std::vector<Tensor>>& class_image_globals) {
  size_t c = class_sents.size();
  if (c == 0 || class_image_globals.size() != c)
    throw ContractError("similarity_map: class text and image group counts differ");
  for (const auto& group : class_image_globals)
    if (group.empty()) throw ContractError("similarity_map: empty image group");

  std::vector<std::vector<double>> map(c, std::vector<double>(c, 0.0));
  for (size_t i = 0; i < c; ++i)
    for (size_t j = 0; j < c; ++j) {
      double sum = 0.0;
      for (const Tensor& v : class_image_globals[j]) sum += cosine_value(class_sents[i], v);
      map[i][j] = sum / static_cast<double>(class_image_globals[j].size());
    }
  return map;
}

std::vector<std::vector<double>> similarity_map_eval(const LaviterModel& model, const Dataset& data,
                                                     const std::vector<Tensor>& images,
                                                     std::vector<std::string>* class_names_out) {
  if (images.size() != data.records.size())
    throw ContractError("similarity_map_eval: need one image tensor per record");
  NoGradGuard guard;
  std::map<std::string, std::vector<Tensor>> groups;
  for (size_t i = 0; i < data.records.size(); ++i)
    groups[data.records[i].class_label].push_back(model.image().encode(images[i]).global_vec);

  std::vector<Tensor> class_sents;
  std::vector<std::vector<Tensor>> class_globals;
  if (class_names_out) class_names_out->clear();
  for (const auto& [label, globals] : groups) {
    class_sents.push_back(model.text().encode(data.vocab.encode(label)).sentence);
    class_globals.push_back(globals);
    if (class_names_out) class_names_out->push_back(label);
  }
  return similarity_map(class_sents, class_globals);
}

BleuResult corpus_bleu(const std::vector<std::vector<int>>& candidates,
                       const std::vector<std::vector<std::vector<int>>>& references, int max_n) {
  if (max_n < 1 || max_n > 4) throw ContractError("bleu order must be 1..4");
  if (candidates.size() != references.size())
    throw ContractError("bleu: candidate and reference counts differ");

  BleuResult res;
  std::vector<long long> matched(static_cast<size_t>(max_n), 0);
  std::vector<long long> total(static_cast<size_t>(max_n), 0);
  long long cand_len = 0, ref_len = 0;

  using Gram = std::vector<int>;
  for (size_t s = 0; s < candidates.size(); ++s) {
    const auto& cand = candidates[s];
    const auto& refs = references[s];
    if (refs.empty()) throw ContractError("bleu: a sample has no references");
    if (cand.empty()) {
      ++res.empty_candidates;
      continue;
    }
    cand_len += static_cast<long long>(cand.size());
    size_t closest = refs[0].size();
    for (const auto& ref : refs) {
      size_t d_new = ref.size() > cand.size() ? ref.size() - cand.size() : cand.size() - ref.size();
      size_t d_old = closest > cand.size() ? closest - cand.size() : cand.size() - closest;
      if (d_new < d_old || (d_new == d_old && ref.size() < closest)) closest = ref.size();
    }
    ref_len += static_cast<long long>(closest);

    for (int n = 1; n <= max_n; ++n) {
      if (cand.size() < static_cast<size_t>(n)) continue;
      std::map<Gram, long long> cand_counts;
      for (size_t i = 0; i + n <= cand.size(); ++i)
        ++cand_counts[Gram(cand.begin() + i, cand.begin() + i + n)];

      std::map<Gram, long long> max_ref_counts;
      for (const auto& ref : refs) {
        std::map<Gram, long long> counts;
        for (size_t i = 0; i + n <= ref.size(); ++i)
          ++counts[Gram(ref.begin() + i, ref.begin() + i + n)];
        for (const auto& [gram, count] : counts) {
          auto it = max_ref_counts.find(gram);
          if (it == max_ref_counts.end())
            max_ref_counts[gram] = count;
          else
            it->second = std::max(it->second, count);
        }
      }

      for (const auto& [gram, count] : cand_counts) {
        auto it = max_ref_counts.find(gram);
        matched[static_cast<size_t>(n - 1)] += std::min(count, it == max_ref_counts.end() ? 0 : it->second);
        total[static_cast<size_t>(n - 1)] += count;
      }
    }
  }

  if (cand_len == 0) return res;
  double log_sum = 0.0;
  for (int n = 0; n < max_n; ++n) {
    if (total[static_cast<size_t>(n)] == 0 || matched[static_cast<size_t>(n)] == 0) return res;
    log_sum += std::log(static_cast<double>(matched[static_cast<size_t>(n)]) /
                        static_cast<double>(total[static_cast<size_t>(n)]));
  }
  double precision = std::exp(log_sum / max_n);
  double brevity = cand_len >= ref_len
                       ? 1.0
                       : std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(cand_len));
  res.score = brevity * precision;
  return res;
}

double sentence_bleu(const std::vector<int>& candidate,
                     const std::vector<std::vector<int>>& references, int max_n) {
  return corpus_bleu({candidate}, {references}, max_n).score;
}

void write_embeddings(const std::string& path, int dim, const std::vector<EmbeddingRow>& rows) {
  std::string out = "laviter-embeddings 1 " + std::to_string(dim) + " " +
                    std::to_string(rows.size()) + "\n";
  char buf[64];
  for (const auto& row : rows) {
    if (static_cast<int>(row.values.size()) != dim)
      throw ContractError("embedding row " + row.id + " has " + std::to_string(row.values.size()) +
                          " values, expected " + std::to_string(dim));
    out += row.id + "," + row.modality;
    for (double v : row.values) {
      std::snprintf(buf, sizeof(buf), ",%.17g", v);
      out += buf;
    }
    out += "\n";
  }
  atomic_write(path, out);
}

std::vector<EmbeddingRow> read_embeddings(const std::string& path, int* dim_out) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open embedding file " + path);
  std::string header;
  if (!std::getline(in, header)) throw DataError("embedding file " + path + " is empty");
  std::istringstream hs(header);
  std::string tag;
  int version = 0, dim = 0;
  size_t count = 0;
  hs >> tag >> version >> dim >> count;
  if (tag != "laviter-embeddings" || version != 1 || dim <= 0)
    throw DataError("embedding file " + path + " has a bad header");
  if (dim_out) *dim_out = dim;

  std::vector<EmbeddingRow> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    EmbeddingRow row;
    std::istringstream ls(line);
    std::string field;
    if (!std::getline(ls, row.id, ',') || !std::getline(ls, row.modality, ','))
      throw DataError("embedding file " + path + ": malformed row \"" + line + "\"");
    while (std::getline(ls, field, ',')) row.values.push_back(std::stod(field));
    if (static_cast<int>(row.values.size()) != dim)
      throw DataError("embedding file " + path + ": row " + row.id + " has " +
                      std::to_string(row.values.size()) + " values, expected " + std::to_string(dim));
    rows.push_back(std::move(row));
  }
  if (rows.size() != count)
    throw DataError("embedding file " + path + ": header promises " + std::to_string(count) +
                    " rows, found " + std::to_string(rows.size()));
  return rows;
}

std::vector<EmbeddingRow> collect_embeddings(const LaviterModel& model, const Dataset& data,
                                             const std::vector<Tensor>& images) {
  if (images.size() != data.records.size())
    throw ContractError("collect_embeddings: need one image tensor per record");
  NoGradGuard guard;
  std::vector<EmbeddingRow> rows;
  for (size_t i = 0; i < data.records.size(); ++i) {
    EmbeddingRow row;
    row.id = data.records[i].id;
    row.modality = "image";
    row.values = model.image().encode(images[i]).global_vec.data();
    rows.push_back(std::move(row));
  }
  std::map<std::string, bool> labels;
  for (const auto& rec : data.records) labels[rec.class_label] = true;
  for (const auto& [label, unused] : labels) {
    EmbeddingRow row;
    row.id = "label:" + label;
    row.modality = "text";
    row.values = model.text().encode(data.vocab.encode(label)).sentence.data();
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace laviter
