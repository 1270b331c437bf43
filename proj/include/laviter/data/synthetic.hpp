#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "laviter/data/dataset.hpp"
#include "laviter/data/image_io.hpp"

namespace laviter {

struct CorpusSpec {
  int train_count = 512;
  int test_count = 128;
  int image_size = 64;
  uint64_t seed = 7;
};

const std::vector<std::string>& corpus_colors();  // 4 entries
const std::vector<std::string>& corpus_shapes();  // 3 entries
int corpus_class_count();                         // colors x shapes

// Writes <out>/train and <out>/test, each holding images/, annotations.jsonl
// and vocab.txt (the vocabulary is shared across both splits). Every image
// carries 1..3 colored shapes; the first object's class cycles round-robin so
// class counts stay balanced. The three captions per image each enumerate
// all objects, so every attribute phrase occurs in every caption.
void generate_corpus(const std::string& out_dir, const CorpusSpec& spec);

}  // namespace laviter
