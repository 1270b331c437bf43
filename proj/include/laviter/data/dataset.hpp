#pragma once

#include <string>
#include <vector>

#include "laviter/text/vocabulary.hpp"

namespace laviter {

struct DatasetRecord {
  std::string id;
  std::string image;  // raster path relative to the dataset directory
  std::vector<std::string> captions;
  std::vector<std::string> attributes;
  std::string class_label;
};

struct Dataset {
  std::string dir;
  std::vector<DatasetRecord> records;
  Vocabulary vocab;

  std::string image_path(const DatasetRecord& rec) const { return dir + "/" + rec.image; }
};

// One JSON object per line with keys id, image, captions, attributes, class.
void save_records(const std::string& path, const std::vector<DatasetRecord>& records);
std::vector<DatasetRecord> load_records(const std::string& path);

// Loads <dir>/annotations.jsonl and <dir>/vocab.txt.
Dataset load_dataset(const std::string& dir);

}  // namespace laviter
