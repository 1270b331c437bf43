#include "laviter/data/dataset.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "laviter/data/image_io.hpp"

namespace laviter {

namespace {

using nlohmann::json;

void validate(const DatasetRecord& rec, const std::string& where) {
  if (rec.captions.empty()) throw DataError(where + ": record " + rec.id + " has no captions");
  if (rec.attributes.empty())
    throw DataError(where + ": record " + rec.id + " has no attributes");
  if (rec.image.empty()) throw DataError(where + ": record " + rec.id + " has no image path");
}

}  // namespace

void save_records(const std::string& path, const std::vector<DatasetRecord>& records) {
  std::ostringstream out;
  for (const auto& rec : records) {
    validate(rec, path);
    json j;
    j["id"] = rec.id;
    j["image"] = rec.image;
    j["captions"] = rec.captions;
    j["attributes"] = rec.attributes;
    j["class"] = rec.class_label;
    out << j.dump() << '\n';
  }
  atomic_write(path, out.str());
}

std::vector<DatasetRecord> load_records(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read annotations from " + path);
  std::vector<DatasetRecord> records;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw DataError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
    DatasetRecord rec;
    try {
      rec.id = j.at("id").get<std::string>();
      rec.image = j.at("image").get<std::string>();
      rec.captions = j.at("captions").get<std::vector<std::string>>();
      rec.attributes = j.at("attributes").get<std::vector<std::string>>();
      rec.class_label = j.at("class").get<std::string>();
    } catch (const json::exception& e) {
      throw DataError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
    validate(rec, path + ":" + std::to_string(lineno));
    records.push_back(std::move(rec));
  }
  return records;
}

Dataset load_dataset(const std::string& dir) {
  Dataset ds;
  ds.dir = dir;
  ds.records = load_records(dir + "/annotations.jsonl");
  ds.vocab = Vocabulary::load(dir + "/vocab.txt");
  return ds;
}

}  // namespace laviter
