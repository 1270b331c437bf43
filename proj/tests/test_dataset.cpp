#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "laviter/core/error.hpp"
#include "laviter/data/dataset.hpp"
#include "laviter/data/image_io.hpp"
#include "laviter/data/synthetic.hpp"

using namespace laviter;

namespace {

std::filesystem::path temp_dir(const char* name) {
  auto dir = std::filesystem::temp_directory_path() / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("records round-trip through the annotation file") {
  auto dir = temp_dir("ds_roundtrip");
  std::vector<DatasetRecord> recs(2);
  recs[0].id = "r0";
  recs[0].image = "images/r0.ppm";
  recs[0].captions = {"a red circle", "there is a red circle"};
  recs[0].attributes = {"red circle"};
  recs[0].class_label = "red circle";
  recs[1].id = "r1";
  recs[1].image = "images/r1.ppm";
  recs[1].captions = {"caption with \"quotes\" and \\slashes\\"};
  recs[1].attributes = {"blue square", "green triangle"};
  recs[1].class_label = "blue square";

  std::string path = (dir / "annotations.jsonl").string();
  save_records(path, recs);
  auto back = load_records(path);
  REQUIRE(back.size() == 2);
  CHECK(back[0].id == recs[0].id);
  CHECK(back[0].captions == recs[0].captions);
  CHECK(back[0].attributes == recs[0].attributes);
  CHECK(back[1].captions[0] == recs[1].captions[0]);
  CHECK(back[1].class_label == "blue square");
}

TEST_CASE("malformed annotation lines are rejected") {
  auto dir = temp_dir("ds_malformed");
  std::string path = (dir / "annotations.jsonl").string();
  {
    std::ofstream out(path);
    out << "{not json\n";
  }
  CHECK_THROWS_AS(load_records(path), DataError);
  {
    std::ofstream out(path);
    out << "{\"id\":\"x\",\"image\":\"i.ppm\",\"attributes\":[\"a\"],\"class\":\"a\"}\n";
  }
  // captions key missing
  CHECK_THROWS_AS(load_records(path), DataError);
  CHECK_THROWS_AS(load_records((dir / "nope.jsonl").string()), DataError);
}

TEST_CASE("ppm files round-trip pixel-exact") {
  auto dir = temp_dir("ds_ppm");
  Image img = make_image(5, 3, 10, 200, 30);
  img.at(4, 2, 0) = 255;
  img.at(0, 0, 2) = 1;
  std::string path = (dir / "img.ppm").string();
  write_ppm(path, img);
  Image back = read_ppm(path);
  CHECK(back.width == 5);
  CHECK(back.height == 3);
  CHECK(back.rgb == img.rgb);
}

TEST_CASE("image tensors live in [-1,1] and invert back to bytes") {
  Image img = make_image(2, 2, 0, 128, 255);
  Tensor t = image_to_tensor(img);
  REQUIRE(t.shape() == std::vector<int>{3, 2, 2});
  double lo = 1e9, hi = -1e9;
  for (int i = 0; i < t.numel(); ++i) {
    lo = std::min(lo, t.at(i));
    hi = std::max(hi, t.at(i));
  }
  CHECK(lo >= -1.0);
  CHECK(hi <= 1.0);
  CHECK(t.at(0) == doctest::Approx(-1.0));
  Image back = tensor_to_image(t);
  CHECK(back.rgb == img.rgb);
}

TEST_CASE("corpus generation is deterministic per seed") {
  auto dir_a = temp_dir("ds_det_a");
  auto dir_b = temp_dir("ds_det_b");
  CorpusSpec spec;
  spec.train_count = 24;
  spec.test_count = 8;
  spec.seed = 11;
  generate_corpus(dir_a.string(), spec);
  generate_corpus(dir_b.string(), spec);

  for (const char* split : {"train", "test"}) {
    CHECK(slurp(dir_a / split / "annotations.jsonl") == slurp(dir_b / split / "annotations.jsonl"));
    CHECK(slurp(dir_a / split / "vocab.txt") == slurp(dir_b / split / "vocab.txt"));
    auto recs = load_records((dir_a / split / "annotations.jsonl").string());
    for (const auto& rec : recs)
      CHECK(slurp(dir_a / split / rec.image) == slurp(dir_b / split / rec.image));
  }

  CorpusSpec other = spec;
  other.seed = 12;
  auto dir_c = temp_dir("ds_det_c");
  generate_corpus(dir_c.string(), other);
  CHECK(slurp(dir_a / "train" / "annotations.jsonl") !=
        slurp(dir_c / "train" / "annotations.jsonl"));
}

TEST_CASE("zero or negative split counts are rejected") {
  CorpusSpec spec;
  spec.train_count = 0;
  CHECK_THROWS_AS(generate_corpus("/tmp/ds_zero", spec), ConfigError);
  spec.train_count = 8;
  spec.test_count = -1;
  CHECK_THROWS_AS(generate_corpus("/tmp/ds_zero", spec), ConfigError);
}

TEST_CASE("full-size corpus keeps classes balanced and captions well formed") {
  auto dir = temp_dir("ds_full");
  CorpusSpec spec;
  spec.train_count = 512;
  spec.test_count = 128;
  spec.seed = 7;
  generate_corpus(dir.string(), spec);

  auto train = load_records((dir / "train" / "annotations.jsonl").string());
  auto test = load_records((dir / "test" / "annotations.jsonl").string());
  CHECK(train.size() == 512);
  CHECK(test.size() == 128);

  std::map<std::string, int> class_counts;
  std::set<std::string> caption0;
  int max_tokens = 0;
  for (const auto* split : {&train, &test}) {
    for (const auto& rec : *split) {
      REQUIRE(!rec.captions.empty());
      REQUIRE(!rec.attributes.empty());
      caption0.insert(rec.captions[0]);
      for (const auto& cap : rec.captions) {
        max_tokens = std::max(max_tokens, static_cast<int>(Vocabulary::tokenize(cap).size()));
        // every attribute phrase shows up in every caption of its record
        for (const auto& attr : rec.attributes)
          CHECK(cap.find(attr) != std::string::npos);
      }
      CHECK(rec.class_label == rec.attributes[0]);
    }
  }
  for (const auto& rec : train) class_counts[rec.class_label]++;

  CHECK(static_cast<int>(class_counts.size()) == corpus_class_count());
  int lo = 1 << 30, hi = 0;
  for (const auto& [cls, n] : class_counts) {
    lo = std::min(lo, n);
    hi = std::max(hi, n);
  }
  CHECK(static_cast<double>(hi) <= 1.5 * lo);
  CHECK(max_tokens <= 15);
  // captions identify their record uniquely across both splits
  CHECK(caption0.size() == train.size() + test.size());
}

TEST_CASE("load_dataset wires records, vocabulary, and image paths together") {
  auto dir = temp_dir("ds_load");
  CorpusSpec spec;
  spec.train_count = 12;
  spec.test_count = 4;
  spec.seed = 3;
  generate_corpus(dir.string(), spec);

  Dataset data = load_dataset((dir / "train").string());
  CHECK(data.records.size() == 12);
  CHECK(data.vocab.size() > Vocabulary::kReserved);
  for (const auto& rec : data.records) {
    CHECK(std::filesystem::exists(data.image_path(rec)));
    for (const auto& cap : rec.captions)
      for (int id : data.vocab.encode(cap)) CHECK(id != Vocabulary::kUnk);
  }
  CHECK_THROWS_AS(load_dataset((dir / "missing").string()), Error);
}
