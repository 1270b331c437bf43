#include "laviter/data/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numeric>
#include <set>

#include "laviter/core/error.hpp"
#include "laviter/core/rng.hpp"

namespace laviter {

namespace {

const std::array<std::array<unsigned char, 3>, 4> kPalette = {{
    {212, 60, 60},    // red
    {70, 186, 90},    // green
    {66, 98, 214},    // blue
    {230, 214, 66},   // yellow
}};

const std::array<const char*, 2> kSizes = {"small", "large"};

struct Obj {
  int size_cls = 0;
  int color = 0;
  int shape = 0;
  int cx = 0, cy = 0, r = 0;
};

int triple_id(const Obj& o) { return (o.size_cls * 4 + o.color) * 3 + o.shape; }

bool inside(const Obj& o, int x, int y) {
  double dx = x - o.cx;
  double dy = y - o.cy;
  switch (o.shape) {
    case 0:
      return dx * dx + dy * dy <= static_cast<double>(o.r) * o.r;
    case 1:
      return std::abs(dx) <= o.r * 0.85 && std::abs(dy) <= o.r * 0.85;
    default: {
      if (dy < -o.r || dy > o.r) return false;
      return std::abs(dx) <= (dy + o.r) * 0.5;
    }
  }
}

std::string phrase(const Obj& o) {
  return corpus_colors()[static_cast<size_t>(o.color)] + " " +
         corpus_shapes()[static_cast<size_t>(o.shape)];
}

std::string sized_phrase(const Obj& o) {
  return std::string(kSizes[static_cast<size_t>(o.size_cls)]) + " " + phrase(o);
}

std::string listing(const std::vector<Obj>& objs, bool with_size) {
  std::string out;
  for (size_t i = 0; i < objs.size(); ++i) {
    if (i > 0) out += i + 1 == objs.size() ? " and " : ", ";
    out += "a " + (with_size ? sized_phrase(objs[i]) : phrase(objs[i]));
  }
  return out;
}

Image render(const std::vector<Obj>& objs, int size) {
  Image img = make_image(size, size, 40, 40, 40);
  for (const Obj& o : objs) {
    const auto& col = kPalette[static_cast<size_t>(o.color)];
    for (int y = o.cy - o.r; y <= o.cy + o.r; ++y) {
      if (y < 0 || y >= size) continue;
      for (int x = o.cx - o.r; x <= o.cx + o.r; ++x) {
        if (x < 0 || x >= size) continue;
        if (!inside(o, x, y)) continue;
        img.at(x, y, 0) = col[0];
        img.at(x, y, 1) = col[1];
        img.at(x, y, 2) = col[2];
      }
    }
  }
  return img;
}

void place(std::vector<Obj>& objs, Obj& o, int size, Rng& rng) {
  int lo = o.r + 1;
  int hi = size - o.r - 2;
  for (int attempt = 0; attempt < 24; ++attempt) {
    o.cx = lo + rng.uniform_int(hi - lo + 1);
    o.cy = lo + rng.uniform_int(hi - lo + 1);
    bool clear = true;
    for (const Obj& other : objs) {
      double dx = o.cx - other.cx;
      double dy = o.cy - other.cy;
      if (std::sqrt(dx * dx + dy * dy) < 0.9 * (o.r + other.r)) {
        clear = false;
        break;
      }
    }
    if (clear) break;
  }
}

// Every record gets a distinct set of (size, color, shape) triples so no two
// images in the corpus share a caption. 24 triples give 2324 possible sets of
// one to three, comfortably above the corpus size.
std::vector<Obj> draw_objects(int first_class, std::set<std::vector<int>>& used, Rng& rng) {
  int n_colors = static_cast<int>(corpus_colors().size());
  int n_shapes = static_cast<int>(corpus_shapes().size());
  for (int attempt = 0; attempt < 256; ++attempt) {
    int n_obj = 1 + rng.uniform_int(3);
    std::vector<Obj> objs;
    for (int k = 0; k < n_obj; ++k) {
      Obj o;
      for (int retry = 0; retry < 64; ++retry) {
        o.size_cls = rng.uniform_int(2);
        if (k == 0) {
          o.color = first_class / n_shapes;
          o.shape = first_class % n_shapes;
        } else {
          o.color = rng.uniform_int(n_colors);
          o.shape = rng.uniform_int(n_shapes);
        }
        bool dup = false;
        for (const Obj& prev : objs) dup = dup || triple_id(prev) == triple_id(o);
        if (!dup) break;
      }
      objs.push_back(o);
    }
    std::vector<int> key;
    for (const Obj& o : objs) key.push_back(triple_id(o));
    std::sort(key.begin(), key.end());
    if (used.insert(key).second) return objs;
  }
  throw DataError("generate_corpus: ran out of distinct object sets");
}

std::string record_id(const std::string& split, int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s-%04d", split.c_str(), index);
  return buf;
}

std::vector<DatasetRecord> make_split(const std::string& split_dir, const std::string& split,
                                      int count, int size, std::set<std::vector<int>>& used,
                                      Rng& rng) {
  std::filesystem::create_directories(split_dir + "/images");
  int n_classes = corpus_class_count();
  std::vector<int> class_order(static_cast<size_t>(n_classes));
  std::iota(class_order.begin(), class_order.end(), 0);
  rng.shuffle(class_order);

  std::vector<DatasetRecord> records;
  records.reserve(static_cast<size_t>(count));
  for (int i = 0; i < count; ++i) {
    int first_class = class_order[static_cast<size_t>(i % n_classes)];
    std::vector<Obj> drawn = draw_objects(first_class, used, rng);
    std::vector<Obj> objs;
    for (Obj o : drawn) {
      o.r = (o.size_cls == 0 ? 6 : 11) + rng.uniform_int(3);
      place(objs, o, size, rng);
      objs.push_back(o);
    }

    DatasetRecord rec;
    rec.id = record_id(split, i);
    rec.image = "images/" + rec.id + ".ppm";
    std::string body = listing(objs, true);
    rec.captions = {body, "there is " + body, "the picture shows " + listing(objs, false)};
    for (const Obj& o : objs) {
      std::string p = phrase(o);
      bool seen = false;
      for (const std::string& existing : rec.attributes) seen = seen || existing == p;
      if (!seen) rec.attributes.push_back(p);
    }
    rec.class_label = phrase(objs[0]);
    records.push_back(rec);

    write_ppm(split_dir + "/" + rec.image, render(objs, size));
  }
  return records;
}

}  // namespace

const std::vector<std::string>& corpus_colors() {
  static const std::vector<std::string> kColors = {"red", "green", "blue", "yellow"};
  return kColors;
}

const std::vector<std::string>& corpus_shapes() {
  static const std::vector<std::string> kShapes = {"circle", "square", "triangle"};
  return kShapes;
}

int corpus_class_count() {
  return static_cast<int>(corpus_colors().size() * corpus_shapes().size());
}

void generate_corpus(const std::string& out_dir, const CorpusSpec& spec) {
  if (spec.train_count <= 0 || spec.test_count <= 0)
    throw ConfigError("generate_corpus: split counts must be positive");
  if (spec.image_size < 16) throw ConfigError("generate_corpus: image size too small");

  Rng root(spec.seed);
  Rng train_rng = root.fork(1);
  Rng test_rng = root.fork(2);

  std::string train_dir = out_dir + "/train";
  std::string test_dir = out_dir + "/test";
  std::set<std::vector<int>> used;
  auto train = make_split(train_dir, "train", spec.train_count, spec.image_size, used, train_rng);
  auto test = make_split(test_dir, "test", spec.test_count, spec.image_size, used, test_rng);

  std::vector<std::string> texts;
  for (const auto* split : {&train, &test})
    for (const DatasetRecord& rec : *split)
      for (const std::string& cap : rec.captions) texts.push_back(cap);
  Vocabulary vocab = Vocabulary::build(texts);

  save_records(train_dir + "/annotations.jsonl", train);
  save_records(test_dir + "/annotations.jsonl", test);
  vocab.save(train_dir + "/vocab.txt");
  vocab.save(test_dir + "/vocab.txt");
}

}  // namespace laviter
