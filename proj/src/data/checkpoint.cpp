#include "laviter/data/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

#include "laviter/core/error.hpp"
#include "laviter/data/image_io.hpp"

namespace laviter {

namespace {

constexpr char kMagic[4] = {'L', 'V', 'C', 'K'};
constexpr uint32_t kVersion = 1;

void put_u16(std::string& out, uint16_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>((v >> 8) & 0xFF));
}

void put_u32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u64(std::string& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_f64(std::string& out, double v) {
  uint64_t bits;
  std::memcpy(&bits, &v, sizeof(bits));
  put_u64(out, bits);
}

void put_f32(std::string& out, float v) {
  uint32_t bits;
  std::memcpy(&bits, &v, sizeof(bits));
  put_u32(out, bits);
}

class Reader {
 public:
  Reader(const std::string& bytes, const std::string& path) : bytes_(bytes), path_(path) {}

  void need(size_t n) const {
    if (pos_ + n > bytes_.size())
      throw DataError("checkpoint " + path_ + " is truncated (need " + std::to_string(n) +
                      " bytes at offset " + std::to_string(pos_) + ")");
  }

  uint8_t u8() {
    need(1);
    return static_cast<uint8_t>(bytes_[pos_++]);
  }

  uint16_t u16() {
    need(2);
    uint16_t v = 0;
    for (int i = 0; i < 2; ++i) v |= static_cast<uint16_t>(static_cast<uint8_t>(bytes_[pos_++])) << (8 * i);
    return v;
  }

  uint32_t u32() {
    need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(static_cast<uint8_t>(bytes_[pos_++])) << (8 * i);
    return v;
  }

  uint64_t u64() {
    need(8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(static_cast<uint8_t>(bytes_[pos_++])) << (8 * i);
    return v;
  }

  std::string str(size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  size_t pos() const { return pos_; }

 private:
  const std::string& bytes_;
  std::string path_;
  size_t pos_ = 0;
};

double f64_from_bits(uint64_t bits) {
  double v;
  std::memcpy(&v, &bits, sizeof(v));
  return v;
}

float f32_from_bits(uint32_t bits) {
  float v;
  std::memcpy(&v, &bits, sizeof(v));
  return v;
}

size_t entry_count(const CheckpointEntry& e) {
  size_t n = 1;
  for (int d : e.dims) n *= static_cast<size_t>(d);
  return n;
}

}  // namespace

const CheckpointEntry* CheckpointData::find(const std::string& name) const {
  for (const auto& e : entries)
    if (e.name == name) return &e;
  return nullptr;
}

void save_checkpoint_data(const std::string& path, const CheckpointData& data) {
  std::string payload;
  struct Placed {
    uint64_t offset, nbytes;
  };
  std::vector<Placed> placed;
  placed.reserve(data.entries.size());
  for (const auto& e : data.entries) {
    size_t n = entry_count(e);
    if (n != e.values.size())
      throw DataError("checkpoint entry " + e.name + ": dims describe " + std::to_string(n) +
                      " values but " + std::to_string(e.values.size()) + " are present");
    uint64_t offset = payload.size();
    if (e.dtype == 0) {
      for (double v : e.values) put_f64(payload, v);
    } else if (e.dtype == 1) {
      for (double v : e.values) put_f32(payload, static_cast<float>(v));
    } else {
      throw DataError("checkpoint entry " + e.name + ": unsupported dtype " +
                      std::to_string(e.dtype));
    }
    placed.push_back({offset, payload.size() - offset});
  }

  std::string out;
  out.append(kMagic, 4);
  put_u32(out, kVersion);
  put_u32(out, data.meta.phase);
  put_u64(out, data.meta.step);
  put_u64(out, data.meta.seed);
  put_u64(out, data.meta.config_hash);
  put_u32(out, static_cast<uint32_t>(data.entries.size()));
  for (size_t i = 0; i < data.entries.size(); ++i) {
    const auto& e = data.entries[i];
    if (e.name.size() > 0xFFFF) throw DataError("checkpoint entry name too long: " + e.name);
    put_u16(out, static_cast<uint16_t>(e.name.size()));
    out += e.name;
    out.push_back(static_cast<char>(e.dtype));
    out.push_back(static_cast<char>(e.dims.size()));
    for (int d : e.dims) put_u32(out, static_cast<uint32_t>(d));
    put_u64(out, placed[i].offset);
    put_u64(out, placed[i].nbytes);
  }
  put_u64(out, payload.size());
  out += payload;
  atomic_write(path, out);
}

void save_checkpoint(const std::string& path, const ParamList& params, const CheckpointMeta& meta) {
  CheckpointData data;
  data.meta = meta;
  data.entries.reserve(params.size());
  for (const auto& np : params) {
    CheckpointEntry e;
    e.name = np.name;
    e.dtype = 0;
    e.dims = np.tensor.shape();
    e.values = np.tensor.data();
    data.entries.push_back(std::move(e));
  }
  save_checkpoint_data(path, data);
}

CheckpointData load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  std::string bytes = buf.str();

  Reader r(bytes, path);
  if (r.str(4) != std::string(kMagic, 4))
    throw DataError("checkpoint " + path + ": bad magic");
  uint32_t version = r.u32();
  if (version != kVersion)
    throw DataError("checkpoint " + path + ": unsupported version " + std::to_string(version));

  CheckpointData data;
  data.meta.phase = r.u32();
  data.meta.step = r.u64();
  data.meta.seed = r.u64();
  data.meta.config_hash = r.u64();

  uint32_t count = r.u32();
  struct RawEntry {
    CheckpointEntry entry;
    uint64_t offset, nbytes;
  };
  std::vector<RawEntry> raw;
  raw.reserve(count);
  for (uint32_t i = 0; i < count; ++i) {
    RawEntry re;
    uint16_t name_len = r.u16();
    re.entry.name = r.str(name_len);
    re.entry.dtype = r.u8();
    if (re.entry.dtype != 0 && re.entry.dtype != 1)
      throw DataError("checkpoint " + path + ": entry " + re.entry.name + " has unsupported dtype " +
                      std::to_string(re.entry.dtype));
    uint8_t ndim = r.u8();
    for (uint8_t d = 0; d < ndim; ++d) re.entry.dims.push_back(static_cast<int>(r.u32()));
    re.offset = r.u64();
    re.nbytes = r.u64();
    raw.push_back(std::move(re));
  }
  uint64_t payload_size = r.u64();
  size_t payload_start = r.pos();
  if (payload_start + payload_size > bytes.size())
    throw DataError("checkpoint " + path + " is truncated (payload of " +
                    std::to_string(payload_size) + " bytes missing data)");

  for (auto& re : raw) {
    size_t n = entry_count(re.entry);
    size_t width = re.entry.dtype == 0 ? 8 : 4;
    if (re.nbytes != n * width)
      throw DataError("checkpoint " + path + ": entry " + re.entry.name +
                      " payload size disagrees with its dims");
    if (re.offset + re.nbytes > payload_size)
      throw DataError("checkpoint " + path + ": entry " + re.entry.name +
                      " points outside the payload");
    const char* base = bytes.data() + payload_start + re.offset;
    re.entry.values.resize(n);
    for (size_t i = 0; i < n; ++i) {
      if (re.entry.dtype == 0) {
        uint64_t bits = 0;
        for (int b = 0; b < 8; ++b)
          bits |= static_cast<uint64_t>(static_cast<uint8_t>(base[i * 8 + b])) << (8 * b);
        re.entry.values[i] = f64_from_bits(bits);
      } else {
        uint32_t bits = 0;
        for (int b = 0; b < 4; ++b)
          bits |= static_cast<uint32_t>(static_cast<uint8_t>(base[i * 4 + b])) << (8 * b);
        re.entry.values[i] = static_cast<double>(f32_from_bits(bits));
      }
    }
    data.entries.push_back(std::move(re.entry));
  }
  return data;
}

std::vector<std::string> load_into(const CheckpointData& data, ParamList& params) {
  for (const auto& e : data.entries) {
    bool found = false;
    for (const auto& np : params) found = found || np.name == e.name;
    if (!found)
      throw DataError("checkpoint entry " + e.name + " does not match any model parameter");
  }

  std::vector<std::string> missing;
  for (auto& np : params) {
    const CheckpointEntry* e = data.find(np.name);
    if (e == nullptr) {
      missing.push_back(np.name);
      continue;
    }
    if (e->dims != np.tensor.shape())
      throw DataError("checkpoint entry " + e->name + " has shape " + shape_to_string(e->dims) +
                      " but the parameter is " + shape_to_string(np.tensor.shape()));
    std::copy(e->values.begin(), e->values.end(), np.tensor.raw().begin());
  }
  return missing;
}

}  // namespace laviter
