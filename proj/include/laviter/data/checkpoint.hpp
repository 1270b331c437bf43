#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "laviter/core/params.hpp"

namespace laviter {

struct CheckpointMeta {
  uint32_t phase = 0;
  uint64_t step = 0;
  uint64_t seed = 0;
  uint64_t config_hash = 0;
};

struct CheckpointEntry {
  std::string name;
  int dtype = 0;  // 0 = f64, 1 = f32
  std::vector<int> dims;
  std::vector<double> values;
};

struct CheckpointData {
  CheckpointMeta meta;
  std::vector<CheckpointEntry> entries;

  const CheckpointEntry* find(const std::string& name) const;
};

// Binary container: magic, version, meta, manifest, then a little-endian
// payload. Writes are atomic (temp file + rename).
void save_checkpoint(const std::string& path, const ParamList& params, const CheckpointMeta& meta);
void save_checkpoint_data(const std::string& path, const CheckpointData& data);
CheckpointData load_checkpoint(const std::string& path);

// Copies checkpoint tensors into matching params bitwise. An entry with no
// matching param is an error; params absent from the checkpoint keep their
// current values and are returned by name.
std::vector<std::string> load_into(const CheckpointData& data, ParamList& params);

}  // namespace laviter
