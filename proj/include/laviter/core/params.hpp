#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "laviter/core/tensor.hpp"

namespace laviter {

struct NamedParam {
  std::string name;
  Tensor tensor;
};

using ParamList = std::vector<NamedParam>;

// FNV-1a over the raw bytes of every tensor in declaration order.
// Bitwise identity of two parameter sets implies equal checksums.
inline uint64_t params_checksum(const ParamList& params) {
  uint64_t h = 1469598103934665603ULL;
  auto eat = [&h](const void* p, size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 1099511628211ULL;
    }
  };
  for (const auto& np : params) {
    eat(np.name.data(), np.name.size());
    eat(np.tensor.data().data(), np.tensor.data().size() * sizeof(double));
  }
  return h;
}

inline size_t params_count(const ParamList& params) {
  size_t n = 0;
  for (const auto& np : params) n += np.tensor.data().size();
  return n;
}

inline void zero_all_grads(ParamList& params) {
  for (auto& np : params) np.tensor.zero_grad();
}

}  // namespace laviter
