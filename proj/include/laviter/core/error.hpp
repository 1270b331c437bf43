#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace laviter {

// Error taxonomy used across the library. Tests match on the concrete type,
// user-facing code usually only needs the message.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Tensor dimension disagreements. Messages always name the shapes involved.
struct ShapeError : Error {
  using Error::Error;
};

// API misuse: calling an operation outside its documented contract.
struct ContractError : Error {
  using Error::Error;
};

// Bad configuration values or inconsistent run setup.
struct ConfigError : Error {
  using Error::Error;
};

// File format, integrity, or I/O problems.
struct DataError : Error {
  using Error::Error;
};

// Token ids outside the vocabulary.
struct VocabError : Error {
  using Error::Error;
};

inline std::string shape_to_string(const std::vector<int>& shape) {
  std::string s = "(";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  s += ")";
  return s;
}

}  // namespace laviter
