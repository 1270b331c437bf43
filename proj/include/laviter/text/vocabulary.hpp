#pragma once

#include <string>
#include <vector>

namespace laviter {

// Token table with four reserved ids at the bottom. Word ids are assigned
// by sorted order so the same token set always yields the same mapping.
class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kStart = 1;
  static constexpr int kEnd = 2;
  static constexpr int kUnk = 3;
  static constexpr int kReserved = 4;

  Vocabulary() = default;

  // Lowercases, strips punctuation to spaces, splits on whitespace.
  static std::vector<std::string> tokenize(const std::string& text);

  static Vocabulary build(const std::vector<std::string>& texts);

  int size() const { return kReserved + static_cast<int>(tokens_.size()); }
  int id_of(const std::string& token) const;  // kUnk when absent
  std::string token_of(int id) const;
  bool contains(const std::string& token) const;

  std::vector<int> encode(const std::string& text) const;
  // Joins word tokens with spaces; reserved ids are skipped.
  std::string decode(const std::vector<int>& ids) const;

  void save(const std::string& path) const;
  static Vocabulary load(const std::string& path);

 private:
  std::vector<std::string> tokens_;  // sorted; id = index + kReserved
};

}  // namespace laviter
