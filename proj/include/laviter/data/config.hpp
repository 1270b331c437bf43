#pragma once

#include <cstdint>
#include <map>
#include <string>

namespace laviter {

// Flat key=value store used for run configuration. Lines starting with '#'
// (or trailing '#' comments) are ignored. Keys iterate in sorted order, so
// to_string and hash are stable regardless of insertion order.
class RunConfig {
 public:
  RunConfig() = default;

  static RunConfig parse_text(const std::string& text);
  static RunConfig parse_file(const std::string& path);

  bool has(const std::string& key) const { return entries_.count(key) > 0; }
  void set(const std::string& key, const std::string& value);

  // "key=value" with no spaces around '='; used for command line overrides.
  void set_pair(const std::string& pair);

  std::string get_string(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  int64_t get_int(const std::string& key) const;
  int64_t get_int(const std::string& key, int64_t fallback) const;
  double get_double(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key) const;
  bool get_bool(const std::string& key, bool fallback) const;

  uint64_t hash() const;
  std::string to_string() const;

  const std::map<std::string, std::string>& entries() const { return entries_; }

 private:
  std::map<std::string, std::string> entries_;
};

}  // namespace laviter
