#include "laviter/data/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "laviter/core/error.hpp"

namespace laviter {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

}  // namespace

RunConfig RunConfig::parse_text(const std::string& text) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    size_t hash_pos = line.find('#');
    if (hash_pos != std::string::npos) line = line.substr(0, hash_pos);
    line = trim(line);
    if (line.empty()) continue;
    size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key=value, got \"" +
                        line + "\"");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
    cfg.entries_[key] = value;
  }
  return cfg;
}

RunConfig RunConfig::parse_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_text(buf.str());
}

void RunConfig::set(const std::string& key, const std::string& value) {
  if (key.empty()) throw ConfigError("config: empty key");
  entries_[key] = value;
}

void RunConfig::set_pair(const std::string& pair) {
  size_t eq = pair.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError("config override must look like key=value, got \"" + pair + "\"");
  entries_[trim(pair.substr(0, eq))] = trim(pair.substr(eq + 1));
}

std::string RunConfig::get_string(const std::string& key) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) throw ConfigError("config key \"" + key + "\" is not set");
  return it->second;
}

std::string RunConfig::get_string(const std::string& key, const std::string& fallback) const {
  auto it = entries_.find(key);
  return it == entries_.end() ? fallback : it->second;
}

int64_t RunConfig::get_int(const std::string& key) const {
  std::string v = get_string(key);
  char* end = nullptr;
  long long parsed = std::strtoll(v.c_str(), &end, 10);
  if (v.empty() || end == nullptr || *end != '\0')
    throw ConfigError("config key \"" + key + "\": \"" + v + "\" is not an integer");
  return parsed;
}

int64_t RunConfig::get_int(const std::string& key, int64_t fallback) const {
  return has(key) ? get_int(key) : fallback;
}

double RunConfig::get_double(const std::string& key) const {
  std::string v = get_string(key);
  char* end = nullptr;
  double parsed = std::strtod(v.c_str(), &end);
  if (v.empty() || end == nullptr || *end != '\0')
    throw ConfigError("config key \"" + key + "\": \"" + v + "\" is not a number");
  return parsed;
}

double RunConfig::get_double(const std::string& key, double fallback) const {
  return has(key) ? get_double(key) : fallback;
}

bool RunConfig::get_bool(const std::string& key) const {
  std::string v = get_string(key);
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("config key \"" + key + "\": \"" + v + "\" is not a boolean");
}

bool RunConfig::get_bool(const std::string& key, bool fallback) const {
  return has(key) ? get_bool(key) : fallback;
}

uint64_t RunConfig::hash() const {
  uint64_t h = 1469598103934665603ULL;
  auto feed = [&h](const std::string& s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 1099511628211ULL;
    }
    h ^= 0xFF;
    h *= 1099511628211ULL;
  };
  for (const auto& [key, value] : entries_) {
    feed(key);
    feed(value);
  }
  return h;
}

std::string RunConfig::to_string() const {
  std::string out;
  for (const auto& [key, value] : entries_) out += key + "=" + value + "\n";
  return out;
}

}  // namespace laviter
