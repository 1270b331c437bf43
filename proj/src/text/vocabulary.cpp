#include "laviter/text/vocabulary.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include "laviter/core/error.hpp"

namespace laviter {

std::vector<std::string> Vocabulary::tokenize(const std::string& text) {
  std::string cleaned;
  cleaned.reserve(text.size());
  for (unsigned char c : text) {
    if (std::isalnum(c))
      cleaned.push_back(static_cast<char>(std::tolower(c)));
    else
      cleaned.push_back(' ');
  }
  std::vector<std::string> out;
  std::istringstream in(cleaned);
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

Vocabulary Vocabulary::build(const std::vector<std::string>& texts) {
  std::set<std::string> uniq;
  for (const auto& t : texts)
    for (auto& tok : tokenize(t)) uniq.insert(std::move(tok));
  Vocabulary v;
  v.tokens_.assign(uniq.begin(), uniq.end());
  return v;
}

int Vocabulary::id_of(const std::string& token) const {
  auto it = std::lower_bound(tokens_.begin(), tokens_.end(), token);
  if (it == tokens_.end() || *it != token) return kUnk;
  return kReserved + static_cast<int>(it - tokens_.begin());
}

bool Vocabulary::contains(const std::string& token) const {
  return id_of(token) != kUnk;
}

std::string Vocabulary::token_of(int id) const {
  switch (id) {
    case kPad: return "<pad>";
    case kStart: return "<s>";
    case kEnd: return "</s>";
    case kUnk: return "<unk>";
    default: break;
  }
  int idx = id - kReserved;
  if (idx < 0 || idx >= static_cast<int>(tokens_.size()))
    throw VocabError("token id " + std::to_string(id) + " outside vocabulary of size " +
                     std::to_string(size()));
  return tokens_[idx];
}

std::vector<int> Vocabulary::encode(const std::string& text) const {
  std::vector<int> ids;
  for (const auto& tok : tokenize(text)) ids.push_back(id_of(tok));
  return ids;
}

std::string Vocabulary::decode(const std::vector<int>& ids) const {
  std::string out;
  for (int id : ids) {
    if (id < kReserved) continue;
    if (!out.empty()) out.push_back(' ');
    out += token_of(id);
  }
  return out;
}

void Vocabulary::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write vocabulary to " + path);
  for (const auto& t : tokens_) out << t << '\n';
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read vocabulary from " + path);
  Vocabulary v;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) v.tokens_.push_back(line);
  }
  for (size_t i = 1; i < v.tokens_.size(); ++i)
    if (!(v.tokens_[i - 1] < v.tokens_[i]))
      throw VocabError("vocabulary file " + path + " is not strictly sorted at line " +
                       std::to_string(i + 1));
  return v;
}

}  // namespace laviter
