#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "matword/common.hpp"
#include "matword/tokenize.hpp"

namespace matword {

inline constexpr std::size_t kDefaultVocabularySize = 30000;

/// Token <-> id map. Ids are dense and ordered by descending corpus
/// frequency; ties keep first-seen order. Immutable once built.
class Vocabulary {
 public:
  Vocabulary() = default;

  /// Builds from (token, count) pairs already in id order.
  Vocabulary(std::vector<std::string> tokens, std::vector<std::uint64_t> counts)
      : tokens_(std::move(tokens)), counts_(std::move(counts)) {
    if (tokens_.size() != counts_.size())
      throw InvalidArgument("vocabulary: token and count lists differ in length");
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
      if (counts_[i] == 0) throw InvalidArgument("vocabulary: zero count for '" + tokens_[i] + "'");
      if (!index_.emplace(tokens_[i], static_cast<TokenId>(i)).second)
        throw InvalidArgument("vocabulary: duplicate token '" + tokens_[i] + "'");
    }
  }

  std::size_t size() const noexcept { return tokens_.size(); }
  bool empty() const noexcept { return tokens_.empty(); }

  /// Sentinel id used for window padding; one past the last real id.
  TokenId padding_id() const noexcept { return static_cast<TokenId>(tokens_.size()); }

  const std::string& token(TokenId id) const { return tokens_.at(id); }
  std::uint64_t count(TokenId id) const { return counts_.at(id); }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }
  const std::vector<std::uint64_t>& counts() const noexcept { return counts_; }

  std::optional<TokenId> find(std::string_view token) const {
    if (auto it = index_.find(std::string(token)); it != index_.end()) return it->second;
    return std::nullopt;
  }

  /// Writes `token<TAB>count` lines in id (descending frequency) order.
  void write_tsv(std::ostream& out) const {
    for (std::size_t i = 0; i < tokens_.size(); ++i) out << tokens_[i] << '\t' << counts_[i] << '\n';
  }

  static Vocabulary read_tsv(std::istream& in) {
    std::vector<std::string> tokens;
    std::vector<std::uint64_t> counts;
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto tab = line.rfind('\t');
      if (tab == std::string::npos) throw FormatError("vocabulary tsv: missing tab in '" + line + "'");
      tokens.push_back(line.substr(0, tab));
      try {
        counts.push_back(std::stoull(line.substr(tab + 1)));
      } catch (const std::exception&) {
        throw FormatError("vocabulary tsv: bad count in '" + line + "'");
      }
    }
    return Vocabulary(std::move(tokens), std::move(counts));
  }

  bool operator==(const Vocabulary& other) const {
    return tokens_ == other.tokens_ && counts_ == other.counts_;
  }

 private:
  std::vector<std::string> tokens_;
  std::vector<std::uint64_t> counts_;
  std::unordered_map<std::string, TokenId> index_;
};

/// Counts tokens of a one-sentence-per-line stream and keeps the `max_size`
/// most frequent.
inline Vocabulary build_vocabulary(std::istream& in, std::size_t max_size = kDefaultVocabularySize) {
  if (max_size == 0) throw InvalidArgument("vocabulary: max_size must be positive");
  struct Entry {
    std::string token;
    std::uint64_t count;
  };
  std::vector<Entry> entries;
  std::unordered_map<std::string, std::size_t> seen;
  std::string line;
  while (std::getline(in, line)) {
    for (auto& tok : tokenize(line)) {
      auto [it, inserted] = seen.try_emplace(tok, entries.size());
      if (inserted)
        entries.push_back({std::move(tok), 1});
      else
        ++entries[it->second].count;
    }
  }
  if (entries.empty()) throw InvalidArgument("empty corpus");
  std::stable_sort(entries.begin(), entries.end(),
                   [](const Entry& a, const Entry& b) { return a.count > b.count; });
  if (entries.size() > max_size) entries.resize(max_size);

  std::vector<std::string> tokens;
  std::vector<std::uint64_t> counts;
  tokens.reserve(entries.size());
  counts.reserve(entries.size());
  for (auto& e : entries) {
    tokens.push_back(std::move(e.token));
    counts.push_back(e.count);
  }
  return Vocabulary(std::move(tokens), std::move(counts));
}

inline Vocabulary build_vocabulary(const std::filesystem::path& corpus_path,
                                   std::size_t max_size = kDefaultVocabularySize) {
  std::ifstream in(corpus_path);
  if (!in) throw IoError("cannot read corpus '" + corpus_path.string() + "'");
  return build_vocabulary(in, max_size);
}

}  // namespace matword
