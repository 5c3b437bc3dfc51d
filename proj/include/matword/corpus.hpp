#pragma once

#include <filesystem>
#include <fstream>
#include <istream>
#include <string>
#include <vector>

#include "matword/common.hpp"
#include "matword/tokenize.hpp"
#include "matword/vocabulary.hpp"

namespace matword {

inline constexpr double kDefaultValidationFraction = 0.001;

/// Deterministic membership test for the held-out split, keyed on the
/// sentence's line index.
inline bool is_validation_sentence(std::size_t line_index, double fraction) noexcept {
  return unit_interval(mix64(static_cast<std::uint64_t>(line_index) ^ 0x76616c6964ULL)) < fraction;
}

/// Maps tokens to ids, dropping out-of-vocabulary tokens.
inline std::vector<TokenId> encode_line(const Vocabulary& vocab, std::string_view line) {
  std::vector<TokenId> ids;
  for (const auto& tok : tokenize(line))
    if (auto id = vocab.find(tok)) ids.push_back(*id);
  return ids;
}

/// In-memory corpus of id sequences, split into training and validation
/// sentences. Sentences with fewer than two in-vocabulary tokens are dropped.
struct EncodedCorpus {
  std::vector<std::vector<TokenId>> train;
  std::vector<std::vector<TokenId>> validation;

  static EncodedCorpus from_stream(std::istream& in, const Vocabulary& vocab,
                                   double validation_fraction = kDefaultValidationFraction) {
    EncodedCorpus corpus;
    std::string line;
    for (std::size_t index = 0; std::getline(in, line); ++index) {
      auto ids = encode_line(vocab, line);
      if (ids.size() < 2) continue;
      (is_validation_sentence(index, validation_fraction) ? corpus.validation : corpus.train)
          .push_back(std::move(ids));
    }
    return corpus;
  }

  static EncodedCorpus from_file(const std::filesystem::path& path, const Vocabulary& vocab,
                                 double validation_fraction = kDefaultValidationFraction) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read corpus '" + path.string() + "'");
    return from_stream(in, vocab, validation_fraction);
  }
};

/// Reads a corpus file as raw id sequences (no split, no length filter).
inline std::vector<std::vector<TokenId>> read_sentences(const std::filesystem::path& path,
                                                        const Vocabulary& vocab) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read corpus '" + path.string() + "'");
  std::vector<std::vector<TokenId>> out;
  std::string line;
  while (std::getline(in, line)) out.push_back(encode_line(vocab, line));
  return out;
}

}  // namespace matword
