#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "matword/common.hpp"

namespace matword::probing {

/// Markov bigram text generator. Every word gets a small, fixed set of
/// likely successors, chosen so that successor relations are mostly one-way
/// (b follows a does not imply a follows b). Swapping two adjacent words
/// of a generated sentence therefore produces improbable bigrams.
struct MarkovCorpusOptions {
  std::size_t vocab_size = 300;
  std::size_t sentences = 20000;
  std::size_t min_length = 6;
  std::size_t max_length = 16;
  std::size_t successors = 2;
  double noise = 0.02;  // probability of a uniformly random next word
  std::uint64_t seed = 7;
};

class MarkovCorpus {
 public:
  explicit MarkovCorpus(const MarkovCorpusOptions& opts) : opts_(opts), rng_(opts.seed) {
    if (opts.vocab_size < 2 || opts.successors < 1 || opts.successors >= opts.vocab_size)
      throw InvalidArgument("markov corpus: need vocab_size > successors >= 1");
    if (opts.min_length < 1 || opts.max_length < opts.min_length)
      throw InvalidArgument("markov corpus: bad length range");
    const std::size_t v = opts.vocab_size;
    std::vector<std::vector<bool>> follows(v, std::vector<bool>(v, false));
    successors_.resize(v);
    std::uniform_int_distribution<std::size_t> any(0, v - 1);
    for (std::size_t a = 0; a < v; ++a) {
      std::size_t attempts = 0;
      while (successors_[a].size() < opts.successors) {
        const std::size_t b = any(rng_);
        ++attempts;
        const bool reverse_taken = follows[b][a] && attempts < 100 * v;
        if (b == a || follows[a][b] || reverse_taken) continue;
        follows[a][b] = true;
        successors_[a].push_back(b);
      }
    }
    // Zipf-like preference among successors.
    std::vector<double> w(opts.successors);
    for (std::size_t r = 0; r < w.size(); ++r) w[r] = 1.0 / static_cast<double>(r + 1);
    pick_successor_ = std::discrete_distribution<std::size_t>(w.begin(), w.end());
  }

  static std::string word(std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "w%03zu", i);
    return buf;
  }

  std::vector<std::size_t> sentence() {
    std::uniform_int_distribution<std::size_t> length(opts_.min_length, opts_.max_length);
    std::uniform_int_distribution<std::size_t> any(0, opts_.vocab_size - 1);
    std::bernoulli_distribution jump(opts_.noise);
    const std::size_t n = length(rng_);
    std::vector<std::size_t> out;
    out.reserve(n);
    out.push_back(any(rng_));
    while (out.size() < n)
      out.push_back(jump(rng_) ? any(rng_) : successors_[out.back()][pick_successor_(rng_)]);
    return out;
  }

  void write(std::ostream& os) {
    for (std::size_t s = 0; s < opts_.sentences; ++s) {
      const auto ids = sentence();
      for (std::size_t i = 0; i < ids.size(); ++i) os << (i ? " " : "") << word(ids[i]);
      os << '\n';
    }
  }

  void write(const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write corpus '" + path.string() + "'");
    write(out);
  }

  const std::vector<std::vector<std::size_t>>& successors() const noexcept { return successors_; }

 private:
  MarkovCorpusOptions opts_;
  std::mt19937_64 rng_;
  std::vector<std::vector<std::size_t>> successors_;
  std::discrete_distribution<std::size_t> pick_successor_;
};

}  // namespace matword::probing
