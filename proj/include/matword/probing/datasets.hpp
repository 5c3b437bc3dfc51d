#pragma once

#include <algorithm>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "matword/common.hpp"

namespace matword::probing {

enum class Split : std::uint8_t { Train, Test };

inline constexpr double kTrainFraction = 0.8;

/// Labelled sentences for one probing task.
struct ProbeDataset {
  std::string task;
  std::vector<std::vector<TokenId>> sentences;
  std::vector<int> labels;
  std::vector<Split> splits;
  int n_classes = 0;

  std::size_t size() const noexcept { return sentences.size(); }

  std::vector<std::size_t> class_counts(Split split) const {
    std::vector<std::size_t> counts(static_cast<std::size_t>(n_classes), 0);
    for (std::size_t i = 0; i < size(); ++i)
      if (splits[i] == split) ++counts[static_cast<std::size_t>(labels[i])];
    return counts;
  }

  bool operator==(const ProbeDataset&) const = default;
};

namespace detail {

// Stratified 80/20 split: within each class (or group), the first 80% of a
// shuffled order go to train.
template <class Rng>
void assign_stratified_splits(ProbeDataset& ds, Rng& rng) {
  ds.splits.assign(ds.size(), Split::Test);
  for (int c = 0; c < ds.n_classes; ++c) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < ds.size(); ++i)
      if (ds.labels[i] == c) members.push_back(i);
    std::shuffle(members.begin(), members.end(), rng);
    const auto n_train = static_cast<std::size_t>(kTrainFraction * static_cast<double>(members.size()) + 0.5);
    for (std::size_t j = 0; j < n_train && j < members.size(); ++j) ds.splits[members[j]] = Split::Train;
  }
}

}  // namespace detail

/// Word-content task: each sentence holds exactly one of `n_target_words`
/// target words among uniformly drawn filler words; the label names the
/// target. Classes are exactly balanced (up to n_sentences mod classes).
template <class Rng>
ProbeDataset gen_wordcontent(std::size_t vocab_size, std::size_t n_sentences, std::size_t n_target_words,
                             std::size_t sentence_len, Rng& rng) {
  if (sentence_len < 2) throw InvalidArgument("gen_wordcontent: sentence_len must be at least 2");
  if (n_target_words < 2 || n_target_words >= vocab_size)
    throw InvalidArgument("gen_wordcontent: need 2 <= n_target_words < vocab size");
  std::vector<TokenId> ids(vocab_size);
  std::iota(ids.begin(), ids.end(), TokenId{0});
  std::shuffle(ids.begin(), ids.end(), rng);
  const std::vector<TokenId> targets(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_target_words));
  const std::vector<TokenId> fillers(ids.begin() + static_cast<std::ptrdiff_t>(n_target_words), ids.end());

  ProbeDataset ds;
  ds.task = "wordcontent";
  ds.n_classes = static_cast<int>(n_target_words);
  std::vector<int> labels(n_sentences);
  for (std::size_t i = 0; i < n_sentences; ++i) labels[i] = static_cast<int>(i % n_target_words);
  std::shuffle(labels.begin(), labels.end(), rng);
  std::uniform_int_distribution<std::size_t> filler(0, fillers.size() - 1);
  std::uniform_int_distribution<std::size_t> position(0, sentence_len - 1);
  for (int label : labels) {
    std::vector<TokenId> s(sentence_len);
    for (auto& id : s) id = fillers[filler(rng)];
    s[position(rng)] = targets[static_cast<std::size_t>(label)];
    ds.sentences.push_back(std::move(s));
    ds.labels.push_back(label);
  }
  detail::assign_stratified_splits(ds, rng);
  return ds;
}

/// Bigram-shift task. Every usable sentence contributes its original
/// (label 0) and a copy with the tokens at positions p, p+1 swapped
/// (label 1), p uniform over [1, n-2] among positions whose tokens differ.
/// Both copies share a split, so the classes are exactly balanced in each.
/// Sentences shorter than 4 tokens, or without a distinct pair, are skipped.
template <class Rng>
ProbeDataset gen_bigramshift(std::span<const std::vector<TokenId>> sentences, Rng& rng) {
  ProbeDataset ds;
  ds.task = "bigramshift";
  ds.n_classes = 2;
  std::vector<std::size_t> candidates;
  for (const auto& s : sentences) {
    if (s.size() < 4) continue;
    candidates.clear();
    for (std::size_t p = 1; p + 1 < s.size(); ++p)
      if (s[p] != s[p + 1]) candidates.push_back(p);
    if (candidates.empty()) continue;
    std::uniform_int_distribution<std::size_t> pick(0, candidates.size() - 1);
    const std::size_t p = candidates[pick(rng)];
    auto swapped = s;
    std::swap(swapped[p], swapped[p + 1]);
    ds.sentences.push_back(s);
    ds.labels.push_back(0);
    ds.sentences.push_back(std::move(swapped));
    ds.labels.push_back(1);
  }
  if (ds.sentences.empty()) throw InvalidArgument("gen_bigramshift: no sentence of length >= 4");
  const std::size_t pairs = ds.size() / 2;
  std::vector<std::size_t> order(pairs);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_train = static_cast<std::size_t>(kTrainFraction * static_cast<double>(pairs) + 0.5);
  ds.splits.assign(ds.size(), Split::Test);
  for (std::size_t j = 0; j < n_train; ++j) {
    ds.splits[2 * order[j]] = Split::Train;
    ds.splits[2 * order[j] + 1] = Split::Train;
  }
  return ds;
}

/// Length bin edges from length quantiles: edge j is the length at rank
/// floor(j·N/bins), raised when needed so edges strictly increase above the
/// minimum length.
inline std::vector<std::size_t> length_bin_edges(std::vector<std::size_t> lengths, std::size_t n_bins) {
  if (n_bins < 2) throw InvalidArgument("gen_length: n_bins must be at least 2");
  std::sort(lengths.begin(), lengths.end());
  std::vector<std::size_t> distinct = lengths;
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (distinct.size() < n_bins) throw InvalidArgument("gen_length: fewer distinct lengths than bins");
  std::vector<std::size_t> edges;
  std::size_t floor = distinct.front();
  for (std::size_t j = 1; j < n_bins; ++j) {
    std::size_t edge = lengths[j * lengths.size() / n_bins];
    if (edge <= floor) edge = *std::upper_bound(distinct.begin(), distinct.end(), floor);
    // leave room for the remaining bins
    const std::size_t remaining = n_bins - 1 - j;
    const auto pos = static_cast<std::size_t>(std::lower_bound(distinct.begin(), distinct.end(), edge) - distinct.begin());
    if (pos + remaining >= distinct.size()) edge = distinct[distinct.size() - 1 - remaining];
    edges.push_back(edge);
    floor = edge;
  }
  return edges;
}

/// Length task: label = quantile bin of the sentence length.
template <class Rng>
ProbeDataset gen_length(std::span<const std::vector<TokenId>> sentences, std::size_t n_bins, Rng& rng) {
  std::vector<std::size_t> lengths;
  for (const auto& s : sentences)
    if (!s.empty()) lengths.push_back(s.size());
  const auto edges = length_bin_edges(lengths, n_bins);
  ProbeDataset ds;
  ds.task = "length";
  ds.n_classes = static_cast<int>(n_bins);
  for (const auto& s : sentences) {
    if (s.empty()) continue;
    ds.labels.push_back(static_cast<int>(std::upper_bound(edges.begin(), edges.end(), s.size()) - edges.begin()));
    ds.sentences.push_back(s);
  }
  detail::assign_stratified_splits(ds, rng);
  return ds;
}

}  // namespace matword::probing
