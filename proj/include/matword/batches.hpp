#pragma once

#include <algorithm>
#include <filesystem>
#include <memory>
#include <numeric>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include "matword/common.hpp"
#include "matword/corpus.hpp"
#include "matword/noise.hpp"
#include "matword/vocabulary.hpp"

namespace matword {

/// Which window slot becomes the prediction target.
enum class TargetMode { Center, Random };

inline std::string_view to_string(TargetMode m) noexcept {
  return m == TargetMode::Center ? "center" : "random";
}

/// One window: 2c context slots (sentence order, target slot removed) and
/// the target id. Padding slots hold the vocabulary's padding id.
struct TrainingSample {
  std::vector<TokenId> context_ids;
  TokenId target_id = 0;
  std::vector<bool> pad_mask;

  bool operator==(const TrainingSample&) const = default;
};

/// Samples plus `k` negatives per sample, stored row-wise.
struct TrainingBatch {
  std::vector<TrainingSample> samples;
  std::vector<TokenId> negatives;
  std::size_t k = 0;

  std::span<const TokenId> negatives_for(std::size_t i) const {
    return std::span<const TokenId>(negatives).subspan(i * k, k);
  }
  std::size_t size() const noexcept { return samples.size(); }

  bool operator==(const TrainingBatch&) const = default;
};

struct BatchOptions {
  std::size_t window = 5;                 // c
  std::size_t samples_per_sentence = 30;  // center words drawn per sentence
  std::size_t sentences_per_batch = 1024;
  std::size_t negatives = 20;             // k
  TargetMode target_mode = TargetMode::Random;
};

/// Builds the window centred at `center` with padding outside the sentence.
/// `target_slot` indexes the 2c+1 window slots; the rest form the context.
inline TrainingSample window_sample(std::span<const TokenId> sentence, std::size_t center,
                                    std::size_t window, std::size_t target_slot, TokenId pad_id) {
  TrainingSample s;
  s.context_ids.reserve(2 * window);
  s.pad_mask.reserve(2 * window);
  const auto n = static_cast<std::ptrdiff_t>(sentence.size());
  for (std::size_t slot = 0; slot <= 2 * window; ++slot) {
    const auto pos = static_cast<std::ptrdiff_t>(center + slot) - static_cast<std::ptrdiff_t>(window);
    const bool inside = pos >= 0 && pos < n;
    const TokenId id = inside ? sentence[static_cast<std::size_t>(pos)] : pad_id;
    if (slot == target_slot) {
      s.target_id = id;
      continue;
    }
    s.context_ids.push_back(id);
    s.pad_mask.push_back(!inside);
  }
  return s;
}

/// Chooses a target slot: the centre, or uniformly among non-padding slots.
template <class Rng>
std::size_t choose_target_slot(std::size_t sentence_len, std::size_t center, std::size_t window,
                               TargetMode mode, Rng& rng) {
  if (mode == TargetMode::Center) return window;
  const std::size_t first = center >= window ? 0 : window - center;
  const std::size_t last = std::min(2 * window, window + (sentence_len - 1 - center));
  std::uniform_int_distribution<std::size_t> slot(first, last);
  return slot(rng);
}

/// Appends up to `samples_per_sentence` windows of one sentence to `out`.
/// Centre positions are drawn without replacement.
template <class Rng>
void append_sentence_samples(std::span<const TokenId> sentence, const BatchOptions& opts,
                             TokenId pad_id, Rng& rng, std::vector<TrainingSample>& out) {
  if (sentence.size() < 2) return;
  std::vector<std::size_t> positions(sentence.size());
  std::iota(positions.begin(), positions.end(), std::size_t{0});
  const std::size_t take = std::min(opts.samples_per_sentence, positions.size());
  for (std::size_t i = 0; i < take; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, positions.size() - 1);
    std::swap(positions[i], positions[pick(rng)]);
    const std::size_t center = positions[i];
    const std::size_t slot = choose_target_slot(sentence.size(), center, opts.window, opts.target_mode, rng);
    out.push_back(window_sample(sentence, center, opts.window, slot, pad_id));
  }
}

/// Endless, seed-reproducible stream of batches. Sentence order is a fresh
/// seeded shuffle every epoch.
class BatchStream {
 public:
  using Sentences = std::vector<std::vector<TokenId>>;

  BatchStream(std::shared_ptr<const Sentences> sentences, std::shared_ptr<const NoiseDistribution> noise,
              TokenId pad_id, BatchOptions opts, std::uint64_t seed)
      : sentences_(std::move(sentences)),
        noise_(std::move(noise)),
        pad_id_(pad_id),
        opts_(opts),
        rng_(seed) {
    if (opts_.window < 1) throw InvalidArgument("batches: window radius must be at least 1");
    if (opts_.negatives < 1) throw InvalidArgument("batches: need at least one negative");
    if (opts_.sentences_per_batch < 1 || opts_.samples_per_sentence < 1)
      throw InvalidArgument("batches: batch sizes must be positive");
    for (const auto& s : *sentences_)
      if (s.size() >= 2) usable_.push_back(static_cast<std::size_t>(&s - sentences_->data()));
    if (usable_.empty()) throw InvalidArgument("batches: no sentence has two in-vocabulary tokens");
    reshuffle();
  }

  TrainingBatch next() {
    TrainingBatch batch;
    batch.k = opts_.negatives;
    for (std::size_t taken = 0; taken < opts_.sentences_per_batch && taken < usable_.size(); ++taken) {
      if (cursor_ == usable_.size()) {
        ++epoch_;
        reshuffle();
      }
      append_sentence_samples((*sentences_)[usable_[cursor_++]], opts_, pad_id_, rng_, batch.samples);
    }
    batch.negatives.resize(batch.samples.size() * batch.k);
    for (auto& id : batch.negatives) id = noise_->sample(rng_);
    return batch;
  }

  /// Number of completed passes over the sentences.
  std::size_t epoch() const noexcept { return epoch_; }
  const BatchOptions& options() const noexcept { return opts_; }

 private:
  void reshuffle() {
    std::shuffle(usable_.begin(), usable_.end(), rng_);
    cursor_ = 0;
  }

  std::shared_ptr<const Sentences> sentences_;
  std::shared_ptr<const NoiseDistribution> noise_;
  std::vector<std::size_t> usable_;
  TokenId pad_id_;
  BatchOptions opts_;
  std::mt19937_64 rng_;
  std::size_t cursor_ = 0;
  std::size_t epoch_ = 0;
};

/// Loads the training split of a corpus file and returns its batch stream.
inline BatchStream make_batches(const std::filesystem::path& corpus_path, const Vocabulary& vocab,
                                BatchOptions opts, std::uint64_t seed,
                                double validation_fraction = kDefaultValidationFraction) {
  auto corpus = EncodedCorpus::from_file(corpus_path, vocab, validation_fraction);
  return BatchStream(std::make_shared<const BatchStream::Sentences>(std::move(corpus.train)),
                     std::make_shared<const NoiseDistribution>(vocab), vocab.padding_id(), opts, seed);
}

}  // namespace matword
