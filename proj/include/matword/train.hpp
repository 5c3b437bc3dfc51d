#pragma once

#include <cmath>
#include <filesystem>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <ostream>
#include <random>
#include <vector>

#include "json.hpp"

#include "matword/adam.hpp"
#include "matword/batches.hpp"
#include "matword/common.hpp"
#include "matword/corpus.hpp"
#include "matword/gradients.hpp"
#include "matword/log.hpp"
#include "matword/loss.hpp"
#include "matword/model.hpp"
#include "matword/noise.hpp"
#include "matword/parallel.hpp"
#include "matword/vocabulary.hpp"

namespace matword {

struct TrainConfig {
  std::size_t negatives = 20;  // k
  AdamConfig adam;
  std::size_t window = 5;  // c
  TargetMode target_mode = TargetMode::Random;
  std::size_t validate_every = 1000;  // optimiser steps between validations
  std::size_t patience = 10;
  std::uint64_t seed = 1;
  std::size_t sentences_per_batch = 1024;
  std::size_t samples_per_sentence = 30;
  std::size_t threads = 1;      // 0 = hardware concurrency
  std::size_t max_updates = 0;  // 0 = until early stopping
  double validation_fraction = kDefaultValidationFraction;

  BatchOptions batch_options() const {
    return {window, samples_per_sentence, sentences_per_batch, negatives, target_mode};
  }

  void validate() const {
    if (!(adam.lr >= 0.0) || !(adam.beta1 >= 0.0 && adam.beta1 < 1.0) || !(adam.beta2 >= 0.0 && adam.beta2 < 1.0) ||
        !(adam.eps > 0.0))
      throw InvalidArgument("train config: invalid Adam parameters");
    if (patience < 1) throw InvalidArgument("train config: patience must be at least 1");
    if (validate_every < 1) throw InvalidArgument("train config: validate_every must be at least 1");
    if (window < 1 || negatives < 1) throw InvalidArgument("train config: window and negatives must be positive");
    if (!(validation_fraction > 0.0 && validation_fraction < 1.0))
      throw InvalidArgument("train config: validation_fraction must be in (0, 1)");
  }
};

/// One validation event.
struct TrainLogRecord {
  std::size_t update = 0;
  double train_loss = std::numeric_limits<double>::quiet_NaN();  // EMA; NaN before the first step
  double val_loss = 0.0;
  double best = 0.0;  // best validation loss so far

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["update"] = update;
    j["train_loss"] = std::isfinite(train_loss) ? nlohmann::json(train_loss) : nlohmann::json(nullptr);
    j["val_loss"] = val_loss;
    j["best"] = best;
    return j;
  }
};

struct TrainResult {
  Model<float> model;  // best validation snapshot
  std::vector<TrainLogRecord> log;
  std::size_t updates = 0;
  bool early_stopped = false;
};

/// Fixed validation windows and negatives, so successive validations are
/// comparable.
struct ValidationSet {
  TrainingBatch batch;

  static ValidationSet build(const std::vector<std::vector<TokenId>>& sentences, const NoiseDistribution& noise,
                             TokenId pad_id, const BatchOptions& opts, std::uint64_t seed) {
    ValidationSet set;
    std::mt19937_64 rng(seed);
    set.batch.k = opts.negatives;
    for (const auto& s : sentences) append_sentence_samples(s, opts, pad_id, rng, set.batch.samples);
    if (set.batch.samples.empty()) throw InvalidArgument("empty validation split");
    set.batch.negatives.resize(set.batch.samples.size() * set.batch.k);
    for (auto& id : set.batch.negatives) id = noise.sample(rng);
    return set;
  }
};

/// Samples handled per gradient chunk. Chunks are merged in index order, so
/// results do not depend on the thread count.
inline constexpr std::size_t kGradientChunk = 256;

/// Mean loss over a batch; optionally accumulates the mean gradient.
template <class T>
class BatchEvaluator {
 public:
  explicit BatchEvaluator(ThreadPool* pool) : pool_(pool) {}

  T mean_loss(const Model<T>& model, const TrainingBatch& batch) { return run(model, batch, nullptr); }

  T mean_loss_and_gradient(const Model<T>& model, const TrainingBatch& batch, Gradients<T>& out) {
    return run(model, batch, &out);
  }

 private:
  T run(const Model<T>& model, const TrainingBatch& batch, Gradients<T>* out) {
    const std::size_t n = batch.size();
    if (n == 0) throw InvalidArgument("batch evaluator: empty batch");
    const std::size_t chunks = (n + kGradientChunk - 1) / kGradientChunk;
    if (chunk_grads_.size() < chunks) chunk_grads_.resize(chunks);
    if (workspaces_.size() < chunks) workspaces_.resize(chunks);
    chunk_loss_.assign(chunks, T(0));
    const T weight = T(1) / static_cast<T>(n);
    for_each_index(pool_, chunks, [&](std::size_t c) {
      Gradients<T>* g = nullptr;
      if (out) {
        if (chunk_grads_[c].inputs.size() != model.inputs.size()) chunk_grads_[c] = Gradients<T>(model);
        chunk_grads_[c].clear();
        g = &chunk_grads_[c];
      }
      T sum = 0;
      const std::size_t end = std::min(n, (c + 1) * kGradientChunk);
      for (std::size_t i = c * kGradientChunk; i < end; ++i) {
        const auto& s = batch.samples[i];
        sum += accumulate_sample_loss(model, s.context_ids, s.target_id, batch.negatives_for(i), g, weight,
                                      workspaces_[c]);
      }
      chunk_loss_[c] = sum;
    });
    T total = 0;
    for (std::size_t c = 0; c < chunks; ++c) total += chunk_loss_[c];
    if (out) {
      *out = Gradients<T>(model);
      for (std::size_t c = 0; c < chunks; ++c) out->add(chunk_grads_[c]);
    }
    return total / static_cast<T>(n);
  }

  ThreadPool* pool_;
  std::vector<Gradients<T>> chunk_grads_;
  std::vector<LossWorkspace<T>> workspaces_;
  std::vector<T> chunk_loss_;
};

/// Optional hooks for the training loop.
struct TrainObserver {
  std::ostream* log_jsonl = nullptr;  // one JSON record per validation
  std::function<void(const TrainLogRecord&)> on_validation;
};

/// Trains with one Adam step per batch until `patience` consecutive
/// validations fail to improve (or `max_updates`). Validation runs before
/// the first step and every `validate_every` steps. Returns the best
/// snapshot.
inline TrainResult train(const EncodedCorpus& corpus, const Vocabulary& vocab, const EncoderSpec& spec,
                         const TrainConfig& config, const ModelInit& init = {}, const TrainObserver& observer = {}) {
  config.validate();
  spec.validate();
  if (corpus.validation.empty()) throw InvalidArgument("empty validation split");

  const auto noise = std::make_shared<const NoiseDistribution>(vocab);
  const auto opts = config.batch_options();
  const TokenId pad = vocab.padding_id();

  std::mt19937_64 init_rng(split_seed(config.seed, 1));
  Model<float> model = make_model<float>(vocab.size(), spec, init, init_rng);
  AdamState<float> adam(model);
  const auto validation =
      ValidationSet::build(corpus.validation, *noise, pad, opts, split_seed(config.seed, 2));
  BatchStream stream(std::make_shared<const BatchStream::Sentences>(corpus.train), noise, pad, opts,
                     split_seed(config.seed, 3));

  std::optional<ThreadPool> pool;
  const std::size_t threads = config.threads ? config.threads : default_thread_count();
  if (threads > 1) pool.emplace(threads);
  BatchEvaluator<float> evaluator(pool ? &*pool : nullptr);

  TrainResult result;
  double ema = std::numeric_limits<double>::quiet_NaN();
  double best = std::numeric_limits<double>::infinity();
  std::size_t stale = 0;

  const auto validate = [&](std::size_t update) {
    const double val = evaluator.mean_loss(model, validation.batch);
    const bool improved = val < best;
    if (improved) {
      best = val;
      result.model = model;
      stale = 0;
    } else {
      ++stale;
    }
    TrainLogRecord rec{update, ema, val, best};
    result.log.push_back(rec);
    if (observer.log_jsonl) *observer.log_jsonl << rec.to_json().dump() << '\n' << std::flush;
    if (observer.on_validation) observer.on_validation(rec);
    log::info("update ", update, " train ", ema, " val ", val, improved ? " *" : "");
  };

  validate(0);
  Gradients<float> grads(model);
  for (std::size_t update = 1;; ++update) {
    const TrainingBatch batch = stream.next();
    const double loss = evaluator.mean_loss_and_gradient(model, batch, grads);
    apply_adam(model, grads, adam, config.adam);
    ema = std::isfinite(ema) ? 0.95 * ema + 0.05 * loss : loss;
    result.updates = update;
    if (update % config.validate_every == 0) {
      validate(update);
      if (stale >= config.patience) {
        result.early_stopped = true;
        break;
      }
    }
    if (config.max_updates && update >= config.max_updates) break;
  }
  if (!result.model.all_finite()) throw NumericError("training produced non-finite parameters");
  return result;
}

inline TrainResult train(const std::filesystem::path& corpus_path, const Vocabulary& vocab, const EncoderSpec& spec,
                         const TrainConfig& config, const ModelInit& init = {}, const TrainObserver& observer = {}) {
  return train(EncodedCorpus::from_file(corpus_path, vocab, config.validation_fraction), vocab, spec, config, init,
               observer);
}

/// Joint CBOW (side d1) + CMOW (side d2) model with one shared output table.
inline TrainResult train_hybrid(const std::filesystem::path& corpus_path, const Vocabulary& vocab, std::size_t d1,
                                std::size_t d2, const TrainConfig& config, const ModelInit& init = {},
                                const TrainObserver& observer = {}) {
  return train(corpus_path, vocab, EncoderSpec{Mode::Hybrid, d1, d2}, config, init, observer);
}

}  // namespace matword
