#pragma once

#include <chrono>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "matword/encoder.hpp"
#include "matword/model.hpp"
#include "matword/parallel.hpp"

namespace matword {

struct BenchEntry {
  std::string variant;  // sum | product_sequential | product_parallel
  double seconds = 0.0;
  double sentences_per_second = 0.0;

  bool operator==(const BenchEntry&) const = default;
};

struct BenchReport {
  std::size_t sentences = 0;
  std::size_t threads = 1;
  std::size_t mean_length = 0;
  std::vector<BenchEntry> results;

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["sentences"] = sentences;
    j["threads"] = threads;
    j["mean_length"] = mean_length;
    j["results"] = nlohmann::json::array();
    for (const auto& r : results)
      j["results"].push_back({{"variant", r.variant}, {"seconds", r.seconds}, {"sentences_per_second", r.sentences_per_second}});
    return j;
  }

  static BenchReport from_json(const nlohmann::json& j) {
    BenchReport r;
    r.sentences = j.at("sentences").get<std::size_t>();
    r.threads = j.at("threads").get<std::size_t>();
    r.mean_length = j.at("mean_length").get<std::size_t>();
    for (const auto& e : j.at("results"))
      r.results.push_back({e.at("variant").get<std::string>(), e.at("seconds").get<double>(),
                           e.at("sentences_per_second").get<double>()});
    return r;
  }

  const BenchEntry* find(std::string_view variant) const {
    for (const auto& r : results)
      if (r.variant == variant) return &r;
    return nullptr;
  }

  bool operator==(const BenchReport&) const = default;
};

/// Wall-clock encoding throughput of the three encoder variants. Sum and
/// sequential product spread sentences over the pool; the parallel product
/// runs each sentence's reduction tree levels on the pool. The Sum variant
/// uses the model's Sum table if it has one, the product variants its
/// Product table; otherwise the first table.
template <class T>
BenchReport throughput_bench(const Model<T>& model, std::span<const std::vector<TokenId>> sentences,
                             std::size_t threads) {
  if (sentences.empty()) throw InvalidArgument("throughput_bench: no sentences");
  const auto table_for = [&](Mode mode) -> const WordMatrixTable<T>& {
    for (std::size_t t = 0; t < model.inputs.size(); ++t)
      if (model.spec.table_mode(t) == mode) return model.inputs[t];
    return model.inputs.front();
  };
  const auto& sum_table = table_for(Mode::Sum);
  const auto& product_table = table_for(Mode::Product);
  std::optional<ThreadPool> pool;
  if (threads > 1) pool.emplace(threads);
  ThreadPool* p = pool ? &*pool : nullptr;

  BenchReport report;
  report.sentences = sentences.size();
  report.threads = std::max<std::size_t>(1, threads);
  std::size_t total = 0;
  for (const auto& s : sentences) total += s.size();
  report.mean_length = total / sentences.size();

  volatile T sink = 0;
  const auto time = [&](const std::string& name, auto&& body) {
    const auto start = std::chrono::steady_clock::now();
    body();
    const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - start;
    const double secs = std::max(dt.count(), 1e-9);
    report.results.push_back({name, secs, static_cast<double>(sentences.size()) / secs});
  };
  std::vector<T> first(sentences.size());
  const std::size_t blocks = std::min<std::size_t>(sentences.size(), 64 * report.threads);
  const auto by_block = [&](auto&& per_sentence) {
    for_each_index(p, blocks, [&](std::size_t b) {
      for (std::size_t i = b; i < sentences.size(); i += blocks) per_sentence(i);
    });
  };
  time("sum", [&] {
    by_block([&](std::size_t i) { first[i] = aggregate<T>(sum_table, Mode::Sum, sentences[i])(0, 0); });
  });
  time("product_sequential", [&] {
    by_block([&](std::size_t i) { first[i] = aggregate<T>(product_table, Mode::Product, sentences[i])(0, 0); });
  });
  time("product_parallel", [&] {
    for (std::size_t i = 0; i < sentences.size(); ++i) first[i] = tree_product<T>(product_table, sentences[i], p)(0, 0);
  });
  for (T x : first) sink = sink + x;
  return report;
}

}  // namespace matword
