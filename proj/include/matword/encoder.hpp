#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <ranges>
#include <type_traits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "matword/common.hpp"
#include "matword/parallel.hpp"
#include "matword/table.hpp"

namespace matword {

/// Aggregation applied to the word matrices of a sequence.
enum class Mode : std::uint8_t { Sum = 0, Product = 1, Hybrid = 2 };

inline std::string_view to_string(Mode m) noexcept {
  switch (m) {
    case Mode::Sum: return "cbow";
    case Mode::Product: return "cmow";
    case Mode::Hybrid: return "hybrid";
  }
  return "?";
}

inline Mode parse_mode(std::string_view name) {
  if (name == "cbow" || name == "sum") return Mode::Sum;
  if (name == "cmow" || name == "product") return Mode::Product;
  if (name == "hybrid") return Mode::Hybrid;
  throw InvalidArgument("unknown mode '" + std::string(name) + "'");
}

/// Mode plus matrix sides. Sum and Product use `d1`; Hybrid pairs a Sum
/// table of side `d1` with a Product table of side `d2`.
struct EncoderSpec {
  Mode mode = Mode::Product;
  std::size_t d1 = 20;
  std::size_t d2 = 0;

  std::size_t table_count() const noexcept { return mode == Mode::Hybrid ? 2 : 1; }
  std::size_t side(std::size_t table) const noexcept { return table == 0 ? d1 : d2; }
  Mode table_mode(std::size_t table) const noexcept {
    if (mode == Mode::Hybrid) return table == 0 ? Mode::Sum : Mode::Product;
    return mode;
  }
  /// Flattened embedding length.
  std::size_t dimension() const noexcept { return mode == Mode::Hybrid ? d1 * d1 + d2 * d2 : d1 * d1; }

  void validate() const {
    if (d1 < 1) throw InvalidArgument("encoder spec: d1 must be at least 1");
    if (mode == Mode::Hybrid && d2 < 1) throw InvalidArgument("encoder spec: hybrid needs d2 >= 1");
    if (mode != Mode::Hybrid && d2 != 0) throw InvalidArgument("encoder spec: d2 is only valid for hybrid");
  }

  bool operator==(const EncoderSpec&) const = default;
};

template <class T>
using SentenceEmbedding = std::vector<T>;

/// Appends the column-major flattening of `m`.
template <class Out, class Derived>
void append_flattened(std::vector<Out>& out, const Eigen::MatrixBase<Derived>& m) {
  for (Eigen::Index c = 0; c < m.cols(); ++c)
    for (Eigen::Index r = 0; r < m.rows(); ++r) out.push_back(static_cast<Out>(m(r, c)));
}

template <class T>
bool is_padding(const WordMatrixTable<T>& table, TokenId id) {
  if (id > table.rows()) throw InvalidArgument("id out of range: " + std::to_string(id));
  return id == table.rows();
}

/// Aggregated d×d matrix for one table. Padding ids (== rows) contribute the
/// neutral element: zero for Sum, identity for Product. The product starts
/// from the first real matrix, so a single word reproduces its matrix bits.
template <class Acc, class T>
Matrix<Acc> aggregate(const WordMatrixTable<T>& table, Mode mode, std::span<const TokenId> ids) {
  const auto d = static_cast<Eigen::Index>(table.side());
  if (mode == Mode::Sum) {
    Matrix<Acc> acc = Matrix<Acc>::Zero(d, d);
    for (TokenId id : ids)
      if (!is_padding(table, id)) acc += table.view(id).template cast<Acc>();
    return acc;
  }
  Matrix<Acc> acc;
  bool started = false;
  for (TokenId id : ids) {
    if (is_padding(table, id)) continue;
    if (!started) {
      acc = table.view(id).template cast<Acc>();
      started = true;
    } else {
      acc = (acc * table.view(id).template cast<Acc>()).eval();
    }
  }
  if (!started) acc = Matrix<Acc>::Identity(d, d);
  return acc;
}

template <class Acc, class T>
using AccumulatorFor = std::conditional_t<std::is_void_v<Acc>, T, Acc>;

/// Sentence embedding: flatten(aggregate) per table, concatenated for Hybrid.
/// `tables` is any contiguous range of WordMatrixTable; `Acc` overrides the
/// accumulation type (defaults to the table's scalar).
template <class Acc = void, class Tables>
auto encode(const Tables& tables, const EncoderSpec& spec, std::span<const TokenId> ids) {
  using T = typename std::ranges::range_value_t<Tables>::value_type;
  using A = AccumulatorFor<Acc, T>;
  if (std::ranges::size(tables) != spec.table_count()) throw InvalidArgument("encode: wrong number of tables");
  SentenceEmbedding<A> out;
  out.reserve(spec.dimension());
  std::size_t t = 0;
  for (const auto& table : tables) append_flattened(out, aggregate<A>(table, spec.table_mode(t++), ids));
  return out;
}

/// Product aggregate by balanced pairwise reduction: ceil(log2 n) levels,
/// each level's multiplications independent. Runs the levels on `pool` when
/// given and the level is at least `min_parallel_pairs` wide.
template <class Acc, class T>
Matrix<Acc> tree_product(const WordMatrixTable<T>& table, std::span<const TokenId> ids, ThreadPool* pool = nullptr,
                         std::size_t min_parallel_pairs = 8) {
  const auto d = static_cast<Eigen::Index>(table.side());
  std::vector<Matrix<Acc>> level;
  level.reserve(ids.size());
  for (TokenId id : ids)
    if (!is_padding(table, id)) level.emplace_back(table.view(id).template cast<Acc>());
  if (level.empty()) return Matrix<Acc>::Identity(d, d);
  std::vector<Matrix<Acc>> next;
  while (level.size() > 1) {
    const std::size_t pairs = level.size() / 2;
    next.resize(pairs + level.size() % 2);
    auto multiply = [&](std::size_t i) { next[i].noalias() = level[2 * i] * level[2 * i + 1]; };
    for_each_index(pairs >= min_parallel_pairs ? pool : nullptr, pairs, multiply);
    if (level.size() % 2) next.back() = std::move(level.back());
    std::swap(level, next);
  }
  return std::move(level.front());
}

/// Product-mode embedding through `tree_product`.
template <class Acc = void, class T>
auto encode_parallel(const WordMatrixTable<T>& table, std::span<const TokenId> ids, ThreadPool* pool = nullptr) {
  using A = AccumulatorFor<Acc, T>;
  SentenceEmbedding<A> out;
  out.reserve(table.matrix_size());
  append_flattened(out, tree_product<A>(table, ids, pool));
  return out;
}

}  // namespace matword
