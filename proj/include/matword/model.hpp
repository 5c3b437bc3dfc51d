#pragma once

#include <algorithm>
#include <vector>

#include "matword/encoder.hpp"
#include "matword/table.hpp"

namespace matword {

/// Input tables (one, or Sum then Product for Hybrid) plus the shared
/// output table, which is empty for encode-only models. Padding id is
/// `vocab_size()`.
template <class T>
struct Model {
  EncoderSpec spec;
  std::vector<WordMatrixTable<T>> inputs;
  OutputTable<T> output;

  std::size_t vocab_size() const noexcept { return inputs.empty() ? 0 : inputs.front().rows(); }
  TokenId padding_id() const noexcept { return static_cast<TokenId>(vocab_size()); }

  SentenceEmbedding<T> encode(std::span<const TokenId> ids) const { return matword::encode(inputs, spec, ids); }

  bool all_finite() const {
    for (const auto& t : inputs)
      if (!t.all_finite()) return false;
    return output.all_finite();
  }

  bool operator==(const Model&) const = default;
};

/// Initialisation per aggregation. CBOW tables start near zero, CMOW tables
/// near the identity.
struct ModelInit {
  InitOptions sum{InitStrategy::PlainNormal, 0.1};
  InitOptions product{InitStrategy::IdentityOffset, 0.1};
};

/// Builds a model with initialised input tables and a zero output table.
template <class T, class Rng>
Model<T> make_model(std::size_t vocab_size, const EncoderSpec& spec, const ModelInit& init, Rng& rng) {
  spec.validate();
  Model<T> model;
  model.spec = spec;
  for (std::size_t t = 0; t < spec.table_count(); ++t) {
    const auto& opts = spec.table_mode(t) == Mode::Sum ? init.sum : init.product;
    model.inputs.push_back(init_table<T>(vocab_size, spec.side(t), opts, rng));
  }
  model.output = OutputTable<T>(vocab_size, spec.dimension());
  return model;
}

/// Converts scalar type (e.g. a float model to double for gradient checks).
template <class To, class From>
Model<To> model_cast(const Model<From>& src) {
  Model<To> dst;
  dst.spec = src.spec;
  for (const auto& t : src.inputs) {
    WordMatrixTable<To> out(t.rows(), t.side());
    std::ranges::transform(t.data(), out.data().begin(), [](From x) { return static_cast<To>(x); });
    dst.inputs.push_back(std::move(out));
  }
  dst.output = OutputTable<To>(src.output.rows(), src.output.width());
  std::ranges::transform(src.output.data(), dst.output.data().begin(), [](From x) { return static_cast<To>(x); });
  return dst;
}

}  // namespace matword
