#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "matword/common.hpp"
#include "matword/gradients.hpp"
#include "matword/model.hpp"

namespace matword {

struct AdamConfig {
  double lr = 0.0003;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Moments for one row-structured parameter table. Moments and the bias
/// correction step advance only for rows present in a gradient (lazy Adam),
/// so each row follows dense Adam over the steps that touched it.
template <class T>
struct AdamSlots {
  std::size_t width = 0;
  std::vector<T> first_moment;
  std::vector<T> second_moment;
  std::vector<std::uint64_t> row_steps;

  AdamSlots() = default;
  AdamSlots(std::size_t rows, std::size_t w)
      : width(w), first_moment(rows * w, T(0)), second_moment(rows * w, T(0)), row_steps(rows, 0) {}

  bool operator==(const AdamSlots&) const = default;
};

template <class T>
struct AdamState {
  std::vector<AdamSlots<T>> inputs;
  AdamSlots<T> output;
  std::uint64_t step_count = 0;

  AdamState() = default;
  explicit AdamState(const Model<T>& model) : output(model.output.rows(), model.output.width()) {
    for (const auto& t : model.inputs) inputs.emplace_back(t.rows(), t.matrix_size());
  }

  bool operator==(const AdamState&) const = default;
};

/// Applies one Adam step to the rows of `params` listed in `grads`.
template <class T>
void apply_adam_rows(std::span<T> params, const RowGradients<T>& grads, AdamSlots<T>& slots, const AdamConfig& cfg) {
  if (grads.width() != slots.width) throw InvalidArgument("apply_adam: gradient width mismatch");
  const std::size_t w = slots.width;
  for (std::size_t i = 0; i < grads.size(); ++i) {
    const TokenId row = grads.rows()[i];
    if ((row + 1) * w > params.size()) throw InvalidArgument("apply_adam: row out of range");
    const auto g = grads.at(i);
    const std::uint64_t step = ++slots.row_steps[row];
    const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
    const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
    T* p = params.data() + row * w;
    T* m = slots.first_moment.data() + row * w;
    T* v = slots.second_moment.data() + row * w;
    for (std::size_t j = 0; j < w; ++j) {
      const double gj = static_cast<double>(g[j]);
      const double mj = cfg.beta1 * static_cast<double>(m[j]) + (1.0 - cfg.beta1) * gj;
      const double vj = cfg.beta2 * static_cast<double>(v[j]) + (1.0 - cfg.beta2) * gj * gj;
      m[j] = static_cast<T>(mj);
      v[j] = static_cast<T>(vj);
      p[j] = static_cast<T>(static_cast<double>(p[j]) - cfg.lr * (mj / c1) / (std::sqrt(vj / c2) + cfg.eps));
    }
  }
}

/// One optimiser step over every table of `model`.
template <class T>
void apply_adam(Model<T>& model, const Gradients<T>& grads, AdamState<T>& state, const AdamConfig& cfg) {
  if (grads.inputs.size() != model.inputs.size() || state.inputs.size() != model.inputs.size())
    throw InvalidArgument("apply_adam: table count mismatch");
  for (std::size_t t = 0; t < model.inputs.size(); ++t)
    apply_adam_rows(model.inputs[t].data(), grads.inputs[t], state.inputs[t], cfg);
  apply_adam_rows(model.output.data(), grads.output, state.output, cfg);
  ++state.step_count;
}

}  // namespace matword
