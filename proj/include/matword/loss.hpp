#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <span>
#include <sstream>
#include <vector>

#include "matword/common.hpp"
#include "matword/encoder.hpp"
#include "matword/gradients.hpp"
#include "matword/model.hpp"

namespace matword {

/// log(1 + exp(x)) without overflow.
template <class T>
T softplus(T x) noexcept {
  return std::max(x, T(0)) + std::log1p(std::exp(-std::abs(x)));
}

template <class T>
T sigmoid(T x) noexcept {
  if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

/// Scratch buffers reused across samples by one thread.
template <class T>
struct LossWorkspace {
  std::vector<std::vector<TokenId>> words;  // non-padding ids per table
  std::vector<std::vector<Matrix<T>>> prefix;
  std::vector<std::vector<Matrix<T>>> suffix;
  std::vector<T> h;
  std::vector<T> grad_h;
  std::vector<T> scores;
  Matrix<T> tmp;
};

namespace detail {

template <class T>
std::string describe_sample(std::span<const TokenId> context, TokenId target, std::span<const TokenId> negatives) {
  std::ostringstream os;
  os << "non-finite loss for sample context=[";
  for (std::size_t i = 0; i < context.size(); ++i) os << (i ? "," : "") << context[i];
  os << "] target=" << target << " negatives=[";
  for (std::size_t i = 0; i < negatives.size(); ++i) os << (i ? "," : "") << negatives[i];
  os << "]";
  return os.str();
}

}  // namespace detail

/// Negative-sampling loss of one window:
///
///   -log σ(v_target · h) - Σ_i log σ(-v_neg_i · h),  h = encode(context).
///
/// When `grads` is non-null, adds `weight` times the gradient of the loss to
/// it. Sum words receive the unflattened ∂L/∂h; the j-th word of a product
/// chain receives Pⱼ₋₁ᵀ · G · Sⱼ₊₁ᵀ with P/S the prefix/suffix products.
/// Repeated words and repeated negatives accumulate. Padding ids are skipped.
template <class T>
T accumulate_sample_loss(const Model<T>& model, std::span<const TokenId> context, TokenId target,
                         std::span<const TokenId> negatives, Gradients<T>* grads, T weight,
                         LossWorkspace<T>& ws) {
  const auto& spec = model.spec;
  const std::size_t tables = model.inputs.size();
  const std::size_t dim = spec.dimension();
  ws.words.resize(tables);
  ws.prefix.resize(tables);
  ws.suffix.resize(tables);
  ws.h.resize(dim);

  // forward
  std::size_t offset = 0;
  for (std::size_t t = 0; t < tables; ++t) {
    const auto& table = model.inputs[t];
    const auto d = static_cast<Eigen::Index>(table.side());
    auto& words = ws.words[t];
    words.clear();
    for (TokenId id : context)
      if (!is_padding(table, id)) words.push_back(id);
    const std::size_t n = words.size();
    Eigen::Map<Matrix<T>> h_block(ws.h.data() + offset, d, d);  // column-major == flatten order
    if (spec.table_mode(t) == Mode::Sum) {
      h_block.setZero();
      for (TokenId id : words) h_block += table.view(id);
    } else {
      // prefix[j] = M_1 ... M_j (prefix[0] = I); suffix[j] = M_{j+1} ... M_n (suffix[n] = I)
      auto& prefix = ws.prefix[t];
      auto& suffix = ws.suffix[t];
      prefix.resize(n + 1);
      suffix.resize(n + 1);
      prefix[0].setIdentity(d, d);
      for (std::size_t j = 0; j < n; ++j) {
        if (j == 0)
          prefix[1] = table.view(words[0]);
        else
          prefix[j + 1].noalias() = prefix[j] * table.view(words[j]);
      }
      suffix[n].setIdentity(d, d);
      for (std::size_t j = n; j-- > 0;) {
        if (j + 1 == n)
          suffix[j] = table.view(words[j]);
        else
          suffix[j].noalias() = table.view(words[j]) * suffix[j + 1];
      }
      h_block = prefix[n];
    }
    offset += table.matrix_size();
  }

  // scores and loss
  if (target >= model.output.rows()) throw InvalidArgument("sample_loss: target id out of range");
  const Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> h(ws.h.data(), static_cast<Eigen::Index>(dim));
  const auto out_row = [&](TokenId id) {
    if (id >= model.output.rows()) throw InvalidArgument("sample_loss: negative id out of range");
    return Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>>(model.output.row(id).data(),
                                                                 static_cast<Eigen::Index>(dim));
  };
  ws.scores.resize(negatives.size() + 1);
  ws.scores[0] = out_row(target).dot(h);
  T loss = softplus(-ws.scores[0]);
  for (std::size_t i = 0; i < negatives.size(); ++i) {
    ws.scores[i + 1] = out_row(negatives[i]).dot(h);
    loss += softplus(ws.scores[i + 1]);
  }
  if (!std::isfinite(loss)) throw NumericError(detail::describe_sample<T>(context, target, negatives));
  if (!grads) return loss;

  // backward: coefficients dL/ds
  ws.grad_h.assign(dim, T(0));
  Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>> grad_h(ws.grad_h.data(), static_cast<Eigen::Index>(dim));
  const auto touch_output = [&](TokenId id, T coef) {
    grad_h += coef * out_row(id);
    auto g = grads->output.row(id);
    Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>>(g.data(), static_cast<Eigen::Index>(dim)) += (weight * coef) * h;
  };
  touch_output(target, sigmoid(ws.scores[0]) - T(1));
  for (std::size_t i = 0; i < negatives.size(); ++i) touch_output(negatives[i], sigmoid(ws.scores[i + 1]));

  offset = 0;
  for (std::size_t t = 0; t < tables; ++t) {
    const auto& table = model.inputs[t];
    const auto d = static_cast<Eigen::Index>(table.side());
    const auto& words = ws.words[t];
    const Eigen::Map<const Matrix<T>> G(ws.grad_h.data() + offset, d, d);
    offset += table.matrix_size();
    if (words.empty()) continue;
    if (spec.table_mode(t) == Mode::Sum) {
      for (TokenId id : words) Eigen::Map<RowMatrix<T>>(grads->inputs[t].row(id).data(), d, d) += weight * G;
      continue;
    }
    const auto& prefix = ws.prefix[t];
    const auto& suffix = ws.suffix[t];
    for (std::size_t j = 0; j < words.size(); ++j) {
      ws.tmp.noalias() = prefix[j].transpose() * G;
      Eigen::Map<RowMatrix<T>>(grads->inputs[t].row(words[j]).data(), d, d).noalias() +=
          weight * (ws.tmp * suffix[j + 1].transpose());
    }
  }
  return loss;
}

/// Loss and gradients of one window, freshly allocated.
template <class T>
std::pair<T, Gradients<T>> sample_loss(const Model<T>& model, std::span<const TokenId> context, TokenId target,
                                       std::span<const TokenId> negatives) {
  Gradients<T> grads(model);
  LossWorkspace<T> ws;
  const T loss = accumulate_sample_loss(model, context, target, negatives, &grads, T(1), ws);
  return {loss, std::move(grads)};
}

/// Loss only.
template <class T>
T sample_loss_value(const Model<T>& model, std::span<const TokenId> context, TokenId target,
                    std::span<const TokenId> negatives) {
  LossWorkspace<T> ws;
  return accumulate_sample_loss<T>(model, context, target, negatives, nullptr, T(1), ws);
}

}  // namespace matword
