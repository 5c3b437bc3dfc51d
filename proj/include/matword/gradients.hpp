#pragma once

#include <span>
#include <unordered_map>
#include <vector>

#include "matword/common.hpp"
#include "matword/model.hpp"

namespace matword {

/// Sparse gradient over the rows of one parameter table. Rows keep their
/// first-touch order so merges and updates are order-deterministic.
template <class T>
class RowGradients {
 public:
  RowGradients() = default;
  explicit RowGradients(std::size_t width) : width_(width) {}

  std::size_t width() const noexcept { return width_; }
  std::size_t size() const noexcept { return rows_.size(); }
  bool empty() const noexcept { return rows_.empty(); }
  const std::vector<TokenId>& rows() const noexcept { return rows_; }

  /// Gradient row for `id`, zero-initialised on first touch.
  std::span<T> row(TokenId id) {
    auto [it, inserted] = slot_.try_emplace(id, rows_.size());
    if (inserted) {
      rows_.push_back(id);
      data_.resize(data_.size() + width_, T(0));
    }
    return std::span<T>(data_).subspan(it->second * width_, width_);
  }

  std::span<const T> at(std::size_t index) const {
    return std::span<const T>(data_).subspan(index * width_, width_);
  }

  const T* find(TokenId id) const {
    auto it = slot_.find(id);
    return it == slot_.end() ? nullptr : data_.data() + it->second * width_;
  }

  void add(const RowGradients& other, T scale = T(1)) {
    for (std::size_t i = 0; i < other.rows_.size(); ++i) {
      auto dst = row(other.rows_[i]);
      auto src = other.at(i);
      for (std::size_t j = 0; j < width_; ++j) dst[j] += scale * src[j];
    }
  }

  void scale(T s) {
    for (auto& x : data_) x *= s;
  }

  void clear() {
    rows_.clear();
    data_.clear();
    slot_.clear();
  }

 private:
  std::size_t width_ = 0;
  std::vector<TokenId> rows_;
  std::vector<T> data_;
  std::unordered_map<TokenId, std::size_t> slot_;
};

/// Gradients for every table of a model.
template <class T>
struct Gradients {
  std::vector<RowGradients<T>> inputs;
  RowGradients<T> output;

  Gradients() = default;
  explicit Gradients(const Model<T>& model) : output(model.output.width()) {
    for (const auto& t : model.inputs) inputs.emplace_back(t.matrix_size());
  }

  void add(const Gradients& other, T scale = T(1)) {
    for (std::size_t t = 0; t < inputs.size(); ++t) inputs[t].add(other.inputs[t], scale);
    output.add(other.output, scale);
  }

  void scale(T s) {
    for (auto& g : inputs) g.scale(s);
    output.scale(s);
  }

  void clear() {
    for (auto& g : inputs) g.clear();
    output.clear();
  }
};

}  // namespace matword
