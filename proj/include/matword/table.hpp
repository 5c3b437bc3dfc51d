#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "matword/common.hpp"

namespace matword {

template <class T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;

/// Per-word square matrices, `rows` × d × d, each matrix row-major and
/// contiguous.
template <class T>
class WordMatrixTable {
 public:
  using value_type = T;

  WordMatrixTable() = default;
  WordMatrixTable(std::size_t rows, std::size_t d) : rows_(rows), d_(d), data_(rows * d * d, T(0)) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t side() const noexcept { return d_; }
  std::size_t matrix_size() const noexcept { return d_ * d_; }

  std::span<T> matrix(std::size_t id) { return std::span<T>(data_).subspan(id * matrix_size(), matrix_size()); }
  std::span<const T> matrix(std::size_t id) const {
    return std::span<const T>(data_).subspan(id * matrix_size(), matrix_size());
  }

  Eigen::Map<const RowMatrix<T>> view(std::size_t id) const {
    return Eigen::Map<const RowMatrix<T>>(data_.data() + id * matrix_size(), d_, d_);
  }
  Eigen::Map<RowMatrix<T>> view(std::size_t id) {
    return Eigen::Map<RowMatrix<T>>(data_.data() + id * matrix_size(), d_, d_);
  }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }

  bool all_finite() const {
    for (T x : data_)
      if (!std::isfinite(x)) return false;
    return true;
  }

  bool operator==(const WordMatrixTable&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t d_ = 0;
  std::vector<T> data_;
};

/// Output (regression) weights, one row of `width` per vocabulary word.
template <class T>
class OutputTable {
 public:
  using value_type = T;

  OutputTable() = default;
  OutputTable(std::size_t rows, std::size_t width) : rows_(rows), width_(width), data_(rows * width, T(0)) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t width() const noexcept { return width_; }

  std::span<T> row(std::size_t id) { return std::span<T>(data_).subspan(id * width_, width_); }
  std::span<const T> row(std::size_t id) const { return std::span<const T>(data_).subspan(id * width_, width_); }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }

  bool all_finite() const {
    for (T x : data_)
      if (!std::isfinite(x)) return false;
    return true;
  }

  bool operator==(const OutputTable&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t width_ = 0;
  std::vector<T> data_;
};

enum class InitStrategy { IdentityOffset, Glorot, PlainNormal };

inline std::string_view to_string(InitStrategy s) noexcept {
  switch (s) {
    case InitStrategy::IdentityOffset: return "identity";
    case InitStrategy::Glorot: return "glorot";
    case InitStrategy::PlainNormal: return "normal";
  }
  return "?";
}

inline InitStrategy parse_init_strategy(std::string_view name) {
  if (name == "identity") return InitStrategy::IdentityOffset;
  if (name == "glorot") return InitStrategy::Glorot;
  if (name == "normal") return InitStrategy::PlainNormal;
  throw InvalidArgument("unknown init strategy '" + std::string(name) + "'");
}

struct InitOptions {
  InitStrategy strategy = InitStrategy::IdentityOffset;
  double sigma = 0.1;
  // Glorot fans; 0 selects the embedding-weight view (fan_in = d*d, fan_out = rows).
  std::size_t glorot_fan_in = 0;
  std::size_t glorot_fan_out = 0;
};

/// Half-width of the Glorot uniform interval for the given fans.
inline double glorot_bound(std::size_t fan_in, std::size_t fan_out) {
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

/// Fills `dst` (one row-major d×d matrix) from the strategy's distribution.
/// σ = 0 is accepted and yields the distribution's mean exactly.
template <class T, class Rng>
void init_matrix(std::span<T> dst, std::size_t d, std::size_t rows, const InitOptions& opts, Rng& rng) {
  switch (opts.strategy) {
    case InitStrategy::IdentityOffset:
    case InitStrategy::PlainNormal: {
      if (opts.sigma > 0.0) {
        std::normal_distribution<double> normal(0.0, opts.sigma);
        for (auto& x : dst) x = static_cast<T>(normal(rng));
      } else {
        std::fill(dst.begin(), dst.end(), T(0));
      }
      if (opts.strategy == InitStrategy::IdentityOffset)
        for (std::size_t i = 0; i < d; ++i) dst[i * d + i] += T(1);
      return;
    }
    case InitStrategy::Glorot: {
      const std::size_t fan_in = opts.glorot_fan_in ? opts.glorot_fan_in : d * d;
      const std::size_t fan_out = opts.glorot_fan_out ? opts.glorot_fan_out : rows;
      const double bound = glorot_bound(fan_in, fan_out);
      std::uniform_real_distribution<double> uniform(-bound, bound);
      for (auto& x : dst) x = static_cast<T>(uniform(rng));
      return;
    }
  }
  throw InvalidArgument("unknown init strategy");
}

/// Allocates an m × d × d table initialised per `opts`.
template <class T, class Rng>
WordMatrixTable<T> init_table(std::size_t m, std::size_t d, const InitOptions& opts, Rng& rng) {
  if (m < 1 || d < 1) throw InvalidArgument("init_table: m and d must be positive");
  if (!(opts.sigma >= 0.0) || !std::isfinite(opts.sigma)) throw InvalidArgument("init_table: sigma must be >= 0");
  WordMatrixTable<T> table(m, d);
  for (std::size_t id = 0; id < m; ++id) init_matrix(table.matrix(id), d, m, opts, rng);
  return table;
}

}  // namespace matword
