#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "matword/common.hpp"
#include "matword/parallel.hpp"
#include "matword/table.hpp"

namespace matword::probing {

struct VanishingRow {
  InitStrategy strategy;
  std::size_t n;
  double mean_abs_value;
};

struct VanishingOptions {
  std::size_t d = 20;
  std::size_t n_max = 20;
  std::size_t trials = 1000;
  std::uint64_t seed = 1;
  std::size_t vocab_rows = 30000;  // rows of the notional table (Glorot fan_out)
};

/// Mean absolute entry of products of n freshly initialised matrices, for
/// n = 1..n_max. Each trial draws one chain of n_max matrices and records
/// every prefix; trial t uses the stream split_seed(seed, t).
inline std::vector<VanishingRow> vanishing_values_diagnostic(std::span<const InitOptions> strategies,
                                                             const VanishingOptions& opts,
                                                             ThreadPool* pool = nullptr) {
  if (opts.n_max < 2) throw InvalidArgument("vanishing diagnostic: n_max must be at least 2");
  if (opts.d < 1 || opts.trials < 1) throw InvalidArgument("vanishing diagnostic: d and trials must be positive");
  std::vector<VanishingRow> rows;
  const auto d = static_cast<Eigen::Index>(opts.d);
  for (std::size_t s = 0; s < strategies.size(); ++s) {
    const auto& init = strategies[s];
    std::vector<std::vector<double>> per_trial(opts.trials, std::vector<double>(opts.n_max));
    for_each_index(pool, opts.trials, [&](std::size_t t) {
      std::mt19937_64 rng(split_seed(opts.seed, s * 0x100000000ULL + t));
      RowMatrix<double> word(d, d);
      Matrix<double> product;
      for (std::size_t n = 0; n < opts.n_max; ++n) {
        init_matrix(std::span<double>(word.data(), word.size()), opts.d, opts.vocab_rows, init, rng);
        if (n == 0)
          product = word;
        else
          product = (product * word).eval();
        per_trial[t][n] = product.cwiseAbs().mean();
      }
    });
    for (std::size_t n = 0; n < opts.n_max; ++n) {
      double sum = 0.0;
      for (const auto& trial : per_trial) sum += trial[n];
      rows.push_back({init.strategy, n + 1, sum / static_cast<double>(opts.trials)});
    }
  }
  return rows;
}

inline void write_vanishing_csv(std::ostream& os, std::span<const VanishingRow> rows) {
  os << "strategy,n,mean_abs_value\n";
  os.precision(9);
  for (const auto& r : rows) os << to_string(r.strategy) << ',' << r.n << ',' << r.mean_abs_value << '\n';
}

struct ExpectationCheck {
  double max_deviation = 0.0;
  double tolerance = 0.01;
  bool passed = false;
};

/// Sample mean of n-fold products of identity-offset matrices N(0, σ²) + I,
/// compared entrywise with I.
inline ExpectationCheck expectation_identity_check(std::size_t d, std::size_t n, std::size_t trials, double sigma,
                                                   std::uint64_t seed, ThreadPool* pool = nullptr,
                                                   double tolerance = 0.01) {
  if (trials < 10000) throw InvalidArgument("expectation check: needs at least 1e4 trials");
  if (d < 1 || n < 1) throw InvalidArgument("expectation check: d and n must be positive");
  constexpr std::size_t kBlock = 1000;
  const std::size_t blocks = (trials + kBlock - 1) / kBlock;
  const auto dd = static_cast<Eigen::Index>(d);
  const InitOptions init{InitStrategy::IdentityOffset, sigma};
  std::vector<Matrix<double>> sums(blocks, Matrix<double>::Zero(dd, dd));
  for_each_index(pool, blocks, [&](std::size_t b) {
    std::mt19937_64 rng(split_seed(seed, b));
    RowMatrix<double> word(dd, dd);
    Matrix<double> product;
    const std::size_t end = std::min(trials, (b + 1) * kBlock);
    for (std::size_t t = b * kBlock; t < end; ++t) {
      for (std::size_t k = 0; k < n; ++k) {
        init_matrix(std::span<double>(word.data(), word.size()), d, 1, init, rng);
        if (k == 0)
          product = word;
        else
          product = (product * word).eval();
      }
      sums[b] += product;
    }
  });
  Matrix<double> mean = Matrix<double>::Zero(dd, dd);
  for (const auto& s : sums) mean += s;
  mean /= static_cast<double>(trials);
  ExpectationCheck out;
  out.tolerance = tolerance;
  out.max_deviation = (mean - Matrix<double>::Identity(dd, dd)).cwiseAbs().maxCoeff();
  out.passed = out.max_deviation < tolerance;
  return out;
}

}  // namespace matword::probing
