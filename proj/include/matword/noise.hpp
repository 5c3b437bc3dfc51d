#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "matword/common.hpp"
#include "matword/vocabulary.hpp"

namespace matword {

/// Unigram^(3/4) noise distribution for negative sampling, stored as a CDF.
class NoiseDistribution {
 public:
  static constexpr double kExponent = 0.75;

  NoiseDistribution() = default;

  explicit NoiseDistribution(std::span<const std::uint64_t> counts) {
    if (counts.empty()) throw InvalidArgument("noise distribution: no tokens");
    cumulative_.resize(counts.size());
    double total = 0.0;
    for (std::size_t i = 0; i < counts.size(); ++i) {
      total += std::pow(static_cast<double>(counts[i]), kExponent);
      cumulative_[i] = total;
    }
    if (!(total > 0.0)) throw InvalidArgument("noise distribution: all counts are zero");
    for (auto& c : cumulative_) c /= total;
    cumulative_.back() = 1.0;
  }

  explicit NoiseDistribution(const Vocabulary& vocab) : NoiseDistribution(vocab.counts()) {}

  std::size_t size() const noexcept { return cumulative_.size(); }
  std::span<const double> cumulative_weights() const noexcept { return cumulative_; }

  double probability(TokenId id) const {
    const double hi = cumulative_.at(id);
    return id == 0 ? hi : hi - cumulative_[id - 1];
  }

  /// Inverse-CDF lookup for u in [0, 1).
  TokenId lookup(double u) const noexcept {
    const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
    const auto idx = static_cast<std::size_t>(it - cumulative_.begin());
    return static_cast<TokenId>(std::min(idx, cumulative_.size() - 1));
  }

  template <class Rng>
  TokenId sample(Rng& rng) const {
    return lookup(std::generate_canonical<double, 53>(rng));
  }

 private:
  std::vector<double> cumulative_;
};

/// Draws `k` i.i.d. ids from `dist`.
template <class Rng>
std::vector<TokenId> sample_noise(const NoiseDistribution& dist, std::size_t k, Rng& rng) {
  if (k == 0) throw InvalidArgument("sample_noise: k must be at least 1");
  std::vector<TokenId> ids(k);
  for (auto& id : ids) id = dist.sample(rng);
  return ids;
}

}  // namespace matword
