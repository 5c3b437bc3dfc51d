#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "matword/common.hpp"
#include "matword/probing/datasets.hpp"

namespace matword::probing {

struct ProbeOptions {
  std::size_t epochs = 500;
  double lr = 0.1;
  double weight_decay = 1e-4;
};

struct ProbeResult {
  std::string task;
  std::string mode;
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;

  nlohmann::json to_json() const {
    return {{"task", task}, {"mode", mode}, {"train_accuracy", train_accuracy}, {"test_accuracy", test_accuracy}};
  }
  static ProbeResult from_json(const nlohmann::json& j) {
    return {j.at("task").get<std::string>(), j.at("mode").get<std::string>(), j.at("train_accuracy").get<double>(),
            j.at("test_accuracy").get<double>()};
  }
  bool operator==(const ProbeResult&) const = default;
};

/// Multinomial logistic regression on frozen embeddings, trained by
/// full-batch gradient descent with L2 decay on the weights. Features are
/// standardised with train-split statistics. The classifier always starts
/// from zero weights, so results are deterministic.
template <class T>
ProbeResult train_probe(std::span<const std::vector<T>> embeddings, const ProbeDataset& dataset,
                        const ProbeOptions& opts = {}) {
  using Mat = Eigen::MatrixXd;
  using Vec = Eigen::VectorXd;
  if (embeddings.size() != dataset.size()) throw InvalidArgument("train_probe: embedding count mismatch");
  if (dataset.size() == 0) throw InvalidArgument("train_probe: empty dataset");
  const auto dim = static_cast<Eigen::Index>(embeddings.front().size());
  const auto classes = static_cast<Eigen::Index>(dataset.n_classes);

  std::vector<std::size_t> train_idx, test_idx;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (embeddings[i].size() != static_cast<std::size_t>(dim)) throw InvalidArgument("train_probe: ragged embeddings");
    (dataset.splits[i] == Split::Train ? train_idx : test_idx).push_back(i);
  }
  if (train_idx.empty() || test_idx.empty()) throw InvalidArgument("train_probe: both splits must be non-empty");
  {
    std::vector<bool> present(static_cast<std::size_t>(classes), false);
    std::size_t distinct = 0;
    for (std::size_t i : train_idx)
      if (!present[static_cast<std::size_t>(dataset.labels[i])]) {
        present[static_cast<std::size_t>(dataset.labels[i])] = true;
        ++distinct;
      }
    if (classes < 2 || distinct < 2) throw InvalidArgument("train_probe: degenerate single-class data");
  }

  const auto gather = [&](const std::vector<std::size_t>& idx) {
    Mat x(static_cast<Eigen::Index>(idx.size()), dim);
    for (std::size_t r = 0; r < idx.size(); ++r)
      for (Eigen::Index c = 0; c < dim; ++c)
        x(static_cast<Eigen::Index>(r), c) = static_cast<double>(embeddings[idx[r]][static_cast<std::size_t>(c)]);
    return x;
  };
  Mat x_train = gather(train_idx);
  Mat x_test = gather(test_idx);
  const Eigen::RowVectorXd mean = x_train.colwise().mean();
  Eigen::RowVectorXd scale =
      ((x_train.rowwise() - mean).array().square().colwise().sum() / static_cast<double>(x_train.rows())).sqrt();
  for (Eigen::Index c = 0; c < dim; ++c) scale(c) = scale(c) > 1e-12 ? 1.0 / scale(c) : 0.0;
  x_train = ((x_train.rowwise() - mean).array().rowwise() * scale.array()).matrix();
  x_test = ((x_test.rowwise() - mean).array().rowwise() * scale.array()).matrix();

  const auto n = static_cast<double>(train_idx.size());
  Mat y = Mat::Zero(x_train.rows(), classes);
  for (std::size_t r = 0; r < train_idx.size(); ++r) y(static_cast<Eigen::Index>(r), dataset.labels[train_idx[r]]) = 1.0;

  Mat w = Mat::Zero(dim, classes);
  Vec b = Vec::Zero(classes);
  const auto softmax_rows = [](Mat& logits) {
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
      const double mx = logits.row(r).maxCoeff();
      logits.row(r) = (logits.row(r).array() - mx).exp().matrix();
      logits.row(r) /= logits.row(r).sum();
    }
  };
  for (std::size_t epoch = 0; epoch < opts.epochs; ++epoch) {
    Mat p = (x_train * w).rowwise() + b.transpose();
    softmax_rows(p);
    p -= y;
    const Mat grad_w = x_train.transpose() * p / n + opts.weight_decay * w;
    const Vec grad_b = p.colwise().sum().transpose() / n;
    w -= opts.lr * grad_w;
    b -= opts.lr * grad_b;
  }

  const auto accuracy = [&](const Mat& x, const std::vector<std::size_t>& idx) {
    const Mat logits = (x * w).rowwise() + b.transpose();
    std::size_t correct = 0;
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
      Eigen::Index best = 0;
      logits.row(r).maxCoeff(&best);
      if (best == dataset.labels[idx[static_cast<std::size_t>(r)]]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(idx.size());
  };
  ProbeResult result;
  result.task = dataset.task;
  result.train_accuracy = accuracy(x_train, train_idx);
  result.test_accuracy = accuracy(x_test, test_idx);
  return result;
}

template <class T>
ProbeResult train_probe(const std::vector<std::vector<T>>& embeddings, const ProbeDataset& dataset,
                        const ProbeOptions& opts = {}) {
  return train_probe(std::span<const std::vector<T>>(embeddings), dataset, opts);
}

}  // namespace matword::probing
