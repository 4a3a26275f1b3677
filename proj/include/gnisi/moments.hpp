#pragma once

#include <Eigen/Dense>

#include "gnisi/ising.hpp"

namespace gnisi {

/// First and second raw moments of a (possibly weighted) batch.
struct RawMoments {
  Eigen::VectorXd mean;    ///< <x_i>
  Eigen::MatrixXd second;  ///< <x_i x_j>
  std::size_t count = 0;
  bool weighted = false;
};

/// Samples as an N x n matrix of 0.0 / 1.0.
inline Eigen::MatrixXd batch_matrix(const SampleBatch& batch) {
  const std::size_t n = batch.n();
  Eigen::MatrixXd x(static_cast<Eigen::Index>(batch.size()), static_cast<Eigen::Index>(n));
  for (std::size_t s = 0; s < batch.size(); ++s)
    for (std::size_t i = 0; i < n; ++i) x(s, i) = batch.samples[s][i];
  return x;
}

/// Per-sample weights normalized to sum to one.
inline Eigen::VectorXd normalized_weights(const SampleBatch& batch) {
  const auto n = static_cast<Eigen::Index>(batch.size());
  if (!batch.weighted()) return Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
  Eigen::VectorXd w = Eigen::Map<const Eigen::VectorXd>(batch.weights.data(), n);
  const double total = w.sum();
  if (!(total > 0.0)) throw InvalidInput("SampleBatch: weights sum to zero");
  return w / total;
}

inline RawMoments raw_moments(const SampleBatch& batch) {
  batch.validate();
  const Eigen::MatrixXd x = batch_matrix(batch);
  const Eigen::VectorXd w = normalized_weights(batch);
  RawMoments m;
  m.mean = x.transpose() * w;
  m.second = x.transpose() * w.asDiagonal() * x;
  m.count = batch.size();
  m.weighted = batch.weighted();
  return m;
}

}  // namespace gnisi
