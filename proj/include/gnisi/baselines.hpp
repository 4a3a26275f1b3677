#pragma once

/**
 * @file baselines.hpp
 * @brief Closed-form reference estimators: inverse covariance and coupling shuffles.
 */

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "gnisi/errors.hpp"
#include "gnisi/ising.hpp"
#include "gnisi/moments.hpp"
#include "gnisi/random.hpp"
#include "gnisi/stats.hpp"

namespace gnisi {

struct CovarianceMatrix {
  Eigen::MatrixXd c;
  Eigen::VectorXd mean;
};

/// Unbiased (N - 1) covariance of an unweighted batch; population covariance of a
/// weighted (exact) batch.
inline CovarianceMatrix sample_covariance(const SampleBatch& batch) {
  batch.validate();
  if (!batch.weighted() && batch.size() < 2) throw InvalidInput("sample_covariance: need at least 2 samples");
  const RawMoments m = raw_moments(batch);
  CovarianceMatrix out;
  out.mean = m.mean;
  out.c = m.second - m.mean * m.mean.transpose();
  if (!batch.weighted()) {
    const double n = static_cast<double>(batch.size());
    out.c *= n / (n - 1.0);
  }
  out.c = (0.5 * (out.c + out.c.transpose())).eval();
  out.c.diagonal() = out.c.diagonal().cwiseMax(0.0);
  return out;
}

/// 1e-4 trace(C) / n.
inline double default_ridge(const CovarianceMatrix& cov) {
  return 1e-4 * cov.c.trace() / static_cast<double>(cov.c.rows());
}

inline constexpr double kMeanClip = 1e-6;

/**
 * Couplings from the inverse of (C + ridge I) with the diagonal zeroed, and
 * fields from naive mean-field inversion
 *
 *     h_i = -log(m_i / (1 - m_i)) - sum_j u_ij m_j
 *
 * with means clipped to [1e-6, 1 - 1e-6]. Returns a beta = 1 model.
 */
inline IsingModel inverse_covariance_model(const CovarianceMatrix& cov, std::optional<double> ridge = std::nullopt) {
  const Eigen::Index n = cov.c.rows();
  if (n == 0 || cov.c.cols() != n || cov.mean.size() != n) throw InvalidInput("inverse_covariance_model: bad covariance shape");
  const double r = ridge ? *ridge : default_ridge(cov);
  if (!(r >= 0.0) || !std::isfinite(r)) throw InvalidInput("inverse_covariance_model: ridge must be non-negative");

  std::vector<std::size_t> constant_sites;
  const double scale = std::max(cov.c.diagonal().maxCoeff(), 1e-300);
  for (Eigen::Index i = 0; i < n; ++i)
    if (cov.c(i, i) <= 1e-12 * std::max(scale, 1.0)) constant_sites.push_back(static_cast<std::size_t>(i));

  auto singular = [&](const std::string& why) {
    std::string msg = "inverse_covariance_model: " + why;
    if (!constant_sites.empty()) {
      msg += "; near-constant sites:";
      for (auto s : constant_sites) msg += " " + std::to_string(s);
    }
    return SingularMatrixError(msg, constant_sites);
  };
  if (r == 0.0 && !constant_sites.empty()) throw singular("covariance is singular at ridge = 0");

  const Eigen::MatrixXd a = cov.c + r * Eigen::MatrixXd::Identity(n, n);
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(a);
  if (!(lu.rcond() > 1e-13)) throw singular("covariance + ridge is numerically singular (rcond " + std::to_string(lu.rcond()) + ")");
  Eigen::MatrixXd precision = lu.inverse();
  precision = (0.5 * (precision + precision.transpose())).eval();
  precision.diagonal().setZero();

  const Eigen::VectorXd m = cov.mean.cwiseMax(kMeanClip).cwiseMin(1.0 - kMeanClip);
  const Eigen::VectorXd mf = precision * m;
  std::vector<double> h(static_cast<std::size_t>(n));
  std::vector<double> u(static_cast<std::size_t>(n * n));
  for (Eigen::Index i = 0; i < n; ++i) {
    h[static_cast<std::size_t>(i)] = -std::log(m(i) / (1.0 - m(i))) - mf(i);
    for (Eigen::Index j = 0; j < n; ++j) u[static_cast<std::size_t>(i * n + j)] = precision(i, j);
  }
  if (!precision.allFinite()) throw singular("inverse is not finite");
  return IsingModel::from_dense(std::move(h), u, 1.0);
}

inline IsingModel inverse_covariance_model(const SampleBatch& batch, std::optional<double> ridge = std::nullopt) {
  return inverse_covariance_model(sample_covariance(batch), ridge);
}

/// Shuffles the reference's couplings across pair positions and its fields across
/// sites, preserving both multisets.
inline IsingModel random_coupling_model(const IsingModel& reference, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> h = reference.fields();
  std::vector<double> u = reference.upper_couplings();
  std::shuffle(h.begin(), h.end(), rng);
  std::shuffle(u.begin(), u.end(), rng);
  return IsingModel::from_upper(std::move(h), u, reference.beta());
}

/// Pearson r between predicted and true off-diagonal couplings (effective, beta = 1).
inline std::optional<double> structure_score(const IsingModel& pred, const IsingModel& truth) {
  if (pred.n() != truth.n()) throw InvalidInput("structure_score: size mismatch");
  std::vector<double> a = pred.effective().upper_couplings();
  std::vector<double> b = truth.effective().upper_couplings();
  return pearson(a, b);
}

/// Reads a whitespace-delimited square matrix, one row per line (blank lines and
/// lines starting with '#' ignored).
inline Eigen::MatrixXd import_external_matrix(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("import_external_matrix: cannot open " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ss(line);
    std::vector<double> row;
    std::string tok;
    while (ss >> tok) {
      try {
        std::size_t used = 0;
        const double v = std::stod(tok, &used);
        if (used != tok.size() || !std::isfinite(v)) throw std::invalid_argument(tok);
        row.push_back(v);
      } catch (const std::exception&) {
        throw ParseError(path + ":" + std::to_string(line_no) + ": not a finite number: '" + tok + "'");
      }
    }
    rows.push_back(std::move(row));
  }
  const std::size_t n = rows.size();
  if (n == 0) throw ParseError(path + ": matrix is empty");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    if (rows[i].size() != n) {
      throw ParseError(path + ": row " + std::to_string(i + 1) + " has " + std::to_string(rows[i].size()) +
                       " entries, expected " + std::to_string(n));
    }
    for (std::size_t j = 0; j < n; ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  }
  return m;
}

/// Interprets an external solver's matrix: diagonal entries are fields, off-diagonal
/// entries couplings (averaged over (i, j) and (j, i)).
inline IsingModel model_from_external_matrix(const Eigen::MatrixXd& m, double beta = 1.0) {
  const Eigen::Index n = m.rows();
  if (n == 0 || m.cols() != n) throw InvalidInput("model_from_external_matrix: matrix must be square");
  IsingModel model(static_cast<std::size_t>(n), beta);
  for (Eigen::Index i = 0; i < n; ++i) {
    model.set_field(static_cast<std::size_t>(i), m(i, i));
    for (Eigen::Index j = i + 1; j < n; ++j)
      model.set_coupling(static_cast<std::size_t>(i), static_cast<std::size_t>(j), 0.5 * (m(i, j) + m(j, i)));
  }
  return model;
}

}  // namespace gnisi
