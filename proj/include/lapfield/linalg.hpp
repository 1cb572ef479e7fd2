#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lapfield/error.hpp"

namespace lapfield {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Lower Cholesky factor of a (possibly jittered) SPD matrix.
struct CholeskyFactor {
  Matrix lower;
  double jitter = 0.0;

  Eigen::Index dim() const { return lower.rows(); }

  double log_det() const { return 2.0 * lower.diagonal().array().log().sum(); }

  /// x' Sigma^{-1} x.
  double quad_form(const Vector& x) const {
    const Vector z = lower.triangularView<Eigen::Lower>().solve(x);
    return z.squaredNorm();
  }

  /// Sigma^{-1} b.
  Vector solve(const Vector& b) const {
    const Vector z = lower.triangularView<Eigen::Lower>().solve(b);
    return lower.transpose().triangularView<Eigen::Upper>().solve(z);
  }

  Matrix solve(const Matrix& b) const {
    const Matrix z = lower.triangularView<Eigen::Lower>().solve(b);
    return lower.transpose().triangularView<Eigen::Upper>().solve(z);
  }

  Matrix reconstruct() const { return lower * lower.transpose(); }
};

struct JitterPolicy {
  double initial = 1e-10;
  double growth = 10.0;
  double max = 1e-6;
};

/// Cholesky with jitter escalation: tries Sigma, then Sigma + j I for
/// j = 1e-10, 1e-9, ..., 1e-6. Throws numeric_error when all fail.
inline CholeskyFactor cholesky(const Matrix& sigma, const JitterPolicy& policy = {}) {
  if (sigma.rows() != sigma.cols() || sigma.rows() == 0) throw domain_error("cholesky: matrix must be square and nonempty");
  if (!sigma.allFinite()) throw numeric_error("cholesky: non-finite entries");
  const double scale = std::max(1.0, sigma.cwiseAbs().maxCoeff());
  if (((sigma - sigma.transpose()).cwiseAbs().maxCoeff()) > 1e-12 * scale)
    throw domain_error("cholesky: matrix is not symmetric");

  double jitter = 0.0;
  for (;;) {
    Matrix m = sigma;
    m.diagonal().array() += jitter;
    Eigen::LLT<Matrix> llt(m);
    if (llt.info() == Eigen::Success) {
      Matrix l = llt.matrixL();
      if ((l.diagonal().array() > 0.0).all() && l.allFinite()) return CholeskyFactor{std::move(l), jitter};
    }
    jitter = jitter == 0.0 ? policy.initial : jitter * policy.growth;
    if (jitter > policy.max * (1.0 + 1e-9))
      throw numeric_error("cholesky: matrix not positive definite after jitter " + std::to_string(policy.max));
  }
}

/// Row-subset / column-subset extraction.
inline Matrix submatrix(const Matrix& m, const std::vector<int>& rows, const std::vector<int>& cols) {
  Matrix out(rows.size(), cols.size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < cols.size(); ++j) out(i, j) = m(rows[i], cols[j]);
  return out;
}

inline Vector subvector(const Vector& v, const std::vector<int>& idx) {
  Vector out(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) out[i] = v[idx[i]];
  return out;
}

/// Indices in [0, n) not contained in idx, ascending.
inline std::vector<int> complement_indices(int n, const std::vector<int>& idx) {
  std::vector<bool> taken(n, false);
  for (int i : idx) {
    if (i < 0 || i >= n) throw domain_error("index out of range");
    if (taken[i]) throw domain_error("duplicate index");
    taken[i] = true;
  }
  std::vector<int> out;
  for (int i = 0; i < n; ++i)
    if (!taken[i]) out.push_back(i);
  return out;
}

}  // namespace lapfield
