#pragma once

#include <Eigen/Dense>

#include "cggan/errors.hpp"

namespace cggan {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Thin SVD M = U diag(S) V^T with S sorted nonincreasing.
struct SvdFactorization {
  Matrix U;  // rows(M) x r
  Vector S;  // r = min(rows, cols)
  Matrix V;  // cols(M) x r

  Eigen::Index rows() const { return U.rows(); }
  Eigen::Index cols() const { return V.rows(); }

  /// Singular values above 1e-12 * S_max; conditioning diagnostic only.
  Eigen::Index effective_rank() const;
  /// S_max / S_min over the effective rank (1 for an empty or zero matrix).
  double condition_number() const;
};

/// Throws InvalidInput on non-finite entries, NumericalFailure if the
/// divide-and-conquer iteration does not converge.
SvdFactorization svd(const Matrix& m);

/// Solves (M^T M + rho I) x = b using only the diagonal (S^2 + rho I).
/// The component of b orthogonal to range(V) is scaled by 1/rho, so the
/// thin factorization of a wide M is handled exactly.
Vector ridge_solve(const SvdFactorization& f, double rho, const Vector& b);

/// Componentwise sign(v) * max(|v| - t, 0).
Vector soft_threshold(const Vector& v, double t);

/// Euclidean projection onto {w : ||w||_2 <= radius}. Infinite radius is a no-op.
Vector project_ball(const Vector& v, double radius);

bool all_finite(const Matrix& m);
bool all_finite(const Vector& v);

}  // namespace cggan
