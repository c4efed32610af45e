#include "cggan/linalg.hpp"

#include <cmath>
#include <limits>

namespace cggan {

bool all_finite(const Matrix& m) { return m.allFinite(); }
bool all_finite(const Vector& v) { return v.allFinite(); }

Eigen::Index SvdFactorization::effective_rank() const {
  if (S.size() == 0 || S(0) <= 0.0) return 0;
  const double cutoff = 1e-12 * S(0);
  Eigen::Index r = 0;
  while (r < S.size() && S(r) > cutoff) ++r;
  return r;
}

double SvdFactorization::condition_number() const {
  const Eigen::Index r = effective_rank();
  if (r == 0) return 1.0;
  return S(0) / S(r - 1);
}

SvdFactorization svd(const Matrix& m) {
  if (!all_finite(m)) throw InvalidInput("svd: matrix has non-finite entries");
  SvdFactorization f;
  if (m.size() == 0) {
    f.U = Matrix(m.rows(), 0);
    f.V = Matrix(m.cols(), 0);
    f.S = Vector(0);
    return f;
  }
  Eigen::BDCSVD<Matrix> dec(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (dec.info() != Eigen::Success) throw NumericalFailure("svd: iteration did not converge");
  f.U = dec.matrixU();
  f.S = dec.singularValues();
  f.V = dec.matrixV();
  if (!f.U.allFinite() || !f.V.allFinite() || !f.S.allFinite())
    throw NumericalFailure("svd: non-finite factors");
  return f;
}

Vector ridge_solve(const SvdFactorization& f, double rho, const Vector& b) {
  if (!(rho > 0.0)) throw InvalidInput("ridge_solve: rho must be positive");
  if (b.size() != f.cols()) throw InvalidInput("ridge_solve: right-hand side has wrong length");
  const Vector coeffs = f.V.transpose() * b;
  const Vector scaled = coeffs.array() / (f.S.array().square() + rho);
  // b = V V^T b + (I - V V^T) b; the second part sees only the ridge term.
  Vector out = f.V * scaled;
  if (f.V.cols() < f.V.rows()) out.noalias() += (b - f.V * coeffs) / rho;
  return out;
}

Vector soft_threshold(const Vector& v, double t) {
  if (!(t >= 0.0)) throw InvalidInput("soft_threshold: threshold must be nonnegative");
  return v.unaryExpr([t](double a) {
    const double mag = std::abs(a) - t;
    return mag > 0.0 ? std::copysign(mag, a) : 0.0;
  });
}

Vector project_ball(const Vector& v, double radius) {
  if (!std::isfinite(radius)) return v;
  const double norm = v.norm();
  if (norm <= radius) return v;
  return v * (radius / norm);
}

}  // namespace cggan
