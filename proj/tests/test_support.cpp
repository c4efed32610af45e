#include "test_support.hpp"

#include <cmath>

namespace testing_support {

Vector random_vector(std::mt19937_64& rng, Eigen::Index n, double scale) {
  std::normal_distribution<double> normal(0.0, scale);
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = normal(rng);
  return v;
}

Matrix random_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols, double scale) {
  std::normal_distribution<double> normal(0.0, scale);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = normal(rng);
  return m;
}

Matrix random_spd(std::mt19937_64& rng, Eigen::Index n, double shift) {
  const Matrix b = random_matrix(rng, n, n, 1.0 / std::sqrt(static_cast<double>(n)));
  Matrix s = b.transpose() * b;
  s.diagonal().array() += shift;
  return 0.5 * (s + s.transpose());
}

Vector dense_solve(const Matrix& m, const Vector& b) { return m.fullPivLu().solve(b); }

Vector finite_difference_gradient(const std::function<double(const Vector&)>& f, const Vector& x, double h) {
  Vector g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Vector p = x, q = x;
    p(i) += h;
    q(i) -= h;
    g(i) = (f(p) - f(q)) / (2.0 * h);
  }
  return g;
}

double relative_error(const Vector& a, const Vector& b) { return (a - b).norm() / std::max(1e-300, b.norm()); }

cggan::GeneratorNetwork tanh_network(Eigen::Index d, Eigen::Index hidden, Eigen::Index n, std::uint64_t seed,
                                     double spectral_norm) {
  return cggan::make_random_network({d, hidden, n}, cggan::Activation::Tanh, cggan::Activation::Tanh, spectral_norm,
                                    seed, 0.3);
}

double reference_lagrangian(const Vector& y, const Matrix& a, const cggan::ScaleBasisGenerator& g,
                            const cggan::SolverState& s, const cggan::SolverConfig& cfg, bool include_dual) {
  const Eigen::Index n = s.z.size();
  double data = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    double ac = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) ac += a(i, j) * s.c(j);
    data += 0.5 * (y(i) - ac) * (y(i) - ac);
  }
  double l1 = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) l1 += std::abs(s.z(i));
  const Vector mean = cfg.mu_u.size() ? cfg.mu_u : Vector::Zero(n);
  const Matrix sigma = cfg.Sigma_u ? cfg.Sigma_u->matrix() : Matrix::Identity(n, n);
  double quad = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) quad += (s.u(i) - mean(i)) * sigma(i, j) * (s.u(j) - mean(j));
  double F = data + cfg.mu * l1 + cfg.Rx.value(s.x) + 0.5 * cfg.lambda * quad;
  if (!include_dual) return F;
  const Vector gx = g.forward(s.x);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double x1 = s.z(i) - gx(i);
    const double x2 = s.c(i) - s.z(i) * s.u(i);
    F += s.phi1(i) * x1 + s.phi2(i) * x2 + 0.5 * cfg.rho * (x1 * x1 + x2 * x2);
  }
  return F;
}

cggan::SolverState random_state(std::mt19937_64& rng, Eigen::Index d, Eigen::Index n) {
  cggan::SolverState s;
  s.x = random_vector(rng, d);
  s.z = random_vector(rng, n);
  s.u = random_vector(rng, n);
  s.c = random_vector(rng, n);
  s.phi1 = random_vector(rng, n);
  s.phi2 = random_vector(rng, n);
  return s;
}

}  // namespace testing_support
