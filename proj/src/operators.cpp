#include "cggan/operators.hpp"

#include <cmath>
#include <numbers>
#include <random>

namespace cggan {

MeasurementSetup::MeasurementSetup(Matrix psi, Matrix phi)
    : psi_(std::move(psi)), phi_(std::move(phi)) {
  if (psi_.cols() != phi_.rows() || phi_.rows() != phi_.cols())
    throw InvalidInput("MeasurementSetup: Psi columns must match square Phi");
  a_ = psi_ * phi_;
  svd_ = svd(a_);
  gram_.noalias() = a_.transpose() * a_;
}

MeasurementSetup::MeasurementSetup(Matrix a)
    : psi_(a), phi_(Matrix::Identity(a.cols(), a.cols())), a_(std::move(a)) {
  svd_ = svd(a_);
  gram_.noalias() = a_.transpose() * a_;
}

double MeasurementSetup::spectral_norm_sq() const {
  if (svd_.S.size() == 0) return 0.0;
  return svd_.S(0) * svd_.S(0);
}

Matrix gaussian_measurement(Eigen::Index m, Eigen::Index n, std::uint64_t seed) {
  if (m < 1 || n < 1) throw InvalidInput("gaussian_measurement: m and n must be positive");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(m)));
  Matrix psi(m, n);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < n; ++j) psi(i, j) = normal(rng);
  return psi;
}

namespace {

// Rows are the orthonormal DCT-II analysis basis: coeffs = D * signal.
Matrix dct_1d(Eigen::Index side) {
  Matrix d(side, side);
  const double n = static_cast<double>(side);
  for (Eigen::Index k = 0; k < side; ++k) {
    const double scale = k == 0 ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n);
    for (Eigen::Index i = 0; i < side; ++i)
      d(k, i) = scale * std::cos(std::numbers::pi * (2.0 * i + 1.0) * k / (2.0 * n));
  }
  return d;
}

}  // namespace

Matrix dct_basis(Eigen::Index side) {
  if (side < 1) throw InvalidInput("dct_basis: side must be positive");
  const Matrix d = dct_1d(side);
  const Eigen::Index n = side * side;
  Matrix phi(n, n);
  // Row-major flattening: pixel (r, c) -> r * side + c; synthesis is kron(D^T, D^T).
  for (Eigen::Index r = 0; r < side; ++r)
    for (Eigen::Index c = 0; c < side; ++c)
      for (Eigen::Index kr = 0; kr < side; ++kr)
        for (Eigen::Index kc = 0; kc < side; ++kc)
          phi(r * side + c, kr * side + kc) = d(kr, r) * d(kc, c);
  return phi;
}

std::vector<double> RadonGeometry::angles() const {
  std::vector<double> out(static_cast<std::size_t>(num_angles));
  for (Eigen::Index a = 0; a < num_angles; ++a)
    out[static_cast<std::size_t>(a)] = std::numbers::pi * static_cast<double>(a) / num_angles;
  return out;
}

double RadonGeometry::half_width() const {
  // The interpolant is supported on [-(side+1)/2, (side+1)/2]^2.
  return 0.5 * (static_cast<double>(side) + 1.0) * std::numbers::sqrt2;
}

double RadonGeometry::detector_spacing() const { return 2.0 * half_width() / side; }

Matrix radon_operator(Eigen::Index side, Eigen::Index num_angles) {
  RadonGeometry g;
  g.side = side;
  g.num_angles = num_angles;
  return radon_operator(g);
}

Matrix radon_operator(const RadonGeometry& g) {
  if (g.side < 2 || g.num_angles < 1 || g.oversample < 1 || !(g.sample_step > 0.0))
    throw InvalidInput("radon_operator: invalid geometry");
  const Eigen::Index side = g.side;
  const Eigen::Index n = side * side;
  Matrix r = Matrix::Zero(g.num_angles * side, n);

  const double centre = 0.5 * (static_cast<double>(side) - 1.0);
  const double half = g.half_width();
  const double dt = g.detector_spacing();
  const double h = g.sample_step;
  const auto steps = static_cast<Eigen::Index>(std::ceil(2.0 * half / h));
  const double s0 = -0.5 * h * static_cast<double>(steps);  // symmetric sample grid
  const double ray_weight = h / static_cast<double>(g.oversample);
  const std::vector<double> angles = g.angles();

  for (Eigen::Index a = 0; a < g.num_angles; ++a) {
    const double cs = std::cos(angles[static_cast<std::size_t>(a)]);
    const double sn = std::sin(angles[static_cast<std::size_t>(a)]);
    for (Eigen::Index j = 0; j < side; ++j) {
      auto row = r.row(a * side + j);
      for (Eigen::Index q = 0; q < g.oversample; ++q) {
        const double t = -half + dt * (static_cast<double>(j) + (q + 0.5) / g.oversample);
        for (Eigen::Index k = 0; k <= steps; ++k) {
          const double s = s0 + h * static_cast<double>(k);
          // Trapezoid weights; endpoints lie outside the support anyway.
          const double w = (k == 0 || k == steps) ? 0.5 * ray_weight : ray_weight;
          // Column = x (horizontal), row = y (vertical), both centred.
          const double px = t * cs - s * sn + centre;
          const double py = t * sn + s * cs + centre;
          const double fx = std::floor(px);
          const double fy = std::floor(py);
          const double ax = px - fx;
          const double ay = py - fy;
          const auto ix = static_cast<Eigen::Index>(fx);
          const auto iy = static_cast<Eigen::Index>(fy);
          for (int dy = 0; dy < 2; ++dy) {
            const Eigen::Index yy = iy + dy;
            if (yy < 0 || yy >= side) continue;
            const double wy = dy == 0 ? 1.0 - ay : ay;
            for (int dx = 0; dx < 2; ++dx) {
              const Eigen::Index xx = ix + dx;
              if (xx < 0 || xx >= side) continue;
              const double wx = dx == 0 ? 1.0 - ax : ax;
              row(yy * side + xx) += w * wx * wy;
            }
          }
        }
      }
    }
  }
  return r;
}

Sinogram to_sinogram(const RadonGeometry& geometry, const Vector& values) {
  if (values.size() != geometry.num_angles * geometry.side)
    throw InvalidInput("to_sinogram: value count must equal angles x detectors");
  if (!values.allFinite()) throw InvalidInput("to_sinogram: non-finite values");
  return Sinogram{geometry.angles(), geometry.side, values};
}

Vector apply(const MeasurementSetup& setup, const Vector& c) {
  if (c.size() != setup.n()) throw InvalidInput("apply: vector length does not match operator columns");
  return setup.A() * c;
}

Vector apply_adjoint(const MeasurementSetup& setup, const Vector& y) {
  if (y.size() != setup.m()) throw InvalidInput("apply_adjoint: vector length does not match operator rows");
  return setup.A().transpose() * y;
}

Vector add_noise_snr(const Vector& y_clean, double snr_db, std::uint64_t seed) {
  if (std::isinf(snr_db) && snr_db > 0) return y_clean;
  if (!std::isfinite(snr_db)) throw InvalidInput("add_noise_snr: SNR must be finite or +inf");
  const double signal = y_clean.squaredNorm();
  if (!(signal > 0.0)) throw InvalidInput("add_noise_snr: zero signal with finite SNR");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector noise(y_clean.size());
  for (Eigen::Index i = 0; i < noise.size(); ++i) noise(i) = normal(rng);
  const double target = signal / std::pow(10.0, snr_db / 10.0);
  noise *= std::sqrt(target / noise.squaredNorm());
  return y_clean + noise;
}

}  // namespace cggan
