#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "cggan/linalg.hpp"

namespace cggan {

/// Forward model y = A c + noise with A = Psi * Phi. The SVD of A is computed
/// once here and shared by every solve that uses this setup.
class MeasurementSetup {
public:
  MeasurementSetup(Matrix psi, Matrix phi);
  /// A used directly (Phi = I).
  explicit MeasurementSetup(Matrix a);

  const Matrix& psi() const { return psi_; }
  const Matrix& phi() const { return phi_; }
  const Matrix& A() const { return a_; }
  const SvdFactorization& svd_cache() const { return svd_; }
  /// A^T A, formed once.
  const Matrix& gram() const { return gram_; }
  Eigen::Index m() const { return a_.rows(); }
  Eigen::Index n() const { return a_.cols(); }

  /// ||A||_2^2, the Lipschitz constant of the gradient of 0.5||y - Ac||^2.
  double spectral_norm_sq() const;

private:
  Matrix psi_;
  Matrix phi_;
  Matrix a_;
  SvdFactorization svd_;
  Matrix gram_;
};

struct Sinogram {
  std::vector<double> angles;  // radians
  Eigen::Index detectors = 0;
  Vector values;               // angle-major: values[a * detectors + j]
};

/// m x n with i.i.d. N(0, 1/m) entries, deterministic in seed.
Matrix gaussian_measurement(Eigen::Index m, Eigen::Index n, std::uint64_t seed);

/// Orthonormal 2-D DCT-II synthesis operator for a side x side image
/// flattened row-major: image = Phi * coefficients, Phi^T Phi = I.
Matrix dct_basis(Eigen::Index side);

/// Parallel-beam geometry parameters for radon_operator.
struct RadonGeometry {
  Eigen::Index side = 0;
  Eigen::Index num_angles = 0;
  Eigen::Index oversample = 4;   // parallel rays averaged per detector bin
  double sample_step = 0.25;     // arc-length step along a ray, in pixels

  std::vector<double> angles() const;
  /// Detector span half-width; covers the circle circumscribing the image support.
  double half_width() const;
  double detector_spacing() const;
};

/// Explicit (num_angles * side) x side^2 matrix. Angles are uniform on [0, pi),
/// `side` detectors per angle spread over the diameter of the circle that
/// circumscribes the image, each bin the mean of `oversample` ray integrals of
/// the bilinearly interpolated image (pixel centres at integer offsets, zero
/// outside the grid).
Matrix radon_operator(Eigen::Index side, Eigen::Index num_angles);
Matrix radon_operator(const RadonGeometry& geometry);

Sinogram to_sinogram(const RadonGeometry& geometry, const Vector& values);

Vector apply(const MeasurementSetup& setup, const Vector& c);
Vector apply_adjoint(const MeasurementSetup& setup, const Vector& y);

inline constexpr double kNoiseless = std::numeric_limits<double>::infinity();

/// y_clean + nu with nu Gaussian, rescaled so that
/// 10 log10(||y_clean||^2 / ||nu||^2) == snr_db exactly. Infinite snr_db
/// returns the input unchanged.
Vector add_noise_snr(const Vector& y_clean, double snr_db, std::uint64_t seed);

}  // namespace cggan
