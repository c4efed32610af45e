#pragma once

#include <vector>

#include "cggan/linalg.hpp"

namespace cggan {

/// Mean local SSIM: 11x11 Gaussian window (std 1.5), C1 = 0.01^2, C2 = 0.03^2,
/// symmetric boundary. Images must share a shape and lie in [0, 1].
double ssim(const Matrix& a, const Matrix& b);

double mse(const Matrix& a, const Matrix& b);
/// 10 log10(peak^2 / mse); +inf for identical images.
double psnr(const Matrix& a, const Matrix& b, double peak = 1.0);

struct ConfidenceInterval {
  double mean = 0.0;
  double half_width = 0.0;
};

/// mean +- t_{0.005, n-1} s / sqrt(n). Requires at least two values.
ConfidenceInterval confidence_interval_99(const std::vector<double>& values);

}  // namespace cggan
