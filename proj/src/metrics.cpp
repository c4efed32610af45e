#include "cggan/metrics.hpp"

#include <array>
#include <cmath>
#include <limits>

#include <boost/math/distributions/students_t.hpp>

namespace cggan {

namespace {

constexpr int kRadius = 5;
constexpr double kSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

std::array<double, 2 * kRadius + 1> gaussian_taps() {
  std::array<double, 2 * kRadius + 1> w{};
  double sum = 0.0;
  for (int i = -kRadius; i <= kRadius; ++i) {
    w[i + kRadius] = std::exp(-0.5 * i * i / (kSigma * kSigma));
    sum += w[i + kRadius];
  }
  for (double& v : w) v /= sum;
  return w;
}

// Mirror index: ... c b a | a b c ... | c b a ...
Eigen::Index reflect(Eigen::Index i, Eigen::Index n) {
  while (i < 0 || i >= n) i = i < 0 ? -i - 1 : 2 * n - i - 1;
  return i;
}

Matrix blur(const Matrix& m) {
  static const auto w = gaussian_taps();
  Matrix rows = Matrix::Zero(m.rows(), m.cols());
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      for (int k = -kRadius; k <= kRadius; ++k) rows(r, c) += w[k + kRadius] * m(r, reflect(c + k, m.cols()));
  Matrix out = Matrix::Zero(m.rows(), m.cols());
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      for (int k = -kRadius; k <= kRadius; ++k) out(r, c) += w[k + kRadius] * rows(reflect(r + k, m.rows()), c);
  return out;
}

void check_pair(const Matrix& a, const Matrix& b, const char* who) {
  if (a.rows() != b.rows() || a.cols() != b.cols() || a.size() == 0)
    throw InvalidInput(std::string(who) + ": images must share a non-empty shape");
  if (!all_finite(a) || !all_finite(b)) throw InvalidInput(std::string(who) + ": non-finite pixels");
}

}  // namespace

double ssim(const Matrix& a, const Matrix& b) {
  check_pair(a, b, "ssim");
  if (a.minCoeff() < 0.0 || a.maxCoeff() > 1.0 || b.minCoeff() < 0.0 || b.maxCoeff() > 1.0)
    throw InvalidInput("ssim: pixel values must lie in [0, 1]");
  const Matrix mu_a = blur(a), mu_b = blur(b);
  const Matrix saa = blur(a.cwiseProduct(a)) - mu_a.cwiseProduct(mu_a);
  const Matrix sbb = blur(b.cwiseProduct(b)) - mu_b.cwiseProduct(mu_b);
  const Matrix sab = blur(a.cwiseProduct(b)) - mu_a.cwiseProduct(mu_b);
  const auto num = (2.0 * mu_a.array() * mu_b.array() + kC1) * (2.0 * sab.array() + kC2);
  const auto den = (mu_a.array().square() + mu_b.array().square() + kC1) * (saa.array() + sbb.array() + kC2);
  return (num / den).mean();
}

double mse(const Matrix& a, const Matrix& b) {
  check_pair(a, b, "mse");
  return (a - b).squaredNorm() / static_cast<double>(a.size());
}

double psnr(const Matrix& a, const Matrix& b, double peak) {
  const double e = mse(a, b);
  if (e == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / e);
}

ConfidenceInterval confidence_interval_99(const std::vector<double>& values) {
  if (values.size() < 2) throw InvalidInput("confidence_interval_99: at least two values required");
  const double n = static_cast<double>(values.size());
  double mean = 0.0;
  for (double v : values) {
    if (!std::isfinite(v)) throw InvalidInput("confidence_interval_99: non-finite value");
    mean += v;
  }
  mean /= n;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double s = std::sqrt(ss / (n - 1.0));
  const boost::math::students_t dist(n - 1.0);
  const double t = boost::math::quantile(boost::math::complement(dist, 0.005));
  return {mean, t * s / std::sqrt(n)};
}

}  // namespace cggan
