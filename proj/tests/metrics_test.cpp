#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "cggan/errors.hpp"
#include "cggan/image_io.hpp"
#include "cggan/metrics.hpp"

using namespace cggan;

namespace {

Matrix random_image(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = unif(rng);
  return m;
}

// Symmetric (half-sample) reflection, e.g. -1 -> 0, n -> n-1.
Eigen::Index reflect(Eigen::Index i, Eigen::Index n) {
  while (i < 0 || i >= n) i = i < 0 ? -i - 1 : 2 * n - i - 1;
  return i;
}

// Direct 2-D windowed SSIM with an explicit 11x11 Gaussian kernel.
double ssim_direct(const Matrix& a, const Matrix& b) {
  const int r = 5;
  double w[11][11], total = 0.0;
  for (int i = -r; i <= r; ++i)
    for (int j = -r; j <= r; ++j) total += w[i + r][j + r] = std::exp(-(i * i + j * j) / (2.0 * 1.5 * 1.5));
  const double c1 = 1e-4, c2 = 9e-4;
  double sum = 0.0;
  for (Eigen::Index p = 0; p < a.rows(); ++p)
    for (Eigen::Index q = 0; q < a.cols(); ++q) {
      double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
      for (int i = -r; i <= r; ++i)
        for (int j = -r; j <= r; ++j) {
          const double k = w[i + r][j + r] / total;
          const double va = a(reflect(p + i, a.rows()), reflect(q + j, a.cols()));
          const double vb = b(reflect(p + i, a.rows()), reflect(q + j, a.cols()));
          ma += k * va;
          mb += k * vb;
          saa += k * va * va;
          sbb += k * vb * vb;
          sab += k * va * vb;
        }
      const double va = saa - ma * ma, vb = sbb - mb * mb, cov = sab - ma * mb;
      sum += (2 * ma * mb + c1) * (2 * cov + c2) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
    }
  return sum / static_cast<double>(a.size());
}

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("cggan_metrics_" + name);
}

}  // namespace

TEST(Ssim, IdentityAndSymmetry) {
  std::mt19937_64 rng(1);
  const Matrix a = random_image(rng, 16, 16), b = random_image(rng, 16, 16);
  EXPECT_DOUBLE_EQ(ssim(a, a), 1.0);
  EXPECT_NEAR(ssim(a, b), ssim(b, a), 1e-12);
  EXPECT_LT(ssim(a, b), 0.5);
}

TEST(Ssim, MatchesDirectWindowedEvaluation) {
  std::mt19937_64 rng(2);
  for (int t = 0; t < 3; ++t) {
    const Matrix a = random_image(rng, 12, 9);
    const Matrix b = (0.7 * a + 0.3 * random_image(rng, 12, 9)).eval();
    EXPECT_NEAR(ssim(a, b), ssim_direct(a, b), 1e-10);
  }
  const Matrix tiny = random_image(rng, 3, 4);
  EXPECT_NEAR(ssim(tiny, tiny * 0.5), ssim_direct(tiny, tiny * 0.5), 1e-10);
}

TEST(Ssim, RejectsBadInputs) {
  EXPECT_THROW(ssim(Matrix::Zero(4, 4), Matrix::Zero(4, 5)), InvalidInput);
  EXPECT_THROW(ssim(Matrix::Constant(4, 4, 1.5), Matrix::Zero(4, 4)), InvalidInput);
  EXPECT_THROW(ssim(Matrix::Constant(4, 4, -0.1), Matrix::Zero(4, 4)), InvalidInput);
}

TEST(MsePsnr, HandValues) {
  const Matrix a = Matrix::Zero(2, 2);
  Matrix b = a;
  b(0, 0) = 1.0;
  EXPECT_DOUBLE_EQ(mse(a, b), 0.25);
  EXPECT_NEAR(psnr(a, b), 10.0 * std::log10(4.0), 1e-12);
  EXPECT_TRUE(std::isinf(psnr(a, a)));
}

TEST(ConfidenceInterval, StudentT) {
  const ConfidenceInterval two = confidence_interval_99({0.0, 2.0});
  EXPECT_DOUBLE_EQ(two.mean, 1.0);
  EXPECT_NEAR(two.half_width, 63.65674, 1e-4);
  EXPECT_EQ(confidence_interval_99({3.0, 3.0, 3.0}).half_width, 0.0);
  EXPECT_THROW(confidence_interval_99({1.0}), InvalidInput);

  std::mt19937_64 rng(3);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> v(100);
  for (double& x : v) x = normal(rng);
  EXPECT_NEAR(confidence_interval_99(v).half_width, 0.2626, 0.2 * 0.2626);
}

TEST(ImageIo, AllBlackAndRoundTrip) {
  const auto black = temp_path("black.pgm");
  {
    std::ofstream f(black, std::ios::binary);
    f << "P5\n4 3\n255\n" << std::string(12, '\0');
  }
  const Matrix z = load_image(black);
  EXPECT_EQ(z.rows(), 3);
  EXPECT_EQ(z.cols(), 4);
  EXPECT_EQ(z.norm(), 0.0);

  std::mt19937_64 rng(4);
  Matrix img = random_image(rng, 5, 7);
  img(0, 0) = 1.0;
  const auto path = temp_path("roundtrip.pgm");
  save_image(img, path);
  EXPECT_LE((load_image(path) - img).cwiseAbs().maxCoeff(), 1.0 / 255.0);
  std::filesystem::remove(black);
  std::filesystem::remove(path);
}

TEST(ImageIo, ScalesByMaximumPixelAndSkipsComments) {
  const auto path = temp_path("half.pgm");
  {
    std::ofstream f(path, std::ios::binary);
    f << "P5\n# comment\n2 1\n255\n" << static_cast<char>(64) << static_cast<char>(128);
  }
  const Matrix m = load_image(path);
  EXPECT_DOUBLE_EQ(m(0, 1), 1.0);
  EXPECT_DOUBLE_EQ(m(0, 0), 0.5);
  std::filesystem::remove(path);
}

TEST(ImageIo, CorruptFilesRaiseFormatError) {
  const auto path = temp_path("bad.pgm");
  {
    std::ofstream f(path, std::ios::binary);
    f << "P2\n2 2\n255\n0 0 0 0";
  }
  EXPECT_THROW(load_image(path), FormatError);
  {
    std::ofstream f(path, std::ios::binary);
    f << "P5\n4 4\n255\n" << std::string(5, 'a');
  }
  EXPECT_THROW(load_image(path), FormatError);
  std::filesystem::remove(path);
}
