#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <cstring>
#include <fstream>
#include <limits>

#include "cggan/generator.hpp"
#include "test_support.hpp"

using namespace cggan;
using namespace testing_support;

namespace {

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("cggan_generator_test_" + name);
}

std::string read_bytes(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(f), {});
}

void write_bytes(const std::filesystem::path& p, const std::string& s) {
  std::ofstream f(p, std::ios::binary);
  f.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::size_t format_error_offset(const std::filesystem::path& p) {
  try {
    load_weights(p);
  } catch (const FormatError& e) {
    return e.offset();
  }
  ADD_FAILURE() << "expected FormatError";
  return 0;
}

}  // namespace

TEST(GeneratorNetwork, ForwardMatchesHandEvaluation) {
  DenseLayer l1{Matrix::Identity(2, 2) * 2.0, Vector::Constant(2, 0.5), Activation::Tanh};
  Matrix w2(1, 2);
  w2 << 1.0, -1.0;
  DenseLayer l2{w2, Vector::Constant(1, 0.25), Activation::LeakyRelu};
  const GeneratorNetwork g({l1, l2});
  Vector x(2);
  x << 0.3, -0.4;
  const double h0 = std::tanh(2 * 0.3 + 0.5), h1 = std::tanh(2 * -0.4 + 0.5);
  const double pre = h0 - h1 + 0.25;
  EXPECT_NEAR(g.forward(x)(0), pre > 0 ? pre : kLeakySlope * pre, 1e-15);
  EXPECT_EQ(g.input_dim(), 2);
  EXPECT_EQ(g.output_dim(), 1);
}

TEST(GeneratorNetwork, RejectsMismatchedLayers) {
  DenseLayer a{Matrix::Ones(3, 2), Vector::Zero(3), Activation::Relu};
  DenseLayer b{Matrix::Ones(1, 4), Vector::Zero(1), Activation::Identity};
  EXPECT_THROW(GeneratorNetwork({a, b}), InvalidInput);
  EXPECT_THROW(GeneratorNetwork({DenseLayer{Matrix::Ones(3, 2), Vector::Zero(2), Activation::Relu}}), InvalidInput);
}

TEST(GeneratorNetwork, VjpMatchesCentralDifferences) {
  std::mt19937_64 rng(21);
  std::uniform_int_distribution<int> dd(1, 16), nn(1, 64);
  for (int t = 0; t < 20; ++t) {
    const Eigen::Index d = dd(rng), n = nn(rng);
    const GeneratorNetwork g = tanh_network(d, 24, n, 100 + t);
    const Vector x = random_vector(rng, d);
    const Vector w = random_vector(rng, n);
    const Vector fd = finite_difference_gradient([&](const Vector& v) { return w.dot(g.forward(v)); }, x);
    EXPECT_LE(relative_error(g.vjp(x, w), fd), 1e-5) << "instance " << t;
  }
}

TEST(GeneratorNetwork, JvpIsAdjointOfVjp) {
  std::mt19937_64 rng(22);
  const GeneratorNetwork g =
      make_random_network({5, 12, 9, 20}, Activation::LeakyRelu, Activation::Tanh, 1.3, 7, 0.2);
  for (int t = 0; t < 10; ++t) {
    const Vector x = random_vector(rng, 5), v = random_vector(rng, 5), w = random_vector(rng, 20);
    EXPECT_NEAR(g.jvp(x, v).dot(w), v.dot(g.vjp(x, w)), 1e-12 * (1.0 + std::abs(v.dot(g.vjp(x, w)))));
  }
}

TEST(GeneratorNetwork, RandomNetworkHasRequestedSpectralNorms) {
  const GeneratorNetwork g = make_random_network({4, 8, 6}, Activation::Tanh, Activation::Identity, 0.7, 3);
  for (const auto& l : g.layers())
    EXPECT_NEAR(Eigen::JacobiSVD<Matrix>(l.weight).singularValues()(0), 0.7, 1e-12);
  EXPECT_NEAR(g.spectral_norm_product(), 0.49, 1e-12);
}

TEST(ScaleBasisGenerator, RangeShiftAndBasis) {
  const GeneratorNetwork net = tanh_network(3, 8, 4, 5);
  std::mt19937_64 rng(23);
  const Matrix basis = random_matrix(rng, 4, 4);
  const ScaleBasisGenerator plain(net), shifted(net, true), full(net, true, basis);
  const Vector x = random_vector(rng, 3), w = random_vector(rng, 4);
  EXPECT_LE((shifted.forward(x) - (net.forward(x).array() + 1.0).matrix() / 2.0).norm(), 1e-15);
  EXPECT_LE((full.forward(x) - basis * shifted.forward(x)).norm(), 1e-14);
  const Vector fd = finite_difference_gradient([&](const Vector& v) { return w.dot(full.forward(v)); }, x);
  EXPECT_LE(relative_error(full.vjp(x, w), fd), 1e-6);
  EXPECT_LE((plain.vjp(x, w) - net.vjp(x, w)).norm(), 1e-15);
  EXPECT_THROW(ScaleBasisGenerator(net, false, Matrix::Identity(3, 3)), InvalidInput);
}

TEST(AssumptionConstants, LinearIsometryIsExact) {
  std::mt19937_64 rng(24);
  const Matrix q = random_matrix(rng, 6, 3).householderQr().householderQ() * Matrix::Identity(6, 3);
  const GeneratorNetwork g({DenseLayer{q, Vector::Zero(6), Activation::Identity}});
  const auto est = estimate_assumption_constants(ScaleBasisGenerator(g), 100, 2.0, 1);
  EXPECT_NEAR(est.nu_G, 1.0, 1e-12);
  EXPECT_NEAR(est.tau_G, 1.0, 1e-12);
  EXPECT_LE(est.L_G, 1e-12);
  EXPECT_EQ(est.sample_count, 100u);
  EXPECT_THROW(estimate_assumption_constants(ScaleBasisGenerator(g), 1, 2.0, 1), InvalidInput);
}

TEST(AssumptionConstants, SampledBoundsAreOrdered) {
  const ScaleBasisGenerator g(tanh_network(4, 16, 12, 9, 0.8));
  const auto est = estimate_assumption_constants(g, 300, 2.0, 2);
  EXPECT_LE(est.nu_G, est.tau_G);
  EXPECT_LE(est.tau_G, g.lipschitz_bound() + 1e-12);
  EXPECT_GT(est.L_G, 0.0);
}

TEST(WeightFile, RoundTripWithinFloatPrecision) {
  const GeneratorNetwork g = make_random_network({3, 7, 5}, Activation::Relu, Activation::Tanh, 1.1, 4, 0.3);
  const auto path = temp_path("roundtrip.cggn");
  save_weights(g, path);
  const GeneratorNetwork back = load_weights(path);
  ASSERT_EQ(back.layers().size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(back.layers()[i].activation, g.layers()[i].activation);
    EXPECT_LE((back.layers()[i].weight - g.layers()[i].weight).cwiseAbs().maxCoeff(), 1e-6);
  }
  // Header: magic, version, count, then rows/cols/tag of layer 0.
  const std::string bytes = read_bytes(path);
  EXPECT_EQ(bytes.substr(0, 4), "CGGN");
  EXPECT_EQ(static_cast<unsigned char>(bytes[4]), 1u);
  EXPECT_EQ(static_cast<unsigned char>(bytes[8]), 2u);
  EXPECT_EQ(static_cast<unsigned char>(bytes[12]), 7u);
  EXPECT_EQ(static_cast<unsigned char>(bytes[16]), 3u);
  EXPECT_EQ(static_cast<unsigned char>(bytes[20]), static_cast<unsigned char>(Activation::Relu));
  EXPECT_EQ(bytes.size(), 12u + (9 + 4 * (21 + 7)) + (9 + 4 * (35 + 5)));
}

TEST(WeightFile, CorruptionReportsOffsets) {
  const GeneratorNetwork g = make_random_network({2, 3}, Activation::Tanh, Activation::Tanh, 1.0, 4);
  const auto path = temp_path("corrupt.cggn");
  save_weights(g, path);
  const std::string good = read_bytes(path);

  std::string bad = good;
  bad[0] = 'X';
  write_bytes(path, bad);
  EXPECT_EQ(format_error_offset(path), 0u);

  bad = good;
  bad[4] = 2;
  write_bytes(path, bad);
  EXPECT_EQ(format_error_offset(path), 4u);

  bad = good;
  bad[20] = 9;  // activation tag of layer 0
  write_bytes(path, bad);
  EXPECT_EQ(format_error_offset(path), 20u);

  write_bytes(path, good.substr(0, good.size() - 2));
  EXPECT_THROW(load_weights(path), FormatError);

  write_bytes(path, good + "x");
  EXPECT_EQ(format_error_offset(path), good.size());

  bad = good;
  const float nan = std::numeric_limits<float>::quiet_NaN();
  std::memcpy(bad.data() + 21, &nan, 4);
  write_bytes(path, bad);
  EXPECT_THROW(load_weights(path), FormatError);
}

TEST(ReferenceVectors, RoundTripAndErrorMeasure) {
  const GeneratorNetwork g = tanh_network(3, 6, 4, 8);
  std::mt19937_64 rng(25);
  std::vector<ReferencePair> pairs;
  for (int i = 0; i < 3; ++i) {
    const Vector x = random_vector(rng, 3);
    pairs.push_back({x, g.forward(x)});
  }
  const auto path = temp_path("refs.csv");
  save_reference_vectors(pairs, path);
  const auto back = load_reference_vectors(path, 3, 4);
  ASSERT_EQ(back.size(), 3u);
  EXPECT_LE(max_reference_error(g, back), 1e-8);
  pairs[1].output(2) += 0.5;
  EXPECT_NEAR(max_reference_error(g, pairs), 0.5 / std::max(1.0, std::abs(pairs[1].output(2))), 1e-12);
  EXPECT_THROW(load_reference_vectors(path, 2, 4), FormatError);
}
