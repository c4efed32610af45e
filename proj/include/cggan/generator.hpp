#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "cggan/linalg.hpp"

namespace cggan {

enum class Activation : std::uint8_t { Identity = 0, Tanh = 1, Relu = 2, LeakyRelu = 3 };

inline constexpr double kLeakySlope = 0.2;

struct DenseLayer {
  Matrix weight;  // out x in
  Vector bias;    // out
  Activation activation = Activation::Identity;
};

/// Chain of affine layers with pointwise activations, R^d -> R^out.
class GeneratorNetwork {
public:
  GeneratorNetwork() = default;
  explicit GeneratorNetwork(std::vector<DenseLayer> layers);

  Eigen::Index input_dim() const;
  Eigen::Index output_dim() const;
  const std::vector<DenseLayer>& layers() const { return layers_; }

  Vector forward(const Vector& x) const;
  /// (dG/dx)^T w by reverse accumulation.
  Vector vjp(const Vector& x, const Vector& w) const;
  /// (dG/dx) v by forward accumulation.
  Vector jvp(const Vector& x, const Vector& v) const;
  /// Product of per-layer spectral norms; a Lipschitz bound for activations in
  /// this runtime (all are 1-Lipschitz).
  double spectral_norm_product() const;

private:
  std::vector<DenseLayer> layers_;
};

/// G(x) = basis * ((base(x) + 1) / 2) with each wrapper optional.
class ScaleBasisGenerator {
public:
  ScaleBasisGenerator() = default;
  explicit ScaleBasisGenerator(GeneratorNetwork base, bool range_shift = false,
                               std::optional<Matrix> basis = std::nullopt);

  const GeneratorNetwork& base() const { return base_; }
  bool range_shift() const { return range_shift_; }
  const std::optional<Matrix>& basis() const { return basis_; }

  Eigen::Index input_dim() const { return base_.input_dim(); }
  Eigen::Index output_dim() const { return base_.output_dim(); }

  Vector forward(const Vector& x) const;
  Vector vjp(const Vector& x, const Vector& w) const;
  Vector jvp(const Vector& x, const Vector& v) const;

  /// Lipschitz bound: base bound, halved by the range shift, times ||basis||_2.
  double lipschitz_bound() const;

private:
  GeneratorNetwork base_;
  bool range_shift_ = false;
  std::optional<Matrix> basis_;
};

/// Empirical near-isometry constants over random pairs in a ball. These are
/// sampled extremes: tau_G and L_G are lower bounds on the true suprema and
/// nu_G an upper bound on the true infimum.
struct GeneratorAssumptionEstimate {
  double nu_G = 0.0;
  double tau_G = 0.0;
  double L_G = 0.0;
  std::size_t sample_count = 0;
  double sampling_radius = 0.0;
};

GeneratorAssumptionEstimate estimate_assumption_constants(const ScaleBasisGenerator& g,
                                                          std::size_t pair_count, double radius,
                                                          std::uint64_t seed);

/// Random network with each weight matrix scaled to the given spectral norm.
/// `dims` = {d, h1, ..., n}; hidden layers use `hidden`, the last uses `output`.
GeneratorNetwork make_random_network(const std::vector<Eigen::Index>& dims, Activation hidden,
                                     Activation output, double spectral_norm, std::uint64_t seed,
                                     double bias_scale = 0.1);

/// Binary "CGGN" weight file, little-endian float32 payload.
void save_weights(const GeneratorNetwork& g, const std::filesystem::path& path);
GeneratorNetwork load_weights(const std::filesystem::path& path);

/// Reference vectors shipped next to exported weights: one CSV row per pair,
/// d input values followed by n expected outputs, with a header line.
struct ReferencePair {
  Vector input;
  Vector output;
};
std::vector<ReferencePair> load_reference_vectors(const std::filesystem::path& path,
                                                  Eigen::Index input_dim, Eigen::Index output_dim);
void save_reference_vectors(const std::vector<ReferencePair>& pairs,
                            const std::filesystem::path& path);

/// Largest |forward(input) - output| relative to max(1, |output|) over all pairs.
double max_reference_error(const GeneratorNetwork& g, const std::vector<ReferencePair>& pairs);

}  // namespace cggan
