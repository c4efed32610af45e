#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "cggan/baselines.hpp"
#include "cggan/generator.hpp"
#include "cggan/metrics.hpp"
#include "cggan/solver.hpp"

namespace cggan {

enum class ProblemKind { CS, CT };
enum class SolverKind { ACgGan, Bora, Latorre };

struct ExperimentSpec {
  ProblemKind problem = ProblemKind::CS;
  Eigen::Index image_side = 32;
  std::vector<double> sweep;  // m/n ratios for CS, angle counts for CT
  double snr_db = kNoiseless;
  SolverKind solver = SolverKind::ACgGan;
  SolverConfig solver_config;
  BaselineConfig baseline_config;
  std::filesystem::path weights;  // empty: built-in generator
  Eigen::Index latent_dim = 16;   // built-in generator only
  std::filesystem::path dataset;  // directory of .pgm files or a single file; empty: synthetic
  std::size_t image_count = 10;
  std::uint64_t seed = 0;
  std::size_t threads = 0;        // 0: hardware concurrency
  std::filesystem::path output;   // results CSV

  void validate() const;
};

/// Solver defaults used when a spec does not override them: tau 1e-6, K 1000, J = Jx = 10.
ExperimentSpec default_experiment_spec();

/// `key = value` lines, '#' comments. Keys mirror the CLI flags.
ExperimentSpec parse_experiment_spec(std::istream& in, ExperimentSpec base = default_experiment_spec());
ExperimentSpec load_experiment_spec(const std::filesystem::path& path,
                                    ExperimentSpec base = default_experiment_spec());
/// Applies one key/value pair; throws InvalidInput on unknown keys or bad values.
void apply_setting(ExperimentSpec& spec, const std::string& key, const std::string& value);

ProblemKind parse_problem_kind(const std::string& s);
SolverKind parse_solver_kind(const std::string& s);
/// Accepts "inf" / "infinity" for a noiseless run.
double parse_snr(const std::string& s);

struct ImageResult {
  double sweep_value = 0.0;
  std::size_t image = 0;
  double ssim = 0.0;
  double psnr = 0.0;
  double mse = 0.0;
  int iters = 0;
  bool converged = false;
  double runtime_s = 0.0;
  std::string error;  // non-empty when the run failed; metrics are then NaN
};

struct SweepSummary {
  double sweep_value = 0.0;
  std::size_t count = 0;  // successful images
  ConfidenceInterval ssim, psnr, mse;
  double runtime_s = 0.0;
};

struct ExperimentResults {
  std::vector<ImageResult> rows;  // sweep-major, then image index
  std::vector<SweepSummary> summary;
};

/// Random tanh generator R^latent -> [-1, 1]^(side^2), deterministic in seed.
GeneratorNetwork builtin_generator(Eigen::Index side, Eigen::Index latent_dim, std::uint64_t seed);

/// Smooth positive blob images in [0, 1], deterministic in seed.
std::vector<Matrix> synthetic_images(std::size_t count, Eigen::Index side, std::uint64_t seed);

/// The experiment's images: loaded from `dataset` or synthesized.
std::vector<Matrix> load_dataset(const ExperimentSpec& spec);

/// The experiment's generator network: loaded from `weights` or built in.
GeneratorNetwork load_generator(const ExperimentSpec& spec);

/// Sensing matrix Psi for one sweep point. Depends on the sweep value, not its position.
Matrix sensing_matrix(const ExperimentSpec& spec, double sweep_value);

/// Operators shared by every image at one sweep point. For A-CG-GAN the
/// measurement setup is Psi * Phi with Phi the DCT synthesis basis and the
/// generator maps into DCT coefficients; baselines work in the image domain.
struct SweepContext {
  double sweep_value = 0.0;
  std::shared_ptr<const MeasurementSetup> setup;
  std::shared_ptr<const ScaleBasisGenerator> generator;
  bool coefficient_domain = false;
};

SweepContext build_sweep_context(const ExperimentSpec& spec, const GeneratorNetwork& network, double sweep_value);

struct Reconstruction {
  Matrix image;  // clipped to [0, 1]
  ImageResult result;
  RunTrace trace;
};

/// One image through forward model, noise, solver and metrics. Errors are thrown.
Reconstruction reconstruct_image(const ExperimentSpec& spec, const SweepContext& ctx, const Matrix& truth,
                                 std::size_t image_index);

/// Full sweep. Images run concurrently; rows come back in (sweep, image) order
/// and a failing image keeps its row with the error recorded.
ExperimentResults run_experiment(const ExperimentSpec& spec);

/// Header sweep_value,image,ssim,psnr,mse,iters,converged,runtime_s.
void write_results_csv(const ExperimentResults& results, std::ostream& out);
void write_results_csv(const ExperimentResults& results, const std::filesystem::path& path);

}  // namespace cggan
