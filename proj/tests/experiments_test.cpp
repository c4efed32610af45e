#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <sstream>

#include "cggan/experiments.hpp"
#include "cggan/image_io.hpp"

using namespace cggan;

namespace {

ExperimentSpec small_spec() {
  ExperimentSpec spec = default_experiment_spec();
  spec.image_side = 8;
  spec.latent_dim = 4;
  spec.image_count = 3;
  spec.sweep = {0.5};
  spec.solver_config.K = 40;
  spec.threads = 2;
  spec.seed = 5;
  return spec;
}

}  // namespace

TEST(SpecParsing, KeyValueLines) {
  std::istringstream in(
      "# comment\n"
      "problem = ct\n"
      "sweep = 4, 8,16\n"
      "snr = inf\n"
      "solver = bora\n"
      "mu = 0.01\n"
      "K=25\n"
      "dual_step = adaptive\n"
      "images = 4\n"
      "\n");
  const ExperimentSpec s = parse_experiment_spec(in);
  EXPECT_EQ(s.problem, ProblemKind::CT);
  EXPECT_EQ(s.sweep, (std::vector<double>{4, 8, 16}));
  EXPECT_TRUE(std::isinf(s.snr_db));
  EXPECT_EQ(s.solver, SolverKind::Bora);
  EXPECT_DOUBLE_EQ(s.solver_config.mu, 0.01);
  EXPECT_EQ(s.solver_config.K, 25);
  EXPECT_EQ(s.solver_config.dual_step_mode, DualStepMode::Adaptive);
  EXPECT_EQ(s.image_count, 4u);
  // untouched defaults
  EXPECT_DOUBLE_EQ(s.solver_config.tau, 1e-6);
  EXPECT_EQ(s.solver_config.J, 10);
}

TEST(SpecParsing, Errors) {
  ExperimentSpec s = default_experiment_spec();
  EXPECT_THROW(apply_setting(s, "bogus", "1"), InvalidInput);
  EXPECT_THROW(apply_setting(s, "mu", "abc"), InvalidInput);
  EXPECT_THROW(apply_setting(s, "solver", "gan"), InvalidInput);
  EXPECT_THROW(apply_setting(s, "problem", "mri"), InvalidInput);
  std::istringstream missing_eq("mu 0.1\n");
  EXPECT_THROW(parse_experiment_spec(missing_eq), InvalidInput);
  EXPECT_DOUBLE_EQ(parse_snr("60"), 60.0);
  EXPECT_TRUE(std::isinf(parse_snr("infinity")));

  s.sweep = {1.5};
  EXPECT_THROW(s.validate(), InvalidInput);
  s.problem = ProblemKind::CT;
  EXPECT_THROW(s.validate(), InvalidInput);
  s.sweep = {3};
  EXPECT_NO_THROW(s.validate());
}

TEST(Experiment, EmptySweepWritesHeaderOnly) {
  ExperimentSpec spec = small_spec();
  spec.sweep.clear();
  const ExperimentResults r = run_experiment(spec);
  EXPECT_TRUE(r.rows.empty());
  std::ostringstream out;
  write_results_csv(r, out);
  EXPECT_EQ(out.str(), "sweep_value,image,ssim,psnr,mse,iters,converged,runtime_s\n");
}

TEST(Experiment, SyntheticImagesAreDeterministicAndInRange) {
  const auto a = synthetic_images(3, 8, 1), b = synthetic_images(3, 8, 1);
  ASSERT_EQ(a.size(), 3u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i], b[i]);
    EXPECT_GE(a[i].minCoeff(), 0.0);
    EXPECT_DOUBLE_EQ(a[i].maxCoeff(), 1.0);
  }
}

TEST(Experiment, RecoversImageInGeneratorRangeAtFullSampling) {
  ExperimentSpec spec = small_spec();
  spec.sweep = {1.0};
  // Noiseless full sampling: regularization weights near zero, soft penalty.
  spec.solver_config.K = 2000;
  spec.solver_config.lambda = 1e-6;
  spec.solver_config.mu = 0.0;
  spec.solver_config.rho = 0.1;
  const GeneratorNetwork net = load_generator(spec);
  const SweepContext ctx = build_sweep_context(spec, net, 1.0);
  // (net(x) + 1) / 2 is an image the range-shifted generator produces exactly.
  Vector x = Vector::LinSpaced(spec.latent_dim, -0.5, 0.5);
  const Vector v = (net.forward(x).array() + 1.0) / 2.0;
  const Matrix truth = Eigen::Map<const Matrix>(v.data(), spec.image_side, spec.image_side);
  const Reconstruction r = reconstruct_image(spec, ctx, truth, 0);
  EXPECT_GE(r.result.ssim, 0.95);
  EXPECT_EQ(r.image.rows(), spec.image_side);
}

TEST(Experiment, ResultsDoNotDependOnSweepOrder) {
  ExperimentSpec spec = small_spec();
  spec.sweep = {0.5, 0.8};
  const ExperimentResults a = run_experiment(spec);
  spec.sweep = {0.8, 0.5};
  spec.threads = 1;
  const ExperimentResults b = run_experiment(spec);
  ASSERT_EQ(a.rows.size(), 6u);
  ASSERT_EQ(b.rows.size(), 6u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(a.rows[i].sweep_value, 0.5);
    EXPECT_EQ(b.rows[i + 3].sweep_value, 0.5);
    EXPECT_EQ(a.rows[i].ssim, b.rows[i + 3].ssim);
    EXPECT_EQ(a.rows[i + 3].mse, b.rows[i].mse);
  }
  EXPECT_EQ(a.summary.size(), 2u);
  EXPECT_EQ(a.summary[0].count, 3u);
}

TEST(Experiment, BaselinesAndTomographyRun) {
  ExperimentSpec spec = small_spec();
  spec.image_count = 2;
  spec.solver = SolverKind::Bora;
  spec.baseline_config.steps = 30;
  spec.baseline_config.restarts = 2;
  EXPECT_EQ(run_experiment(spec).summary[0].count, 2u);
  spec.solver = SolverKind::Latorre;
  EXPECT_EQ(run_experiment(spec).summary[0].count, 2u);
  spec.solver = SolverKind::ACgGan;
  spec.problem = ProblemKind::CT;
  spec.sweep = {6};
  spec.snr_db = 40.0;
  const ExperimentResults r = run_experiment(spec);
  EXPECT_EQ(r.summary[0].count, 2u);
  EXPECT_TRUE(std::isfinite(r.summary[0].ssim.mean));
}

TEST(Experiment, PerImageFailuresAreRecorded) {
  ExperimentSpec spec = small_spec();
  spec.image_count = 2;
  spec.snr_db = -std::numeric_limits<double>::infinity();
  const ExperimentResults r = run_experiment(spec);
  ASSERT_EQ(r.rows.size(), 2u);
  for (const ImageResult& row : r.rows) {
    EXPECT_FALSE(row.error.empty());
    EXPECT_TRUE(std::isnan(row.ssim));
  }
  EXPECT_EQ(r.summary[0].count, 0u);
  std::ostringstream out;
  write_results_csv(r, out);
  EXPECT_NE(out.str().find("0.5,0,,,,"), std::string::npos);
}

TEST(Experiment, DatasetDirectoryAndShapeCheck) {
  const auto dir = std::filesystem::temp_directory_path() / "cggan_dataset_test";
  std::filesystem::create_directories(dir);
  save_image(Matrix::Constant(8, 8, 0.5), dir / "a.pgm");
  save_image(Matrix::Constant(8, 8, 1.0), dir / "b.pgm");
  ExperimentSpec spec = small_spec();
  spec.dataset = dir;
  spec.image_count = 5;
  EXPECT_EQ(load_dataset(spec).size(), 2u);
  spec.image_side = 4;
  EXPECT_THROW(load_dataset(spec), InvalidInput);
  std::filesystem::remove_all(dir);
}
