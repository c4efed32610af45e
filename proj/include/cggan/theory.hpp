#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "cggan/generator.hpp"
#include "cggan/operators.hpp"
#include "cggan/solver.hpp"

namespace cggan {

/// A known feasible point v* = (x*, z*, u*, c*).
struct PlantedSolution {
  Vector x, z, u, c;
};

struct TheoryConstants {
  double L_f = 0.0;
  std::array<double, 4> L_reg{};  // gradient Lipschitz constants of the smooth parts of R_1..R_4
  double lip_z = 0.0;
  double lip_u = 0.0;
  double lip_c = 0.0;
  double gamma = 0.0;
  std::array<double, 4> gamma_hat{};
  std::array<double, 4> beta{};
  std::array<double, 4> alpha{};
  double xi1_max = 0.0;
  double xi2_max = 0.0;
};

/// Closed-form constants from the problem data, finite domain radii, the sampled
/// generator constants and the largest observed feasibility gaps.
TheoryConstants theory_constants(double L_f, const SolverConfig& cfg, const GeneratorAssumptionEstimate& g,
                                 double xi1_max, double xi2_max);

struct CheckEntry {
  std::string name;
  bool pass = false;
  double worst_margin = 0.0;  // pass <=> worst_margin >= -tolerance
  std::size_t samples = 0;
  double tolerance = 0.0;
};

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  std::size_t window_begin = 0;  // first and one-past-last index considered
  std::size_t window_end = 0;
  std::size_t window_points = 0;
  bool in_neighborhood = false;  // no points above the plateau threshold
};

struct TheoryCheckReport {
  std::vector<CheckEntry> checks;
  std::optional<RateFit> rate;
  bool all_pass() const;
};

void write_report_text(const TheoryCheckReport& report, std::ostream& out);
/// Header check,pass,worst_margin,samples.
void write_report_csv(const TheoryCheckReport& report, std::ostream& out);

/// Coupling part of the augmented Lagrangian (no regularizers) and its block gradients.
double lbar_value(const Problem& p, const SolverState& s, double rho);
Vector lbar_grad_z(const Problem& p, const SolverState& s, double rho);
Vector lbar_grad_u(const Problem& p, const SolverState& s, double rho);
Vector lbar_grad_c(const Problem& p, const SolverState& s, double rho);

/// Random state pairs inside the domain balls; each block's gradient-difference
/// ratio against lip_z, lip_u, lip_c. Requires finite radii.
CheckEntry check_lipschitz_bounds(const Problem& p, const SolverConfig& cfg, std::size_t samples,
                                  std::uint64_t seed);

/// sum_{i=1}^{terms} 1 / (i ln^2(i+1)).
double dual_series_partial_sum(std::size_t terms);

/// max_k ||phi_{j,k}|| <= 4 sigma0 over the trace plus the series partial sum <= 4.
CheckEntry check_dual_norm_bound(const std::vector<RunTrace>& traces, double sigma0,
                                 std::size_t series_terms = 1000000);

/// Per-block Delta_{j,k} = max(||v*_j - v_j^k||, ||v*_j - v_j^{k+1}||), k = 0..K-1.
/// Requires a trace recorded with iterates.
std::array<std::vector<double>, 4> delta_distances(const RunTrace& trace, const PlantedSolution& star);

/// delta_{j,k} <= 2 Delta_{j,k} + 1e-12.
CheckEntry check_delta_relation(const RunTrace& trace, const PlantedSolution& star);

/// Grid minimizer of <t - w, grad g(w)> + ||t - w||^2 / (2 alpha) + r(t) against
/// the prox formula, for random quadratics g and l1 r in 1 or 2 dimensions.
CheckEntry check_prox_lemma(int dimension, double grid_step, std::size_t samples, std::uint64_t seed);

/// ISTA step inequality for random convex quadratics + l1, theta in {0, .25, .5, .75, 1}.
CheckEntry check_ista_descent_lemma(std::size_t samples, std::uint64_t seed);

/// L_{k+1} <= L_k + sum_j beta_j Delta_{j,k}^2 with slack >= -1e-8 (1 + |L_k|).
CheckEntry check_iteration_inequality(const RunTrace& trace, const PlantedSolution& star,
                                      const TheoryConstants& constants);

/// Least-squares slope of ln(values) over points above 10x the terminal plateau
/// (the smallest value in the final tenth of the sequence).
RateFit fit_convergence_rate(const std::vector<double>& values);
/// Same fit on sum_j Delta_{j,k}^2 / alpha_j.
RateFit fit_convergence_rate(const RunTrace& trace, const PlantedSolution& star,
                             const std::array<double, 4>& alpha);

/// Planted CG problem: tanh generator with spectral-norm-controlled weights whose
/// output sits near `output_bias`, u* near u_mean, y = A (z* .* u*).
struct PlantedSpec {
  Eigen::Index n = 32;
  Eigen::Index m = 64;
  Eigen::Index d = 4;
  Eigen::Index hidden = 16;
  double weight_norm = 0.5;
  double output_bias = 1.0;
  double u_mean = 1.0;
  double u_spread = 0.02;
  bool identity_A = false;  // A = I (then m = n)
  std::uint64_t seed = 1;
};

struct PlantedInstance {
  std::shared_ptr<const MeasurementSetup> setup;
  std::shared_ptr<const ScaleBasisGenerator> generator;
  Vector y;
  Vector mu_u;
  PlantedSolution star;
  Problem problem() const { return Problem(y, *setup, *generator); }
};

PlantedInstance make_planted_instance(const PlantedSpec& spec);

struct TheorySuiteOptions {
  std::uint64_t seed = 7;
  std::size_t samples = 200;
  int iterations = 200;
  std::size_t dual_runs = 10;
  int dual_iterations = 1000;
};

/// Builds a planted problem, runs the solver with adaptive dual steps and finite
/// radii, and evaluates every check plus the rate fit.
TheoryCheckReport run_theory_suite(const TheorySuiteOptions& options);

}  // namespace cggan
