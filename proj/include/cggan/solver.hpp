#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <stdexcept>
#include <vector>

#include "cggan/generator.hpp"
#include "cggan/linalg.hpp"
#include "cggan/operators.hpp"

namespace cggan {

inline constexpr double kUnbounded = std::numeric_limits<double>::infinity();

enum class DualStepMode { Constant, Adaptive };

/// R_x(x): zero, ||x||^2 / (2 sigma^2), or weight * ||x||_1.
struct LatentRegularizer {
  enum class Kind { Zero, Quadratic, L1 };
  Kind kind = Kind::Zero;
  double parameter = 0.0;  // sigma for Quadratic, weight for L1

  static LatentRegularizer zero() { return {}; }
  static LatentRegularizer quadratic(double sigma) { return {Kind::Quadratic, sigma}; }
  static LatentRegularizer l1(double weight) { return {Kind::L1, weight}; }

  bool smooth() const { return kind != Kind::L1; }
  double value(const Vector& x) const;
  /// Gradient of the smooth part (zero for L1, which is handled by its prox).
  Vector gradient(const Vector& x) const;
};

/// l2-ball radii for x, z, u, c. Infinite means unconstrained.
struct DomainRadii {
  double x = kUnbounded;
  double z = kUnbounded;
  double u = kUnbounded;
  double c = kUnbounded;
};

struct AdamParams {
  double step = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Symmetric positive definite matrix with its Cholesky factor cached.
class SpdMatrix {
public:
  explicit SpdMatrix(Matrix m);
  static SpdMatrix identity(Eigen::Index n);

  const Matrix& matrix() const { return m_; }
  bool is_diagonal() const { return diagonal_; }
  Eigen::Index size() const { return m_.rows(); }
  Vector apply(const Vector& v) const;

private:
  Matrix m_;
  bool diagonal_ = false;
};

struct SolverConfig {
  double mu = 1e-3;       // l1 weight on z
  double lambda = 0.1;    // Gaussian prior weight on u
  double rho = 1.0;       // augmented Lagrangian penalty
  double sigma0 = 1.0;    // adaptive dual step ceiling
  DualStepMode dual_step_mode = DualStepMode::Constant;
  int K = 1000;
  int J = 10;
  int Jx = 10;
  double tau = 1e-6;
  Vector mu_u;                     // empty -> zeros(n)
  std::optional<SpdMatrix> Sigma_u;  // empty -> identity
  LatentRegularizer Rx;
  DomainRadii radii;
  AdamParams adam;
  double pgd_step = 1e-2;  // proximal-gradient step when R_x is l1
  bool nonnegative_z = false;
  std::uint64_t seed = 0;
  bool record_iterates = false;

  /// Throws InvalidInput if a scalar is out of range or a size does not match n.
  void validate(Eigen::Index n) const;
};

/// y, the forward model and the generator for one reconstruction. Holds
/// references: setup and generator must outlive the problem.
class Problem {
public:
  Problem(Vector y, const MeasurementSetup& setup, const ScaleBasisGenerator& generator);

  const Vector& y() const { return y_; }
  const MeasurementSetup& setup() const { return *setup_; }
  const ScaleBasisGenerator& generator() const { return *generator_; }
  const Vector& Aty() const { return aty_; }
  Eigen::Index n() const { return setup_->n(); }
  Eigen::Index m() const { return setup_->m(); }
  Eigen::Index d() const { return generator_->input_dim(); }

private:
  Vector y_;
  const MeasurementSetup* setup_;
  const ScaleBasisGenerator* generator_;
  Vector aty_;
};

struct SolverState {
  Vector x, z, u, c;
  Vector phi1;  // dual for z - G(x)
  Vector phi2;  // dual for c - z.*u
  int k = 0;
};

struct FeasibilityGap {
  Vector xi1;  // z - G(x)
  Vector xi2;  // c - z.*u
  double squared_norm() const { return xi1.squaredNorm() + xi2.squaredNorm(); }
};

struct TraceRecord {
  int k = 0;
  double L_rho = 0.0;
  double F = 0.0;
  double xi1_norm = 0.0;
  double xi2_norm = 0.0;
  double delta_x = 0.0;
  double delta_z = 0.0;
  double delta_u = 0.0;
  double delta_c = 0.0;
  double sigma_k = 0.0;
  double stop_stat = 0.0;
  double phi1_norm = 0.0;
  double phi2_norm = 0.0;
};

struct RunTrace {
  std::vector<TraceRecord> records;
  /// Filled only when SolverConfig::record_iterates is set; iterates[i] matches records[i].
  std::vector<SolverState> iterates;
};

struct CgGanSolution {
  SolverState state;
  Vector c_estimate;  // final c block
  Vector zu;          // z .* u, equal to c_estimate at feasibility
  bool converged = false;
  int iterations_used = 0;
  RunTrace trace;
};

class DivergenceError : public std::runtime_error {
public:
  DivergenceError(const std::string& what, RunTrace trace)
      : std::runtime_error(what), trace_(std::move(trace)) {}
  const RunTrace& trace() const { return trace_; }

private:
  RunTrace trace_;
};

FeasibilityGap feasibility_gap(const Problem& p, const SolverState& s);

/// 0.5||y - Ac||^2 + mu||z||_1 + R_x(x) + (lambda/2)(u - mu_u)^T Sigma_u (u - mu_u).
double cost_F(const Problem& p, const SolverState& s, const SolverConfig& cfg);

/// F + <phi, xi> + (rho/2)||xi||^2.
double augmented_lagrangian(const Problem& p, const SolverState& s, const SolverConfig& cfg);

/// x0 ~ N(0, I) from cfg.seed, z0 = G(x0), u0 = T(z0), c0 = z0.*u0, phi = 0.
SolverState initialize(const Problem& p, const SolverConfig& cfg);

/// argmin over u of 0.5||y - A(z.*u)||^2 + (lambda/2)(u - mu_u)^T Sigma_u (u - mu_u).
Vector initial_gaussian_variable(const Problem& p, const Vector& z, const SolverConfig& cfg);

/// Jx Adam steps (or proximal-gradient steps for l1 R_x) on L_rho in x,
/// returning the best iterate seen. Uses s.x, s.z, s.phi1.
Vector update_x(const Problem& p, const SolverState& s, const SolverConfig& cfg);

/// Value of the x-dependent part of L_rho: <phi1, z - G(x)> + (rho/2)||z - G(x)||^2 + R_x(x).
double latent_objective(const Problem& p, const SolverState& s, const Vector& x,
                        const SolverConfig& cfg);
/// Gradient of the smooth part of latent_objective.
Vector latent_gradient(const Problem& p, const SolverState& s, const Vector& x,
                       const SolverConfig& cfg);

/// J monotone-FISTA steps on L_rho in z. Uses s.x (already updated), s.z, s.u, s.c, phi.
Vector update_z_fista(const Problem& p, const SolverState& s, const SolverConfig& cfg);

/// Step size used by update_z for the current state.
double z_step_size(const SolverState& s, const SolverConfig& cfg);
/// Smooth part of L_rho in z, its gradient, and the full z objective (smooth + mu||z||_1).
double z_smooth_value(const Vector& z, const Vector& gx, const SolverState& s, const SolverConfig& cfg);
Vector z_smooth_gradient(const Vector& z, const Vector& gx, const SolverState& s,
                         const SolverConfig& cfg);
double z_objective(const Vector& z, const Vector& gx, const SolverState& s, const SolverConfig& cfg);
/// One proximal step of the z objective at point w (the prox includes the z-domain ball).
Vector z_prox_step(const Vector& w, const Vector& gx, const SolverState& s, const SolverConfig& cfg,
                   double step);

/// (rho Diag(z)^2 + lambda Sigma_u)^{-1}(lambda Sigma_u mu_u + z.*(rho c + phi2)), projected.
Vector update_u(const Problem& p, const SolverState& s, const SolverConfig& cfg);

/// (A^T A + rho I)^{-1}(A^T y + rho z.*u - phi2) through the cached SVD, projected.
Vector update_c(const Problem& p, const SolverState& s, const SolverConfig& cfg);

struct DualUpdate {
  Vector phi1;
  Vector phi2;
  double sigma = 0.0;
};

/// Step size for the dual update producing phi_{iteration}; iteration >= 1.
double dual_step_size(const FeasibilityGap& xi, int iteration, const SolverConfig& cfg);
DualUpdate dual_ascent(const SolverState& s, const FeasibilityGap& xi, int iteration,
                       const SolverConfig& cfg);

/// (1/d) dx^2 + (1/n)(dz^2 + du^2 + dc^2 + ||xi||^2), xi taken at `next`.
double stopping_statistic(const SolverState& prev, const SolverState& next, const FeasibilityGap& xi);
bool stopping_check(const SolverState& prev, const SolverState& next, const FeasibilityGap& xi,
                    double tau);

/// The full ADMM loop: x -> z -> u -> c -> phi -> stopping test, at most cfg.K iterations.
/// Throws DivergenceError (carrying the trace so far) on non-finite values.
CgGanSolution solve(const Problem& p, const SolverConfig& cfg);

/// CSV with header k,L_rho,F,xi1_norm,xi2_norm,delta_x,delta_z,delta_u,delta_c,sigma_k,stop_stat.
/// NaN fields are written as empty cells.
void write_trace_csv(const RunTrace& trace, const std::filesystem::path& path);
void write_trace_csv(const RunTrace& trace, std::ostream& out);

}  // namespace cggan
