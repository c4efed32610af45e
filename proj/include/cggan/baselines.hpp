#pragma once

#include <cstdint>

#include "cggan/generator.hpp"
#include "cggan/operators.hpp"
#include "cggan/solver.hpp"

namespace cggan {

struct BaselineConfig {
  int steps = 2000;
  int restarts = 5;
  double latent_sigma = 1.0;  // prior weight: ||x||^2 / (2 sigma^2)
  double rho = 1.0;           // latorre only
  double sigma0 = 1.0;        // latorre dual step
  int inner_steps = 10;       // latorre Adam steps per outer iteration
  double tau = 1e-6;          // latorre stopping tolerance
  AdamParams adam;
  std::uint64_t seed = 0;

  void validate() const;
};

struct BaselineResult {
  Vector x;
  Vector c;
  double loss = 0.0;       // final objective of the returned iterate
  int iterations = 0;
  bool converged = false;  // latorre stopping rule met; bora always false
  RunTrace trace;          // unused columns are NaN
};

/// Objective of bora_solve: 0.5||y - A G(x)||^2 + ||x||^2 / (2 sigma^2).
double bora_loss(const Vector& y, const MeasurementSetup& setup, const ScaleBasisGenerator& g,
                 const Vector& x, double latent_sigma);

/// Best-of-restarts Adam on bora_loss. Restart r starts from N(0, I) drawn with seed + r.
/// Restarts run concurrently; the result does not depend on scheduling.
BaselineResult bora_solve(const Vector& y, const MeasurementSetup& setup, const ScaleBasisGenerator& g,
                          const BaselineConfig& cfg);

/// ADMM on c = G(x) only: c by ridge solve, x by Adam, phi += sigma0 (c - G(x)).
BaselineResult latorre_solve(const Vector& y, const MeasurementSetup& setup, const ScaleBasisGenerator& g,
                             const BaselineConfig& cfg);

}  // namespace cggan
