#include "cggan/baselines.hpp"

#include <cmath>
#include <future>
#include <limits>
#include <random>

namespace cggan {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

Vector standard_normal(Eigen::Index d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector x(d);
  for (Eigen::Index i = 0; i < d; ++i) x(i) = normal(rng);
  return x;
}

TraceRecord empty_record(int k) {
  TraceRecord r;
  r.k = k;
  r.L_rho = r.F = r.xi1_norm = r.xi2_norm = kNaN;
  r.delta_x = r.delta_z = r.delta_u = r.delta_c = kNaN;
  r.sigma_k = r.stop_stat = r.phi1_norm = r.phi2_norm = kNaN;
  return r;
}

// Adam with moments held across calls to step().
class Adam {
public:
  Adam(const AdamParams& p, Eigen::Index d) : p_(p), m1_(Vector::Zero(d)), m2_(Vector::Zero(d)) {}
  void step(Vector& x, const Vector& g) {
    m1_ = p_.beta1 * m1_ + (1.0 - p_.beta1) * g;
    m2_ = p_.beta2 * m2_ + (1.0 - p_.beta2) * g.cwiseAbs2();
    b1t_ *= p_.beta1;
    b2t_ *= p_.beta2;
    const Vector mhat = m1_ / (1.0 - b1t_);
    const Vector vhat = m2_ / (1.0 - b2t_);
    x -= p_.step * (mhat.array() / (vhat.array().sqrt() + p_.epsilon)).matrix();
  }

private:
  AdamParams p_;
  Vector m1_, m2_;
  double b1t_ = 1.0, b2t_ = 1.0;
};

void check_problem(const Vector& y, const MeasurementSetup& setup, const ScaleBasisGenerator& g) {
  if (y.size() != setup.m()) throw InvalidInput("baseline: y length must equal rows of A");
  if (g.output_dim() != setup.n()) throw InvalidInput("baseline: generator output must equal columns of A");
  if (!all_finite(y)) throw InvalidInput("baseline: y not finite");
}

struct RestartOutcome {
  Vector x;
  double loss = 0.0;
  RunTrace trace;
};

RestartOutcome bora_restart(const Vector& y, const MeasurementSetup& setup, const ScaleBasisGenerator& g,
                            const BaselineConfig& cfg, std::uint64_t seed) {
  const double inv_s2 = 1.0 / (cfg.latent_sigma * cfg.latent_sigma);
  Vector x = standard_normal(g.input_dim(), seed);
  Adam adam(cfg.adam, x.size());
  RestartOutcome out{x, bora_loss(y, setup, g, x, cfg.latent_sigma), {}};
  for (int t = 1; t <= cfg.steps; ++t) {
    const Vector residual = y - setup.A() * g.forward(x);
    const Vector grad = -g.vjp(x, setup.A().transpose() * residual) + inv_s2 * x;
    adam.step(x, grad);
    const double loss = bora_loss(y, setup, g, x, cfg.latent_sigma);
    if (!std::isfinite(loss)) throw DivergenceError("bora_solve: non-finite loss", out.trace);
    TraceRecord r = empty_record(t);
    r.F = loss;
    out.trace.records.push_back(r);
    if (loss < out.loss) {
      out.loss = loss;
      out.x = x;
    }
  }
  return out;
}

}  // namespace

void BaselineConfig::validate() const {
  if (steps < 1 || restarts < 1) throw InvalidInput("BaselineConfig: steps and restarts must be >= 1");
  if (!(latent_sigma > 0.0)) throw InvalidInput("BaselineConfig: latent_sigma must be > 0");
  if (!(rho > 0.0) || !(sigma0 >= 0.0) || inner_steps < 0 || !(tau >= 0.0))
    throw InvalidInput("BaselineConfig: rho > 0, sigma0 >= 0, inner_steps >= 0, tau >= 0 required");
}

double bora_loss(const Vector& y, const MeasurementSetup& setup, const ScaleBasisGenerator& g,
                 const Vector& x, double latent_sigma) {
  return 0.5 * (y - setup.A() * g.forward(x)).squaredNorm() +
         x.squaredNorm() / (2.0 * latent_sigma * latent_sigma);
}

BaselineResult bora_solve(const Vector& y, const MeasurementSetup& setup, const ScaleBasisGenerator& g,
                          const BaselineConfig& cfg) {
  cfg.validate();
  check_problem(y, setup, g);
  std::vector<std::future<RestartOutcome>> jobs;
  for (int r = 0; r < cfg.restarts; ++r)
    jobs.push_back(std::async(std::launch::async, bora_restart, std::cref(y), std::cref(setup), std::cref(g),
                              std::cref(cfg), cfg.seed + static_cast<std::uint64_t>(r)));
  std::vector<RestartOutcome> outcomes;
  for (auto& j : jobs) outcomes.push_back(j.get());

  std::size_t best = 0;
  for (std::size_t r = 1; r < outcomes.size(); ++r)
    if (outcomes[r].loss < outcomes[best].loss) best = r;

  BaselineResult result;
  result.x = outcomes[best].x;
  result.c = g.forward(result.x);
  result.loss = outcomes[best].loss;
  result.iterations = cfg.steps;
  result.trace = std::move(outcomes[best].trace);
  return result;
}

BaselineResult latorre_solve(const Vector& y, const MeasurementSetup& setup, const ScaleBasisGenerator& g,
                             const BaselineConfig& cfg) {
  cfg.validate();
  check_problem(y, setup, g);
  const double inv_s2 = 1.0 / (cfg.latent_sigma * cfg.latent_sigma);
  const Vector aty = setup.A().transpose() * y;
  const double d = static_cast<double>(g.input_dim());
  const double n = static_cast<double>(g.output_dim());

  Vector x = standard_normal(g.input_dim(), cfg.seed);
  Vector gx = g.forward(x);
  Vector c = gx;
  Vector phi = Vector::Zero(gx.size());

  auto lagrangian = [&](const Vector& xv, const Vector& gv, const Vector& cv) {
    const Vector xi = cv - gv;
    return 0.5 * (y - setup.A() * cv).squaredNorm() + 0.5 * inv_s2 * xv.squaredNorm() + phi.dot(xi) +
           0.5 * cfg.rho * xi.squaredNorm();
  };

  BaselineResult result;
  for (int k = 1; k <= cfg.steps; ++k) {
    const Vector x_prev = x;
    const Vector c_prev = c;

    Adam adam(cfg.adam, x.size());
    Vector trial = x;
    double best_value = lagrangian(x, gx, c);
    for (int t = 0; t < cfg.inner_steps; ++t) {
      const Vector gt = g.forward(trial);
      adam.step(trial, -g.vjp(trial, phi + cfg.rho * (c - gt)) + inv_s2 * trial);
      const Vector g_new = g.forward(trial);
      const double value = lagrangian(trial, g_new, c);
      if (value < best_value) {
        best_value = value;
        x = trial;
        gx = g_new;
      }
    }

    c = ridge_solve(setup.svd_cache(), cfg.rho, aty + cfg.rho * gx - phi);
    const Vector xi = c - gx;
    phi += cfg.sigma0 * xi;

    TraceRecord r = empty_record(k);
    r.F = 0.5 * (y - setup.A() * c).squaredNorm() + 0.5 * inv_s2 * x.squaredNorm();
    r.L_rho = r.F + phi.dot(xi) + 0.5 * cfg.rho * xi.squaredNorm();
    r.xi1_norm = xi.norm();
    r.delta_x = (x - x_prev).norm();
    r.delta_c = (c - c_prev).norm();
    r.sigma_k = cfg.sigma0;
    r.stop_stat = r.delta_x * r.delta_x / d + (r.delta_c * r.delta_c + xi.squaredNorm()) / n;
    r.phi1_norm = phi.norm();
    result.trace.records.push_back(r);
    result.iterations = k;
    if (!std::isfinite(r.L_rho) || !all_finite(x) || !all_finite(c))
      throw DivergenceError("latorre_solve: non-finite value", result.trace);
    if (r.stop_stat < cfg.tau) {
      result.converged = true;
      break;
    }
  }
  result.x = x;
  result.c = c;
  result.loss = result.trace.records.empty() ? 0.0 : result.trace.records.back().L_rho;
  return result;
}

}  // namespace cggan
