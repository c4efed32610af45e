#include "cggan/solver.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <random>

namespace cggan {

double LatentRegularizer::value(const Vector& x) const {
  switch (kind) {
    case Kind::Zero: return 0.0;
    case Kind::Quadratic: return x.squaredNorm() / (2.0 * parameter * parameter);
    case Kind::L1: return parameter * x.lpNorm<1>();
  }
  return 0.0;
}

Vector LatentRegularizer::gradient(const Vector& x) const {
  if (kind == Kind::Quadratic) return x / (parameter * parameter);
  return Vector::Zero(x.size());
}

SpdMatrix::SpdMatrix(Matrix m) : m_(std::move(m)) {
  if (m_.rows() != m_.cols() || m_.rows() == 0) throw InvalidInput("SpdMatrix: must be square and non-empty");
  if (!all_finite(m_)) throw InvalidInput("SpdMatrix: non-finite entries");
  const double scale = std::max(1.0, m_.cwiseAbs().maxCoeff());
  if ((m_ - m_.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw InvalidInput("SpdMatrix: not symmetric");
  if (Eigen::LLT<Matrix>(m_).info() != Eigen::Success)
    throw InvalidInput("SpdMatrix: not positive definite");
  Matrix off = m_;
  off.diagonal().setZero();
  diagonal_ = off.cwiseAbs().maxCoeff() == 0.0;
  if (diagonal_ && m_.diagonal().minCoeff() <= 0.0) throw InvalidInput("SpdMatrix: not positive definite");
}

SpdMatrix SpdMatrix::identity(Eigen::Index n) { return SpdMatrix(Matrix::Identity(n, n)); }

Vector SpdMatrix::apply(const Vector& v) const {
  if (diagonal_) return m_.diagonal().cwiseProduct(v);
  return m_ * v;
}

void SolverConfig::validate(Eigen::Index n) const {
  auto positive = [](double v) { return std::isfinite(v) && v > 0.0; };
  auto nonneg = [](double v) { return std::isfinite(v) && v >= 0.0; };
  if (!nonneg(mu)) throw InvalidInput("SolverConfig: mu must be >= 0");
  if (!positive(lambda)) throw InvalidInput("SolverConfig: lambda must be > 0");
  if (!positive(rho)) throw InvalidInput("SolverConfig: rho must be > 0");
  if (!nonneg(sigma0)) throw InvalidInput("SolverConfig: sigma0 must be >= 0");
  if (!nonneg(tau)) throw InvalidInput("SolverConfig: tau must be >= 0");
  if (K < 0 || J < 0 || Jx < 0) throw InvalidInput("SolverConfig: K, J, Jx must be >= 0");
  for (double r : {radii.x, radii.z, radii.u, radii.c})
    if (std::isnan(r) || r <= 0.0) throw InvalidInput("SolverConfig: domain radii must be > 0");
  if (mu_u.size() != 0 && mu_u.size() != n) throw InvalidInput("SolverConfig: mu_u has wrong length");
  if (mu_u.size() != 0 && !all_finite(mu_u)) throw InvalidInput("SolverConfig: mu_u not finite");
  if (Sigma_u && Sigma_u->size() != n) throw InvalidInput("SolverConfig: Sigma_u has wrong size");
  if (Rx.kind != LatentRegularizer::Kind::Zero && !positive(Rx.parameter))
    throw InvalidInput("SolverConfig: latent regularizer parameter must be > 0");
  if (!positive(adam.step) || !positive(pgd_step)) throw InvalidInput("SolverConfig: step sizes must be > 0");
}

Problem::Problem(Vector y, const MeasurementSetup& setup, const ScaleBasisGenerator& generator)
    : y_(std::move(y)), setup_(&setup), generator_(&generator) {
  if (y_.size() != setup.m()) throw InvalidInput("Problem: y length must equal rows of A");
  if (generator.output_dim() != setup.n()) throw InvalidInput("Problem: generator output must equal columns of A");
  if (!all_finite(y_)) throw InvalidInput("Problem: y not finite");
  aty_ = setup.A().transpose() * y_;
}

namespace {

Vector prior_mean(const SolverConfig& cfg, Eigen::Index n) {
  return cfg.mu_u.size() == 0 ? Vector::Zero(n) : cfg.mu_u;
}

Vector sigma_apply(const SolverConfig& cfg, const Vector& v) {
  return cfg.Sigma_u ? cfg.Sigma_u->apply(v) : v;
}

bool finite_state(const SolverState& s) {
  return all_finite(s.x) && all_finite(s.z) && all_finite(s.u) && all_finite(s.c) &&
         all_finite(s.phi1) && all_finite(s.phi2);
}

}  // namespace

FeasibilityGap feasibility_gap(const Problem& p, const SolverState& s) {
  return {s.z - p.generator().forward(s.x), s.c - s.z.cwiseProduct(s.u)};
}

double cost_F(const Problem& p, const SolverState& s, const SolverConfig& cfg) {
  const Vector r = p.y() - p.setup().A() * s.c;
  const Vector du = s.u - prior_mean(cfg, p.n());
  return 0.5 * r.squaredNorm() + cfg.mu * s.z.lpNorm<1>() + cfg.Rx.value(s.x) +
         0.5 * cfg.lambda * du.dot(sigma_apply(cfg, du));
}

double augmented_lagrangian(const Problem& p, const SolverState& s, const SolverConfig& cfg) {
  const FeasibilityGap xi = feasibility_gap(p, s);
  return cost_F(p, s, cfg) + s.phi1.dot(xi.xi1) + s.phi2.dot(xi.xi2) + 0.5 * cfg.rho * xi.squared_norm();
}

Vector initial_gaussian_variable(const Problem& p, const Vector& z, const SolverConfig& cfg) {
  const Eigen::Index n = p.n();
  Matrix m = z.asDiagonal() * p.setup().gram() * z.asDiagonal();
  if (cfg.Sigma_u)
    m += cfg.lambda * cfg.Sigma_u->matrix();
  else
    m.diagonal().array() += cfg.lambda;
  const Vector rhs = cfg.lambda * sigma_apply(cfg, prior_mean(cfg, n)) + z.cwiseProduct(p.Aty());
  Eigen::LLT<Matrix> llt(m);
  if (llt.info() != Eigen::Success) throw NumericalFailure("initialize: system not positive definite");
  return llt.solve(rhs);
}

SolverState initialize(const Problem& p, const SolverConfig& cfg) {
  cfg.validate(p.n());
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  SolverState s;
  s.x.resize(p.d());
  for (Eigen::Index i = 0; i < s.x.size(); ++i) s.x(i) = normal(rng);
  s.x = project_ball(s.x, cfg.radii.x);
  s.z = project_ball(p.generator().forward(s.x), cfg.radii.z);
  s.u = project_ball(initial_gaussian_variable(p, s.z, cfg), cfg.radii.u);
  s.c = project_ball(s.z.cwiseProduct(s.u), cfg.radii.c);
  s.phi1 = Vector::Zero(p.n());
  s.phi2 = Vector::Zero(p.n());
  s.k = 0;
  return s;
}

double latent_objective(const Problem& p, const SolverState& s, const Vector& x, const SolverConfig& cfg) {
  const Vector r = s.z - p.generator().forward(x);
  return s.phi1.dot(r) + 0.5 * cfg.rho * r.squaredNorm() + cfg.Rx.value(x);
}

Vector latent_gradient(const Problem& p, const SolverState& s, const Vector& x, const SolverConfig& cfg) {
  const Vector r = s.z - p.generator().forward(x);
  return -p.generator().vjp(x, s.phi1 + cfg.rho * r) + cfg.Rx.gradient(x);
}

Vector update_x(const Problem& p, const SolverState& s, const SolverConfig& cfg) {
  Vector best = s.x;
  if (cfg.Jx == 0) return best;
  double best_value = latent_objective(p, s, best, cfg);
  Vector x = s.x;

  if (cfg.Rx.smooth()) {
    const AdamParams& a = cfg.adam;
    Vector m1 = Vector::Zero(x.size());
    Vector m2 = Vector::Zero(x.size());
    double b1t = 1.0, b2t = 1.0;
    for (int t = 1; t <= cfg.Jx; ++t) {
      const Vector g = latent_gradient(p, s, x, cfg);
      m1 = a.beta1 * m1 + (1.0 - a.beta1) * g;
      m2 = a.beta2 * m2 + (1.0 - a.beta2) * g.cwiseAbs2();
      b1t *= a.beta1;
      b2t *= a.beta2;
      const Vector mhat = m1 / (1.0 - b1t);
      const Vector vhat = m2 / (1.0 - b2t);
      x -= a.step * (mhat.array() / (vhat.array().sqrt() + a.epsilon)).matrix();
      x = project_ball(x, cfg.radii.x);
      const double value = latent_objective(p, s, x, cfg);
      if (value < best_value) {
        best_value = value;
        best = x;
      }
    }
  } else {
    for (int t = 1; t <= cfg.Jx; ++t) {
      const Vector g = latent_gradient(p, s, x, cfg);
      x = project_ball(soft_threshold(x - cfg.pgd_step * g, cfg.pgd_step * cfg.Rx.parameter), cfg.radii.x);
      const double value = latent_objective(p, s, x, cfg);
      if (value < best_value) {
        best_value = value;
        best = x;
      }
    }
  }
  return best;
}

double z_step_size(const SolverState& s, const SolverConfig& cfg) {
  const double u_inf = std::isfinite(cfg.radii.u) ? cfg.radii.u
                                                   : (s.u.size() ? s.u.cwiseAbs().maxCoeff() : 0.0);
  return 1.0 / (cfg.rho * (1.0 + u_inf * u_inf));
}

double z_smooth_value(const Vector& z, const Vector& gx, const SolverState& s, const SolverConfig& cfg) {
  const Vector r1 = z - gx;
  const Vector r2 = s.c - z.cwiseProduct(s.u);
  return s.phi1.dot(r1) + 0.5 * cfg.rho * r1.squaredNorm() + s.phi2.dot(r2) + 0.5 * cfg.rho * r2.squaredNorm();
}

Vector z_smooth_gradient(const Vector& z, const Vector& gx, const SolverState& s, const SolverConfig& cfg) {
  return s.phi1 + cfg.rho * (z - gx) - s.u.cwiseProduct(s.phi2) +
         cfg.rho * s.u.cwiseProduct(z.cwiseProduct(s.u) - s.c);
}

double z_objective(const Vector& z, const Vector& gx, const SolverState& s, const SolverConfig& cfg) {
  return z_smooth_value(z, gx, s, cfg) + cfg.mu * z.lpNorm<1>();
}

Vector z_prox_step(const Vector& w, const Vector& gx, const SolverState& s, const SolverConfig& cfg,
                   double step) {
  const Vector v = w - step * z_smooth_gradient(w, gx, s, cfg);
  const double t = cfg.mu * step;
  const Vector shrunk = cfg.nonnegative_z ? Vector((v.array() - t).max(0.0)) : soft_threshold(v, t);
  return project_ball(shrunk, cfg.radii.z);
}

Vector update_z_fista(const Problem& p, const SolverState& s, const SolverConfig& cfg) {
  if (cfg.J == 0) return s.z;
  const Vector gx = p.generator().forward(s.x);
  const double step = z_step_size(s, cfg);

  Vector best = s.z;
  double best_value = z_objective(best, gx, s, cfg);
  Vector prev = best;
  Vector w = best;
  double t = 1.0;
  for (int j = 0; j < cfg.J; ++j) {
    const Vector trial = z_prox_step(w, gx, s, cfg, step);
    const double value = z_objective(trial, gx, s, cfg);
    if (value <= best_value) {
      best = trial;
      best_value = value;
    }
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    w = best + (t / t_next) * (trial - best) + ((t - 1.0) / t_next) * (best - prev);
    prev = best;
    t = t_next;
  }
  return best;
}

Vector update_u(const Problem& p, const SolverState& s, const SolverConfig& cfg) {
  const Eigen::Index n = p.n();
  const Vector rhs = cfg.lambda * sigma_apply(cfg, prior_mean(cfg, n)) +
                     s.z.cwiseProduct(cfg.rho * s.c + s.phi2);
  Vector u;
  if (!cfg.Sigma_u || cfg.Sigma_u->is_diagonal()) {
    const Vector sd = cfg.Sigma_u ? Vector(cfg.Sigma_u->matrix().diagonal()) : Vector::Ones(n);
    u = rhs.cwiseQuotient(cfg.rho * s.z.cwiseAbs2() + cfg.lambda * sd);
  } else {
    Matrix m = cfg.lambda * cfg.Sigma_u->matrix();
    m.diagonal() += cfg.rho * s.z.cwiseAbs2();
    Eigen::LLT<Matrix> llt(m);
    if (llt.info() != Eigen::Success) throw NumericalFailure("update_u: system not positive definite");
    u = llt.solve(rhs);
  }
  return project_ball(u, cfg.radii.u);
}

Vector update_c(const Problem& p, const SolverState& s, const SolverConfig& cfg) {
  const Vector b = p.Aty() + cfg.rho * s.z.cwiseProduct(s.u) - s.phi2;
  return project_ball(ridge_solve(p.setup().svd_cache(), cfg.rho, b), cfg.radii.c);
}

double dual_step_size(const FeasibilityGap& xi, int iteration, const SolverConfig& cfg) {
  if (cfg.dual_step_mode == DualStepMode::Constant) return std::min(cfg.rho, 1.0);
  if (iteration < 1) throw InvalidInput("dual_step_size: iteration must be >= 1");
  const double largest = std::max(xi.xi1.norm(), xi.xi2.norm());
  if (largest == 0.0) return cfg.sigma0;
  const double k = iteration;
  const double log_term = std::log(k + 1.0);
  return std::min(cfg.sigma0, cfg.sigma0 / (largest * k * log_term * log_term));
}

DualUpdate dual_ascent(const SolverState& s, const FeasibilityGap& xi, int iteration, const SolverConfig& cfg) {
  const double sigma = dual_step_size(xi, iteration, cfg);
  return {s.phi1 + sigma * xi.xi1, s.phi2 + sigma * xi.xi2, sigma};
}

double stopping_statistic(const SolverState& prev, const SolverState& next, const FeasibilityGap& xi) {
  const double d = static_cast<double>(next.x.size());
  const double n = static_cast<double>(next.z.size());
  const double dx = (next.x - prev.x).squaredNorm();
  const double rest = (next.z - prev.z).squaredNorm() + (next.u - prev.u).squaredNorm() +
                      (next.c - prev.c).squaredNorm() + xi.squared_norm();
  return (d > 0 ? dx / d : 0.0) + (n > 0 ? rest / n : 0.0);
}

bool stopping_check(const SolverState& prev, const SolverState& next, const FeasibilityGap& xi, double tau) {
  return stopping_statistic(prev, next, xi) < tau;
}

CgGanSolution solve(const Problem& p, const SolverConfig& cfg) {
  cfg.validate(p.n());
  CgGanSolution out;
  SolverState s = initialize(p, cfg);

  auto record = [&](const SolverState& st, const SolverState* prev, const FeasibilityGap& xi, double sigma) {
    TraceRecord r;
    r.k = st.k;
    r.F = cost_F(p, st, cfg);
    r.L_rho = r.F + st.phi1.dot(xi.xi1) + st.phi2.dot(xi.xi2) + 0.5 * cfg.rho * xi.squared_norm();
    r.xi1_norm = xi.xi1.norm();
    r.xi2_norm = xi.xi2.norm();
    if (prev) {
      r.delta_x = (st.x - prev->x).norm();
      r.delta_z = (st.z - prev->z).norm();
      r.delta_u = (st.u - prev->u).norm();
      r.delta_c = (st.c - prev->c).norm();
      r.stop_stat = stopping_statistic(*prev, st, xi);
    } else {
      r.stop_stat = xi.squared_norm() / static_cast<double>(p.n());
    }
    r.sigma_k = sigma;
    r.phi1_norm = st.phi1.norm();
    r.phi2_norm = st.phi2.norm();
    out.trace.records.push_back(r);
    if (cfg.record_iterates) out.trace.iterates.push_back(st);
    if (!finite_state(st) || !std::isfinite(r.L_rho) || !std::isfinite(r.stop_stat))
      throw DivergenceError("solve: non-finite value at iteration " + std::to_string(st.k), out.trace);
    return r.stop_stat;
  };

  record(s, nullptr, feasibility_gap(p, s), 0.0);

  for (int k = 0; k < cfg.K; ++k) {
    const SolverState prev = s;
    s.x = update_x(p, s, cfg);
    s.z = update_z_fista(p, s, cfg);
    s.u = update_u(p, s, cfg);
    s.c = update_c(p, s, cfg);
    const FeasibilityGap xi = feasibility_gap(p, s);
    const DualUpdate dual = dual_ascent(s, xi, k + 1, cfg);
    s.phi1 = dual.phi1;
    s.phi2 = dual.phi2;
    s.k = k + 1;
    const double stat = record(s, &prev, xi, dual.sigma);
    out.iterations_used = s.k;
    if (stat < cfg.tau) {
      out.converged = true;
      break;
    }
  }

  out.zu = s.z.cwiseProduct(s.u);
  out.c_estimate = s.c;
  out.state = std::move(s);
  return out;
}

void write_trace_csv(const RunTrace& trace, std::ostream& out) {
  out << "k,L_rho,F,xi1_norm,xi2_norm,delta_x,delta_z,delta_u,delta_c,sigma_k,stop_stat\n";
  out << std::scientific << std::setprecision(17);
  auto cell = [&](double v) {
    out << ',';
    if (!std::isnan(v)) out << v;
  };
  for (const TraceRecord& r : trace.records) {
    out << r.k;
    for (double v : {r.L_rho, r.F, r.xi1_norm, r.xi2_norm, r.delta_x, r.delta_z, r.delta_u, r.delta_c,
                     r.sigma_k, r.stop_stat})
      cell(v);
    out << '\n';
  }
}

void write_trace_csv(const RunTrace& trace, const std::filesystem::path& path) {
  std::ofstream f(path);
  if (!f) throw InvalidInput("write_trace_csv: cannot open " + path.string());
  write_trace_csv(trace, f);
  if (!f) throw InvalidInput("write_trace_csv: write failed for " + path.string());
}

}  // namespace cggan
