#include "cggan/theory.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <random>

namespace cggan {

namespace {

void require_finite_radii(const SolverConfig& cfg, const char* who) {
  for (double r : {cfg.radii.x, cfg.radii.z, cfg.radii.u, cfg.radii.c})
    if (!std::isfinite(r)) throw InvalidInput(std::string(who) + ": finite domain radii required");
}

Vector gaussian(std::mt19937_64& rng, Eigen::Index n, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = normal(rng);
  return v;
}

// Uniform sample from the l2 ball of the given radius.
Vector in_ball(std::mt19937_64& rng, Eigen::Index n, double radius) {
  Vector v = gaussian(rng, n);
  const double norm = v.norm();
  if (norm == 0.0) return v;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  return v * (radius * std::pow(unif(rng), 1.0 / static_cast<double>(n)) / norm);
}

CheckEntry finish(std::string name, double worst, std::size_t samples, double tol) {
  return {std::move(name), worst >= -tol, worst, samples, tol};
}

Vector block(const SolverState& s, int j) {
  switch (j) {
    case 0: return s.x;
    case 1: return s.z;
    case 2: return s.u;
    default: return s.c;
  }
}

}  // namespace

TheoryConstants theory_constants(double L_f, const SolverConfig& cfg, const GeneratorAssumptionEstimate& g,
                                 double xi1_max, double xi2_max) {
  require_finite_radii(cfg, "theory_constants");
  const double rho = cfg.rho, s0 = cfg.sigma0;
  const double ui = cfg.radii.u, zi = cfg.radii.z, ci = cfg.radii.c;
  TheoryConstants t;
  t.L_f = L_f;
  t.L_reg[0] = cfg.Rx.kind == LatentRegularizer::Kind::Quadratic ? 1.0 / (cfg.Rx.parameter * cfg.Rx.parameter) : 0.0;
  t.L_reg[1] = 0.0;
  if (cfg.Sigma_u) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(cfg.Sigma_u->matrix(), Eigen::EigenvaluesOnly);
    t.L_reg[2] = cfg.lambda * eig.eigenvalues().maxCoeff();
  } else {
    t.L_reg[2] = cfg.lambda;
  }
  t.L_reg[3] = 0.0;
  t.lip_z = rho * (1.0 + ui * ui);
  t.lip_u = rho * zi * zi;
  t.lip_c = L_f + rho;
  t.gamma = std::pow(2.0 * rho * ui * zi + 4.0 * s0 + rho * ci, 2);
  t.gamma_hat = {2.0 * g.tau_G * g.tau_G * (rho * rho + s0),
                 2.0 * (std::pow(rho * ui, 2) + t.gamma + s0 * (1.0 + 2.0 * ui * ui)),
                 2.0 * zi * zi * (rho * rho + 2.0 * s0), 2.0 * s0};
  t.xi1_max = xi1_max;
  t.xi2_max = xi2_max;
  t.beta = {g.L_G * (4.0 * s0 + rho * xi1_max) / 2.0 + t.gamma_hat[0],
            (4.0 * s0 + rho * xi2_max) / 2.0 + t.gamma_hat[1],
            (4.0 * s0 + rho * xi2_max) / 2.0 + t.gamma_hat[2], t.gamma_hat[3]};
  const double a_z = 1.0 / t.lip_z;
  const double a_u = 1.0 / t.lip_u;
  const double a_c = 1.0 / t.lip_c;
  t.alpha = {2.0 / (g.L_G * (4.0 * s0 + rho * xi1_max) + rho * g.tau_G * g.tau_G), 2.0 * a_z / (1.0 + a_z),
             2.0 * a_u / (1.0 + a_u), 2.0 * a_c / (1.0 + 2.0 * a_c)};
  return t;
}

bool TheoryCheckReport::all_pass() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckEntry& c) { return c.pass; }) &&
         (!rate || rate->in_neighborhood || rate->slope < 0.0);
}

void write_report_text(const TheoryCheckReport& report, std::ostream& out) {
  out << std::setprecision(6);
  for (const CheckEntry& c : report.checks)
    out << (c.pass ? "PASS " : "FAIL ") << c.name << " worst_margin=" << c.worst_margin
        << " tolerance=" << c.tolerance << " samples=" << c.samples << '\n';
  if (report.rate) {
    const RateFit& r = *report.rate;
    const bool ok = r.in_neighborhood || r.slope < 0.0;
    out << (ok ? "PASS " : "FAIL ") << "convergence_rate slope=" << r.slope << " intercept=" << r.intercept
        << " window=[" << r.window_begin << ',' << r.window_end << ") points=" << r.window_points
        << (r.in_neighborhood ? " in-neighborhood" : "") << '\n';
  }
}

void write_report_csv(const TheoryCheckReport& report, std::ostream& out) {
  out << "check,pass,worst_margin,samples\n" << std::setprecision(17);
  for (const CheckEntry& c : report.checks)
    out << c.name << ',' << (c.pass ? 1 : 0) << ',' << c.worst_margin << ',' << c.samples << '\n';
  if (report.rate) {
    const RateFit& r = *report.rate;
    out << "convergence_rate," << ((r.in_neighborhood || r.slope < 0.0) ? 1 : 0) << ',' << -r.slope << ','
        << r.window_points << '\n';
  }
}

double lbar_value(const Problem& p, const SolverState& s, double rho) {
  const FeasibilityGap xi = feasibility_gap(p, s);
  return 0.5 * (p.y() - p.setup().A() * s.c).squaredNorm() + s.phi1.dot(xi.xi1) + s.phi2.dot(xi.xi2) +
         0.5 * rho * xi.squared_norm();
}

Vector lbar_grad_z(const Problem& p, const SolverState& s, double rho) {
  const Vector gx = p.generator().forward(s.x);
  return s.phi1 + rho * (s.z - gx) - s.u.cwiseProduct(s.phi2) + rho * s.u.cwiseProduct(s.z.cwiseProduct(s.u) - s.c);
}

Vector lbar_grad_u(const Problem&, const SolverState& s, double rho) {
  return -s.z.cwiseProduct(s.phi2) + rho * s.z.cwiseProduct(s.z.cwiseProduct(s.u) - s.c);
}

Vector lbar_grad_c(const Problem& p, const SolverState& s, double rho) {
  const Matrix& a = p.setup().A();
  return a.transpose() * (a * s.c - p.y()) + s.phi2 + rho * (s.c - s.z.cwiseProduct(s.u));
}

CheckEntry check_lipschitz_bounds(const Problem& p, const SolverConfig& cfg, std::size_t samples,
                                  std::uint64_t seed) {
  require_finite_radii(cfg, "check_lipschitz_bounds");
  const double rho = cfg.rho;
  const TheoryConstants t = theory_constants(p.setup().spectral_norm_sq(), cfg, {}, 0.0, 0.0);
  std::mt19937_64 rng(seed);
  const Eigen::Index n = p.n();
  double worst = std::numeric_limits<double>::infinity();

  auto ratio = [](const Vector& g1, const Vector& g2, const Vector& v1, const Vector& v2) {
    const double dv = (v1 - v2).norm();
    return dv == 0.0 ? 0.0 : (g1 - g2).norm() / dv;
  };

  for (std::size_t i = 0; i < samples; ++i) {
    SolverState s;
    s.x = in_ball(rng, p.d(), cfg.radii.x);
    s.z = in_ball(rng, n, cfg.radii.z);
    s.u = in_ball(rng, n, cfg.radii.u);
    s.c = in_ball(rng, n, cfg.radii.c);
    s.phi1 = gaussian(rng, n);
    s.phi2 = gaussian(rng, n);

    SolverState o = s;
    o.z = in_ball(rng, n, cfg.radii.z);
    worst = std::min(worst, t.lip_z - ratio(lbar_grad_z(p, s, rho), lbar_grad_z(p, o, rho), s.z, o.z));

    o = s;
    o.u = in_ball(rng, n, cfg.radii.u);
    worst = std::min(worst, t.lip_u - ratio(lbar_grad_u(p, s, rho), lbar_grad_u(p, o, rho), s.u, o.u));

    o = s;
    o.c = in_ball(rng, n, cfg.radii.c);
    worst = std::min(worst, t.lip_c - ratio(lbar_grad_c(p, s, rho), lbar_grad_c(p, o, rho), s.c, o.c));
  }
  if (samples == 0) worst = 0.0;
  return finish("lipschitz_bounds", worst, samples, 1e-9);
}

double dual_series_partial_sum(std::size_t terms) {
  double sum = 0.0;
  for (std::size_t i = terms; i >= 1; --i) {  // smallest terms first
    const double l = std::log(static_cast<double>(i) + 1.0);
    sum += 1.0 / (static_cast<double>(i) * l * l);
  }
  return sum;
}

CheckEntry check_dual_norm_bound(const std::vector<RunTrace>& traces, double sigma0, std::size_t series_terms) {
  const double bound = 4.0 * sigma0;
  double worst = 4.0 - dual_series_partial_sum(series_terms);
  std::size_t count = 0;
  for (const RunTrace& t : traces)
    for (const TraceRecord& r : t.records) {
      worst = std::min(worst, bound - std::max(r.phi1_norm, r.phi2_norm));
      ++count;
    }
  return finish("dual_norm_bound", worst, count, 0.0);
}

std::array<std::vector<double>, 4> delta_distances(const RunTrace& trace, const PlantedSolution& star) {
  if (trace.iterates.size() != trace.records.size() || trace.iterates.empty())
    throw InvalidInput("delta_distances: trace must carry iterates");
  const std::array<const Vector*, 4> target{&star.x, &star.z, &star.u, &star.c};
  std::array<std::vector<double>, 4> out;
  for (int j = 0; j < 4; ++j)
    for (std::size_t k = 0; k + 1 < trace.iterates.size(); ++k)
      out[j].push_back(std::max((*target[j] - block(trace.iterates[k], j)).norm(),
                                (*target[j] - block(trace.iterates[k + 1], j)).norm()));
  return out;
}

CheckEntry check_delta_relation(const RunTrace& trace, const PlantedSolution& star) {
  const auto big = delta_distances(trace, star);
  double worst = std::numeric_limits<double>::infinity();
  std::size_t count = 0;
  for (int j = 0; j < 4; ++j)
    for (std::size_t k = 0; k < big[j].size(); ++k) {
      const double small = (block(trace.iterates[k + 1], j) - block(trace.iterates[k], j)).norm();
      worst = std::min(worst, 2.0 * big[j][k] + 1e-12 - small);
      ++count;
    }
  if (count == 0) worst = 0.0;
  return finish("delta_relation", worst, count, 0.0);
}

namespace {

// Grid minimizer of a strongly convex function over a box, coarse pass then a
// fine pass around the coarse winner.
template <typename F>
Vector grid_argmin(const F& h, const Vector& lo, const Vector& hi, double coarse, double fine) {
  const Eigen::Index dim = lo.size();
  auto scan = [&](const Vector& a, const Vector& b, double step) {
    std::vector<long> counts(dim);
    long total = 1;
    for (Eigen::Index i = 0; i < dim; ++i) {
      counts[i] = static_cast<long>(std::ceil((b(i) - a(i)) / step)) + 1;
      total *= counts[i];
    }
    Vector best = a, t(dim);
    double best_value = std::numeric_limits<double>::infinity();
    for (long idx = 0; idx < total; ++idx) {
      long rem = idx;
      for (Eigen::Index i = 0; i < dim; ++i) {
        t(i) = a(i) + step * static_cast<double>(rem % counts[i]);
        rem /= counts[i];
      }
      const double v = h(t);
      if (v < best_value) {
        best_value = v;
        best = t;
      }
    }
    return best;
  };
  const Vector c = scan(lo, hi, coarse);
  const Vector pad = Vector::Constant(dim, 2.0 * coarse);
  return scan(c - pad, c + pad, fine);
}

}  // namespace

CheckEntry check_prox_lemma(int dimension, double grid_step, std::size_t samples, std::uint64_t seed) {
  if (dimension < 1 || dimension > 2) throw InvalidInput("check_prox_lemma: dimension must be 1 or 2");
  if (!(grid_step > 0.0)) throw InvalidInput("check_prox_lemma: grid_step must be > 0");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double tol = 2.0 * grid_step;
  double worst = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < samples; ++i) {
    const Matrix b = gaussian(rng, dimension * dimension).reshaped(dimension, dimension);
    const Matrix q = b.transpose() * b + 0.1 * Matrix::Identity(dimension, dimension);
    const Vector lin = gaussian(rng, dimension);
    const Vector w = gaussian(rng, dimension);
    const double lg = Eigen::SelfAdjointEigenSolver<Matrix>(q, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff();
    const double alpha = (0.2 + 0.8 * unif(rng)) / lg;
    const double weight = unif(rng);
    const Vector grad = q * w + lin;

    const Vector prox = soft_threshold(w - alpha * grad, alpha * weight);
    auto h = [&](const Vector& t) {
      return (t - w).dot(grad) + (t - w).squaredNorm() / (2.0 * alpha) + weight * t.lpNorm<1>();
    };
    const double reach = alpha * (grad.cwiseAbs().maxCoeff() + weight) + 1.0;
    const double coarse = std::max(10.0 * grid_step, 2.0 * reach / (dimension == 1 ? 2000.0 : 200.0));
    const Vector grid = grid_argmin(h, w.array() - reach, w.array() + reach, coarse, grid_step);
    worst = std::min(worst, tol - (grid - prox).cwiseAbs().maxCoeff());
  }
  if (samples == 0) worst = 0.0;
  return finish("prox_lemma_" + std::to_string(dimension) + "d", worst, samples, 0.0);
}

CheckEntry check_ista_descent_lemma(std::size_t samples, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::uniform_int_distribution<int> dims(1, 8);
  double worst = std::numeric_limits<double>::infinity();
  std::size_t count = 0;
  for (std::size_t i = 0; i < samples; ++i) {
    const int l = dims(rng);
    const Matrix b = gaussian(rng, l * l).reshaped(l, l);
    const Matrix q = b.transpose() * b;
    const Vector lin = gaussian(rng, l);
    const double lg =
        std::max(1e-12, Eigen::SelfAdjointEigenSolver<Matrix>(q, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff());
    const double alpha = (0.1 + 0.9 * unif(rng)) / lg;
    const double weight = 2.0 * unif(rng);
    const Vector wt = gaussian(rng, l);
    const Vector ws = gaussian(rng, l, 2.0);
    auto g = [&](const Vector& v) { return 0.5 * v.dot(q * v) + lin.dot(v); };
    auto r = [&](const Vector& v) { return weight * v.lpNorm<1>(); };
    const Vector grad = q * wt + lin;
    const Vector wh = soft_threshold(wt - alpha * grad, alpha * weight);
    const double lhs = g(wh) + r(wh);
    for (double theta : {0.0, 0.25, 0.5, 0.75, 1.0}) {
      const double rhs = g(wt) + theta * (ws - wt).dot(grad) + theta * theta / (2.0 * alpha) * (ws - wt).squaredNorm() +
                         theta * r(ws) + (1.0 - theta) * r(wt);
      worst = std::min(worst, rhs - lhs);
      ++count;
    }
  }
  if (count == 0) worst = 0.0;
  return finish("ista_descent_lemma", worst, count, 1e-10);
}

CheckEntry check_iteration_inequality(const RunTrace& trace, const PlantedSolution& star,
                                      const TheoryConstants& constants) {
  const auto big = delta_distances(trace, star);
  double worst = std::numeric_limits<double>::infinity();
  const std::size_t steps = big[0].size();
  for (std::size_t k = 0; k < steps; ++k) {
    const double lk = trace.records[k].L_rho;
    double rhs = lk;
    for (int j = 0; j < 4; ++j) rhs += constants.beta[j] * big[j][k] * big[j][k];
    worst = std::min(worst, (rhs - trace.records[k + 1].L_rho) / (1.0 + std::abs(lk)));
  }
  if (steps == 0) worst = 0.0;
  return finish("iteration_inequality", worst, steps, 1e-8);
}

RateFit fit_convergence_rate(const std::vector<double>& values) {
  RateFit fit;
  fit.window_end = values.size();
  if (values.empty()) {
    fit.in_neighborhood = true;
    return fit;
  }
  const std::size_t tail = std::max<std::size_t>(1, values.size() / 10);
  const double plateau = *std::min_element(values.end() - static_cast<std::ptrdiff_t>(tail), values.end());
  const double threshold = 10.0 * plateau;

  double sk = 0, sy = 0, skk = 0, sky = 0;
  std::size_t count = 0, first = values.size(), last = 0;
  for (std::size_t k = 0; k < values.size(); ++k) {
    if (!(values[k] > threshold) || !(values[k] > 0.0) || !std::isfinite(values[k])) continue;
    const double x = static_cast<double>(k), y = std::log(values[k]);
    sk += x;
    sy += y;
    skk += x * x;
    sky += x * y;
    ++count;
    first = std::min(first, k);
    last = k;
  }
  fit.window_points = count;
  const double denom = static_cast<double>(count) * skk - sk * sk;
  if (count < 2 || denom <= 0.0) {
    fit.in_neighborhood = true;
    fit.window_begin = fit.window_end = 0;
    return fit;
  }
  fit.slope = (static_cast<double>(count) * sky - sk * sy) / denom;
  fit.intercept = (sy - fit.slope * sk) / static_cast<double>(count);
  fit.window_begin = first;
  fit.window_end = last + 1;
  return fit;
}

RateFit fit_convergence_rate(const RunTrace& trace, const PlantedSolution& star, const std::array<double, 4>& alpha) {
  const auto big = delta_distances(trace, star);
  std::vector<double> values(big[0].size(), 0.0);
  for (std::size_t k = 0; k < values.size(); ++k)
    for (int j = 0; j < 4; ++j) values[k] += big[j][k] * big[j][k] / alpha[j];
  return fit_convergence_rate(values);
}

PlantedInstance make_planted_instance(const PlantedSpec& spec) {
  if (spec.n < 1 || spec.d < 1 || spec.hidden < 1 || (!spec.identity_A && spec.m < 1))
    throw InvalidInput("make_planted_instance: sizes must be positive");
  GeneratorNetwork base = make_random_network({spec.d, spec.hidden, spec.n}, Activation::Tanh, Activation::Identity,
                                              spec.weight_norm, spec.seed);
  std::vector<DenseLayer> layers = base.layers();
  layers.back().bias.array() += spec.output_bias;
  auto generator = std::make_shared<const ScaleBasisGenerator>(GeneratorNetwork(std::move(layers)));

  auto setup = std::make_shared<const MeasurementSetup>(
      spec.identity_A ? Matrix(Matrix::Identity(spec.n, spec.n)) : gaussian_measurement(spec.m, spec.n, spec.seed + 1));

  std::mt19937_64 rng(spec.seed + 2);
  PlantedInstance inst;
  inst.star.x = gaussian(rng, spec.d, 0.5);
  inst.star.z = generator->forward(inst.star.x);
  inst.mu_u = Vector::Constant(spec.n, spec.u_mean);
  inst.star.u = inst.mu_u + gaussian(rng, spec.n, spec.u_spread);
  inst.star.c = inst.star.z.cwiseProduct(inst.star.u);
  inst.y = setup->A() * inst.star.c;
  inst.setup = std::move(setup);
  inst.generator = std::move(generator);
  return inst;
}

TheoryCheckReport run_theory_suite(const TheorySuiteOptions& options) {
  PlantedSpec spec;
  spec.seed = options.seed;
  const PlantedInstance inst = make_planted_instance(spec);
  const Problem problem = inst.problem();

  SolverConfig cfg;
  cfg.mu = 1e-4;
  cfg.lambda = 1.0;
  cfg.rho = 1.0;
  cfg.sigma0 = 0.5;
  cfg.dual_step_mode = DualStepMode::Adaptive;
  cfg.K = options.iterations;
  cfg.J = 10;
  cfg.Jx = 10;
  cfg.tau = 0.0;
  cfg.mu_u = inst.mu_u;
  cfg.radii.x = std::max(3.0 * std::sqrt(static_cast<double>(spec.d)), 2.0 * inst.star.x.norm());
  cfg.radii.z = 2.0 * inst.star.z.norm() + 1.0;
  cfg.radii.u = std::max(1.0, 2.0 * inst.star.u.norm());
  cfg.radii.c = 2.0 * inst.star.c.norm() + 1.0;
  cfg.seed = options.seed;
  cfg.record_iterates = true;

  TheoryCheckReport report;
  const CgGanSolution main_run = solve(problem, cfg);
  const RunTrace& trace = main_run.trace;

  report.checks.push_back(check_lipschitz_bounds(problem, cfg, options.samples, options.seed + 10));

  std::vector<RunTrace> dual_traces{trace};
  SolverConfig dual_cfg = cfg;
  dual_cfg.K = options.dual_iterations;
  dual_cfg.record_iterates = false;
  for (std::size_t r = 0; r < options.dual_runs; ++r) {
    dual_cfg.seed = options.seed + 100 + r;
    dual_traces.push_back(solve(problem, dual_cfg).trace);
  }
  report.checks.push_back(check_dual_norm_bound(dual_traces, cfg.sigma0));

  report.checks.push_back(check_delta_relation(trace, inst.star));
  report.checks.push_back(check_prox_lemma(1, 1e-4, options.samples, options.seed + 20));
  report.checks.push_back(check_prox_lemma(2, 1e-3, options.samples, options.seed + 21));
  report.checks.push_back(check_ista_descent_lemma(options.samples, options.seed + 30));

  const GeneratorAssumptionEstimate est =
      estimate_assumption_constants(*inst.generator, 500, cfg.radii.x, options.seed + 40);
  double xi1_max = 0.0, xi2_max = 0.0;
  for (const TraceRecord& r : trace.records) {
    xi1_max = std::max(xi1_max, r.xi1_norm);
    xi2_max = std::max(xi2_max, r.xi2_norm);
  }
  const TheoryConstants constants =
      theory_constants(inst.setup->spectral_norm_sq(), cfg, est, xi1_max, xi2_max);
  report.checks.push_back(check_iteration_inequality(trace, inst.star, constants));
  report.rate = fit_convergence_rate(trace, inst.star, constants.alpha);
  return report;
}

}  // namespace cggan
