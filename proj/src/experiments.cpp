#include "cggan/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <random>
#include <sstream>
#include <thread>

#include "cggan/image_io.hpp"
#include "cggan/operators.hpp"

namespace cggan {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    throw InvalidInput("setting '" + key + "': not a number: " + v);
  }
  if (used != v.size()) throw InvalidInput("setting '" + key + "': not a number: " + v);
  return out;
}

long long to_integer(const std::string& key, const std::string& v) {
  const double d = to_double(key, v);
  if (d != std::floor(d) || std::abs(d) > 9e15) throw InvalidInput("setting '" + key + "': not an integer: " + v);
  return static_cast<long long>(d);
}

std::size_t to_count(const std::string& key, const std::string& v) {
  const long long n = to_integer(key, v);
  if (n < 0) throw InvalidInput("setting '" + key + "': must be >= 0");
  return static_cast<std::size_t>(n);
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw InvalidInput("setting '" + key + "': not a boolean: " + v);
}

Vector flatten(const Matrix& img) {
  Vector v(img.size());
  for (Eigen::Index r = 0; r < img.rows(); ++r)
    for (Eigen::Index c = 0; c < img.cols(); ++c) v(r * img.cols() + c) = img(r, c);
  return v;
}

Matrix unflatten(const Vector& v, Eigen::Index side) {
  Matrix img(side, side);
  for (Eigen::Index r = 0; r < side; ++r)
    for (Eigen::Index c = 0; c < side; ++c) img(r, c) = v(r * side + c);
  return img;
}

Eigen::Index measurement_count(const ExperimentSpec& spec, double ratio) {
  const Eigen::Index n = spec.image_side * spec.image_side;
  return std::clamp<Eigen::Index>(static_cast<Eigen::Index>(std::lround(ratio * static_cast<double>(n))), 1, n);
}

// Seed component identifying a sweep point independently of its position.
std::uint64_t point_key(const ExperimentSpec& spec, double sweep_value) {
  if (spec.problem == ProblemKind::CS) return static_cast<std::uint64_t>(measurement_count(spec, sweep_value));
  return 1000000ULL + static_cast<std::uint64_t>(std::lround(sweep_value));
}

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  std::uint64_t x = a * 0x9E3779B97F4A7C15ULL + b + 0x632BE59BD9B4E019ULL;
  x ^= x >> 31;
  x *= 0xBF58476D1CE4E5B9ULL;
  x ^= x >> 29;
  return x;
}

}  // namespace

void ExperimentSpec::validate() const {
  if (image_side < 1) throw InvalidInput("ExperimentSpec: image_side must be >= 1");
  if (image_count < 1) throw InvalidInput("ExperimentSpec: image count must be >= 1");
  if (latent_dim < 1) throw InvalidInput("ExperimentSpec: latent_dim must be >= 1");
  for (double v : sweep) {
    if (problem == ProblemKind::CS && !(v > 0.0 && v <= 1.0))
      throw InvalidInput("ExperimentSpec: CS ratios must lie in (0, 1]");
    if (problem == ProblemKind::CT && !(v >= 1.0 && v == std::floor(v)))
      throw InvalidInput("ExperimentSpec: angle counts must be integers >= 1");
  }
  if (std::isnan(snr_db)) throw InvalidInput("ExperimentSpec: snr must be a number or inf");
  solver_config.validate(image_side * image_side);
  baseline_config.validate();
}

ExperimentSpec default_experiment_spec() {
  ExperimentSpec spec;
  SolverConfig& c = spec.solver_config;
  c.mu = 1e-3;
  c.lambda = 0.1;
  c.rho = 1.0;
  c.tau = 1e-6;
  c.K = 1000;
  c.J = 10;
  c.Jx = 10;
  return spec;
}

ProblemKind parse_problem_kind(const std::string& s) {
  if (s == "cs") return ProblemKind::CS;
  if (s == "ct") return ProblemKind::CT;
  throw InvalidInput("unknown problem '" + s + "' (expected cs or ct)");
}

SolverKind parse_solver_kind(const std::string& s) {
  if (s == "acggan") return SolverKind::ACgGan;
  if (s == "bora") return SolverKind::Bora;
  if (s == "latorre") return SolverKind::Latorre;
  throw InvalidInput("unknown solver '" + s + "' (expected acggan, bora or latorre)");
}

double parse_snr(const std::string& s) {
  std::string lower = s;
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char ch) { return std::tolower(ch); });
  if (lower == "inf" || lower == "infinity" || lower == "+inf") return kNoiseless;
  return to_double("snr", s);
}

void apply_setting(ExperimentSpec& spec, const std::string& key, const std::string& raw) {
  const std::string v = trim(raw);
  SolverConfig& c = spec.solver_config;
  BaselineConfig& b = spec.baseline_config;
  if (key == "problem") spec.problem = parse_problem_kind(v);
  else if (key == "image_side") spec.image_side = static_cast<Eigen::Index>(to_count(key, v));
  else if (key == "sweep") {
    spec.sweep.clear();
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = trim(item);
      if (!item.empty()) spec.sweep.push_back(to_double(key, item));
    }
  } else if (key == "ratio") {
    spec.problem = ProblemKind::CS;
    spec.sweep = {to_double(key, v)};
  } else if (key == "angles") {
    spec.problem = ProblemKind::CT;
    spec.sweep = {static_cast<double>(to_count(key, v))};
  } else if (key == "snr") spec.snr_db = parse_snr(v);
  else if (key == "solver") spec.solver = parse_solver_kind(v);
  else if (key == "weights") spec.weights = v;
  else if (key == "dataset") spec.dataset = v;
  else if (key == "images") spec.image_count = to_count(key, v);
  else if (key == "seed") {
    spec.seed = static_cast<std::uint64_t>(to_count(key, v));
    b.seed = spec.seed;
  } else if (key == "latent_dim") spec.latent_dim = static_cast<Eigen::Index>(to_count(key, v));
  else if (key == "threads") spec.threads = to_count(key, v);
  else if (key == "out") spec.output = v;
  else if (key == "mu") c.mu = to_double(key, v);
  else if (key == "lambda") c.lambda = to_double(key, v);
  else if (key == "rho") {
    c.rho = to_double(key, v);
    b.rho = c.rho;
  } else if (key == "sigma0") {
    c.sigma0 = to_double(key, v);
    b.sigma0 = c.sigma0;
  } else if (key == "K") c.K = static_cast<int>(to_integer(key, v));
  else if (key == "J") c.J = static_cast<int>(to_integer(key, v));
  else if (key == "Jx") {
    c.Jx = static_cast<int>(to_integer(key, v));
    b.inner_steps = c.Jx;
  } else if (key == "tau") {
    c.tau = to_double(key, v);
    b.tau = c.tau;
  } else if (key == "dual_step") {
    if (v == "constant") c.dual_step_mode = DualStepMode::Constant;
    else if (v == "adaptive") c.dual_step_mode = DualStepMode::Adaptive;
    else throw InvalidInput("setting 'dual_step': expected constant or adaptive");
  } else if (key == "nonnegative_z") c.nonnegative_z = to_bool(key, v);
  else if (key == "restarts") b.restarts = static_cast<int>(to_integer(key, v));
  else if (key == "steps") b.steps = static_cast<int>(to_integer(key, v));
  else if (key == "latent_sigma") b.latent_sigma = to_double(key, v);
  else throw InvalidInput("unknown setting '" + key + "'");
}

ExperimentSpec parse_experiment_spec(std::istream& in, ExperimentSpec spec) {
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw InvalidInput("spec line " + std::to_string(number) + ": expected key = value");
    try {
      apply_setting(spec, trim(line.substr(0, eq)), line.substr(eq + 1));
    } catch (const InvalidInput& e) {
      throw InvalidInput("spec line " + std::to_string(number) + ": " + e.what());
    }
  }
  return spec;
}

ExperimentSpec load_experiment_spec(const std::filesystem::path& path, ExperimentSpec base) {
  std::ifstream f(path);
  if (!f) throw InvalidInput("cannot open spec file " + path.string());
  return parse_experiment_spec(f, std::move(base));
}

GeneratorNetwork builtin_generator(Eigen::Index side, Eigen::Index latent_dim, std::uint64_t seed) {
  return make_random_network({latent_dim, 64, side * side}, Activation::Tanh, Activation::Tanh, 2.0, seed);
}

std::vector<Matrix> synthetic_images(std::size_t count, Eigen::Index side, std::uint64_t seed) {
  if (side < 1) throw InvalidInput("synthetic_images: side must be >= 1");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::uniform_int_distribution<int> blobs(3, 6);
  std::vector<Matrix> out;
  for (std::size_t i = 0; i < count; ++i) {
    Matrix img = Matrix::Constant(side, side, 0.1 + 0.2 * unif(rng));
    const int k = blobs(rng);
    for (int j = 0; j < k; ++j) {
      const double cy = unif(rng) * static_cast<double>(side - 1);
      const double cx = unif(rng) * static_cast<double>(side - 1);
      const double s = (0.06 + 0.14 * unif(rng)) * static_cast<double>(side);
      const double a = 0.3 + 0.7 * unif(rng);
      for (Eigen::Index r = 0; r < side; ++r)
        for (Eigen::Index c = 0; c < side; ++c) {
          const double d2 = (r - cy) * (r - cy) + (c - cx) * (c - cx);
          img(r, c) += a * std::exp(-0.5 * d2 / (s * s));
        }
    }
    out.push_back(img / img.maxCoeff());
  }
  return out;
}

std::vector<Matrix> load_dataset(const ExperimentSpec& spec) {
  if (spec.dataset.empty()) return synthetic_images(spec.image_count, spec.image_side, mix(spec.seed, 17));
  std::vector<std::filesystem::path> files;
  if (std::filesystem::is_directory(spec.dataset)) {
    for (const auto& e : std::filesystem::directory_iterator(spec.dataset))
      if (e.is_regular_file() && e.path().extension() == ".pgm") files.push_back(e.path());
    std::sort(files.begin(), files.end());
  } else {
    files.push_back(spec.dataset);
  }
  if (files.empty()) throw InvalidInput("dataset " + spec.dataset.string() + " contains no .pgm images");
  if (files.size() > spec.image_count) files.resize(spec.image_count);
  std::vector<Matrix> images;
  for (const auto& f : files) {
    Matrix img = load_image(f);
    if (img.rows() != spec.image_side || img.cols() != spec.image_side)
      throw InvalidInput("image " + f.string() + " is not " + std::to_string(spec.image_side) + "x" +
                         std::to_string(spec.image_side));
    images.push_back(std::move(img));
  }
  return images;
}

GeneratorNetwork load_generator(const ExperimentSpec& spec) {
  GeneratorNetwork net = spec.weights.empty() ? builtin_generator(spec.image_side, spec.latent_dim, mix(spec.seed, 29))
                                              : load_weights(spec.weights);
  if (net.output_dim() != spec.image_side * spec.image_side)
    throw InvalidInput("generator output dimension " + std::to_string(net.output_dim()) + " does not match " +
                       std::to_string(spec.image_side) + "x" + std::to_string(spec.image_side) + " images");
  return net;
}

Matrix sensing_matrix(const ExperimentSpec& spec, double sweep_value) {
  const Eigen::Index n = spec.image_side * spec.image_side;
  if (spec.problem == ProblemKind::CS)
    return gaussian_measurement(measurement_count(spec, sweep_value), n, mix(spec.seed, point_key(spec, sweep_value)));
  return radon_operator(spec.image_side, static_cast<Eigen::Index>(std::lround(sweep_value)));
}

SweepContext build_sweep_context(const ExperimentSpec& spec, const GeneratorNetwork& network, double sweep_value) {
  SweepContext ctx;
  ctx.sweep_value = sweep_value;
  Matrix psi = sensing_matrix(spec, sweep_value);
  if (spec.solver == SolverKind::ACgGan) {
    Matrix phi = dct_basis(spec.image_side);
    Matrix analysis = phi.transpose();
    ctx.setup = std::make_shared<const MeasurementSetup>(std::move(psi), std::move(phi));
    ctx.generator = std::make_shared<const ScaleBasisGenerator>(network, true, std::move(analysis));
    ctx.coefficient_domain = true;
  } else {
    ctx.setup = std::make_shared<const MeasurementSetup>(std::move(psi));
    ctx.generator = std::make_shared<const ScaleBasisGenerator>(network, true);
  }
  return ctx;
}

Reconstruction reconstruct_image(const ExperimentSpec& spec, const SweepContext& ctx, const Matrix& truth,
                                 std::size_t image_index) {
  if (truth.rows() != spec.image_side || truth.cols() != spec.image_side)
    throw InvalidInput("reconstruct_image: image does not match image_side");
  const auto start = std::chrono::steady_clock::now();
  const std::uint64_t key = mix(mix(spec.seed, point_key(spec, ctx.sweep_value)), image_index);

  const Vector s = flatten(truth);
  const Vector y = add_noise_snr(ctx.setup->psi() * s, spec.snr_db, mix(key, 1));

  Reconstruction out;
  Vector estimate;
  if (spec.solver == SolverKind::ACgGan) {
    SolverConfig cfg = spec.solver_config;
    cfg.seed = mix(key, 2);
    const CgGanSolution sol = solve(Problem(y, *ctx.setup, *ctx.generator), cfg);
    estimate = sol.c_estimate;
    out.result.iters = sol.iterations_used;
    out.result.converged = sol.converged;
    out.trace = sol.trace;
  } else {
    BaselineConfig cfg = spec.baseline_config;
    cfg.seed = mix(key, 3);
    const BaselineResult r = spec.solver == SolverKind::Bora ? bora_solve(y, *ctx.setup, *ctx.generator, cfg)
                                                             : latorre_solve(y, *ctx.setup, *ctx.generator, cfg);
    estimate = r.c;
    out.result.iters = r.iterations;
    out.result.converged = r.converged;
    out.trace = r.trace;
  }
  if (ctx.coefficient_domain) estimate = ctx.setup->phi() * estimate;
  out.image = unflatten(estimate, spec.image_side).cwiseMax(0.0).cwiseMin(1.0);

  out.result.sweep_value = ctx.sweep_value;
  out.result.image = image_index;
  out.result.ssim = ssim(out.image, truth);
  out.result.psnr = psnr(out.image, truth);
  out.result.mse = mse(out.image, truth);
  out.result.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

ExperimentResults run_experiment(const ExperimentSpec& spec) {
  spec.validate();
  ExperimentResults results;
  if (spec.sweep.empty()) {
    if (!spec.output.empty()) write_results_csv(results, spec.output);
    return results;
  }
  const std::vector<Matrix> images = load_dataset(spec);
  const GeneratorNetwork network = load_generator(spec);
  std::size_t workers = spec.threads ? spec.threads : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, images.size());

  for (double value : spec.sweep) {
    const SweepContext ctx = build_sweep_context(spec, network, value);
    std::vector<ImageResult> rows(images.size());
    std::atomic<std::size_t> next{0};
    auto work = [&] {
      for (std::size_t i = next++; i < images.size(); i = next++) {
        try {
          rows[i] = reconstruct_image(spec, ctx, images[i], i).result;
        } catch (const std::exception& e) {
          ImageResult r;
          r.sweep_value = value;
          r.image = i;
          r.ssim = r.psnr = r.mse = r.runtime_s = kNaN;
          r.error = e.what();
          rows[i] = r;
        }
      }
    };
    std::vector<std::thread> pool;
    for (std::size_t t = 1; t < workers; ++t) pool.emplace_back(work);
    work();
    for (auto& t : pool) t.join();

    SweepSummary summary;
    summary.sweep_value = value;
    std::vector<double> s, p, m;
    for (const ImageResult& r : rows) {
      if (!r.error.empty()) continue;
      s.push_back(r.ssim);
      p.push_back(std::isfinite(r.psnr) ? r.psnr : 100.0);
      m.push_back(r.mse);
      summary.runtime_s += r.runtime_s;
    }
    summary.count = s.size();
    auto ci = [](const std::vector<double>& v) {
      if (v.size() >= 2) return confidence_interval_99(v);
      if (v.size() == 1) return ConfidenceInterval{v[0], kNaN};
      return ConfidenceInterval{kNaN, kNaN};
    };
    summary.ssim = ci(s);
    summary.psnr = ci(p);
    summary.mse = ci(m);
    results.summary.push_back(summary);
    results.rows.insert(results.rows.end(), rows.begin(), rows.end());
  }
  if (!spec.output.empty()) write_results_csv(results, spec.output);
  return results;
}

void write_results_csv(const ExperimentResults& results, std::ostream& out) {
  out << "sweep_value,image,ssim,psnr,mse,iters,converged,runtime_s\n";
  out << std::setprecision(10);
  auto cell = [&](double v) {
    out << ',';
    if (!std::isnan(v)) out << v;
  };
  for (const ImageResult& r : results.rows) {
    out << r.sweep_value << ',' << r.image;
    cell(r.ssim);
    cell(r.psnr);
    cell(r.mse);
    out << ',' << r.iters << ',' << (r.converged ? 1 : 0);
    cell(r.runtime_s);
    out << '\n';
  }
}

void write_results_csv(const ExperimentResults& results, const std::filesystem::path& path) {
  std::ofstream f(path);
  if (!f) throw InvalidInput("cannot open results file " + path.string());
  write_results_csv(results, f);
  if (!f) throw InvalidInput("write failed for " + path.string());
}

}  // namespace cggan
