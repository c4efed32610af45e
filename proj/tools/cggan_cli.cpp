#include <CLI11.hpp>

#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <random>

#include "cggan/experiments.hpp"
#include "cggan/image_io.hpp"
#include "cggan/theory.hpp"

using namespace cggan;

namespace {

// Flags that map one-to-one onto experiment settings; only flags given on the
// command line are applied, so they override a spec file.
struct SettingFlags {
  std::map<std::string, std::string> values;
  std::vector<std::pair<CLI::Option*, std::string>> options;

  void add(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
    options.emplace_back(app->add_option(flag, values[key], help), key);
  }
  void apply(ExperimentSpec& spec) const {
    for (const auto& [opt, key] : options)
      if (opt->count() > 0) apply_setting(spec, key, values.at(key));
  }
};

void add_setting_flags(CLI::App* app, SettingFlags& f) {
  f.add(app, "--problem", "problem", "cs or ct");
  f.add(app, "--ratio", "ratio", "CS measurement ratio m/n in (0, 1]");
  f.add(app, "--angles", "angles", "number of Radon angles");
  f.add(app, "--snr", "snr", "measurement SNR in dB, or inf");
  f.add(app, "--solver", "solver", "acggan, bora or latorre");
  f.add(app, "--weights", "weights", "CGGN generator weight file (default: built-in generator)");
  f.add(app, "--seed", "seed", "seed");
  f.add(app, "--mu", "mu", "l1 weight on z");
  f.add(app, "--lambda", "lambda", "Gaussian prior weight on u");
  f.add(app, "--rho", "rho", "augmented Lagrangian penalty");
  f.add(app, "--sigma0", "sigma0", "dual step size ceiling");
  f.add(app, "--K", "K", "maximum iterations");
  f.add(app, "--J", "J", "FISTA steps per iteration");
  f.add(app, "--Jx", "Jx", "latent steps per iteration");
  f.add(app, "--tau", "tau", "stopping tolerance");
  f.add(app, "--dual-step", "dual_step", "constant or adaptive");
  f.add(app, "--image-side", "image_side", "image side length");
  f.add(app, "--latent-dim", "latent_dim", "latent dimension of the built-in generator");
  f.add(app, "--restarts", "restarts", "baseline restarts");
  f.add(app, "--steps", "steps", "baseline steps");
  f.add(app, "--latent-sigma", "latent_sigma", "baseline latent prior sigma");
}

void print_summary(const ExperimentResults& results) {
  std::cout << std::setprecision(6);
  for (const SweepSummary& s : results.summary)
    std::cout << "sweep_value=" << s.sweep_value << " images=" << s.count << " ssim=" << s.ssim.mean << " +- "
              << s.ssim.half_width << " psnr=" << s.psnr.mean << " +- " << s.psnr.half_width << " mse=" << s.mse.mean
              << " +- " << s.mse.half_width << '\n';
  for (const ImageResult& r : results.rows)
    if (!r.error.empty()) std::cout << "image " << r.image << " at " << r.sweep_value << " failed: " << r.error << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ADMM reconstruction with a compound-Gaussian and generative-network prior"};
  app.require_subcommand(1);

  // solve
  auto* solve_cmd = app.add_subcommand("solve", "reconstruct one image");
  SettingFlags solve_flags;
  add_setting_flags(solve_cmd, solve_flags);
  std::string image_path, out_path, trace_path;
  solve_cmd->add_option("--image", image_path, "8-bit PGM input (default: a synthetic image)");
  solve_cmd->add_option("--out", out_path, "write the reconstruction as PGM");
  solve_cmd->add_option("--trace", trace_path, "write the per-iteration trace CSV");

  // sweep
  auto* sweep_cmd = app.add_subcommand("sweep", "run a sweep and write the results CSV");
  SettingFlags sweep_flags;
  add_setting_flags(sweep_cmd, sweep_flags);
  sweep_flags.add(sweep_cmd, "--sweep", "sweep", "comma-separated ratios or angle counts");
  sweep_flags.add(sweep_cmd, "--dataset", "dataset", "directory of PGM images");
  sweep_flags.add(sweep_cmd, "--images", "images", "number of images");
  sweep_flags.add(sweep_cmd, "--threads", "threads", "worker threads (0: all cores)");
  sweep_flags.add(sweep_cmd, "--out", "out", "results CSV path");
  std::string spec_path;
  sweep_cmd->add_option("--spec", spec_path, "key = value experiment file");

  // verify-theory
  auto* theory_cmd = app.add_subcommand("verify-theory", "run the convergence-theory checks");
  TheorySuiteOptions theory_opts;
  std::string theory_csv;
  theory_cmd->add_option("--seed", theory_opts.seed, "seed");
  theory_cmd->add_option("--samples", theory_opts.samples, "samples per sampled check");
  theory_cmd->add_option("--iterations", theory_opts.iterations, "planted run length");
  theory_cmd->add_option("--dual-runs", theory_opts.dual_runs, "extra runs for the dual bound");
  theory_cmd->add_option("--dual-iterations", theory_opts.dual_iterations, "length of each extra run");
  theory_cmd->add_option("--csv", theory_csv, "write the report CSV");

  // check-generator
  auto* gen_cmd = app.add_subcommand("check-generator", "estimate near-isometry constants of a generator");
  std::string gen_weights, gen_refs;
  Eigen::Index gen_side = 32, gen_latent = 16;
  std::uint64_t gen_seed = 0;
  std::size_t gen_pairs = 200;
  double gen_radius = 3.0;
  bool gen_shift = true;
  gen_cmd->add_option("--weights", gen_weights, "CGGN weight file (default: built-in generator)");
  gen_cmd->add_option("--refs", gen_refs, "reference CSV to compare against");
  gen_cmd->add_option("--image-side", gen_side, "built-in generator image side");
  gen_cmd->add_option("--latent-dim", gen_latent, "built-in generator latent dimension");
  gen_cmd->add_option("--seed", gen_seed, "seed");
  gen_cmd->add_option("--pairs", gen_pairs, "sample pairs");
  gen_cmd->add_option("--radius", gen_radius, "latent sampling radius");
  gen_cmd->add_option("--range-shift", gen_shift, "apply the [-1,1] -> [0,1] shift");

  // init-generator
  auto* init_cmd = app.add_subcommand("init-generator", "write the built-in generator as a CGGN file");
  std::string init_out, init_refs;
  std::size_t init_ref_count = 4;
  init_cmd->add_option("--out", init_out, "weight file")->required();
  init_cmd->add_option("--refs", init_refs, "also write reference vectors");
  init_cmd->add_option("--ref-count", init_ref_count, "number of reference vectors");
  init_cmd->add_option("--image-side", gen_side, "image side");
  init_cmd->add_option("--latent-dim", gen_latent, "latent dimension");
  init_cmd->add_option("--seed", gen_seed, "seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*solve_cmd) {
      ExperimentSpec spec = default_experiment_spec();
      spec.sweep = {0.5};
      solve_flags.apply(spec);
      spec.image_count = 1;
      spec.validate();
      Matrix truth = image_path.empty() ? synthetic_images(1, spec.image_side, spec.seed).front() : load_image(image_path);
      if (!image_path.empty()) spec.image_side = truth.rows();
      const GeneratorNetwork net = load_generator(spec);
      const SweepContext ctx = build_sweep_context(spec, net, spec.sweep.front());
      const Reconstruction r = reconstruct_image(spec, ctx, truth, 0);
      std::cout << std::setprecision(6) << "ssim=" << r.result.ssim << " psnr=" << r.result.psnr
                << " mse=" << r.result.mse << " iters=" << r.result.iters << " converged=" << r.result.converged
                << " runtime_s=" << r.result.runtime_s << '\n';
      if (!out_path.empty()) save_image(r.image, out_path);
      if (!trace_path.empty()) write_trace_csv(r.trace, std::filesystem::path(trace_path));
      return 0;
    }
    if (*sweep_cmd) {
      ExperimentSpec spec = spec_path.empty() ? default_experiment_spec() : load_experiment_spec(spec_path);
      sweep_flags.apply(spec);
      const ExperimentResults results = run_experiment(spec);
      if (spec.output.empty()) write_results_csv(results, std::cout);
      print_summary(results);
      return 0;
    }
    if (*theory_cmd) {
      const TheoryCheckReport report = run_theory_suite(theory_opts);
      write_report_text(report, std::cout);
      if (!theory_csv.empty()) {
        std::ofstream f(theory_csv);
        write_report_csv(report, f);
      }
      return report.all_pass() ? 0 : 1;
    }
    if (*gen_cmd) {
      const GeneratorNetwork net =
          gen_weights.empty() ? builtin_generator(gen_side, gen_latent, gen_seed) : load_weights(gen_weights);
      const ScaleBasisGenerator g(net, gen_shift);
      const GeneratorAssumptionEstimate e = estimate_assumption_constants(g, gen_pairs, gen_radius, gen_seed);
      std::cout << std::setprecision(6) << "input_dim=" << net.input_dim() << " output_dim=" << net.output_dim()
                << " layers=" << net.layers().size() << '\n'
                << "nu_G=" << e.nu_G << " tau_G=" << e.tau_G << " L_G=" << e.L_G << " samples=" << e.sample_count
                << " radius=" << e.sampling_radius << " lipschitz_bound=" << g.lipschitz_bound() << '\n';
      if (!gen_refs.empty()) {
        const auto pairs = load_reference_vectors(gen_refs, net.input_dim(), net.output_dim());
        const double err = max_reference_error(net, pairs);
        const bool ok = err <= 1e-5;
        std::cout << "reference_pairs=" << pairs.size() << " max_error=" << err << (ok ? " PASS" : " FAIL") << '\n';
        return ok ? 0 : 1;
      }
      return 0;
    }
    if (*init_cmd) {
      save_weights(builtin_generator(gen_side, gen_latent, gen_seed), init_out);
      const GeneratorNetwork net = load_weights(init_out);
      if (!init_refs.empty()) {
        std::mt19937_64 rng(gen_seed + 1);
        std::normal_distribution<double> normal(0.0, 1.0);
        std::vector<ReferencePair> pairs;
        for (std::size_t i = 0; i < init_ref_count; ++i) {
          Vector x(net.input_dim());
          for (Eigen::Index j = 0; j < x.size(); ++j) x(j) = normal(rng);
          pairs.push_back({x, net.forward(x)});
        }
        save_reference_vectors(pairs, init_refs);
      }
      std::cout << "wrote " << init_out << '\n';
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
