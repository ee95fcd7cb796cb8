// Command-line driver for studies, variance-rate fits and oracle checks.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "mlsmc/discrete_oracle.hpp"
#include "mlsmc/errors.hpp"
#include "mlsmc/experiments.hpp"

namespace fs = std::filesystem;
using namespace mlsmc;

namespace {

struct CommonFlags {
  std::optional<unsigned> workers;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
};

ExperimentConfig load_with_overrides(const std::string& path, const CommonFlags& flags) {
  ExperimentConfig config = load_config(path);
  if (flags.workers) config.workers = *flags.workers;
  if (flags.out) config.output_dir = *flags.out;
  if (flags.seed) config.seed = *flags.seed;
  config.validate();
  return config;
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  out << j.dump(2) << '\n';
}

int run_study(const std::string& path, const CommonFlags& flags) {
  const ExperimentConfig config = load_with_overrides(path, flags);
  const StudyResult result = cost_mse_study(config);
  const fs::path dir(config.output_dir);
  write_study_csv(result, dir / (config.name + ".csv"));
  write_json(dir / (config.name + ".json"), study_sidecar(config, result));
  std::printf("truth %.10g (se %.3g, level %d)\n", result.truth.value, result.truth.se, result.truth.level);
  for (const StudyPoint& p : result.points) {
    std::printf("%-18s eps=%-10.6g L=%d mse=%-12.5g median_cost=%.6g flagged=%d\n", method_name(p.method).c_str(),
                p.epsilon, p.L, p.mse, p.median_cost, p.flagged);
  }
  for (const auto& [m, fit] : result.slopes) {
    std::printf("slope %-18s %.4f (r2 %.4f)\n", method_name(m).c_str(), fit.slope, fit.r_squared);
  }
  std::printf("wrote %s\n", (dir / (config.name + ".csv")).c_str());
  return 0;
}

int run_variance_rate(const std::string& path, const CommonFlags& flags) {
  const ExperimentConfig config = load_with_overrides(path, flags);
  const VarianceRateResult result = estimate_variance_rate(config);
  for (std::size_t i = 0; i < result.levels.size(); ++i) {
    std::printf("level %d h=%.6g proxy=%.6g\n", result.levels[i], result.h[i], result.proxy[i]);
  }
  if (result.fit) std::printf("beta_hat %.4f (r2 %.4f)\n", result.fit->slope, result.fit->r_squared);
  else std::printf("beta_hat degenerate (proxy vanishes)\n");
  write_json(fs::path(config.output_dir) / (config.name + "_variance_rate.json"), variance_rate_json(config, result));
  return 0;
}

int run_reference_truth(const std::string& path, const CommonFlags& flags) {
  const ExperimentConfig config = load_with_overrides(path, flags);
  const TruthResult t = compute_reference_truth(config);
  std::printf("truth %.12g se %.4g level %d replicates %d%s\n", t.value, t.se, t.level, t.replicates,
              t.exact ? " (exact)" : "");
  return 0;
}

int run_check_oracle(const CommonFlags& flags) {
  const std::uint64_t seed = flags.seed.value_or(1);
  bool ok = true;
  double worst_identity = 0.0, worst_invariance = 0.0, worst_flow = 0.0;
  for (int f = 0; f < 20; ++f) {
    const FiniteFkModel m = random_invariant_fixture(5, 6, derive_seed(seed, StreamPurpose::kFixture, 0, f));
    for (int l = 2; l < m.levels(); ++l) worst_identity = std::max(worst_identity, telescoping_identity_check(m, l));
    for (int l = 0; l < m.levels(); ++l) {
      worst_invariance = std::max(worst_invariance, invariance_defect(m, l));
      const double flow = exact_gamma_measure(m, l).sum();
      const double product = product_of_eta_potentials(m, l);
      worst_flow = std::max(worst_flow, std::abs(flow - product) / product);
    }
  }
  const FiniteFkModel bad = random_noninvariant_fixture(5, 6, seed);
  const double counter = telescoping_identity_check(bad, bad.levels() - 1);
  auto line = [&](const char* what, bool pass, double value) {
    std::printf("%s %-40s %.3g\n", pass ? "PASS" : "FAIL", what, value);
    ok = ok && pass;
  };
  line("telescoping identity (invariant kernels)", worst_identity <= 1e-12, worst_identity);
  line("kernel invariance", worst_invariance <= 1e-12, worst_invariance);
  line("flow mass vs product of eta(G)", worst_flow <= 1e-12, worst_flow);
  line("identity fails without invariance", counter > 1e-3, counter);
  if (flags.out) {
    write_json(fs::path(*flags.out) / "noninvariant_fixture.json", nlohmann::json(bad));
    write_json(fs::path(*flags.out) / "invariant_fixture.json",
               nlohmann::json(random_invariant_fixture(5, 6, derive_seed(seed, StreamPurpose::kFixture, 0, 0))));
  }
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multilevel SMC normalizing-constant experiments"};
  app.require_subcommand(1);
  CommonFlags flags;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option_function<unsigned>("--workers", [&](unsigned w) { flags.workers = w; }, "worker threads")
        ->check(CLI::PositiveNumber);
    sub->add_option_function<std::string>("--out", [&](const std::string& o) { flags.out = o; }, "output directory");
    sub->add_option_function<std::uint64_t>("--seed", [&](std::uint64_t s) { flags.seed = s; }, "root seed");
  };

  std::string config_path;
  auto* study = app.add_subcommand("run-study", "cost versus MSE study for every configured method");
  study->add_option("config", config_path, "JSON config")->required()->check(CLI::ExistingFile);
  add_common(study);
  auto* variance = app.add_subcommand("variance-rate", "fit the variance-rate exponent beta");
  variance->add_option("config", config_path, "JSON config")->required()->check(CLI::ExistingFile);
  add_common(variance);
  auto* truth = app.add_subcommand("reference-truth", "compute the reference normalizing constant");
  truth->add_option("config", config_path, "JSON config")->required()->check(CLI::ExistingFile);
  add_common(truth);
  auto* oracle = app.add_subcommand("check-oracle", "exact identity checks on random finite fixtures");
  add_common(oracle);

  CLI11_PARSE(app, argc, argv);
  try {
    if (*study) return run_study(config_path, flags);
    if (*variance) return run_variance_rate(config_path, flags);
    if (*truth) return run_reference_truth(config_path, flags);
    if (*oracle) return run_check_oracle(flags);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
