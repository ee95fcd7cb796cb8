#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "mlsmc/allocation.hpp"
#include "mlsmc/discrete_oracle.hpp"
#include "mlsmc/inverse_problem.hpp"
#include "mlsmc/smc_engine.hpp"

namespace mlsmc {

struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};

/// Ordinary least squares of log y on log x. Throws RangeError on
/// non-positive input and PreconditionError with fewer than two points.
SlopeFit fit_loglog_slope(std::span<const double> x, std::span<const double> y);

enum class Method { kSingleLevel, kMlsmcStandard, kMlsmcTelescoped };

std::string method_name(Method m);
Method parse_method(const std::string& name);

struct EllipticProblemSpec {
  int modes = 50;
  double mean_coefficient = 0.15;
  int data_level = 10;
  std::uint64_t noise_seed = 2024;
  double xi_std = 0.25;
  std::optional<std::vector<double>> truth;  ///< defaults to u_k = 0.5 (-1)^k
  std::optional<ObservationSetup> observations;  ///< overrides synthesis when given
  MutationConfig mutation;
  bool identical_levels = false;  ///< every kappa_l uses the level-0 solve
};

struct FiniteProblemSpec {
  std::string fixture_path;  ///< JSON FiniteFkModel; empty means use `builtin`
  std::string builtin = "rate";  ///< rate | invariant | two_state
  int n_states = 8;
  int levels = 8;
  double beta = 2.0;
  double amplitude = 0.5;
  std::uint64_t fixture_seed = 11;
};

struct ProblemSpec {
  std::string kind = "elliptic";  ///< elliptic | finite
  EllipticProblemSpec elliptic;
  FiniteProblemSpec finite;
};

/// Reference value protocol: mean of the standard estimator at
/// L_ref = L_max + level_offset with n_multiplier times the planner's N.
/// A known value can be frozen in to skip the reference runs.
struct TruthSpec {
  int level_offset = 2;
  double n_multiplier = 4.0;
  int replicates = 200;
  double max_se_fraction = 0.2;  ///< SE must stay below this times the smallest epsilon
  std::optional<double> value;
  std::optional<double> se;
};

struct VarianceRateSpec {
  int first_level = 1;
  int last_level = 6;
  int replicates = 100;
  long particles = 200;
};

struct ExperimentConfig {
  std::string name = "study";
  ProblemSpec problem;
  RateParameters rates;
  AllocationOptions allocation;
  EngineOptions engine;
  std::vector<double> epsilons{0.125, 0.0625, 0.03125, 0.015625};
  int replicates = 50;
  std::uint64_t seed = 1;
  std::vector<Method> methods{Method::kSingleLevel, Method::kMlsmcStandard, Method::kMlsmcTelescoped};
  TruthSpec truth;
  VarianceRateSpec variance_rate;
  std::string output_dir = "results";
  unsigned workers = 1;
  bool record_wall_clock = false;  ///< off keeps CSV output byte-reproducible

  /// Throws ConfigError on any violated invariant.
  void validate() const;
};

void to_json(nlohmann::json& j, const ExperimentConfig& config);
void from_json(const nlohmann::json& j, ExperimentConfig& config);

/// Reads and validates a JSON config; unknown keys are rejected.
ExperimentConfig load_config(const std::filesystem::path& path);

/// FNV-1a of the canonical JSON serialization, as 16 hex digits.
std::string config_hash(const ExperimentConfig& config);

/// Largest L over the epsilon grid for the multilevel plan.
int max_planned_level(const ExperimentConfig& config);

/// Concrete model for the configured problem with densities up to max_level.
std::unique_ptr<LevelModel> build_model(const ExperimentConfig& config, int max_level);

struct TruthResult {
  double value = 0.0;
  double se = 0.0;
  int level = 0;
  int replicates = 0;
  bool exact = false;
};

/// Exact enumeration for finite problems, otherwise the reference-run protocol.
/// Throws ConfigError when the reference SE is too large.
TruthResult compute_reference_truth(const ExperimentConfig& config);

struct ResultRow {
  Method method{};
  double epsilon = 0.0;
  int replicate = 0;
  std::uint64_t seed = 0;
  double estimate = 0.0;
  double truth = 0.0;
  double analytic_cost = 0.0;
  double wall_clock_s = 0.0;
  bool degenerate = false;
  std::optional<double> telescoped_extra_level;  ///< tilde gamma_{L+1}, telescoped runs only
};

struct StudyPoint {
  Method method{};
  double epsilon = 0.0;
  int L = 0;
  double mse = 0.0;
  double median_cost = 0.0;
  int flagged = 0;
};

struct StudyResult {
  TruthResult truth;
  std::vector<ResultRow> rows;
  std::vector<StudyPoint> points;
  /// log(median cost) against log(MSE), per method in config order.
  std::vector<std::pair<Method, SlopeFit>> slopes;
  int flagged = 0;
};

/// Per-replicate seed shared by all methods at a given epsilon.
std::uint64_t replicate_seed(std::uint64_t base, std::size_t epsilon_index, int replicate);

/// The cost-versus-MSE study. Throws DegeneracyError if more than 5% of the
/// runs are degenerate.
StudyResult cost_mse_study(const ExperimentConfig& config, std::optional<TruthResult> truth = std::nullopt);

void write_study_csv(const StudyResult& result, const std::filesystem::path& path);
nlohmann::json study_sidecar(const ExperimentConfig& config, const StudyResult& result);

struct VarianceRateResult {
  std::vector<int> levels;
  std::vector<double> h;
  std::vector<double> proxy;  ///< N_l Var(eta_l^N(G_l)) over replicates
  std::optional<SlopeFit> fit;  ///< empty when fewer than two positive proxies
  bool degenerate = false;
};

/// Runs a flat-N sampler through last_level and fits log proxy on log h_l.
VarianceRateResult estimate_variance_rate(const ExperimentConfig& config);

nlohmann::json variance_rate_json(const ExperimentConfig& config, const VarianceRateResult& result);

}  // namespace mlsmc
