#include "mlsmc/inverse_problem.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "mlsmc/errors.hpp"

namespace mlsmc {
namespace {

double reflect_into_box(double x) {
  // Folding is an isometry on each piece, so the reflected walk stays symmetric.
  while (x > 1.0 || x < -1.0) x = x > 1.0 ? 2.0 - x : -2.0 - x;
  return x;
}

}  // namespace

void ObservationSetup::validate() const {
  if (!(xi_std > 0.0)) throw PreconditionError("observation noise std must be positive");
  if (y.size() != obs_points.size()) throw PreconditionError("data and observation points differ in length");
  for (double x : obs_points) {
    if (!(x >= 0.0 && x <= 1.0)) throw PreconditionError("observation point outside [0, 1]");
  }
  if (!(qoi_point >= 0.0 && qoi_point <= 1.0)) throw PreconditionError("qoi point outside [0, 1]");
}

void to_json(nlohmann::json& j, const ObservationSetup& obs) {
  j = nlohmann::json{{"y", obs.y}, {"xi_std", obs.xi_std}, {"obs_points", obs.obs_points},
                     {"qoi_point", obs.qoi_point}};
}

void from_json(const nlohmann::json& j, ObservationSetup& obs) {
  for (const auto& [key, _] : j.items()) {
    if (key != "y" && key != "xi_std" && key != "obs_points" && key != "qoi_point") {
      throw ConfigError("unknown key in observation setup: " + key);
    }
  }
  obs.y = j.at("y").get<std::vector<double>>();
  obs.xi_std = j.value("xi_std", 0.25);
  obs.obs_points = j.value("obs_points", std::vector<double>{0.25, 0.75});
  obs.qoi_point = j.value("qoi_point", 0.5);
  obs.validate();
}

void MutationConfig::validate() const {
  if (!(proposal_mix >= 0.0 && proposal_mix <= 1.0)) throw PreconditionError("proposal_mix must lie in [0, 1]");
  if (!(rw_step > 0.0)) throw PreconditionError("rw_step must be positive");
  if (coords_per_step < 1) throw PreconditionError("coords_per_step must be >= 1");
}

EllipticInverseProblem::EllipticInverseProblem(InverseProblemConfig config, ObservationSetup observations)
    : config_(std::move(config)),
      obs_(std::move(observations)),
      solver_(CoefficientField::standard(config_.modes, config_.mean_coefficient), config_.k_offset,
              config_.max_level) {
  obs_.validate();
  config_.mutation.validate();
  if (config_.max_level < 0) throw PreconditionError("max_level must be >= 0");
  if (config_.pinned_level > config_.max_level) throw PreconditionError("pinned_level exceeds max_level");
}

bool EllipticInverseProblem::admissible(const State& u) const {
  if (static_cast<int>(u.coords.size()) != config_.modes) return false;
  return std::all_of(u.coords.begin(), u.coords.end(), [](double x) { return x >= -1.0 && x <= 1.0; });
}

State EllipticInverseProblem::sample_prior(Rng& rng) const {
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  State u;
  u.coords.resize(static_cast<std::size_t>(config_.modes));
  for (double& x : u.coords) x = unif(rng);
  return u;
}

std::vector<double> EllipticInverseProblem::observe(int level, const State& u) const {
  check_level(level);
  const FemSolution sol = solver_.solve(u.coords, config_.pinned_level >= 0 ? config_.pinned_level : level);
  std::vector<double> out;
  out.reserve(obs_.obs_points.size());
  for (double x : obs_.obs_points) out.push_back(point_value(sol, x));
  return out;
}

double EllipticInverseProblem::log_kappa(int level, const State& u) const {
  if (!admissible(u)) throw RangeError("state " + describe(u) + " outside [-1, 1]^K");
  const std::vector<double> predicted = observe(level, u);
  double misfit = 0.0;
  for (std::size_t m = 0; m < predicted.size(); ++m) {
    const double r = obs_.y[m] - predicted[m];
    misfit += r * r;
  }
  return -misfit / (2.0 * obs_.xi_std * obs_.xi_std);
}

double EllipticInverseProblem::quantity_of_interest(int level, const State& u) const {
  check_level(level);
  return point_value(solver_.solve(u.coords, level), obs_.qoi_point);
}

MoveResult EllipticInverseProblem::mcmc_step(int level, const State& u, double log_kappa_u, Rng& rng) const {
  const MutationConfig& cfg = config_.mutation;
  std::uniform_real_distribution<double> unif01(0.0, 1.0);
  std::uniform_real_distribution<double> unif_box(-1.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);

  const int K = config_.modes;
  const int chosen_count = std::min(cfg.coords_per_step, K);
  std::vector<int> indices(static_cast<std::size_t>(K));
  std::iota(indices.begin(), indices.end(), 0);
  // Partial Fisher-Yates: the first chosen_count entries are a uniform subset.
  for (int i = 0; i < chosen_count; ++i) {
    std::uniform_int_distribution<int> pick(i, K - 1);
    std::swap(indices[i], indices[pick(rng)]);
  }

  State proposal = u;
  const bool independence = unif01(rng) < cfg.proposal_mix;
  for (int i = 0; i < chosen_count; ++i) {
    double& x = proposal.coords[static_cast<std::size_t>(indices[i])];
    x = independence ? unif_box(rng) : reflect_into_box(x + cfg.rw_step * normal(rng));
  }

  const double log_kappa_proposal = log_kappa(level, proposal);
  // Both proposals are symmetric w.r.t. the uniform prior, so the MH ratio is
  // the likelihood ratio.
  const double log_ratio = log_kappa_proposal - log_kappa_u;
  const bool accept = log_ratio >= 0.0 || std::log(unif01(rng)) < log_ratio;
  if (accept) return MoveResult{std::move(proposal), log_kappa_proposal, 1, true};
  return MoveResult{u, log_kappa_u, 1, false};
}

State default_truth(int modes) {
  State u;
  for (int k = 1; k <= modes; ++k) u.coords.push_back(k % 2 == 0 ? 0.5 : -0.5);
  return u;
}

ObservationSetup synthesize_data(const EllipticSolver& solver, const State& truth, int data_level,
                                 std::uint64_t noise_seed, double xi_std, std::vector<double> obs_points,
                                 double qoi_point) {
  ObservationSetup obs;
  obs.xi_std = xi_std;
  obs.obs_points = std::move(obs_points);
  obs.qoi_point = qoi_point;
  const FemSolution sol = solver.solve(truth.coords, data_level);
  Rng rng = make_stream(noise_seed, StreamPurpose::kObservationNoise, static_cast<std::uint64_t>(data_level), 0);
  std::normal_distribution<double> noise(0.0, 1.0);
  for (double x : obs.obs_points) obs.y.push_back(point_value(sol, x) + xi_std * noise(rng));
  return obs;
}

}  // namespace mlsmc
