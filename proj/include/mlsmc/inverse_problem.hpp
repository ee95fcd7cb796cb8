#pragma once

#include <cstdint>
#include <vector>

#include "json.hpp"
#include "mlsmc/elliptic_fem.hpp"
#include "mlsmc/level_model.hpp"

namespace mlsmc {

struct ObservationSetup {
  std::vector<double> y;                       ///< observed data, one per obs point
  double xi_std = 0.25;                        ///< noise standard deviation
  std::vector<double> obs_points{0.25, 0.75};  ///< observation locations
  double qoi_point = 0.5;                      ///< location of the quantity of interest

  void validate() const;
};

void to_json(nlohmann::json& j, const ObservationSetup& obs);
void from_json(const nlohmann::json& j, ObservationSetup& obs);

/// Random-scan Metropolis-within-Gibbs settings. Each step picks
/// `coords_per_step` distinct coordinates and proposes either fresh uniform
/// values (independence move) or a reflected Gaussian random walk.
struct MutationConfig {
  double proposal_mix = 0.5;  ///< probability of the independence move
  double rw_step = 0.1;
  int coords_per_step = 5;

  void validate() const;
};

struct InverseProblemConfig {
  int modes = 50;
  double mean_coefficient = 0.15;
  int k_offset = 3;
  int max_level = 10;  ///< largest level with a tabulated solver
  double cost_exponent = 1.0;
  /// When >= 0 every kappa_l solves on this level, so all G_l == 1.
  int pinned_level = -1;
  MutationConfig mutation;
};

/// Bayesian inverse problem: uniform prior on [-1, 1]^K, Gaussian likelihood
/// of the level-l FEM observations. log kappa_l drops the prior constant,
/// which every level shares.
class EllipticInverseProblem final : public LevelModel {
 public:
  EllipticInverseProblem(InverseProblemConfig config, ObservationSetup observations);

  const EllipticSolver& solver() const { return solver_; }
  const ObservationSetup& observations() const { return obs_; }
  const InverseProblemConfig& config() const { return config_; }

  int num_levels_available() const override { return config_.max_level; }
  int state_dim() const override { return config_.modes; }
  double log_density(int level, const State& u) const override { return log_kappa(level, u); }
  MoveResult mutate(int level, const State& u, double log_density_u, Rng& rng) const override {
    return mcmc_step(level, u, log_density_u, rng);
  }
  double resolution(int level) const override { return solver_.resolution(level); }
  double cost_exponent() const override { return config_.cost_exponent; }
  State sample_prior(Rng& rng) const override;
  bool admissible(const State& u) const override;

  /// -(1 / (2 xi^2)) sum_m (y_m - p_l(x_m; u))^2.
  double log_kappa(int level, const State& u) const;

  /// One Metropolis-Hastings update leaving eta_level invariant.
  MoveResult mcmc_step(int level, const State& u, double log_kappa_u, Rng& rng) const;

  /// Observation vector G_l(u) = (p_l(x_m; u))_m.
  std::vector<double> observe(int level, const State& u) const;

  /// g(u) = p_l(qoi_point; u).
  double quantity_of_interest(int level, const State& u) const;

 private:
  InverseProblemConfig config_;
  ObservationSetup obs_;
  EllipticSolver solver_;
};

/// u_k = 0.5 (-1)^k, k = 1..modes.
State default_truth(int modes = 50);

/// y = G_{data_level}(truth) + xi with xi ~ N(0, xi_std^2 I) drawn from a
/// stream keyed by noise_seed.
ObservationSetup synthesize_data(const EllipticSolver& solver, const State& truth, int data_level,
                                 std::uint64_t noise_seed, double xi_std = 0.25,
                                 std::vector<double> obs_points = {0.25, 0.75}, double qoi_point = 0.5);

}  // namespace mlsmc
