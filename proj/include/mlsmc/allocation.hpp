#pragma once

#include <vector>

namespace mlsmc {

/// Rate exponents of the discretization hierarchy: bias ~ h^alpha,
/// ||G - 1||^2 ~ h^beta, cost ~ h^{-zeta}, with h_l = M^{-(l + k)}.
struct RateParameters {
  double alpha = 1.0;
  double beta = 2.0;
  double zeta = 1.0;
  int refinement = 2;  ///< M
  int k_offset = 3;    ///< k

  /// Throws PreconditionError unless the rates are positive, M >= 2, k >= 1
  /// and 2 alpha >= max(beta, zeta).
  void validate() const;

  double resolution(int level) const;
};

struct AllocationOptions {
  double scale = 1.0;         ///< proportionality constant of N_l
  double floor_factor = 2.0;  ///< c in N_l > c L
  int max_level_cap = 24;
};

/// Particle schedule for one multilevel SMC run over levels 0..L-1.
struct AllocationPlan {
  int L = 1;
  std::vector<long> N;       ///< N_0 >= ... >= N_{L-1}
  std::vector<double> h;     ///< h_0 .. h_{L-1}
  double predicted_cost = 0.0;
  double epsilon = 0.0;

  /// Throws PreconditionError if shapes disagree, any N < 1, or N increases.
  void validate() const;
};

/// Plan with explicit counts (resolutions and cost filled from `rates`).
AllocationPlan make_plan(const RateParameters& rates, std::vector<long> counts, double epsilon = 0.0);

/// Smallest L >= 1 with h_L^alpha <= epsilon.
int choose_max_level(const RateParameters& rates, double epsilon, const AllocationOptions& options = {});

/// K_L = sum_{l=1}^{L-1} h_l^{(beta - zeta)/2}; for L = 1 the empty sum is
/// replaced by the level-0 term h_0^{(beta - zeta)/2}.
double level_sum_constant(const RateParameters& rates, int L);

/// N_l = max(ceil(scale L eps^-2 K_L h_l^{(beta+zeta)/2}), c L + 1), then made
/// non-increasing in l.
std::vector<long> choose_sample_sizes(const RateParameters& rates, int L, double epsilon,
                                      const AllocationOptions& options = {});

/// sum_l N_l h_l^{-zeta}.
double predicted_cost(const AllocationPlan& plan, const RateParameters& rates);

/// Multilevel plan: L from choose_max_level, N from choose_sample_sizes.
AllocationPlan multilevel_plan(const RateParameters& rates, double epsilon,
                               const AllocationOptions& options = {});

/// Flat single-level comparator: N = ceil(scale eps^-2) at every level
/// 0..L-1 with the same L as the multilevel plan.
AllocationPlan single_level_plan(const RateParameters& rates, double epsilon,
                                 const AllocationOptions& options = {});

}  // namespace mlsmc
