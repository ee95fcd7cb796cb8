#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "mlsmc/rng.hpp"

namespace mlsmc {

/// A point of the state space E. Continuous models use a box in R^d; finite
/// models store the state index as the single coordinate.
struct State {
  std::vector<double> coords;

  friend bool operator==(const State&, const State&) = default;
};

std::string describe(const State& u);

/// Outcome of one application of a mutation kernel.
struct MoveResult {
  State state;
  double log_density;       ///< log kappa_l at the returned state
  int density_evaluations;  ///< kappa_l evaluations spent (billed at cost_weight(l))
  bool accepted;
};

/// The level hierarchy {kappa_l, M_l, h_l, C_l} defining a Feynman-Kac
/// sequence eta_l(du) = kappa_l(u) du / Z_l.
///
/// Implementations must be safe to call concurrently: evaluation is pure in
/// (level, state) and mutate draws only from the RNG it is handed.
class LevelModel {
 public:
  virtual ~LevelModel() = default;

  /// Largest l for which kappa_l can be evaluated.
  virtual int num_levels_available() const = 0;
  virtual int state_dim() const = 0;

  /// log kappa_l(u), up to a constant shared by all levels.
  virtual double log_density(int level, const State& u) const = 0;

  /// One application of M_l, which must leave eta_l invariant.
  /// `log_density_u` is log kappa_l(u), supplied so kernels can avoid
  /// re-evaluating the current state.
  virtual MoveResult mutate(int level, const State& u, double log_density_u, Rng& rng) const = 0;

  /// Mesh width h_l; strictly decreasing in l.
  virtual double resolution(int level) const = 0;

  /// Exponent zeta of the analytic cost model C_l = h_l^{-zeta}.
  virtual double cost_exponent() const { return 1.0; }

  /// Analytic cost of one kappa_l evaluation.
  virtual double cost_weight(int level) const {
    return std::pow(resolution(level), -cost_exponent());
  }

  /// Draw from the reference (prior) measure.
  virtual State sample_prior(Rng& rng) const = 0;

  /// Exact draw from eta_0 when the model supports it (finite state spaces).
  virtual std::optional<State> sample_level0_exact(Rng& /*rng*/) const { return std::nullopt; }

  /// Whether u lies in the model's state box.
  virtual bool admissible(const State& u) const = 0;

  /// Throws RangeError unless 0 <= level <= num_levels_available().
  void check_level(int level) const;
};

/// log G_l(u) = log kappa_{l+1}(u) - log kappa_l(u).
double log_potential(const LevelModel& model, int level, const State& u);

/// G_l(u) = exp(log_potential).
double potential(const LevelModel& model, int level, const State& u);

/// log G_l from already evaluated log densities; throws NumericalDomainError
/// naming the level and state if either value is non-finite.
double log_potential_from(int level, const State& u, double log_kappa_l, double log_kappa_next);

}  // namespace mlsmc
