#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "mlsmc/allocation.hpp"
#include "mlsmc/level_model.hpp"

namespace mlsmc {

/// Particles approximating eta_l, with cached log kappa_l and potentials.
struct ParticleEnsemble {
  int level = 0;
  std::vector<State> states;
  std::vector<double> log_densities;   ///< log kappa_l(states[i])
  std::vector<double> log_potentials;  ///< log G_l(states[i])
  /// log G_{l+1}(states[i]); present when the telescoped estimator needs it.
  std::optional<std::vector<double>> extra_log_potentials;

  std::size_t size() const { return states.size(); }
};

/// Empirical functionals of one particle level p.
struct LevelSummary {
  long N = 0;
  double mean_G = 0.0;      ///< eta_p^N(G_p)
  double log_mean_G = 0.0;  ///< log eta_p^N(G_p), kept for products
  /// eta_p^N(G_p (G_{p+1} - 1)); absent when kappa_{p+2} is unavailable or
  /// extra potentials were switched off.
  std::optional<double> mean_G_Gnext_minus1;
  double mean_g = 0.0;           ///< eta_p^N(g)
  double mean_gG = 0.0;          ///< eta_p^N(g G_p)
  double acceptance_rate = 0.0;  ///< MH acceptance of the moves that produced this level
};

/// Everything the estimators consume from one run.
struct RunRecord {
  std::vector<LevelSummary> per_level;
  std::vector<long> density_evaluations;  ///< kappa_l evaluations, indexed by l
  double realized_cost = 0.0;             ///< sum_l evaluations_l * cost_weight(l)
  double wall_clock_seconds = 0.0;
  std::uint64_t seed = 0;

  int levels() const { return static_cast<int>(per_level.size()); }
};

/// g evaluated on a level-p particle; receives p so discretized QoIs can match it.
using QuantityOfInterest = std::function<double(int level, const State&)>;

struct EngineOptions {
  int default_sweeps = 5;
  std::vector<int> sweeps;  ///< per-level override; entries <= 0 fall back to default
  int init_oversample = 10;
  int init_sweeps = 10;
  bool extra_potentials = true;
  unsigned workers = 1;

  int sweeps_at(int level) const;
};

/// Tally of kappa evaluations per level; converted to analytic cost at the end.
class EvaluationCounter {
 public:
  explicit EvaluationCounter(int levels) : counts_(static_cast<std::size_t>(levels) + 1, 0) {}
  void add(int level, long n) { counts_.at(static_cast<std::size_t>(level)) += n; }
  const std::vector<long>& counts() const { return counts_; }
  double cost(const LevelModel& model) const;

 private:
  std::vector<long> counts_;
};

struct MutationStats {
  long proposals = 0;
  long accepted = 0;
  double acceptance_rate() const { return proposals ? static_cast<double>(accepted) / proposals : 0.0; }
};

/// Draw `count` indices i.i.d. with probabilities proportional to
/// exp(log_weights), normalized after shifting by the maximum.
std::vector<std::size_t> resample_multinomial(std::span<const double> log_weights, std::size_t count, Rng& rng);

/// N_0 particles from eta_0: exact sampling when the model supports it,
/// otherwise prior importance resampling followed by level-0 sweeps.
ParticleEnsemble initialize_level0(const LevelModel& model, long n0, std::uint64_t seed,
                                   const EngineOptions& options, EvaluationCounter& counter);

/// Advance each particle independently by `sweeps` applications of M_level.
/// Each particle i draws from its own stream keyed by (seed, level, i).
MutationStats mutate_ensemble(const LevelModel& model, int level, std::vector<State>& states,
                              std::vector<double>& log_densities, std::uint64_t seed, int sweeps,
                              unsigned workers, EvaluationCounter& counter);

/// Multilevel SMC over particle levels 0..plan.L-1: initialize at level 0,
/// then repeatedly weight by G_l, resample multinomially down to N_{l+1}
/// and mutate with the kernel invariant for eta_{l+1}. Deterministic given seed.
RunRecord run_mlsmc(const LevelModel& model, const AllocationPlan& plan, const QuantityOfInterest& g,
                    std::uint64_t seed, const EngineOptions& options = {});

}  // namespace mlsmc
