#include "mlsmc/smc_engine.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "mlsmc/errors.hpp"
#include "mlsmc/parallel.hpp"

namespace mlsmc {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double max_finite(std::span<const double> values) {
  double m = kNegInf;
  for (double v : values) {
    if (std::isnan(v)) continue;
    m = std::max(m, v);
  }
  return m;
}

LevelSummary summarize(int level, const ParticleEnsemble& ens, const QuantityOfInterest& g) {
  const auto n = static_cast<double>(ens.size());
  const double shift = max_finite(ens.log_potentials);
  if (!std::isfinite(shift)) throw DegeneracyError("all potentials vanish at level " + std::to_string(level));

  double sum_w = 0.0;
  double sum_gw = 0.0;
  double sum_g = 0.0;
  double sum_increment = 0.0;
  for (std::size_t i = 0; i < ens.size(); ++i) {
    const double w = std::exp(ens.log_potentials[i] - shift);
    const double gi = g ? g(level, ens.states[i]) : 0.0;
    sum_w += w;
    sum_gw += gi * w;
    sum_g += gi;
    if (ens.extra_log_potentials) sum_increment += w * std::expm1((*ens.extra_log_potentials)[i]);
  }
  if (!(sum_w > 0.0)) throw DegeneracyError("all potentials vanish at level " + std::to_string(level));

  LevelSummary s;
  s.N = static_cast<long>(ens.size());
  const double scale = std::exp(shift);
  s.mean_G = scale * (sum_w / n);
  s.log_mean_G = shift + std::log(sum_w / n);
  s.mean_g = sum_g / n;
  s.mean_gG = scale * (sum_gw / n);
  if (ens.extra_log_potentials) s.mean_G_Gnext_minus1 = scale * (sum_increment / n);
  return s;
}

void evaluate_potentials(const LevelModel& model, ParticleEnsemble& ens, bool extra, unsigned workers,
                         EvaluationCounter& counter) {
  const int l = ens.level;
  const std::size_t n = ens.size();
  ens.log_potentials.assign(n, 0.0);
  const bool want_extra = extra && l + 2 <= model.num_levels_available();
  if (want_extra) ens.extra_log_potentials.emplace(n, 0.0);
  else ens.extra_log_potentials.reset();

  parallel_for(n, workers, [&](std::size_t i) {
    const State& u = ens.states[i];
    const double next = model.log_density(l + 1, u);
    ens.log_potentials[i] = log_potential_from(l, u, ens.log_densities[i], next);
    if (want_extra) {
      (*ens.extra_log_potentials)[i] = log_potential_from(l + 1, u, next, model.log_density(l + 2, u));
    }
  });
  counter.add(l + 1, static_cast<long>(n));
  if (want_extra) counter.add(l + 2, static_cast<long>(n));
}

}  // namespace

int EngineOptions::sweeps_at(int level) const {
  if (level >= 0 && level < static_cast<int>(sweeps.size()) && sweeps[level] > 0) return sweeps[level];
  return default_sweeps;
}

double EvaluationCounter::cost(const LevelModel& model) const {
  double total = 0.0;
  for (std::size_t l = 0; l < counts_.size(); ++l) {
    if (counts_[l]) total += static_cast<double>(counts_[l]) * model.cost_weight(static_cast<int>(l));
  }
  return total;
}

std::vector<std::size_t> resample_multinomial(std::span<const double> log_weights, std::size_t count, Rng& rng) {
  if (count < 1) throw PreconditionError("resampling target count must be >= 1");
  const double shift = max_finite(log_weights);
  if (!std::isfinite(shift)) throw DegeneracyError("all resampling weights are zero");
  std::vector<double> weights(log_weights.size());
  std::transform(log_weights.begin(), log_weights.end(), weights.begin(),
                 [shift](double lw) { return std::isnan(lw) ? 0.0 : std::exp(lw - shift); });
  std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
  std::vector<std::size_t> out(count);
  for (auto& idx : out) idx = pick(rng);
  return out;
}

MutationStats mutate_ensemble(const LevelModel& model, int level, std::vector<State>& states,
                              std::vector<double>& log_densities, std::uint64_t seed, int sweeps,
                              unsigned workers, EvaluationCounter& counter) {
  model.check_level(level);
  if (sweeps < 1) throw PreconditionError("sweeps must be >= 1");
  if (log_densities.size() != states.size()) throw PreconditionError("states and log densities differ in size");
  std::vector<long> evaluations(states.size(), 0);
  std::vector<long> accepted(states.size(), 0);
  parallel_for(states.size(), workers, [&](std::size_t i) {
    Rng rng = make_stream(seed, StreamPurpose::kMutate, static_cast<std::uint64_t>(level), i);
    for (int s = 0; s < sweeps; ++s) {
      MoveResult move = model.mutate(level, states[i], log_densities[i], rng);
      evaluations[i] += move.density_evaluations;
      accepted[i] += move.accepted ? 1 : 0;
      states[i] = std::move(move.state);
      log_densities[i] = move.log_density;
    }
  });
  MutationStats stats;
  for (std::size_t i = 0; i < states.size(); ++i) {
    counter.add(level, evaluations[i]);
    stats.accepted += accepted[i];
  }
  stats.proposals = static_cast<long>(states.size()) * sweeps;
  return stats;
}

ParticleEnsemble initialize_level0(const LevelModel& model, long n0, std::uint64_t seed,
                                   const EngineOptions& options, EvaluationCounter& counter) {
  if (n0 < 1) throw PreconditionError("N_0 must be >= 1");
  const auto n = static_cast<std::size_t>(n0);
  ParticleEnsemble ens;
  ens.level = 0;

  {
    Rng probe = make_stream(seed, StreamPurpose::kInitPrior, 0, 0);
    if (model.sample_level0_exact(probe)) {
      ens.states.resize(n);
      ens.log_densities.resize(n);
      parallel_for(n, options.workers, [&](std::size_t i) {
        Rng rng = make_stream(seed, StreamPurpose::kInitPrior, 0, i);
        ens.states[i] = *model.sample_level0_exact(rng);
        ens.log_densities[i] = model.log_density(0, ens.states[i]);
      });
      counter.add(0, n0);
      return ens;
    }
  }

  const std::size_t pool_size = n * static_cast<std::size_t>(std::max(1, options.init_oversample));
  std::vector<State> pool(pool_size);
  std::vector<double> pool_log_density(pool_size);
  parallel_for(pool_size, options.workers, [&](std::size_t i) {
    Rng rng = make_stream(seed, StreamPurpose::kInitPrior, 0, i);
    pool[i] = model.sample_prior(rng);
    pool_log_density[i] = model.log_density(0, pool[i]);
  });
  counter.add(0, static_cast<long>(pool_size));

  Rng select_rng = make_stream(seed, StreamPurpose::kInitSelect, 0, 0);
  std::vector<std::size_t> picked;
  try {
    picked = resample_multinomial(pool_log_density, n, select_rng);
  } catch (const DegeneracyError&) {
    throw DegeneracyError("degenerate level-0 initialization: every prior draw has zero density");
  }
  ens.states.reserve(n);
  ens.log_densities.reserve(n);
  for (std::size_t idx : picked) {
    ens.states.push_back(pool[idx]);
    ens.log_densities.push_back(pool_log_density[idx]);
  }
  if (options.init_sweeps > 0) {
    // Level-0 sweeps draw from their own purpose so they never alias the
    // mutation streams used after resampling.
    const std::uint64_t init_seed = derive_seed(seed, StreamPurpose::kInitMutate, 0, 0);
    mutate_ensemble(model, 0, ens.states, ens.log_densities, init_seed, options.init_sweeps, options.workers,
                    counter);
  }
  return ens;
}

RunRecord run_mlsmc(const LevelModel& model, const AllocationPlan& plan, const QuantityOfInterest& g,
                    std::uint64_t seed, const EngineOptions& options) {
  plan.validate();
  if (plan.L > model.num_levels_available()) {
    throw RangeError("plan needs densities up to level " + std::to_string(plan.L) + " but model provides 0.." +
                     std::to_string(model.num_levels_available()));
  }
  const auto started = std::chrono::steady_clock::now();
  EvaluationCounter counter(model.num_levels_available());
  RunRecord record;
  record.seed = seed;

  ParticleEnsemble ens = initialize_level0(model, plan.N[0], seed, options, counter);
  double acceptance = 0.0;
  for (int p = 0; p < plan.L; ++p) {
    evaluate_potentials(model, ens, options.extra_potentials, options.workers, counter);
    LevelSummary summary = summarize(p, ens, g);
    summary.acceptance_rate = acceptance;
    record.per_level.push_back(summary);
    if (p + 1 == plan.L) break;

    Rng resample_rng = make_stream(seed, StreamPurpose::kResample, static_cast<std::uint64_t>(p), 0);
    std::vector<std::size_t> picked;
    try {
      picked = resample_multinomial(ens.log_potentials, static_cast<std::size_t>(plan.N[p + 1]), resample_rng);
    } catch (const DegeneracyError&) {
      throw DegeneracyError("weight degeneracy while resampling level " + std::to_string(p));
    }
    ParticleEnsemble next;
    next.level = p + 1;
    next.states.reserve(picked.size());
    next.log_densities.reserve(picked.size());
    for (std::size_t idx : picked) {
      next.states.push_back(ens.states[idx]);
      // kappa_{p+1} at the selected particle is already known from G_p.
      next.log_densities.push_back(ens.log_densities[idx] + ens.log_potentials[idx]);
    }
    const MutationStats stats = mutate_ensemble(model, p + 1, next.states, next.log_densities, seed,
                                                options.sweeps_at(p + 1), options.workers, counter);
    acceptance = stats.acceptance_rate();
    ens = std::move(next);
  }

  record.density_evaluations = counter.counts();
  record.realized_cost = counter.cost(model);
  record.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return record;
}

}  // namespace mlsmc
