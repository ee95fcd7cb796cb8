#include "mlsmc/allocation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "mlsmc/errors.hpp"

namespace mlsmc {
namespace {

long checked_ceil(double x) {
  if (!(x < static_cast<double>(std::numeric_limits<long>::max() / 2))) {
    throw CapacityError("sample size overflows: " + std::to_string(x));
  }
  // Absorb roundoff such as 1 / 0.1^2 = 100.00000000000001.
  return static_cast<long>(std::ceil(x * (1.0 - 1e-12)));
}

void require_epsilon(double epsilon) {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw PreconditionError("epsilon must be positive");
}

}  // namespace

void RateParameters::validate() const {
  if (!(alpha > 0.0 && beta > 0.0 && zeta > 0.0)) throw PreconditionError("rates must be positive");
  if (refinement < 2) throw PreconditionError("refinement factor must be >= 2");
  if (k_offset < 1) throw PreconditionError("k_offset must be >= 1");
  if (2.0 * alpha < std::max(beta, zeta)) {
    throw PreconditionError("rates violate 2 alpha >= max(beta, zeta)");
  }
}

double RateParameters::resolution(int level) const {
  return std::pow(static_cast<double>(refinement), -(level + k_offset));
}

void AllocationPlan::validate() const {
  if (L < 1) throw PreconditionError("plan needs L >= 1");
  if (static_cast<int>(N.size()) != L) {
    throw PreconditionError("plan has " + std::to_string(N.size()) + " counts for L = " + std::to_string(L));
  }
  for (int l = 0; l < L; ++l) {
    if (N[l] < 1) throw PreconditionError("N_" + std::to_string(l) + " < 1");
    if (l > 0 && N[l] > N[l - 1]) throw PreconditionError("particle counts must be non-increasing");
  }
}

AllocationPlan make_plan(const RateParameters& rates, std::vector<long> counts, double epsilon) {
  AllocationPlan plan;
  plan.L = static_cast<int>(counts.size());
  plan.N = std::move(counts);
  plan.epsilon = epsilon;
  for (int l = 0; l < plan.L; ++l) plan.h.push_back(rates.resolution(l));
  plan.validate();
  plan.predicted_cost = predicted_cost(plan, rates);
  return plan;
}

int choose_max_level(const RateParameters& rates, double epsilon, const AllocationOptions& options) {
  require_epsilon(epsilon);
  for (int L = 1; L <= options.max_level_cap; ++L) {
    if (std::pow(rates.resolution(L), rates.alpha) <= epsilon * (1.0 + 1e-12)) return L;
  }
  throw CapacityError("epsilon " + std::to_string(epsilon) + " needs more than " +
                      std::to_string(options.max_level_cap) + " levels");
}

double level_sum_constant(const RateParameters& rates, int L) {
  // A single-level plan has no increments; keep the level-0 term so N_0 still
  // scales like eps^-2 instead of collapsing to the floor.
  if (L == 1) return std::pow(rates.resolution(0), (rates.beta - rates.zeta) / 2.0);
  double k_sum = 0.0;
  for (int l = 1; l <= L - 1; ++l) k_sum += std::pow(rates.resolution(l), (rates.beta - rates.zeta) / 2.0);
  return k_sum;
}

std::vector<long> choose_sample_sizes(const RateParameters& rates, int L, double epsilon,
                                      const AllocationOptions& options) {
  require_epsilon(epsilon);
  if (L < 1) throw PreconditionError("L must be >= 1");
  const double k_sum = level_sum_constant(rates, L);
  const long floor_count = static_cast<long>(std::floor(options.floor_factor * L)) + 1;
  std::vector<long> counts(L);
  for (int l = 0; l < L; ++l) {
    const double raw = options.scale * L * k_sum * std::pow(rates.resolution(l), (rates.beta + rates.zeta) / 2.0) /
                       (epsilon * epsilon);
    counts[l] = std::max(checked_ceil(raw), floor_count);
    if (l > 0) counts[l] = std::min(counts[l], counts[l - 1]);
  }
  return counts;
}

double predicted_cost(const AllocationPlan& plan, const RateParameters& rates) {
  double cost = 0.0;
  for (int l = 0; l < plan.L; ++l) cost += static_cast<double>(plan.N[l]) * std::pow(plan.h[l], -rates.zeta);
  return cost;
}

AllocationPlan multilevel_plan(const RateParameters& rates, double epsilon, const AllocationOptions& options) {
  rates.validate();
  const int L = choose_max_level(rates, epsilon, options);
  return make_plan(rates, choose_sample_sizes(rates, L, epsilon, options), epsilon);
}

AllocationPlan single_level_plan(const RateParameters& rates, double epsilon, const AllocationOptions& options) {
  rates.validate();
  const int L = choose_max_level(rates, epsilon, options);
  const long n = std::max(1L, checked_ceil(options.scale / (epsilon * epsilon)));
  return make_plan(rates, std::vector<long>(L, n), epsilon);
}

}  // namespace mlsmc
