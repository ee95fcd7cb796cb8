#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <limits>
#include <numeric>

#include "mlsmc/discrete_oracle.hpp"
#include "mlsmc/errors.hpp"
#include "mlsmc/estimators.hpp"
#include "mlsmc/inverse_problem.hpp"
#include "mlsmc/smc_engine.hpp"

using namespace mlsmc;

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

std::vector<double> frequencies(const std::vector<std::size_t>& idx, std::size_t n) {
  std::vector<double> f(n, 0.0);
  for (std::size_t i : idx) f[i] += 1.0;
  for (double& x : f) x /= static_cast<double>(idx.size());
  return f;
}

RateParameters unit_rates() { return RateParameters{}; }

// 3-state model with every kernel the identity matrix.
FiniteFkModel identity_kernel_model() {
  FiniteFkModel m;
  m.kappa.resize(3, 3);
  m.kappa << 1, 2, 3, 2, 2, 1, 1, 1, 1;
  m.kernels.assign(3, Eigen::MatrixXd::Identity(3, 3));
  return m;
}

}  // namespace

TEST_CASE("multinomial resampling marginals") {
  Rng rng(7);
  const std::vector<double> equal(3, 0.0);
  const auto f = frequencies(resample_multinomial(equal, 30000, rng), 3);
  for (double x : f) CHECK(std::abs(x - 1.0 / 3.0) < 0.01);

  const std::vector<double> skew{0.0, std::log(2.0), 0.0};
  const auto g = frequencies(resample_multinomial(skew, 40000, rng), 3);
  CHECK(std::abs(g[1] - 0.5) < 0.01);

  const std::vector<double> single{0.0, kNegInf};
  for (std::size_t i : resample_multinomial(single, 100, rng)) CHECK(i == 0);

  // Very negative log weights are shifted before exponentiating.
  const std::vector<double> tiny{-2000.0, -2000.0 + std::log(3.0)};
  const auto t = frequencies(resample_multinomial(tiny, 40000, rng), 2);
  CHECK(std::abs(t[1] - 0.75) < 0.01);

  CHECK(resample_multinomial(equal, 7, rng).size() == 7);
  const std::vector<double> dead{kNegInf, kNegInf};
  CHECK_THROWS_AS(resample_multinomial(dead, 3, rng), DegeneracyError);
  CHECK_THROWS_AS(resample_multinomial(equal, 0, rng), PreconditionError);
}

TEST_CASE("resampling passes a chi-square goodness-of-fit test") {
  // Critical value of chi^2 with 4 degrees of freedom at significance 1e-3.
  const double critical = 18.467;
  const std::vector<double> w{1.0, 2.0, 3.0, 4.0, 5.0};
  std::vector<double> log_w;
  for (double x : w) log_w.push_back(std::log(x));
  int failures = 0;
  for (int batch = 0; batch < 20; ++batch) {
    Rng rng = make_stream(99, StreamPurpose::kResample, 0, batch);
    const std::size_t n = 5000;
    const auto idx = resample_multinomial(log_w, n, rng);
    std::vector<double> counts(5, 0.0);
    for (auto i : idx) counts[i] += 1.0;
    double chi2 = 0.0;
    for (int k = 0; k < 5; ++k) {
      const double expected = n * w[k] / 15.0;
      chi2 += (counts[k] - expected) * (counts[k] - expected) / expected;
    }
    failures += chi2 > critical;
  }
  CHECK(failures <= 1);
}

TEST_CASE("level-0 initialization") {
  EvaluationCounter counter(2);
  const FiniteLevelModel two(two_state_fixture());
  const ParticleEnsemble four = initialize_level0(two, 4, 1, {}, counter);
  CHECK(four.size() == 4);

  FiniteFkModel m;
  m.kappa.resize(2, 2);
  m.kappa << 1, 2, 1, 2;
  m.kernels.assign(2, independence_mh_kernel(Eigen::Vector2d(1.0 / 3.0, 2.0 / 3.0)));
  const FiniteLevelModel model(m);
  const ParticleEnsemble ens = initialize_level0(model, 100000, 5, {}, counter);
  double ones = 0.0;
  for (const State& u : ens.states) ones += u.coords[0];
  CHECK(std::abs(ones / 1e5 - 2.0 / 3.0) <= 3.0 * std::sqrt(2.0 / 9.0 / 1e5));
  CHECK_THROWS_AS(initialize_level0(model, 0, 5, {}, counter), PreconditionError);
}

TEST_CASE("continuous initialization stays in the prior box") {
  const EllipticSolver data_solver(CoefficientField::standard());
  InverseProblemConfig cfg;
  cfg.max_level = 2;
  const EllipticInverseProblem model(cfg, synthesize_data(data_solver, default_truth(), 8, 3));
  EvaluationCounter counter(2);
  EngineOptions opt;
  opt.init_sweeps = 2;
  const ParticleEnsemble ens = initialize_level0(model, 20, 9, opt, counter);
  CHECK(ens.size() == 20);
  for (std::size_t i = 0; i < ens.size(); ++i) {
    CHECK(model.admissible(ens.states[i]));
    CHECK(ens.log_densities[i] == doctest::Approx(model.log_density(0, ens.states[i])));
  }
  // 10 x N prior draws plus 2 sweeps of N particles, all at level 0.
  CHECK(counter.counts()[0] == 200 + 40);

  std::vector<State> states = ens.states;
  std::vector<double> logs;
  for (const State& u : states) logs.push_back(model.log_density(1, u));
  mutate_ensemble(model, 1, states, logs, 4, 3, 1, counter);
  for (const State& u : states) CHECK(model.admissible(u));
}

TEST_CASE("identity kernel leaves states unchanged") {
  const FiniteLevelModel model(identity_kernel_model());
  std::vector<State> states{FiniteLevelModel::state_of(0), FiniteLevelModel::state_of(2)};
  std::vector<double> logs{model.log_density(1, states[0]), model.log_density(1, states[1])};
  const auto before = states;
  EvaluationCounter counter(2);
  mutate_ensemble(model, 1, states, logs, 3, 10, 1, counter);
  CHECK(states == before);
}

TEST_CASE("mutation converges to the invariant law from a point mass") {
  const FiniteFkModel m = random_invariant_fixture(6, 3, 31);
  const FiniteLevelModel model(m);
  const int n = 10000;
  std::vector<State> states(n, FiniteLevelModel::state_of(0));
  std::vector<double> logs(n, model.log_density(2, states[0]));
  EvaluationCounter counter(2);
  mutate_ensemble(model, 2, states, logs, 17, 200, 1, counter);
  std::vector<double> freq(6, 0.0);
  for (const State& u : states) freq[model.index_of(u)] += 1.0 / n;
  const Eigen::VectorXd eta = enumerated_eta(m, 2);
  double tv = 0.0;
  for (int i = 0; i < 6; ++i) tv += 0.5 * std::abs(freq[i] - eta(i));
  CHECK(tv <= 0.02);
}

TEST_CASE("constant potentials give exact means") {
  FiniteFkModel m = random_invariant_fixture(5, 4, 2);
  for (int l = 1; l < 4; ++l) m.kappa.row(l) = m.kappa.row(0) * std::pow(1.5, l);
  for (int l = 0; l < 4; ++l) m.kernels[l] = independence_mh_kernel(enumerated_eta(m, l));
  const FiniteLevelModel model(m);
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const RunRecord rec = run_mlsmc(model, make_plan(unit_rates(), {40, 30, 20}), nullptr, seed);
    for (const auto& s : rec.per_level) CHECK(s.mean_G == doctest::Approx(1.5).epsilon(1e-14));
  }
}

TEST_CASE("single level run") {
  const FiniteLevelModel model(random_invariant_fixture(5, 3, 3));
  const RunRecord rec = run_mlsmc(model, make_plan(unit_rates(), {50}), nullptr, 8);
  CHECK(rec.levels() == 1);
  CHECK(standard_nc_estimate(rec, 1) == doctest::Approx(rec.per_level[0].mean_G).epsilon(1e-14));
}

TEST_CASE("runs are deterministic and independent of worker count") {
  const FiniteLevelModel model(random_invariant_fixture(7, 5, 6));
  const AllocationPlan plan = make_plan(unit_rates(), {60, 40, 30, 20});
  EngineOptions one, many;
  many.workers = 4;
  const RunRecord a = run_mlsmc(model, plan, nullptr, 123, one);
  const RunRecord b = run_mlsmc(model, plan, nullptr, 123, many);
  const RunRecord c = run_mlsmc(model, plan, nullptr, 124, one);
  for (int p = 0; p < 4; ++p) {
    CHECK(a.per_level[p].mean_G == b.per_level[p].mean_G);
    CHECK(a.per_level[p].mean_G_Gnext_minus1 == b.per_level[p].mean_G_Gnext_minus1);
  }
  CHECK(a.density_evaluations == b.density_evaluations);
  CHECK(standard_nc_estimate(a, 4) != standard_nc_estimate(c, 4));
}

TEST_CASE("cost accounting") {
  const FiniteFkModel m = random_invariant_fixture(5, 6, 4);
  const FiniteLevelModel model(m);
  const std::vector<long> N{40, 30, 20, 10};
  EngineOptions opt;
  opt.default_sweeps = 3;
  const RunRecord rec = run_mlsmc(model, make_plan(unit_rates(), N), nullptr, 1, opt);
  // Exact init (N_0 at level 0), G_p at p+1, G_{p+1} at p+2, sweeps at p+1.
  std::vector<long> expected(6, 0);
  expected[0] += N[0];
  for (int p = 0; p < 4; ++p) {
    expected[p + 1] += N[p];
    if (p + 2 <= 5) expected[p + 2] += N[p];
    if (p + 1 < 4) expected[p + 1] += 3 * N[p + 1];
  }
  CHECK(rec.density_evaluations == expected);
  double cost = 0.0;
  for (int l = 0; l < 6; ++l) cost += expected[l] * model.cost_weight(l);
  CHECK(rec.realized_cost == doctest::Approx(cost).epsilon(1e-14));
  double floor_cost = 0.0;
  for (int p = 0; p < 4; ++p) floor_cost += N[p] * model.cost_weight(p);
  CHECK(rec.realized_cost >= floor_cost);
}

TEST_CASE("extra potentials exist only where the next density does") {
  const FiniteLevelModel model(random_invariant_fixture(5, 4, 4));
  const RunRecord rec = run_mlsmc(model, make_plan(unit_rates(), {20, 20, 20}), nullptr, 1);
  CHECK(rec.per_level[0].mean_G_Gnext_minus1.has_value());
  CHECK(rec.per_level[1].mean_G_Gnext_minus1.has_value());
  CHECK_FALSE(rec.per_level[2].mean_G_Gnext_minus1.has_value());
  EngineOptions off;
  off.extra_potentials = false;
  const RunRecord bare = run_mlsmc(model, make_plan(unit_rates(), {20, 20, 20}), nullptr, 1, off);
  CHECK_FALSE(bare.per_level[0].mean_G_Gnext_minus1.has_value());
}

TEST_CASE("plans beyond the model are rejected") {
  const FiniteLevelModel model(two_state_fixture());
  CHECK_THROWS_AS(run_mlsmc(model, make_plan(unit_rates(), {5, 5, 5}), nullptr, 1), RangeError);
}

TEST_CASE("standard estimator is unbiased on a three-level model") {
  const FiniteFkModel m = random_invariant_fixture(4, 4, 12);
  const FiniteLevelModel model(m);
  const AllocationPlan plan = make_plan(unit_rates(), {30, 20, 10});
  const int R = 10000;
  double sum = 0.0, sum_sq = 0.0;
  EngineOptions opt;
  opt.extra_potentials = false;
  for (int r = 0; r < R; ++r) {
    const double v = standard_nc_estimate(run_mlsmc(model, plan, nullptr, 5000 + r, opt), 3);
    sum += v;
    sum_sq += v * v;
  }
  const double mean = sum / R;
  const double se = std::sqrt((sum_sq / R - mean * mean) / (R - 1));
  CHECK(std::abs(mean - product_of_eta_potentials(m, 3)) <= 3.0 * se);
}
