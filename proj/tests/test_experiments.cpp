#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "mlsmc/errors.hpp"
#include "mlsmc/experiments.hpp"

using namespace mlsmc;
namespace fs = std::filesystem;

namespace {

ExperimentConfig finite_config() {
  ExperimentConfig c;
  c.name = "finite";
  c.problem.kind = "finite";
  c.problem.finite.builtin = "rate";
  c.problem.finite.n_states = 8;
  c.problem.finite.levels = 4;
  c.problem.finite.beta = 2.0;
  c.epsilons = {0.1, 0.05, 0.025};
  c.replicates = 200;
  c.methods = {Method::kMlsmcStandard};
  return c;
}

ExperimentConfig identical_elliptic_config() {
  ExperimentConfig c;
  c.problem.elliptic.identical_levels = true;
  c.epsilons = {0.125, 0.0625};
  c.replicates = 3;
  c.truth.replicates = 2;
  c.methods = {Method::kMlsmcTelescoped};
  c.variance_rate = {1, 3, 4, 20};
  return c;
}

fs::path temp_file(const std::string& name, const std::string& text) {
  const fs::path p = fs::temp_directory_path() / name;
  std::ofstream(p) << text;
  return p;
}

}  // namespace

TEST_CASE("log-log slope fit") {
  const std::vector<double> x{1, 2, 4, 8}, y{1, 0.25, 0.0625, 0.015625};
  const SlopeFit f = fit_loglog_slope(x, y);
  CHECK(f.slope == doctest::Approx(-2.0));
  CHECK(f.r_squared == doctest::Approx(1.0));
  CHECK(f.intercept == doctest::Approx(0.0));
  const std::vector<double> x3{1, 2, 4}, y3{1, 0.25, 1.0 / 16};
  CHECK(fit_loglog_slope(x3, y3).slope == doctest::Approx(-2.0));
  const std::vector<double> x2{2, 5}, y2{3, 7};
  const SlopeFit two = fit_loglog_slope(x2, y2);
  CHECK(std::exp(two.intercept + two.slope * std::log(5.0)) == doctest::Approx(7.0));
  const std::vector<double> bad{1, -2};
  CHECK_THROWS_AS(fit_loglog_slope(bad, x2), RangeError);
  const std::vector<double> one{1};
  CHECK_THROWS_AS(fit_loglog_slope(one, one), PreconditionError);
}

TEST_CASE("method names round trip") {
  for (Method m : {Method::kSingleLevel, Method::kMlsmcStandard, Method::kMlsmcTelescoped}) {
    CHECK(parse_method(method_name(m)) == m);
  }
  CHECK_THROWS_AS(parse_method("mcmc"), ConfigError);
}

TEST_CASE("config parsing and validation") {
  const ExperimentConfig c = finite_config();
  const nlohmann::json j = c;
  const ExperimentConfig back = j.get<ExperimentConfig>();
  CHECK(config_hash(back) == config_hash(c));
  CHECK(back.epsilons == c.epsilons);
  CHECK(back.problem.finite.levels == 4);

  nlohmann::json extra = j;
  extra["engine"]["colour"] = 1;
  CHECK_THROWS_AS(extra.get<ExperimentConfig>(), ConfigError);
  nlohmann::json top = j;
  top["verbose"] = true;
  CHECK_THROWS_AS(top.get<ExperimentConfig>(), ConfigError);
  nlohmann::json increasing = j;
  increasing["epsilons"] = {0.1, 0.2};
  CHECK_THROWS_AS(increasing.get<ExperimentConfig>(), ConfigError);
  nlohmann::json one_rep = j;
  one_rep["replicates"] = 1;
  CHECK_THROWS_AS(one_rep.get<ExperimentConfig>(), ConfigError);

  const fs::path path = temp_file("mlsmc_cfg.json", R"({"name": "x", "replicates": 4, "seed": 9})");
  const ExperimentConfig loaded = load_config(path);
  CHECK(loaded.replicates == 4);
  CHECK(loaded.seed == 9);
  CHECK(loaded.problem.kind == "elliptic");
  CHECK_THROWS_AS(load_config(temp_file("mlsmc_bad.json", "{ not json")), ConfigError);
  CHECK_THROWS_AS(load_config("/nonexistent/cfg.json"), ConfigError);

  ExperimentConfig changed = c;
  changed.seed = 2;
  CHECK(config_hash(changed) != config_hash(c));
}

TEST_CASE("finite truth comes from enumeration") {
  const ExperimentConfig c = finite_config();
  const TruthResult t = compute_reference_truth(c);
  CHECK(t.exact);
  CHECK(t.se == 0.0);
  CHECK(t.level == 3);
  const auto model = build_model(c, 3);
  CHECK(model->num_levels_available() == 3);
}

TEST_CASE("finite study meets the MSE target") {
  // Enough levels that the exact truth sits two above the finest planned level.
  ExperimentConfig c = finite_config();
  c.problem.finite.levels = 8;
  c.epsilons = {0.1, 0.05, 0.025, 0.0125};
  const StudyResult r = cost_mse_study(c);
  REQUIRE(r.slopes.size() == 1);
  CHECK(r.flagged == 0);
  CHECK(r.rows.size() == 4 * 200);
  REQUIRE(r.points.size() == 4);
  for (std::size_t i = 0; i < r.points.size(); ++i) {
    CHECK(r.points[i].mse <= c.epsilons[i] * c.epsilons[i]);
    if (i > 0) CHECK(r.points[i].median_cost > r.points[i - 1].median_cost);
  }
  CHECK(r.slopes[0].second.slope < 0.0);
}

TEST_CASE("predicted cost quadruples when epsilon halves for beta > zeta") {
  ExperimentConfig c = finite_config();
  c.rates.alpha = 1;
  c.rates.beta = 2;
  c.rates.zeta = 1;
  const double a = multilevel_plan(c.rates, 1.0 / 256).predicted_cost;
  const double b = multilevel_plan(c.rates, 1.0 / 512).predicted_cost;
  // Up to the log factor L: ratio between 4 and 4 (L+1)/L plus rounding.
  CHECK(b / a > 4.0);
  CHECK(b / a < 6.0);
}

TEST_CASE("identical levels: telescoped estimator is exact and the variance proxy vanishes") {
  const ExperimentConfig c = identical_elliptic_config();
  const TruthResult t = compute_reference_truth(c);
  CHECK(t.value == 1.0);
  CHECK(t.se == 0.0);
  const StudyResult r = cost_mse_study(c, t);
  for (const StudyPoint& p : r.points) CHECK(p.mse == 0.0);
  for (const ResultRow& row : r.rows) CHECK(row.estimate == 1.0);
  const VarianceRateResult v = estimate_variance_rate(c);
  CHECK(v.degenerate);
  CHECK_FALSE(v.fit.has_value());
  for (double p : v.proxy) CHECK(p == 0.0);
}

TEST_CASE("finite variance rate matches the constructed decay") {
  ExperimentConfig c = finite_config();
  c.problem.finite.levels = 9;
  c.problem.finite.beta = 2.0;
  c.rates.k_offset = 1;
  c.variance_rate = {1, 7, 400, 200};
  const VarianceRateResult v = estimate_variance_rate(c);
  REQUIRE(v.fit.has_value());
  CHECK(v.fit->slope == doctest::Approx(2.0).epsilon(0.15));
}

TEST_CASE("study output is deterministic and well formed") {
  ExperimentConfig c = finite_config();
  c.replicates = 5;
  c.methods = {Method::kSingleLevel, Method::kMlsmcStandard, Method::kMlsmcTelescoped};
  const fs::path dir = fs::temp_directory_path() / "mlsmc_study_test";
  auto run = [&](unsigned workers) {
    ExperimentConfig w = c;
    w.workers = workers;
    write_study_csv(cost_mse_study(w), dir / "out.csv");
    std::ifstream in(dir / "out.csv", std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  const std::string a = run(1), b = run(3);
  CHECK(a == b);
  CHECK(a.rfind("method,epsilon,replicate,seed,estimate,truth,rel_error,analytic_cost,wall_clock_s\n", 0) == 0);
  CHECK(std::count(a.begin(), a.end(), '\n') == 1 + 3 * 3 * 5);

  // Paired seeds across methods.
  const StudyResult r = cost_mse_study(c);
  for (std::size_t i = 0; i < 15; ++i) {
    CHECK(r.rows[i].seed == r.rows[i + 15].seed);
    CHECK(r.rows[i].seed == r.rows[i + 30].seed);
  }
  const nlohmann::json side = study_sidecar(c, r);
  CHECK(side.at("config_hash") == config_hash(c));
  CHECK(side.at("slopes").contains("mlsmc-telescoped"));
}
