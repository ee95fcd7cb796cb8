#include "mlsmc/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <numeric>
#include <sstream>

#include "mlsmc/errors.hpp"
#include "mlsmc/estimators.hpp"
#include "mlsmc/parallel.hpp"

namespace mlsmc {

using nlohmann::json;

namespace {

// Stream tags that keep truth and variance-rate runs apart from study replicates.
constexpr std::uint64_t kTruthTag = 0x7275746875ULL;
constexpr std::uint64_t kVarianceTag = 0x76617272ULL;

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& section) {
  if (!j.is_object()) throw ConfigError("section '" + section + "' must be an object");
  for (const auto& [key, _] : j.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
      throw ConfigError("unknown key '" + key + "' in section '" + section + "'");
    }
  }
}

template <typename T>
void read_opt(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

std::string fmt_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double median(std::vector<double> v) {
  if (v.empty()) return std::nan("");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

struct MeanSe {
  double mean = 0.0;
  double sd = 0.0;
  double se = 0.0;
};

MeanSe mean_and_se(std::span<const double> v) {
  MeanSe out;
  if (v.empty()) return out;
  out.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - out.mean) * (x - out.mean);
    out.sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
    out.se = out.sd / std::sqrt(static_cast<double>(v.size()));
  }
  return out;
}

FiniteFkModel load_finite_fixture(const FiniteProblemSpec& spec) {
  if (!spec.fixture_path.empty()) {
    std::ifstream in(spec.fixture_path);
    if (!in) throw ConfigError("cannot open fixture " + spec.fixture_path);
    return json::parse(in).get<FiniteFkModel>();
  }
  if (spec.builtin == "rate") return rate_fixture(spec.n_states, spec.levels, spec.beta, spec.fixture_seed, spec.amplitude);
  if (spec.builtin == "invariant") return random_invariant_fixture(spec.n_states, spec.levels, spec.fixture_seed);
  if (spec.builtin == "two_state") return two_state_fixture();
  throw ConfigError("unknown builtin fixture '" + spec.builtin + "'");
}

AllocationPlan plan_for(const ExperimentConfig& config, Method method, double epsilon) {
  return method == Method::kSingleLevel ? single_level_plan(config.rates, epsilon, config.allocation)
                                        : multilevel_plan(config.rates, epsilon, config.allocation);
}

}  // namespace

SlopeFit fit_loglog_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw PreconditionError("slope fit needs equally many x and y values");
  if (x.size() < 2) throw PreconditionError("slope fit needs at least two points");
  const auto n = static_cast<double>(x.size());
  std::vector<double> lx(x.size()), ly(y.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) {
      throw RangeError("slope fit needs positive values, got (" + fmt_double(x[i]) + ", " + fmt_double(y[i]) + ")");
    }
    lx[i] = std::log(x[i]);
    ly[i] = std::log(y[i]);
  }
  const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / n;
  const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
    syy += (ly[i] - my) * (ly[i] - my);
  }
  if (!(sxx > 0.0)) throw PreconditionError("slope fit needs at least two distinct x values");
  SlopeFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.r_squared = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  return fit;
}

std::string method_name(Method m) {
  switch (m) {
    case Method::kSingleLevel: return "single-level-smc";
    case Method::kMlsmcStandard: return "mlsmc-standard";
    case Method::kMlsmcTelescoped: return "mlsmc-telescoped";
  }
  return "unknown";
}

Method parse_method(const std::string& name) {
  for (Method m : {Method::kSingleLevel, Method::kMlsmcStandard, Method::kMlsmcTelescoped}) {
    if (method_name(m) == name) return m;
  }
  throw ConfigError("unknown method '" + name + "'");
}

// ---- config serialization ----

void ExperimentConfig::validate() const {
  try {
    rates.validate();
  } catch (const PreconditionError& e) {
    throw ConfigError(std::string("rates: ") + e.what());
  }
  if (replicates < 2) throw ConfigError("replicates must be >= 2");
  if (epsilons.empty()) throw ConfigError("epsilon grid is empty");
  for (std::size_t i = 0; i < epsilons.size(); ++i) {
    if (!(epsilons[i] > 0.0)) throw ConfigError("epsilon values must be positive");
    if (i > 0 && !(epsilons[i] < epsilons[i - 1])) throw ConfigError("epsilon grid must be strictly decreasing");
  }
  if (methods.empty()) throw ConfigError("method set is empty");
  if (problem.kind != "elliptic" && problem.kind != "finite") {
    throw ConfigError("problem.kind must be 'elliptic' or 'finite'");
  }
  if (problem.kind == "elliptic" && rates.refinement != 2) {
    throw ConfigError("the elliptic problem halves its mesh per level; rates.refinement must be 2");
  }
  if (!(allocation.scale > 0.0)) throw ConfigError("allocation.scale must be positive");
  if (engine.default_sweeps < 1) throw ConfigError("engine.sweeps must be >= 1");
  if (truth.replicates < 2 || !(truth.n_multiplier > 0.0) || truth.level_offset < 0) {
    throw ConfigError("truth: need replicates >= 2, n_multiplier > 0, level_offset >= 0");
  }
  if (variance_rate.last_level - variance_rate.first_level < 1 || variance_rate.first_level < 0) {
    throw ConfigError("variance_rate needs at least two levels starting at >= 0");
  }
  if (variance_rate.replicates < 2 || variance_rate.particles < 1) {
    throw ConfigError("variance_rate needs replicates >= 2 and particles >= 1");
  }
  if (workers < 1) throw ConfigError("workers must be >= 1");
}

void to_json(json& j, const ExperimentConfig& c) {
  const EllipticProblemSpec& e = c.problem.elliptic;
  json elliptic{{"modes", e.modes},
                {"mean_coefficient", e.mean_coefficient},
                {"data_level", e.data_level},
                {"noise_seed", e.noise_seed},
                {"xi_std", e.xi_std},
                {"identical_levels", e.identical_levels},
                {"mutation",
                 {{"proposal_mix", e.mutation.proposal_mix},
                  {"rw_step", e.mutation.rw_step},
                  {"coords_per_step", e.mutation.coords_per_step}}}};
  if (e.truth) elliptic["truth"] = *e.truth;
  if (e.observations) elliptic["observations"] = *e.observations;
  const FiniteProblemSpec& f = c.problem.finite;
  json finite{{"fixture", f.fixture_path}, {"builtin", f.builtin},   {"n_states", f.n_states},
              {"levels", f.levels},        {"beta", f.beta},         {"amplitude", f.amplitude},
              {"fixture_seed", f.fixture_seed}};
  json truth{{"level_offset", c.truth.level_offset},
             {"n_multiplier", c.truth.n_multiplier},
             {"replicates", c.truth.replicates},
             {"max_se_fraction", c.truth.max_se_fraction}};
  if (c.truth.value) truth["value"] = *c.truth.value;
  if (c.truth.se) truth["se"] = *c.truth.se;
  std::vector<std::string> methods;
  for (Method m : c.methods) methods.push_back(method_name(m));
  j = json{{"name", c.name},
           {"problem", {{"kind", c.problem.kind}, {"elliptic", elliptic}, {"finite", finite}}},
           {"rates",
            {{"alpha", c.rates.alpha},
             {"beta", c.rates.beta},
             {"zeta", c.rates.zeta},
             {"refinement", c.rates.refinement},
             {"k_offset", c.rates.k_offset}}},
           {"allocation",
            {{"scale", c.allocation.scale},
             {"floor_factor", c.allocation.floor_factor},
             {"max_level_cap", c.allocation.max_level_cap}}},
           {"engine",
            {{"sweeps", c.engine.default_sweeps},
             {"sweeps_per_level", c.engine.sweeps},
             {"init_oversample", c.engine.init_oversample},
             {"init_sweeps", c.engine.init_sweeps}}},
           {"epsilons", c.epsilons},
           {"replicates", c.replicates},
           {"seed", c.seed},
           {"methods", methods},
           {"truth", truth},
           {"variance_rate",
            {{"first_level", c.variance_rate.first_level},
             {"last_level", c.variance_rate.last_level},
             {"replicates", c.variance_rate.replicates},
             {"particles", c.variance_rate.particles}}},
           {"output_dir", c.output_dir},
           {"workers", c.workers},
           {"record_wall_clock", c.record_wall_clock}};
}

void from_json(const json& j, ExperimentConfig& c) {
  check_keys(j,
             {"name", "problem", "rates", "allocation", "engine", "epsilons", "replicates", "seed", "methods", "truth",
              "variance_rate", "output_dir", "workers", "record_wall_clock"},
             "top level");
  c = ExperimentConfig{};
  read_opt(j, "name", c.name);
  if (j.contains("problem")) {
    const json& p = j.at("problem");
    check_keys(p, {"kind", "elliptic", "finite"}, "problem");
    read_opt(p, "kind", c.problem.kind);
    if (p.contains("elliptic")) {
      const json& e = p.at("elliptic");
      check_keys(e,
                 {"modes", "mean_coefficient", "data_level", "noise_seed", "xi_std", "truth", "observations",
                  "mutation", "identical_levels"},
                 "problem.elliptic");
      EllipticProblemSpec& s = c.problem.elliptic;
      read_opt(e, "modes", s.modes);
      read_opt(e, "mean_coefficient", s.mean_coefficient);
      read_opt(e, "data_level", s.data_level);
      read_opt(e, "noise_seed", s.noise_seed);
      read_opt(e, "xi_std", s.xi_std);
      read_opt(e, "identical_levels", s.identical_levels);
      if (e.contains("truth")) s.truth = e.at("truth").get<std::vector<double>>();
      if (e.contains("observations")) s.observations = e.at("observations").get<ObservationSetup>();
      if (e.contains("mutation")) {
        const json& m = e.at("mutation");
        check_keys(m, {"proposal_mix", "rw_step", "coords_per_step"}, "problem.elliptic.mutation");
        read_opt(m, "proposal_mix", s.mutation.proposal_mix);
        read_opt(m, "rw_step", s.mutation.rw_step);
        read_opt(m, "coords_per_step", s.mutation.coords_per_step);
      }
    }
    if (p.contains("finite")) {
      const json& f = p.at("finite");
      check_keys(f, {"fixture", "builtin", "n_states", "levels", "beta", "amplitude", "fixture_seed"}, "problem.finite");
      FiniteProblemSpec& s = c.problem.finite;
      read_opt(f, "fixture", s.fixture_path);
      read_opt(f, "builtin", s.builtin);
      read_opt(f, "n_states", s.n_states);
      read_opt(f, "levels", s.levels);
      read_opt(f, "beta", s.beta);
      read_opt(f, "amplitude", s.amplitude);
      read_opt(f, "fixture_seed", s.fixture_seed);
    }
  }
  if (j.contains("rates")) {
    const json& r = j.at("rates");
    check_keys(r, {"alpha", "beta", "zeta", "refinement", "k_offset"}, "rates");
    read_opt(r, "alpha", c.rates.alpha);
    read_opt(r, "beta", c.rates.beta);
    read_opt(r, "zeta", c.rates.zeta);
    read_opt(r, "refinement", c.rates.refinement);
    read_opt(r, "k_offset", c.rates.k_offset);
  }
  if (j.contains("allocation")) {
    const json& a = j.at("allocation");
    check_keys(a, {"scale", "floor_factor", "max_level_cap"}, "allocation");
    read_opt(a, "scale", c.allocation.scale);
    read_opt(a, "floor_factor", c.allocation.floor_factor);
    read_opt(a, "max_level_cap", c.allocation.max_level_cap);
  }
  if (j.contains("engine")) {
    const json& e = j.at("engine");
    check_keys(e, {"sweeps", "sweeps_per_level", "init_oversample", "init_sweeps"}, "engine");
    read_opt(e, "sweeps", c.engine.default_sweeps);
    read_opt(e, "sweeps_per_level", c.engine.sweeps);
    read_opt(e, "init_oversample", c.engine.init_oversample);
    read_opt(e, "init_sweeps", c.engine.init_sweeps);
  }
  read_opt(j, "epsilons", c.epsilons);
  read_opt(j, "replicates", c.replicates);
  read_opt(j, "seed", c.seed);
  if (j.contains("methods")) {
    c.methods.clear();
    for (const auto& m : j.at("methods")) c.methods.push_back(parse_method(m.get<std::string>()));
  }
  if (j.contains("truth")) {
    const json& t = j.at("truth");
    check_keys(t, {"level_offset", "n_multiplier", "replicates", "max_se_fraction", "value", "se"}, "truth");
    read_opt(t, "level_offset", c.truth.level_offset);
    read_opt(t, "n_multiplier", c.truth.n_multiplier);
    read_opt(t, "replicates", c.truth.replicates);
    read_opt(t, "max_se_fraction", c.truth.max_se_fraction);
    if (t.contains("value")) c.truth.value = t.at("value").get<double>();
    if (t.contains("se")) c.truth.se = t.at("se").get<double>();
  }
  if (j.contains("variance_rate")) {
    const json& v = j.at("variance_rate");
    check_keys(v, {"first_level", "last_level", "replicates", "particles"}, "variance_rate");
    read_opt(v, "first_level", c.variance_rate.first_level);
    read_opt(v, "last_level", c.variance_rate.last_level);
    read_opt(v, "replicates", c.variance_rate.replicates);
    read_opt(v, "particles", c.variance_rate.particles);
  }
  read_opt(j, "output_dir", c.output_dir);
  read_opt(j, "workers", c.workers);
  read_opt(j, "record_wall_clock", c.record_wall_clock);
  c.validate();
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  try {
    return j.get<ExperimentConfig>();
  } catch (const json::exception& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
}

std::string config_hash(const ExperimentConfig& config) {
  const std::string text = json(config).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// ---- models and truth ----

int max_planned_level(const ExperimentConfig& config) {
  int L = 1;
  for (double eps : config.epsilons) L = std::max(L, choose_max_level(config.rates, eps, config.allocation));
  return L;
}

std::unique_ptr<LevelModel> build_model(const ExperimentConfig& config, int max_level) {
  if (config.problem.kind == "finite") {
    FiniteFkModel fixture = load_finite_fixture(config.problem.finite);
    std::vector<double> h;
    for (int l = 0; l < fixture.levels(); ++l) h.push_back(config.rates.resolution(l));
    return std::make_unique<FiniteLevelModel>(std::move(fixture), std::move(h), config.rates.zeta);
  }
  const EllipticProblemSpec& spec = config.problem.elliptic;
  InverseProblemConfig ip;
  ip.modes = spec.modes;
  ip.mean_coefficient = spec.mean_coefficient;
  ip.k_offset = config.rates.k_offset;
  ip.max_level = max_level;
  ip.cost_exponent = config.rates.zeta;
  ip.pinned_level = spec.identical_levels ? 0 : -1;
  ip.mutation = spec.mutation;

  ObservationSetup obs;
  if (spec.observations) {
    obs = *spec.observations;
  } else {
    const State truth = spec.truth ? State{*spec.truth} : default_truth(spec.modes);
    if (static_cast<int>(truth.coords.size()) != spec.modes) throw ConfigError("truth length differs from modes");
    const EllipticSolver data_solver(CoefficientField::standard(spec.modes, spec.mean_coefficient), ip.k_offset);
    obs = synthesize_data(data_solver, truth, spec.data_level, spec.noise_seed, spec.xi_std);
  }
  return std::make_unique<EllipticInverseProblem>(ip, std::move(obs));
}

TruthResult compute_reference_truth(const ExperimentConfig& config) {
  config.validate();
  const int L_max = max_planned_level(config);
  if (config.truth.value) {
    TruthResult t;
    t.value = *config.truth.value;
    t.se = config.truth.se.value_or(0.0);
    t.level = L_max + config.truth.level_offset;
    return t;
  }
  if (config.problem.kind == "finite") {
    const FiniteFkModel fixture = load_finite_fixture(config.problem.finite);
    TruthResult t;
    t.level = std::min(L_max + config.truth.level_offset, fixture.levels() - 1);
    t.value = product_of_eta_potentials(fixture, t.level);
    t.exact = true;
    return t;
  }

  const int L_ref = L_max + config.truth.level_offset;
  const double eps_min = config.epsilons.back();
  std::vector<long> counts = choose_sample_sizes(config.rates, L_ref, eps_min, config.allocation);
  for (long& n : counts) n = static_cast<long>(std::ceil(config.truth.n_multiplier * static_cast<double>(n)));
  const auto model = build_model(config, L_ref);
  const AllocationPlan plan = make_plan(config.rates, counts, eps_min);

  EngineOptions engine = config.engine;
  engine.extra_potentials = false;
  engine.workers = 1;
  const int R = config.truth.replicates;
  std::vector<double> values(static_cast<std::size_t>(R));
  parallel_for(values.size(), config.workers, [&](std::size_t r) {
    const std::uint64_t seed = derive_seed(config.seed, StreamPurpose::kReplicate, kTruthTag, r);
    values[r] = standard_nc_estimate(run_mlsmc(*model, plan, nullptr, seed, engine), plan.L);
  });
  const MeanSe stats = mean_and_se(values);
  TruthResult t{stats.mean, stats.se, L_ref, R, false};
  const double limit = config.truth.max_se_fraction * eps_min;
  if (!(t.se < limit)) {
    throw ConfigError("reference truth SE " + fmt_double(t.se) + " exceeds " + fmt_double(limit) +
                      "; increase truth.replicates or truth.n_multiplier");
  }
  return t;
}

// ---- cost / MSE study ----

std::uint64_t replicate_seed(std::uint64_t base, std::size_t epsilon_index, int replicate) {
  return derive_seed(base, StreamPurpose::kReplicate, epsilon_index, static_cast<std::uint64_t>(replicate));
}

StudyResult cost_mse_study(const ExperimentConfig& config, std::optional<TruthResult> truth) {
  config.validate();
  StudyResult result;
  result.truth = truth ? *truth : compute_reference_truth(config);

  const int L_max = max_planned_level(config);
  const auto model = build_model(config, L_max + 1);

  struct Task {
    Method method;
    std::size_t eps_index;
    int replicate;
  };
  std::vector<Task> tasks;
  for (Method m : config.methods) {
    for (std::size_t e = 0; e < config.epsilons.size(); ++e) {
      for (int r = 0; r < config.replicates; ++r) tasks.push_back({m, e, r});
    }
  }
  result.rows.resize(tasks.size());

  parallel_for(tasks.size(), config.workers, [&](std::size_t t) {
    const Task& task = tasks[t];
    const double eps = config.epsilons[task.eps_index];
    ResultRow& row = result.rows[t];
    row.method = task.method;
    row.epsilon = eps;
    row.replicate = task.replicate;
    row.seed = replicate_seed(config.seed, task.eps_index, task.replicate);
    row.truth = result.truth.value;

    const AllocationPlan plan = plan_for(config, task.method, eps);
    EngineOptions engine = config.engine;
    engine.workers = 1;
    engine.extra_potentials = task.method == Method::kMlsmcTelescoped;
    try {
      const RunRecord record = run_mlsmc(*model, plan, nullptr, row.seed, engine);
      row.analytic_cost = record.realized_cost;
      row.wall_clock_s = config.record_wall_clock ? record.wall_clock_seconds : 0.0;
      if (task.method == Method::kMlsmcTelescoped) {
        row.estimate = telescoped_nc_estimate(record, plan.L);
        if (plan.L + 1 <= model->num_levels_available()) {
          row.telescoped_extra_level = telescoped_nc_estimate(record, plan.L + 1);
        }
      } else {
        row.estimate = standard_nc_estimate(record, plan.L);
      }
      if (!std::isfinite(row.estimate)) row.degenerate = true;
    } catch (const DegeneracyError&) {
      row.degenerate = true;
    } catch (const NumericalDomainError&) {
      row.degenerate = true;
    }
    if (row.degenerate) row.estimate = std::nan("");
  });

  for (Method m : config.methods) {
    std::vector<double> mse_points, cost_points;
    for (std::size_t e = 0; e < config.epsilons.size(); ++e) {
      StudyPoint point;
      point.method = m;
      point.epsilon = config.epsilons[e];
      point.L = plan_for(config, m, point.epsilon).L;
      std::vector<double> costs;
      double sq = 0.0;
      for (const ResultRow& row : result.rows) {
        if (row.method != m || row.epsilon != point.epsilon) continue;
        if (row.degenerate) {
          ++point.flagged;
          continue;
        }
        sq += (row.estimate - row.truth) * (row.estimate - row.truth);
        costs.push_back(row.analytic_cost);
      }
      point.mse = costs.empty() ? std::nan("") : sq / static_cast<double>(costs.size());
      point.median_cost = median(costs);
      result.flagged += point.flagged;
      if (!costs.empty() && point.mse > 0.0) {
        mse_points.push_back(point.mse);
        cost_points.push_back(point.median_cost);
      }
      result.points.push_back(point);
    }
    if (mse_points.size() >= 2) result.slopes.emplace_back(m, fit_loglog_slope(mse_points, cost_points));
  }

  if (static_cast<double>(result.flagged) > 0.05 * static_cast<double>(result.rows.size())) {
    throw DegeneracyError(std::to_string(result.flagged) + " of " + std::to_string(result.rows.size()) +
                          " runs were degenerate (limit 5%)");
  }
  return result;
}

void write_study_csv(const StudyResult& result, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << "method,epsilon,replicate,seed,estimate,truth,rel_error,analytic_cost,wall_clock_s\n";
  for (const ResultRow& row : result.rows) {
    out << method_name(row.method) << ',' << fmt_double(row.epsilon) << ',' << row.replicate << ',' << row.seed << ','
        << fmt_double(row.estimate) << ',' << fmt_double(row.truth) << ','
        << fmt_double(row.degenerate ? std::nan("") : relative_error(row.estimate, row.truth)) << ','
        << fmt_double(row.analytic_cost) << ',' << fmt_double(row.wall_clock_s) << '\n';
  }
}

json study_sidecar(const ExperimentConfig& config, const StudyResult& result) {
  json points = json::array();
  for (const StudyPoint& p : result.points) {
    points.push_back({{"method", method_name(p.method)},
                      {"epsilon", p.epsilon},
                      {"L", p.L},
                      {"mse", p.mse},
                      {"median_cost", p.median_cost},
                      {"flagged", p.flagged}});
  }
  json slopes = json::object();
  for (const auto& [m, fit] : result.slopes) {
    slopes[method_name(m)] = {{"slope", fit.slope}, {"intercept", fit.intercept}, {"r_squared", fit.r_squared}};
  }
  json extra = json::array();
  for (const ResultRow& row : result.rows) {
    if (row.telescoped_extra_level) {
      extra.push_back({{"epsilon", row.epsilon}, {"replicate", row.replicate}, {"value", *row.telescoped_extra_level}});
    }
  }
  return json{{"config", config},
              {"config_hash", config_hash(config)},
              {"truth",
               {{"value", result.truth.value},
                {"se", result.truth.se},
                {"level", result.truth.level},
                {"replicates", result.truth.replicates},
                {"exact", result.truth.exact}}},
              {"points", points},
              {"slopes", slopes},
              {"slope_axes", "log(median analytic cost) against log(MSE)"},
              {"flagged_runs", result.flagged},
              {"telescoped_extra_level", extra}};
}

// ---- variance rate ----

VarianceRateResult estimate_variance_rate(const ExperimentConfig& config) {
  config.validate();
  const VarianceRateSpec& spec = config.variance_rate;
  const int L = spec.last_level + 1;
  const auto model = build_model(config, L);
  const AllocationPlan plan = make_plan(config.rates, std::vector<long>(static_cast<std::size_t>(L), spec.particles));

  EngineOptions engine = config.engine;
  engine.extra_potentials = false;
  engine.workers = 1;
  std::vector<std::vector<double>> mean_g(static_cast<std::size_t>(spec.replicates));
  parallel_for(mean_g.size(), config.workers, [&](std::size_t r) {
    const std::uint64_t seed = derive_seed(config.seed, StreamPurpose::kReplicate, kVarianceTag, r);
    const RunRecord record = run_mlsmc(*model, plan, nullptr, seed, engine);
    for (const LevelSummary& s : record.per_level) mean_g[r].push_back(s.mean_G);
  });

  VarianceRateResult out;
  std::vector<double> hs, proxies;
  for (int l = spec.first_level; l <= spec.last_level; ++l) {
    std::vector<double> samples;
    for (const auto& per_rep : mean_g) samples.push_back(per_rep[static_cast<std::size_t>(l)]);
    const MeanSe stats = mean_and_se(samples);
    const double proxy = static_cast<double>(spec.particles) * stats.sd * stats.sd;
    out.levels.push_back(l);
    out.h.push_back(model->resolution(l));
    out.proxy.push_back(proxy);
    if (proxy > 0.0) {
      hs.push_back(model->resolution(l));
      proxies.push_back(proxy);
    }
  }
  if (hs.size() >= 2) out.fit = fit_loglog_slope(hs, proxies);
  else out.degenerate = true;
  return out;
}

json variance_rate_json(const ExperimentConfig& config, const VarianceRateResult& result) {
  json j{{"config_hash", config_hash(config)},
         {"levels", result.levels},
         {"h", result.h},
         {"proxy", result.proxy},
         {"degenerate", result.degenerate}};
  if (result.fit) {
    j["beta_hat"] = result.fit->slope;
    j["intercept"] = result.fit->intercept;
    j["r_squared"] = result.fit->r_squared;
  }
  return j;
}

}  // namespace mlsmc
