#include "mlsmc/discrete_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "mlsmc/errors.hpp"

namespace mlsmc {
namespace {

void require_level(const FiniteFkModel& model, int level, int lowest = 0) {
  if (level < lowest || level >= model.levels()) {
    throw RangeError("level " + std::to_string(level) + " outside [" + std::to_string(lowest) +
                     ", " + std::to_string(model.levels() - 1) + "]");
  }
}

int sample_cumulative(const double* cumulative, std::ptrdiff_t size, Rng& rng) {
  std::uniform_real_distribution<double> unif(0.0, cumulative[size - 1]);
  const double r = unif(rng);
  const double* it = std::upper_bound(cumulative, cumulative + size, r);
  return static_cast<int>(std::min<std::ptrdiff_t>(it - cumulative, size - 1));
}

Eigen::VectorXd cumsum(const Eigen::VectorXd& v) {
  Eigen::VectorXd out(v.size());
  double acc = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) out[i] = acc += v[i];
  return out;
}

}  // namespace

void FiniteFkModel::validate() const {
  if (levels() < 1 || n_states() < 1) throw PreconditionError("finite model needs >= 1 level and state");
  if (n_states() > kMaxStates) {
    throw CapacityError("finite model limited to " + std::to_string(kMaxStates) + " states");
  }
  if (!(kappa.array() > 0.0).all() || !kappa.allFinite()) {
    throw PreconditionError("kappa entries must be positive and finite");
  }
  if (static_cast<int>(kernels.size()) != levels()) {
    throw PreconditionError("expected one kernel per level (" + std::to_string(levels()) + "), got " +
                            std::to_string(kernels.size()));
  }
  for (int l = 0; l < levels(); ++l) {
    const auto& m = kernels[l];
    if (m.rows() != n_states() || m.cols() != n_states()) {
      throw PreconditionError("kernel " + std::to_string(l) + " has wrong shape");
    }
    if ((m.array() < 0.0).any()) throw PreconditionError("kernel " + std::to_string(l) + " has negative entries");
    for (int i = 0; i < n_states(); ++i) {
      if (std::abs(m.row(i).sum() - 1.0) > 1e-12) {
        throw PreconditionError("kernel " + std::to_string(l) + " row " + std::to_string(i) +
                                " does not sum to 1");
      }
    }
  }
}

void to_json(nlohmann::json& j, const FiniteFkModel& model) {
  auto matrix = [](const Eigen::MatrixXd& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      std::vector<double> row(m.cols());
      for (Eigen::Index c = 0; c < m.cols(); ++c) row[c] = m(i, c);
      rows.push_back(row);
    }
    return rows;
  };
  j = nlohmann::json{{"kind", "finite_fk_model"}, {"n_states", model.n_states()},
                     {"kappa", matrix(model.kappa)}};
  j["kernels"] = nlohmann::json::array();
  for (const auto& k : model.kernels) j["kernels"].push_back(matrix(k));
}

void from_json(const nlohmann::json& j, FiniteFkModel& model) {
  for (const auto& [key, _] : j.items()) {
    if (key != "kind" && key != "n_states" && key != "kappa" && key != "kernels") {
      throw ConfigError("unknown key in finite model: " + key);
    }
  }
  if (j.contains("kind") && j.at("kind") != "finite_fk_model") throw ConfigError("not a finite_fk_model");
  auto matrix = [](const nlohmann::json& rows) {
    const auto r = static_cast<Eigen::Index>(rows.size());
    const auto c = r ? static_cast<Eigen::Index>(rows.at(0).size()) : 0;
    Eigen::MatrixXd m(r, c);
    for (Eigen::Index i = 0; i < r; ++i) {
      if (static_cast<Eigen::Index>(rows.at(i).size()) != c) throw ConfigError("ragged matrix");
      for (Eigen::Index k = 0; k < c; ++k) m(i, k) = rows.at(i).at(k).get<double>();
    }
    return m;
  };
  model.kappa = matrix(j.at("kappa"));
  model.kernels.clear();
  for (const auto& k : j.at("kernels")) model.kernels.push_back(matrix(k));
  if (j.contains("n_states") && j.at("n_states").get<int>() != model.n_states()) {
    throw ConfigError("n_states does not match kappa width");
  }
  model.validate();
}

double enumerated_normalizer(const FiniteFkModel& model, int level) {
  require_level(model, level);
  return model.kappa.row(level).sum();
}

Eigen::VectorXd enumerated_eta(const FiniteFkModel& model, int level) {
  require_level(model, level);
  return model.kappa.row(level).transpose() / enumerated_normalizer(model, level);
}

Eigen::VectorXd potential_vector(const FiniteFkModel& model, int p) {
  require_level(model, p + 1, 1);
  return (model.kappa.row(p + 1).array() / model.kappa.row(p).array()).transpose();
}

Eigen::VectorXd exact_gamma_measure(const FiniteFkModel& model, int level) {
  require_level(model, level);
  Eigen::RowVectorXd gamma = enumerated_eta(model, 0).transpose();
  for (int p = 0; p < level; ++p) {
    gamma = gamma.cwiseProduct(potential_vector(model, p).transpose()) * model.kernels[p + 1];
  }
  return gamma.transpose();
}

double product_of_eta_potentials(const FiniteFkModel& model, int level) {
  require_level(model, level);
  double prod = 1.0;
  for (int p = 0; p < level; ++p) prod *= enumerated_eta(model, p).dot(potential_vector(model, p));
  return prod;
}

Eigen::VectorXd semigroup_apply(const FiniteFkModel& model, int p, int n, const Eigen::VectorXd& f) {
  require_level(model, p);
  require_level(model, n);
  if (p > n) throw RangeError("semigroup needs p <= n");
  if (f.size() != model.n_states()) throw PreconditionError("function has wrong length");
  Eigen::VectorXd out = f;
  for (int q = n; q > p; --q) {
    out = potential_vector(model, q - 1).cwiseProduct(model.kernels[q] * out);
  }
  return out;
}

Eigen::VectorXd selection_mutation(const FiniteFkModel& model, int n, const Eigen::VectorXd& mu) {
  require_level(model, n, 1);
  if (mu.size() != model.n_states()) throw PreconditionError("measure has wrong length");
  if (std::abs(mu.sum() - 1.0) > 1e-9) throw PreconditionError("mu must be a probability vector");
  const Eigen::VectorXd weighted = mu.cwiseProduct(potential_vector(model, n - 1));
  const double mass = weighted.sum();
  if (!(mass > 0.0)) throw DegeneracyError("mu(G) = 0 in selection-mutation step " + std::to_string(n));
  return (weighted.transpose() * model.kernels[n]).transpose() / mass;
}

double telescoping_identity_check(const FiniteFkModel& model, int level) {
  require_level(model, level, 2);
  const double lhs = exact_gamma_measure(model, level).sum();
  double rhs = enumerated_eta(model, 0).dot(potential_vector(model, 0));
  for (int p = 2; p <= level; ++p) {
    const Eigen::VectorXd g_prev = potential_vector(model, p - 2);
    const Eigen::VectorXd g_next = potential_vector(model, p - 1);
    const Eigen::VectorXd increment =
        g_prev.cwiseProduct((g_next.array() - 1.0).matrix());
    rhs += exact_gamma_measure(model, p - 2).dot(increment);
  }
  return std::abs(lhs - rhs) / std::abs(lhs);
}

double minorization_coefficient(const Eigen::MatrixXd& kernel) {
  double rho = 1.0;
  for (Eigen::Index c = 0; c < kernel.cols(); ++c) {
    const double hi = kernel.col(c).maxCoeff();
    if (hi <= 0.0) continue;
    rho = std::min(rho, kernel.col(c).minCoeff() / hi);
  }
  return rho;
}

double invariance_defect(const FiniteFkModel& model, int level) {
  const Eigen::VectorXd eta = enumerated_eta(model, level);
  const Eigen::RowVectorXd moved = eta.transpose() * model.kernels[level];
  return (moved.transpose() - eta).cwiseAbs().maxCoeff();
}

Eigen::MatrixXd independence_mh_kernel(const Eigen::VectorXd& target) {
  const Eigen::Index n = target.size();
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double off = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j) continue;
      m(i, j) = std::min(1.0, target[j] / target[i]) / static_cast<double>(n);
      off += m(i, j);
    }
    m(i, i) = 1.0 - off;
  }
  return m;
}

namespace {

Eigen::MatrixXd random_kappa(int n_states, int levels, Rng& rng, double lo, double hi) {
  std::uniform_real_distribution<double> unif(lo, hi);
  Eigen::MatrixXd kappa(levels, n_states);
  for (int l = 0; l < levels; ++l)
    for (int i = 0; i < n_states; ++i) kappa(l, i) = unif(rng);
  return kappa;
}

std::vector<Eigen::MatrixXd> invariant_kernels(const FiniteFkModel& model) {
  std::vector<Eigen::MatrixXd> kernels;
  for (int l = 0; l < model.levels(); ++l) kernels.push_back(independence_mh_kernel(enumerated_eta(model, l)));
  return kernels;
}

}  // namespace

FiniteFkModel random_invariant_fixture(int n_states, int levels, std::uint64_t seed, double kappa_min,
                                       double kappa_max) {
  Rng rng = make_stream(seed, StreamPurpose::kFixture, 0, 0);
  FiniteFkModel model;
  model.kappa = random_kappa(n_states, levels, rng, kappa_min, kappa_max);
  model.kernels = invariant_kernels(model);
  model.validate();
  return model;
}

FiniteFkModel random_noninvariant_fixture(int n_states, int levels, std::uint64_t seed, double kappa_min,
                                          double kappa_max) {
  Rng rng = make_stream(seed, StreamPurpose::kFixture, 0, 0);
  FiniteFkModel model;
  model.kappa = random_kappa(n_states, levels, rng, kappa_min, kappa_max);
  std::uniform_real_distribution<double> unif(0.05, 1.0);
  for (int l = 0; l < levels; ++l) {
    Eigen::MatrixXd m(n_states, n_states);
    for (int i = 0; i < n_states; ++i) {
      for (int j = 0; j < n_states; ++j) m(i, j) = unif(rng);
      m.row(i) /= m.row(i).sum();
    }
    model.kernels.push_back(m);
  }
  model.validate();
  return model;
}

FiniteFkModel rate_fixture(int n_states, int levels, double beta, std::uint64_t seed, double amplitude) {
  Rng rng = make_stream(seed, StreamPurpose::kFixture, 1, 0);
  std::uniform_real_distribution<double> base(0.5, 2.0);
  Eigen::VectorXd kappa_inf(n_states);
  Eigen::VectorXd sign(n_states);
  for (int i = 0; i < n_states; ++i) {
    kappa_inf[i] = base(rng);
    sign[i] = std::cos(3.0 * i + 1.0);
  }
  FiniteFkModel model;
  model.kappa.resize(levels, n_states);
  for (int l = 0; l < levels; ++l) {
    const double h = std::ldexp(1.0, -(l + 1));
    const double scale = amplitude * std::pow(h, beta / 2.0);
    for (int i = 0; i < n_states; ++i) model.kappa(l, i) = kappa_inf[i] * (1.0 + scale * sign[i]);
  }
  model.kernels = invariant_kernels(model);
  model.validate();
  return model;
}

FiniteFkModel two_state_fixture() {
  FiniteFkModel model;
  model.kappa.resize(3, 2);
  model.kappa << 1.0, 1.0, 1.0, 2.0, 1.0, 4.0;
  model.kernels = invariant_kernels(model);
  model.validate();
  return model;
}

FiniteLevelModel::FiniteLevelModel(FiniteFkModel model, double cost_exponent)
    : FiniteLevelModel(std::move(model), {}, cost_exponent) {}

FiniteLevelModel::FiniteLevelModel(FiniteFkModel model, std::vector<double> resolutions,
                                   double cost_exponent)
    : model_(std::move(model)), resolutions_(std::move(resolutions)), cost_exponent_(cost_exponent) {
  model_.validate();
  if (resolutions_.empty()) {
    for (int l = 0; l < model_.levels(); ++l) resolutions_.push_back(std::ldexp(1.0, -(l + 1)));
  }
  if (static_cast<int>(resolutions_.size()) != model_.levels()) {
    throw PreconditionError("need one resolution per level");
  }
  for (std::size_t l = 1; l < resolutions_.size(); ++l) {
    if (!(resolutions_[l] < resolutions_[l - 1])) throw PreconditionError("resolutions must decrease");
  }
  log_kappa_ = model_.kappa.array().log().matrix();
  eta0_ = cumsum(enumerated_eta(model_, 0));
  for (const auto& kernel : model_.kernels) {
    std::vector<Eigen::VectorXd> rows;
    for (Eigen::Index i = 0; i < kernel.rows(); ++i) rows.push_back(cumsum(kernel.row(i).transpose()));
    cumulative_rows_.push_back(std::move(rows));
  }
}

int FiniteLevelModel::index_of(const State& u) const {
  if (!admissible(u)) throw RangeError("state " + describe(u) + " outside the finite state space");
  return static_cast<int>(u.coords[0]);
}

bool FiniteLevelModel::admissible(const State& u) const {
  if (u.coords.size() != 1) return false;
  const double x = u.coords[0];
  return x >= 0.0 && x < model_.n_states() && x == std::floor(x);
}

double FiniteLevelModel::log_density(int level, const State& u) const {
  check_level(level);
  return log_kappa_(level, index_of(u));
}

MoveResult FiniteLevelModel::mutate(int level, const State& u, double /*log_density_u*/, Rng& rng) const {
  check_level(level);
  const int from = index_of(u);
  const Eigen::VectorXd& row = cumulative_rows_[level][from];
  const int to = sample_cumulative(row.data(), row.size(), rng);
  return MoveResult{state_of(to), log_kappa_(level, to), 1, to != from};
}

double FiniteLevelModel::resolution(int level) const {
  check_level(level);
  return resolutions_[level];
}

State FiniteLevelModel::sample_prior(Rng& rng) const {
  std::uniform_int_distribution<int> pick(0, model_.n_states() - 1);
  return state_of(pick(rng));
}

std::optional<State> FiniteLevelModel::sample_level0_exact(Rng& rng) const {
  return state_of(sample_cumulative(eta0_.data(), eta0_.size(), rng));
}

}  // namespace mlsmc
