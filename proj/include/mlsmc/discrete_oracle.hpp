#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>
#include "json.hpp"

#include "mlsmc/level_model.hpp"

namespace mlsmc {

/// Finite-state Feynman-Kac model with dense kernels. Row l of `kappa` is
/// the unnormalized density kappa_l on {0, ..., n_states-1} with counting
/// reference measure; kernels[l] is the row-stochastic matrix of M_l.
struct FiniteFkModel {
  static constexpr int kMaxStates = 64;

  Eigen::MatrixXd kappa;
  std::vector<Eigen::MatrixXd> kernels;

  int levels() const { return static_cast<int>(kappa.rows()); }
  int n_states() const { return static_cast<int>(kappa.cols()); }

  /// Checks shapes, positivity of kappa and row sums of every kernel.
  void validate() const;
};

void to_json(nlohmann::json& j, const FiniteFkModel& model);
void from_json(const nlohmann::json& j, FiniteFkModel& model);

/// eta_l = kappa_l / Z_l.
Eigen::VectorXd enumerated_eta(const FiniteFkModel& model, int level);
/// Z_l = sum of kappa_l.
double enumerated_normalizer(const FiniteFkModel& model, int level);
/// G_p = kappa_{p+1} / kappa_p as a vector over states.
Eigen::VectorXd potential_vector(const FiniteFkModel& model, int p);

/// gamma_l as a measure over states, from the flow
/// gamma_{p+1} = (gamma_p .* G_p) M_{p+1} started at eta_0.
Eigen::VectorXd exact_gamma_measure(const FiniteFkModel& model, int level);

/// prod_{p<l} eta_p(G_p) with eta_p taken from enumeration (equals Z_l/Z_0).
double product_of_eta_potentials(const FiniteFkModel& model, int level);

/// Q_{p,n} f with Q_q(x, dy) = G_{q-1}(x) M_q(x, dy); identity when p == n.
Eigen::VectorXd semigroup_apply(const FiniteFkModel& model, int p, int n, const Eigen::VectorXd& f);

/// Phi_n(mu) = mu(G_{n-1} M_n) / mu(G_{n-1}).
Eigen::VectorXd selection_mutation(const FiniteFkModel& model, int n, const Eigen::VectorXd& mu);

/// Relative residual of gamma_l(1) = eta_0(G_0) + sum_{p=2}^l gamma_{p-2}(G_{p-2}(G_{p-1}-1)),
/// every term computed exactly from the flow.
double telescoping_identity_check(const FiniteFkModel& model, int level);

/// Largest rho with M(u, .) >= rho M(v, .) entrywise for all row pairs.
double minorization_coefficient(const Eigen::MatrixXd& kernel);

/// max_j |(eta_l M_l - eta_l)_j|.
double invariance_defect(const FiniteFkModel& model, int level);

/// Independence Metropolis-Hastings matrix with uniform proposal targeting
/// `target`; reversible with respect to it.
Eigen::MatrixXd independence_mh_kernel(const Eigen::VectorXd& target);

/// Random model with kappa entries in [kappa_min, kappa_max] and eta-invariant
/// independence-MH kernels.
FiniteFkModel random_invariant_fixture(int n_states, int levels, std::uint64_t seed,
                                       double kappa_min = 0.2, double kappa_max = 5.0);

/// Same densities as random_invariant_fixture but kernels are arbitrary
/// random stochastic matrices, so eta_l M_l != eta_l in general.
FiniteFkModel random_noninvariant_fixture(int n_states, int levels, std::uint64_t seed,
                                          double kappa_min = 0.2, double kappa_max = 5.0);

/// Densities kappa_l = kappa_inf * (1 + amplitude * h_l^{beta/2} * s) with
/// h_l = 2^{-(l+1)} and a fixed sign pattern s in [-1, 1], so that
/// ||G_l - 1||^2 decays like h_l^beta. Kernels are independence-MH.
FiniteFkModel rate_fixture(int n_states, int levels, double beta, std::uint64_t seed,
                           double amplitude = 0.5);

/// Two-state model kappa_0 = (1,1), kappa_1 = (1,2), kappa_2 = (1,4).
FiniteFkModel two_state_fixture();

/// LevelModel view over a FiniteFkModel.
class FiniteLevelModel final : public LevelModel {
 public:
  /// Resolutions default to h_l = 2^{-(l+1)}.
  explicit FiniteLevelModel(FiniteFkModel model, double cost_exponent = 1.0);
  FiniteLevelModel(FiniteFkModel model, std::vector<double> resolutions, double cost_exponent);

  const FiniteFkModel& fk_model() const { return model_; }

  int num_levels_available() const override { return model_.levels() - 1; }
  int state_dim() const override { return 1; }
  double log_density(int level, const State& u) const override;
  MoveResult mutate(int level, const State& u, double log_density_u, Rng& rng) const override;
  double resolution(int level) const override;
  double cost_exponent() const override { return cost_exponent_; }
  State sample_prior(Rng& rng) const override;
  std::optional<State> sample_level0_exact(Rng& rng) const override;
  bool admissible(const State& u) const override;

  static State state_of(int index) { return State{{static_cast<double>(index)}}; }
  int index_of(const State& u) const;

 private:
  FiniteFkModel model_;
  std::vector<double> resolutions_;
  double cost_exponent_;
  Eigen::MatrixXd log_kappa_;
  Eigen::VectorXd eta0_;
  std::vector<std::vector<Eigen::VectorXd>> cumulative_rows_;
};

}  // namespace mlsmc
