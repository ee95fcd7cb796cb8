#pragma once

#include <optional>

#include "mlsmc/smc_engine.hpp"

namespace mlsmc {

struct EstimateReport {
  double standard_nc = 0.0;    ///< gamma_L^N(1), always > 0
  std::optional<double> telescoped_nc;  ///< tilde gamma_L^N(1); sign not guaranteed
  double ml_expectation = 0.0;  ///< Y-hat, multilevel estimate of eta_L(g)
  int level_reached = 0;        ///< L
  /// tilde gamma_{L+1}^N(1) from the same particles, when G_L was evaluated
  /// at level L-1.
  std::optional<double> telescoped_extra_level;
  double cost = 0.0;
};

/// prod_{p<l} eta_p^N(G_p), accumulated in log space.
double standard_nc_estimate(const RunRecord& record, int level);

/// eta_0^N(G_0) + sum_{p=2}^l (prod_{k<p-2} eta_k^N(G_k)) eta_{p-2}^N(G_{p-2}(G_{p-1} - 1)).
/// Uses particle levels 0..l-2 only.
double telescoped_nc_estimate(const RunRecord& record, int level);

/// eta_0^N(g) + sum_{l=1}^L [eta_{l-1}^N(g G_{l-1}) / eta_{l-1}^N(G_{l-1}) - eta_{l-1}^N(g)].
double ml_expectation_estimate(const RunRecord& record, int level);

/// estimate / truth - 1.
double relative_error(double estimate, double truth);

/// Every estimator available from `record` at target level L = record.levels().
EstimateReport make_report(const RunRecord& record);

}  // namespace mlsmc
