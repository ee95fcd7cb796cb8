#include "mlsmc/estimators.hpp"

#include <cmath>
#include <string>

#include "mlsmc/errors.hpp"

namespace mlsmc {
namespace {

void require_levels(const RunRecord& record, int needed, const char* what) {
  if (needed > record.levels()) {
    throw RangeError(std::string(what) + " needs particle levels 0.." + std::to_string(needed - 1) +
                     " but the record holds " + std::to_string(record.levels()));
  }
}

}  // namespace

double standard_nc_estimate(const RunRecord& record, int level) {
  if (level < 0) throw RangeError("negative target level");
  require_levels(record, level, "standard estimator");
  double log_sum = 0.0;
  for (int p = 0; p < level; ++p) log_sum += record.per_level[p].log_mean_G;
  return std::exp(log_sum);
}

double telescoped_nc_estimate(const RunRecord& record, int level) {
  if (level < 1) throw RangeError("telescoped estimator needs level >= 1");
  require_levels(record, std::max(1, level - 1), "telescoped estimator");
  double estimate = record.per_level[0].mean_G;
  double log_prefix = 0.0;  // log prod_{k < p-2} eta_k^N(G_k)
  for (int p = 2; p <= level; ++p) {
    const LevelSummary& s = record.per_level[p - 2];
    if (!s.mean_G_Gnext_minus1) {
      throw PreconditionError("telescoped estimator: G_" + std::to_string(p - 1) +
                              " was not evaluated at particle level " + std::to_string(p - 2));
    }
    estimate += std::exp(log_prefix) * *s.mean_G_Gnext_minus1;
    log_prefix += s.log_mean_G;
  }
  return estimate;
}

double ml_expectation_estimate(const RunRecord& record, int level) {
  if (level < 0) throw RangeError("negative target level");
  require_levels(record, std::max(1, level), "multilevel expectation");
  double y = record.per_level[0].mean_g;
  for (int l = 1; l <= level; ++l) {
    const LevelSummary& s = record.per_level[l - 1];
    if (!(s.mean_G > 0.0)) throw DegeneracyError("eta^N(G_" + std::to_string(l - 1) + ") = 0");
    y += s.mean_gG / s.mean_G - s.mean_g;
  }
  return y;
}

double relative_error(double estimate, double truth) { return estimate / truth - 1.0; }

EstimateReport make_report(const RunRecord& record) {
  EstimateReport report;
  const int L = record.levels();
  report.level_reached = L;
  report.standard_nc = standard_nc_estimate(record, L);
  report.ml_expectation = ml_expectation_estimate(record, L);
  report.cost = record.realized_cost;
  try {
    report.telescoped_nc = telescoped_nc_estimate(record, L);
    report.telescoped_extra_level = telescoped_nc_estimate(record, L + 1);
  } catch (const PreconditionError&) {
    // Extra potentials missing at the deepest levels; leave fields unset.
  }
  return report;
}

}  // namespace mlsmc
