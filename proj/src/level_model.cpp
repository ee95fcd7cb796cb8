#include "mlsmc/level_model.hpp"

#include <sstream>

#include "mlsmc/errors.hpp"

namespace mlsmc {

std::string describe(const State& u) {
  std::ostringstream os;
  os << '(';
  const std::size_t shown = std::min<std::size_t>(u.coords.size(), 6);
  for (std::size_t i = 0; i < shown; ++i) {
    if (i) os << ", ";
    os << u.coords[i];
  }
  if (shown < u.coords.size()) os << ", ... [" << u.coords.size() << " coords]";
  os << ')';
  return os.str();
}

void LevelModel::check_level(int level) const {
  if (level < 0 || level > num_levels_available()) {
    throw RangeError("level " + std::to_string(level) + " outside [0, " +
                     std::to_string(num_levels_available()) + "]");
  }
}

double log_potential_from(int level, const State& u, double log_kappa_l, double log_kappa_next) {
  if (!std::isfinite(log_kappa_l) || !std::isfinite(log_kappa_next)) {
    std::ostringstream os;
    os << "non-finite log density at level " << (std::isfinite(log_kappa_l) ? level + 1 : level)
       << " for state " << describe(u);
    throw NumericalDomainError(os.str());
  }
  return log_kappa_next - log_kappa_l;
}

double log_potential(const LevelModel& model, int level, const State& u) {
  if (level < 0 || level + 1 > model.num_levels_available()) {
    throw RangeError("potential G_" + std::to_string(level) + " needs levels " +
                     std::to_string(level) + " and " + std::to_string(level + 1) +
                     "; model provides 0.." + std::to_string(model.num_levels_available()));
  }
  return log_potential_from(level, u, model.log_density(level, u),
                            model.log_density(level + 1, u));
}

double potential(const LevelModel& model, int level, const State& u) {
  const double g = std::exp(log_potential(model, level, u));
  if (!std::isfinite(g)) {
    throw NumericalDomainError("potential G_" + std::to_string(level) + " overflows at state " +
                               describe(u));
  }
  return g;
}

}  // namespace mlsmc
