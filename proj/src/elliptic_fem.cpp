#include "mlsmc/elliptic_fem.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "mlsmc/errors.hpp"

namespace mlsmc {
namespace {

// Gauss-Legendre 2-point nodes mapped to [0, 1].
constexpr double kGaussLo = 0.5 - 0.5 / std::numbers::sqrt3;
constexpr double kGaussHi = 0.5 + 0.5 / std::numbers::sqrt3;

void require_unit_interval(double x) {
  if (!(x >= 0.0 && x <= 1.0)) throw RangeError("x = " + std::to_string(x) + " outside [0, 1]");
}

void require_level(int level) {
  if (level < 0 || level > 24) throw RangeError("FEM level " + std::to_string(level) + " out of range");
}

/// Assembles the P1 stiffness from per-element averages of a at the two Gauss
/// points and solves by Thomas. `gauss_values` holds 2 values per element.
FemSolution solve_from_gauss_values(const std::vector<double>& gauss_values, int level, double h,
                                    double load_slope) {
  const std::size_t elements = gauss_values.size() / 2;
  const std::size_t nodes = elements - 1;
  // Element e spans [e h, (e+1) h]; its stiffness contribution is
  // (1/h^2) int_e a = mean of the Gauss values / h.
  std::vector<double> element_stiffness(elements);
  for (std::size_t e = 0; e < elements; ++e) {
    element_stiffness[e] = 0.5 * (gauss_values[2 * e] + gauss_values[2 * e + 1]) / h;
  }
  std::vector<double> diag(nodes), off(nodes ? nodes - 1 : 0), rhs(nodes);
  for (std::size_t i = 0; i < nodes; ++i) {
    diag[i] = element_stiffness[i] + element_stiffness[i + 1];
    if (i + 1 < nodes) off[i] = -element_stiffness[i + 1];
    // int f psi_i = load_slope * x_i * h exactly for linear f.
    rhs[i] = load_slope * static_cast<double>(i + 1) * h * h;
  }
  FemSolution sol;
  sol.level = level;
  sol.h = h;
  sol.nodal_values = solve_tridiagonal(off, diag, off, rhs, &sol.min_pivot);
  return sol;
}

}  // namespace

CoefficientField CoefficientField::standard(int modes, double mean) {
  CoefficientField field;
  field.mean = mean;
  for (int k = 1; k <= modes; ++k) field.sigma.push_back(0.4 * std::pow(4.0, -k));
  return field;
}

double CoefficientField::ellipticity_bound() const {
  double total = 0.0;
  for (double s : sigma) total += std::abs(s);
  return mean - total;
}

double basis_function(int k, double x) {
  const double arg = k * std::numbers::pi * x;
  return (k % 2 == 1) ? std::sin(arg) : std::cos(arg);
}

double coefficient_at(const CoefficientField& field, std::span<const double> u, double x) {
  require_unit_interval(x);
  if (u.size() != field.sigma.size()) throw PreconditionError("parameter length does not match field modes");
  double a = field.mean;
  for (int k = 1; k <= field.modes(); ++k) a += u[k - 1] * field.sigma[k - 1] * basis_function(k, x);
  return a;
}

std::vector<double> solve_tridiagonal(std::span<const double> sub, std::span<const double> diag,
                                      std::span<const double> super, std::span<const double> rhs,
                                      double* min_pivot) {
  const std::size_t n = diag.size();
  if (rhs.size() != n || (n > 0 && (sub.size() != n - 1 || super.size() != n - 1))) {
    throw PreconditionError("tridiagonal system has inconsistent sizes");
  }
  std::vector<double> c_prime(n), x(n);
  if (n == 0) return x;
  double pivot = diag[0];
  double smallest = pivot;
  c_prime[0] = n > 1 ? super[0] / pivot : 0.0;
  x[0] = rhs[0] / pivot;
  // Forward sweep
  for (std::size_t i = 1; i < n; ++i) {
    pivot = diag[i] - sub[i - 1] * c_prime[i - 1];
    smallest = std::min(smallest, pivot);
    if (i + 1 < n) c_prime[i] = super[i] / pivot;
    x[i] = (rhs[i] - sub[i - 1] * x[i - 1]) / pivot;
  }
  // Back substitution
  for (std::size_t i = n - 1; i > 0; --i) x[i - 1] -= c_prime[i - 1] * x[i];
  if (min_pivot) *min_pivot = smallest;
  return x;
}

double point_value(const FemSolution& sol, double x) {
  require_unit_interval(x);
  const auto n = static_cast<long>(sol.nodal_values.size()) + 1;  // elements
  auto node = [&](long i) { return (i <= 0 || i >= n) ? 0.0 : sol.nodal_values[static_cast<std::size_t>(i - 1)]; };
  const double s = x / sol.h;
  const double left = std::floor(s);
  const long i = static_cast<long>(left);
  if (s == left) return node(i);
  const double t = s - left;
  return (1.0 - t) * node(i) + t * node(i + 1);
}

EllipticSolver::EllipticSolver(CoefficientField field, int k_offset, int table_levels, double load_slope)
    : field_(std::move(field)), k_offset_(k_offset), load_slope_(load_slope) {
  if (k_offset_ < 1) throw PreconditionError("k_offset must be >= 1");
  if (!(field_.ellipticity_bound() > 0.0)) throw PreconditionError("coefficient field is not uniformly elliptic");
  const int K = field_.modes();
  for (int l = 0; l <= table_levels; ++l) {
    const int n = elements(l);
    const double h = resolution(l);
    std::vector<double> table(static_cast<std::size_t>(2 * n) * K);
    for (int e = 0; e < n; ++e) {
      const double xs[2] = {(e + kGaussLo) * h, (e + kGaussHi) * h};
      for (int q = 0; q < 2; ++q) {
        for (int k = 1; k <= K; ++k) {
          table[static_cast<std::size_t>(2 * e + q) * K + (k - 1)] = field_.sigma[k - 1] * basis_function(k, xs[q]);
        }
      }
    }
    tables_.push_back(std::move(table));
  }
}

double EllipticSolver::resolution(int level) const { return std::ldexp(1.0, -(level + k_offset_)); }

void EllipticSolver::coefficient_at_gauss_points(std::span<const double> u, int level,
                                                 std::vector<double>& out) const {
  const int n = elements(level);
  const int K = field_.modes();
  out.assign(static_cast<std::size_t>(2 * n), field_.mean);
  if (level < static_cast<int>(tables_.size())) {
    const double* row = tables_[level].data();
    for (std::size_t q = 0; q < out.size(); ++q, row += K) {
      double a = field_.mean;
      for (int k = 0; k < K; ++k) a += u[k] * row[k];
      out[q] = a;
    }
    return;
  }
  const double h = resolution(level);
  for (int e = 0; e < n; ++e) {
    out[2 * e] = coefficient_at(field_, u, (e + kGaussLo) * h);
    out[2 * e + 1] = coefficient_at(field_, u, (e + kGaussHi) * h);
  }
}

FemSolution EllipticSolver::solve(std::span<const double> u, int level) const {
  require_level(level);
  if (u.size() != field_.sigma.size()) throw PreconditionError("parameter length does not match field modes");
  std::vector<double> gauss_values;
  coefficient_at_gauss_points(u, level, gauss_values);
  return solve_from_gauss_values(gauss_values, level, resolution(level), load_slope_);
}

FemSolution assemble_and_solve(const CoefficientField& field, std::span<const double> u, int level, int k_offset,
                               double load_slope) {
  return EllipticSolver(field, k_offset, -1, load_slope).solve(u, level);
}

}  // namespace mlsmc
