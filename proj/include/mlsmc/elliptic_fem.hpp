#pragma once

#include <span>
#include <vector>

namespace mlsmc {

/// Random coefficient a(x) = mean + sum_{k=1}^K u_k sigma_k phi_k(x) with
/// phi_k = sin(k pi x) for odd k and cos(k pi x) for even k.
struct CoefficientField {
  double mean = 0.15;
  std::vector<double> sigma;

  /// sigma_k = (2/5) 4^{-k}, k = 1..modes.
  static CoefficientField standard(int modes = 50, double mean = 0.15);

  int modes() const { return static_cast<int>(sigma.size()); }
  /// Uniform lower bound mean - sum sigma_k over u in [-1, 1]^K.
  double ellipticity_bound() const;
};

/// phi_k(x) for 1-based mode index k.
double basis_function(int k, double x);

/// a(x; u). Throws RangeError when x is outside [0, 1].
double coefficient_at(const CoefficientField& field, std::span<const double> u, double x);

/// Interior nodal values of the piecewise-linear FEM solution on the uniform
/// mesh x_i = i h, i = 1..n-1, with homogeneous Dirichlet data.
struct FemSolution {
  int level = 0;
  double h = 0.0;
  std::vector<double> nodal_values;
  double min_pivot = 0.0;  ///< smallest Thomas pivot; > 0 certifies SPD
};

/// Thomas algorithm for a tridiagonal system; sub/super have n-1 entries.
/// Returns the solution and writes the smallest pivot to *min_pivot if given.
std::vector<double> solve_tridiagonal(std::span<const double> sub, std::span<const double> diag,
                                      std::span<const double> super, std::span<const double> rhs,
                                      double* min_pivot = nullptr);

/// Piecewise-linear interpolation of the solution; exact at mesh nodes and
/// zero at x = 0 and x = 1. Throws RangeError outside [0, 1].
double point_value(const FemSolution& sol, double x);

/// 1D solver for -(a p')' = f, f(x) = load_slope * x, on [0, 1] with
/// h_l = 2^{-(l + k_offset)}. Stiffness uses 2-point Gauss quadrature of a
/// per element; the load is integrated exactly. Basis values at quadrature
/// points are tabulated up to `table_levels` so a solve costs O(K 2^{l+k}).
class EllipticSolver {
 public:
  EllipticSolver(CoefficientField field, int k_offset = 3, int table_levels = -1, double load_slope = 100.0);

  const CoefficientField& field() const { return field_; }
  int k_offset() const { return k_offset_; }
  double load_slope() const { return load_slope_; }
  int elements(int level) const { return 1 << (level + k_offset_); }
  double resolution(int level) const;

  FemSolution solve(std::span<const double> u, int level) const;

 private:
  void coefficient_at_gauss_points(std::span<const double> u, int level, std::vector<double>& out) const;

  CoefficientField field_;
  int k_offset_;
  double load_slope_;
  /// tables_[l][q * K + k] = sigma_{k+1} phi_{k+1}(gauss point q) on level l.
  std::vector<std::vector<double>> tables_;
};

/// One-shot assembly and solve without tabulation.
FemSolution assemble_and_solve(const CoefficientField& field, std::span<const double> u, int level,
                               int k_offset = 3, double load_slope = 100.0);

}  // namespace mlsmc
