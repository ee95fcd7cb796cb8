#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>
#include <vector>

#include "fem_oracle.hpp"
#include "mlsmc/elliptic_fem.hpp"
#include "mlsmc/errors.hpp"

using namespace mlsmc;

namespace {

std::vector<double> random_parameter(int K, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  std::vector<double> u(static_cast<std::size_t>(K));
  for (double& x : u) x = unif(rng);
  return u;
}

double max_rel_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double scale = 0.0, diff = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    scale = std::max(scale, std::abs(b[i]));
    diff = std::max(diff, std::abs(a[i] - b[i]));
  }
  return diff / scale;
}

}  // namespace

TEST_CASE("coefficient field values") {
  const CoefficientField field = CoefficientField::standard();
  std::vector<double> zero(50, 0.0);
  for (double x : {0.0, 0.3, 0.5, 1.0}) CHECK(coefficient_at(field, zero, x) == doctest::Approx(0.15).epsilon(1e-15));

  std::vector<double> e1(50, 0.0);
  e1[0] = 1.0;
  CHECK(coefficient_at(field, e1, 0.5) == doctest::Approx(0.25).epsilon(1e-14));

  CHECK(field.ellipticity_bound() > 0.15 - 2.0 / 15.0 - 1e-15);
  for (unsigned s = 0; s < 50; ++s) {
    const auto u = random_parameter(50, s);
    for (double x = 0.0; x <= 1.0; x += 0.01) CHECK(coefficient_at(field, u, x) >= 0.15 - 2.0 / 15.0);
  }
  CHECK_THROWS_AS(coefficient_at(field, zero, 1.5), RangeError);
  CHECK_THROWS_AS(coefficient_at(field, zero, -0.1), RangeError);
}

TEST_CASE("basis alternates sine and cosine") {
  CHECK(basis_function(1, 0.5) == doctest::Approx(1.0));
  CHECK(basis_function(2, 0.5) == doctest::Approx(-1.0));
  CHECK(basis_function(3, 0.0) == doctest::Approx(0.0));
  CHECK(basis_function(4, 0.0) == doctest::Approx(1.0));
}

TEST_CASE("Thomas solver matches dense solve on a random diagonally dominant system") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  const int n = 17;
  std::vector<double> sub(n - 1), sup(n - 1), diag(n), rhs(n);
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd b(n);
  for (int i = 0; i < n; ++i) {
    diag[i] = 4.0 + unif(rng);
    rhs[i] = b(i) = unif(rng);
    A(i, i) = diag[i];
    if (i + 1 < n) {
      sub[i] = unif(rng);
      sup[i] = unif(rng);
      A(i + 1, i) = sub[i];
      A(i, i + 1) = sup[i];
    }
  }
  double pivot = 0.0;
  const auto x = solve_tridiagonal(sub, diag, sup, rhs, &pivot);
  const Eigen::VectorXd ref = A.lu().solve(b);
  for (int i = 0; i < n; ++i) CHECK(x[i] == doctest::Approx(ref(i)).epsilon(1e-13));
  CHECK(pivot > 0.0);
}

TEST_CASE("FEM agrees with dense assembly at matching quadrature") {
  const CoefficientField field = CoefficientField::standard();
  const EllipticSolver solver(field, 3, 6);
  for (unsigned s = 0; s < 5; ++s) {
    const auto u = random_parameter(50, 100 + s);
    for (int l : {0, 2, 5, 7}) {
      const FemSolution sol = solver.solve(u, l);
      const auto ref = oracle::dense_solve([&](double x) { return oracle::coefficient(u, x); }, 1 << (l + 3), 2);
      REQUIRE(sol.nodal_values.size() == ref.size());
      CHECK(max_rel_diff(sol.nodal_values, ref) <= 1e-10);
      CHECK(sol.min_pivot > 0.0);
      // Higher-order quadrature of a bounds the quadrature effect.
      const auto ref6 = oracle::dense_solve([&](double x) { return oracle::coefficient(u, x); }, 1 << (l + 3), 6);
      CHECK(max_rel_diff(sol.nodal_values, ref6) <= 5e-3);
    }
  }
}

TEST_CASE("tabulated and direct coefficient paths agree") {
  const CoefficientField field = CoefficientField::standard();
  const EllipticSolver tabulated(field, 3, 4);
  const auto u = random_parameter(50, 9);
  for (int l = 0; l <= 6; ++l) {
    const auto a = tabulated.solve(u, l).nodal_values;
    const auto b = assemble_and_solve(field, u, l).nodal_values;
    CHECK(max_rel_diff(a, b) <= 1e-13);
  }
}

TEST_CASE("constant coefficient solution") {
  const CoefficientField field = CoefficientField::standard();
  std::vector<double> zero(50, 0.0);
  const EllipticSolver solver(field);
  CHECK(oracle::constant_coefficient_solution(0.15, 0.5) == doctest::Approx(41.6667).epsilon(1e-5));
  CHECK(oracle::constant_coefficient_solution(0.15, 0.25) == doctest::Approx(26.0417).epsilon(1e-5));
  CHECK(oracle::constant_coefficient_solution(0.15, 0.75) == doctest::Approx(36.4583).epsilon(1e-5));
  for (int l = 0; l <= 6; ++l) {
    const FemSolution sol = solver.solve(zero, l);
    for (double x : {0.25, 0.5, 0.75}) {
      CHECK(std::abs(point_value(sol, x) - oracle::constant_coefficient_solution(0.15, x)) < 1e-3);
    }
  }
}

TEST_CASE("smooth variable coefficient converges at second order") {
  // Reference from a much finer dense-quadrature solve.
  const auto u = random_parameter(50, 21);
  const CoefficientField field = CoefficientField::standard();
  const EllipticSolver solver(field, 3);
  const double reference = point_value(solver.solve(u, 10), 0.5);
  std::vector<double> log_h, log_err;
  for (int l = 0; l <= 5; ++l) {
    const FemSolution sol = solver.solve(u, l);
    log_h.push_back(std::log(sol.h));
    log_err.push_back(std::log(std::abs(point_value(sol, 0.5) - reference)));
  }
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < log_h.size(); ++i) mx += log_h[i], my += log_err[i];
  mx /= log_h.size(), my /= log_h.size();
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < log_h.size(); ++i) sxy += (log_h[i] - mx) * (log_err[i] - my), sxx += (log_h[i] - mx) * (log_h[i] - mx);
  CHECK(sxy / sxx == doctest::Approx(2.0).epsilon(0.1));
}

TEST_CASE("zero load gives zero solution") {
  const EllipticSolver solver(CoefficientField::standard(), 3, -1, 0.0);
  const auto sol = solver.solve(random_parameter(50, 1), 3);
  for (double v : sol.nodal_values) CHECK(v == 0.0);
}

TEST_CASE("point values") {
  FemSolution sol;
  sol.h = 0.25;
  sol.nodal_values = {1.0, 2.0, 3.0};
  CHECK(point_value(sol, 0.0) == 0.0);
  CHECK(point_value(sol, 1.0) == 0.0);
  CHECK(point_value(sol, 0.5) == 2.0);
  CHECK(point_value(sol, 0.625) == doctest::Approx(2.5));
  CHECK(point_value(sol, 0.125) == doctest::Approx(0.5));
  CHECK_THROWS_AS(point_value(sol, 1.01), RangeError);
}

TEST_CASE("solution size and resolution") {
  const EllipticSolver solver(CoefficientField::standard());
  const auto sol = solver.solve(std::vector<double>(50, 0.3), 2);
  CHECK(sol.nodal_values.size() == 31);
  CHECK(sol.h == 1.0 / 32.0);
  CHECK(solver.resolution(0) == 0.125);
}
