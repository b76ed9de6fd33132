#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "qmcopt/pde.hpp"

#include <cmath>
#include <random>
#include <vector>

using namespace qmcopt;

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;

double unit_double(std::mt19937_64& g) {
  return static_cast<double>(g() >> 11) * 0x1.0p-53;
}

std::vector<double> random_parameter(std::mt19937_64& g, std::size_t s) {
  std::vector<double> y(s);
  for (double& v : y) v = unit_double(g) - 0.5;
  return y;
}

GridFunction random_function(std::mt19937_64& g, const Mesh& m) {
  GridFunction f(m);
  for (double& v : f.values) v = 2.0 * unit_double(g) - 1.0;
  return f;
}

double fitted_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace

TEST_CASE("context caches level-consistent structures and samples the coefficient") {
  const Mesh m = build_mesh(3);
  const FrequencyTable freqs = enumerate_frequencies(2.0, 16);
  const CoefficientModel model = make_coefficient_model(1.0, freqs, 8);
  const ParametricSolveContext ctx(m, model);
  CHECK(ctx.mass().n == m.interior_count());
  CHECK(ctx.mesh() == m);
  CHECK(ctx.tol() == 1e-10);

  std::mt19937_64 gen(7);
  const std::vector<double> y = random_parameter(gen, 8);
  const std::vector<double> a = ctx.coefficient_samples(y);
  REQUIRE(a.size() == m.triangle_count());
  // Independent recomputation at the documented centroid positions.
  std::size_t t = 0;
  for (int cy = 0; cy < m.cells; ++cy) {
    for (int cx = 0; cx < m.cells; ++cx) {
      const double c1[2] = {(cx + 2.0 / 3.0) * m.h, (cy + 1.0 / 3.0) * m.h};
      const double c2[2] = {(cx + 1.0 / 3.0) * m.h, (cy + 2.0 / 3.0) * m.h};
      CHECK(a[t] == doctest::Approx(coeff_eval(model, c1[0], c1[1], y)).epsilon(1e-15));
      CHECK(a[t + 1] == doctest::Approx(coeff_eval(model, c2[0], c2[1], y)).epsilon(1e-15));
      t += 2;
    }
  }
  CHECK_THROWS_AS(ctx.coefficient_samples(std::vector<double>(8, 0.7)), std::invalid_argument);
  CHECK_THROWS_AS(ctx.coefficient_samples(std::vector<double>(9, 0.0)), std::invalid_argument);
  // Shorter y means truncated expansion.
  const std::vector<double> y2(y.begin(), y.begin() + 3);
  const std::vector<double> a2 = ctx.coefficient_samples(y2);
  CHECK(a2[5] == doctest::Approx(coeff_eval(model, (2 + 1.0 / 3.0) * m.h, 2.0 * m.h / 3.0, y2))
                     .epsilon(1e-15));
}

TEST_CASE("zero control gives zero state, zero misfit gives zero adjoint") {
  const Mesh m = build_mesh(3);
  const CoefficientModel model = make_coefficient_model(1.0, enumerate_frequencies(2.0, 8), 4);
  const ParametricSolveContext ctx(m, model);
  std::mt19937_64 gen(11);
  const std::vector<double> y = random_parameter(gen, 4);

  const GridFunction u = solve_state(ctx, y, GridFunction(m));
  for (double v : u.values) CHECK(v == 0.0);

  const GridFunction w = random_function(gen, m);
  const GridFunction q = solve_adjoint(ctx, y, w, w);
  for (double v : q.values) CHECK(v == 0.0);

  auto [u0, q0] = state_and_adjoint(ctx, y, GridFunction(m), GridFunction(m));
  for (double v : u0.values) CHECK(v == 0.0);
  for (double v : q0.values) CHECK(v == 0.0);
}

TEST_CASE("laplace eigenfunction solves at level 7 within 5e-4") {
  const Mesh m = build_mesh(7);
  const CoefficientModel model = make_coefficient_model(1.0, enumerate_frequencies(2.0, 4), 4);
  const ParametricSolveContext ctx(m, model);
  const std::vector<double> y(4, 0.0);  // coefficient identically 1

  auto sinsin = [](double x1, double x2) { return std::sin(kPi * x1) * std::sin(kPi * x2); };
  const GridFunction target = nodal_interpolant(sinsin, m);

  GridFunction z = nodal_interpolant(
      [&](double x1, double x2) { return 2.0 * kPi * kPi * sinsin(x1, x2); }, m);
  const GridFunction u = solve_state(ctx, y, z);
  CHECK(l2_norm(u - target) <= 5e-4);

  // Adjoint of the eigenfunction against u0 = 0: q = u_state / (2 pi^2) + O(h^2).
  const GridFunction q = solve_adjoint(ctx, y, target, GridFunction(m));
  GridFunction qt = target;
  qt *= 1.0 / (2.0 * kPi * kPi);
  CHECK(l2_norm(q - qt) <= 5e-4);
}

TEST_CASE("solves are linear in the data and scale exactly by powers of two") {
  const Mesh m = build_mesh(4);
  const CoefficientModel model = make_coefficient_model(1.0, enumerate_frequencies(1.5, 12), 6);
  const ParametricSolveContext ctx(m, model);
  std::mt19937_64 gen(23);
  const std::vector<double> y = random_parameter(gen, 6);
  const GridFunction z1 = random_function(gen, m);
  const GridFunction z2 = random_function(gen, m);

  const GridFunction ua = solve_state(ctx, y, z1 + z2);
  const GridFunction ub = solve_state(ctx, y, z1) + solve_state(ctx, y, z2);
  double scale = 0.0;
  for (double v : ua.values) scale = std::max(scale, std::fabs(v));
  for (std::size_t i = 0; i < ua.values.size(); ++i) {
    CHECK(std::fabs(ua.values[i] - ub.values[i]) <= 10.0 * ctx.tol() * scale);
  }

  GridFunction z1x2 = z1;
  z1x2 *= 2.0;
  const GridFunction u1 = solve_state(ctx, y, z1);
  const GridFunction u2 = solve_state(ctx, y, z1x2);
  for (std::size_t i = 0; i < u1.values.size(); ++i) {
    CHECK(u2.values[i] == 2.0 * u1.values[i]);  // exact: every fp op scales
  }
}

TEST_CASE("solution operator is self-adjoint in the mass inner product") {
  const Mesh m = build_mesh(4);
  const CoefficientModel model = make_coefficient_model(1.0, enumerate_frequencies(2.0, 20), 10);
  const ParametricSolveContext ctx(m, model);
  std::mt19937_64 gen(31);
  const std::vector<double> y = random_parameter(gen, 10);
  const GridFunction f = random_function(gen, m);
  const GridFunction g = random_function(gen, m);
  const double lhs = l2_inner(ctx.mass(), solve_state(ctx, y, f), g);
  const double rhs = l2_inner(ctx.mass(), f, solve_state(ctx, y, g));
  CHECK(lhs == doctest::Approx(rhs).epsilon(10.0 * ctx.tol()));
}

TEST_CASE("state_and_adjoint shares one assembly and equals separate calls") {
  const Mesh m = build_mesh(3);
  const CoefficientModel model = make_coefficient_model(1.0, enumerate_frequencies(2.0, 8), 4);
  const ParametricSolveContext ctx(m, model);
  std::mt19937_64 gen(41);
  const std::vector<double> y = random_parameter(gen, 4);
  const GridFunction z = random_function(gen, m);
  const GridFunction u0 = random_function(gen, m);

  const std::size_t before = ctx.assembly_count();
  auto [u, q] = state_and_adjoint(ctx, y, z, u0);
  CHECK(ctx.assembly_count() == before + 1);

  const GridFunction u_sep = solve_state(ctx, y, z);
  const GridFunction q_sep = solve_adjoint(ctx, y, u_sep, u0);
  CHECK(ctx.assembly_count() == before + 3);
  CHECK(u.values == u_sep.values);
  CHECK(q.values == q_sep.values);
}

TEST_CASE("state depends Lipschitz-continuously on single parameters") {
  const Mesh m = build_mesh(4);
  const CoefficientModel model = make_coefficient_model(1.0, enumerate_frequencies(2.0, 8), 4);
  const ParametricSolveContext ctx(m, model);
  std::mt19937_64 gen(53);
  std::vector<double> y = random_parameter(gen, 4);
  y[0] = 0.1;  // room for the perturbations below
  const GridFunction z = nodal_interpolant([](double, double x2) { return x2; }, m);
  const GridFunction u = solve_state(ctx, y, z);

  auto perturbed_diff = [&](double eps) {
    std::vector<double> yp = y;
    yp[0] += eps;
    return l2_norm(solve_state(ctx, yp, z) - u);
  };
  const double d1 = perturbed_diff(1e-2);
  const double d2 = perturbed_diff(1e-3);
  CHECK(d1 > 0.0);
  CHECK(d2 > 0.03 * d1);
  CHECK(d2 < 0.3 * d1);  // ~0.1 for a differentiable dependence
}

TEST_CASE("state and adjoint converge at second order against a finer reference") {
  const int ref_level = 9;
  const FrequencyTable freqs = enumerate_frequencies(2.0, 8);
  const CoefficientModel model = make_coefficient_model(1.0, freqs, 4);
  std::mt19937_64 gen(61);
  const std::vector<double> y = random_parameter(gen, 4);

  auto z_expr = [](double, double x2) { return x2; };
  auto u0_expr = [](double x1, double x2) { return x1 * x1 - x2 * x2; };

  const Mesh mref = build_mesh(ref_level);
  const ParametricSolveContext cref(mref, model);
  auto [uref, qref] = state_and_adjoint(cref, y, nodal_interpolant(z_expr, mref),
                                        nodal_interpolant(u0_expr, mref));
  const SparseOperator mass_ref = assemble_mass(mref);

  std::vector<double> levels, eu, eq;
  for (int level = 3; level <= 7; ++level) {
    const Mesh m = build_mesh(level);
    const ParametricSolveContext ctx(m, model);
    auto [u, q] = state_and_adjoint(ctx, y, nodal_interpolant(z_expr, m),
                                    nodal_interpolant(u0_expr, m));
    levels.push_back(static_cast<double>(level));
    eu.push_back(std::log2(l2_norm(mass_ref, prolongate(u, ref_level) - uref)));
    eq.push_back(std::log2(l2_norm(mass_ref, prolongate(q, ref_level) - qref)));
  }
  const double slope_u = -fitted_slope(levels, eu);  // error ~ 2^(-rate*level)
  const double slope_q = -fitted_slope(levels, eq);
  CHECK(slope_u > 1.85);
  CHECK(slope_u < 2.15);
  CHECK(slope_q > 1.85);
  CHECK(slope_q < 2.15);
}
