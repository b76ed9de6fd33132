#include "qmcopt/pde.hpp"

#include <cmath>
#include <stdexcept>

namespace qmcopt {

namespace {

// Centroids in the triangle order documented at assemble_stiffness(mesh, tri_coeff).
template <class F>
void for_each_centroid(const Mesh& m, F&& f) {
  for (int cy = 0; cy < m.cells; ++cy) {
    for (int cx = 0; cx < m.cells; ++cx) {
      f((cx + 2.0 / 3.0) * m.h, (cy + 1.0 / 3.0) * m.h);
      f((cx + 1.0 / 3.0) * m.h, (cy + 2.0 / 3.0) * m.h);
    }
  }
}

}  // namespace

ParametricSolveContext::ParametricSolveContext(const Mesh& mesh, CoefficientModel model,
                                               double tol)
    : mesh_(mesh), model_(std::move(model)), mass_(assemble_mass(mesh)), tol_(tol) {
  if (!(tol_ > 0.0)) throw std::invalid_argument("ParametricSolveContext: tol must be positive");
  const std::size_t ntri = mesh_.triangle_count();
  const std::size_t s = model_.s;
  if (s > 0 && s * ntri <= 30'000'000) {
    psi_tab_.reserve(s * ntri);
    for_each_centroid(mesh_, [&](double x1, double x2) {
      for (std::size_t j = 1; j <= s; ++j) {
        psi_tab_.push_back(psi_eval(model_.freqs, j, x1, x2));
      }
    });
  }
}

std::vector<double> ParametricSolveContext::coefficient_samples(
    const std::vector<double>& y) const {
  const std::size_t s = model_.s;
  if (y.size() > s) throw std::invalid_argument("coefficient_samples: y longer than model.s");
  for (double v : y) {
    if (!(std::fabs(v) <= 0.5)) {
      throw std::invalid_argument("coefficient_samples: y outside [-1/2,1/2]");
    }
  }
  const std::size_t ntri = mesh_.triangle_count();
  std::vector<double> a(ntri);
  if (!psi_tab_.empty()) {
    for (std::size_t t = 0; t < ntri; ++t) {
      double acc = model_.mean;
      const double* row = psi_tab_.data() + t * s;
      for (std::size_t j = 0; j < y.size(); ++j) acc += y[j] * row[j];
      a[t] = acc;
    }
  } else {
    std::size_t t = 0;
    for_each_centroid(mesh_, [&](double x1, double x2) {
      a[t++] = coeff_eval(model_, x1, x2, y);
    });
  }
  return a;
}

SparseOperator ParametricSolveContext::stiffness(const std::vector<double>& y) const {
  SparseOperator A = assemble_stiffness(mesh_, coefficient_samples(y));
  assemblies_.fetch_add(1);
  return A;
}

GridFunction solve_state(const ParametricSolveContext& ctx, const std::vector<double>& y,
                         const GridFunction& z) {
  if (z.mesh != ctx.mesh()) throw std::invalid_argument("solve_state: z on wrong mesh");
  const SpdSolver S(ctx.stiffness(y), ctx.tol());
  GridFunction u(ctx.mesh());
  u.values = S.solve(ctx.mass().apply(z.values));
  return u;
}

GridFunction solve_adjoint(const ParametricSolveContext& ctx, const std::vector<double>& y,
                           const GridFunction& u_state, const GridFunction& u0) {
  if (u_state.mesh != ctx.mesh() || u0.mesh != ctx.mesh()) {
    throw std::invalid_argument("solve_adjoint: arguments on wrong mesh");
  }
  const SpdSolver S(ctx.stiffness(y), ctx.tol());
  GridFunction diff = u_state - u0;
  GridFunction q(ctx.mesh());
  q.values = S.solve(ctx.mass().apply(diff.values));
  return q;
}

std::pair<GridFunction, GridFunction> state_and_adjoint(const ParametricSolveContext& ctx,
                                                        const std::vector<double>& y,
                                                        const GridFunction& z,
                                                        const GridFunction& u0) {
  if (z.mesh != ctx.mesh() || u0.mesh != ctx.mesh()) {
    throw std::invalid_argument("state_and_adjoint: arguments on wrong mesh");
  }
  const SpdSolver S(ctx.stiffness(y), ctx.tol());
  GridFunction u(ctx.mesh());
  u.values = S.solve(ctx.mass().apply(z.values));
  GridFunction diff = u - u0;
  GridFunction q(ctx.mesh());
  q.values = S.solve(ctx.mass().apply(diff.values));
  return {std::move(u), std::move(q)};
}

}  // namespace qmcopt
