#pragma once

#include <atomic>
#include <cstddef>
#include <utility>
#include <vector>

#include "qmcopt/fem.hpp"
#include "qmcopt/field.hpp"

namespace qmcopt {

// Shared context for repeated solves of the diffusion problem with parametric
// coefficient a(x, y) on one fixed mesh. Immutable after construction; safe to share.
class ParametricSolveContext {
 public:
  ParametricSolveContext(const Mesh& mesh, CoefficientModel model, double tol = 1e-10);

  ParametricSolveContext(const ParametricSolveContext&) = delete;
  ParametricSolveContext& operator=(const ParametricSolveContext&) = delete;

  const Mesh& mesh() const { return mesh_; }
  const CoefficientModel& model() const { return model_; }
  const SparseOperator& mass() const { return mass_; }
  double tol() const { return tol_; }

  // Per-triangle coefficient samples a(centroid_T, y). y may be shorter than model.s
  // (missing coordinates are zero). Throws if any |y_j| > 1/2.
  std::vector<double> coefficient_samples(const std::vector<double>& y) const;

  // Assemble A(y). Bumps the assembly counter.
  SparseOperator stiffness(const std::vector<double>& y) const;

  // Number of stiffness assemblies performed through this context (diagnostic).
  std::size_t assembly_count() const { return assemblies_.load(); }

 private:
  Mesh mesh_;
  CoefficientModel model_;
  SparseOperator mass_;
  double tol_;
  std::vector<double> psi_tab_;  // psi_j at triangle centroids, layout [t*s + j]; may be empty
  mutable std::atomic<std::size_t> assemblies_{0};
};

// Solution of A(y) u = M z.
GridFunction solve_state(const ParametricSolveContext& ctx, const std::vector<double>& y,
                         const GridFunction& z);

// Solution of A(y) q = M (u_state - u0).
GridFunction solve_adjoint(const ParametricSolveContext& ctx, const std::vector<double>& y,
                           const GridFunction& u_state, const GridFunction& u0);

// Both solves sharing one assembled (and, where applicable, factored) A(y).
std::pair<GridFunction, GridFunction> state_and_adjoint(const ParametricSolveContext& ctx,
                                                        const std::vector<double>& y,
                                                        const GridFunction& z,
                                                        const GridFunction& u0);

}  // namespace qmcopt
