#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "qmcopt/lattice.hpp"
#include "qmcopt/pde.hpp"

namespace qmcopt {

// Nodal box constraints z_min <= z <= z_max.
struct BoxBounds {
  GridFunction lo;
  GridFunction hi;
};

// Nodal clamp max(lo, min(z, hi)).
GridFunction project(const GridFunction& z, const BoxBounds& bounds);

// The sample-average control problem on one mesh: the objective averages the state
// misfit over the n shifted lattice nodes,
//   J(z) = (1/2n) sum_i ||u(y_i, z) - u0||^2 + (alpha/2) ||z||^2   (L2 norms).
// n = 0 drops the sample term entirely (pure alpha-regularization; test mode).
// Per-node stiffness factorizations and the states of the last-evaluated control are
// cached: the nodes never change over a descent run, the control does.
class ControlProblem {
 public:
  ControlProblem(const ParametricSolveContext& ctx, GridFunction u0, double alpha,
                 GeneratingVector rule, std::vector<double> shift, std::size_t n,
                 std::optional<BoxBounds> bounds = std::nullopt);

  const ParametricSolveContext& ctx() const { return ctx_; }
  const GridFunction& u0() const { return u0_; }
  double alpha() const { return alpha_; }
  const std::optional<BoxBounds>& bounds() const { return bounds_; }
  std::size_t node_count() const { return nodes_.size(); }
  const std::vector<double>& node(std::size_t i) const { return nodes_[i]; }

  // Cached solver for node i (assembles + factors on first use).
  const SpdSolver& solver(std::size_t i) const;
  // States u(y_i, z) for all nodes; reused when z matches the previous call.
  const std::vector<GridFunction>& states(const GridFunction& z) const;

 private:
  const ParametricSolveContext& ctx_;
  GridFunction u0_;
  double alpha_;
  std::optional<BoxBounds> bounds_;
  GeneratingVector rule_;
  std::vector<double> shift_;
  std::vector<std::vector<double>> nodes_;
  mutable std::vector<std::unique_ptr<SpdSolver>> solvers_;
  mutable std::vector<double> cached_z_;
  mutable std::vector<GridFunction> cached_states_;
  mutable bool have_states_ = false;
};

struct DescentConfig {
  double gamma = 1e-4;  // sufficient-decrease fraction
  double beta = 0.5;    // backtracking factor
  double tol = 1e-6;
  std::size_t max_iter = 1000;
  std::size_t max_armijo_backtracks = 60;
};

double objective(const ControlProblem& prob, const GridFunction& z);

// (1/n) sum_i q(y_i, z) + alpha z, the L2-Riesz gradient of J.
GridFunction gradient(const ControlProblem& prob, const GridFunction& z);

// Largest eta in {1, beta, beta^2, ...} with J(z - eta g) - J(z) <= -eta gamma ||g||^2.
// Throws on backtrack exhaustion. trials (if given) receives the number of J trials.
double armijo(const ControlProblem& prob, const GridFunction& z, const GridFunction& g,
              const DescentConfig& cfg, std::size_t* trials = nullptr);

// Largest eta with J(P(z - eta g)) - J(z) <= -(gamma/eta) ||z - P(z - eta g)||^2.
double projected_armijo(const ControlProblem& prob, const GridFunction& z, const GridFunction& g,
                        const DescentConfig& cfg, std::size_t* trials = nullptr);

struct TraceRow {
  std::size_t iter = 0;
  double j = 0.0;
  double misfit = 0.0;    // (1/2n) sum_i ||u_i - u0||^2 part of J
  double residual = 0.0;  // ||J'|| (unconstrained) or ||z - P(z - J')|| (projected)
  double eta = 0.0;       // step taken from this iterate (0 on the final row)
  std::size_t armijo_trials = 0;
};
using DescentTrace = std::vector<TraceRow>;

struct DescentResult {
  GridFunction z;
  bool converged = false;
  std::size_t iterations = 0;
  DescentTrace trace;
};

DescentResult gradient_descent(const ControlProblem& prob, const GridFunction& z0,
                               const DescentConfig& cfg);

DescentResult projected_gradient_descent(const ControlProblem& prob, const GridFunction& z0,
                                         const DescentConfig& cfg);

void export_trace_csv(const DescentTrace& trace, const std::string& path);

}  // namespace qmcopt
