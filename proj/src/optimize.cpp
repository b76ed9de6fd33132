#include "qmcopt/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace qmcopt {

namespace {

void validate_bounds(const BoxBounds& b) {
  if (b.lo.mesh != b.hi.mesh) throw std::invalid_argument("bounds: meshes differ");
  for (std::size_t i = 0; i < b.lo.values.size(); ++i) {
    if (!(b.lo.values[i] <= b.hi.values[i])) {
      throw std::invalid_argument("bounds: z_min > z_max at a node");
    }
  }
}

// Misfit part of J at the cached states.
double misfit_term(const ControlProblem& prob, const GridFunction& z) {
  const std::size_t n = prob.node_count();
  if (n == 0) return 0.0;
  const std::vector<GridFunction>& us = prob.states(z);
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    GridFunction d = us[i] - prob.u0();
    const double nm = l2_norm(prob.ctx().mass(), d);
    acc += nm * nm;
  }
  return acc / (2.0 * static_cast<double>(n));
}

}  // namespace

GridFunction project(const GridFunction& z, const BoxBounds& bounds) {
  validate_bounds(bounds);
  if (z.mesh != bounds.lo.mesh) throw std::invalid_argument("project: mesh mismatch");
  GridFunction out = z;
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    out.values[i] = std::max(bounds.lo.values[i], std::min(out.values[i], bounds.hi.values[i]));
  }
  return out;
}

ControlProblem::ControlProblem(const ParametricSolveContext& ctx, GridFunction u0, double alpha,
                               GeneratingVector rule, std::vector<double> shift, std::size_t n,
                               std::optional<BoxBounds> bounds)
    : ctx_(ctx),
      u0_(std::move(u0)),
      alpha_(alpha),
      bounds_(std::move(bounds)),
      rule_(std::move(rule)),
      shift_(std::move(shift)) {
  if (!(alpha_ > 0.0)) throw std::invalid_argument("ControlProblem: alpha must be positive");
  if (u0_.mesh != ctx_.mesh()) throw std::invalid_argument("ControlProblem: u0 on wrong mesh");
  if (bounds_) {
    validate_bounds(*bounds_);
    if (bounds_->lo.mesh != ctx_.mesh()) {
      throw std::invalid_argument("ControlProblem: bounds on wrong mesh");
    }
  }
  if (n > 0) {
    if (rule_.n != n) throw std::invalid_argument("ControlProblem: n disagrees with the rule");
    nodes_ = lattice_points(rule_, n, shift_);
    solvers_.resize(n);
  }
}

const SpdSolver& ControlProblem::solver(std::size_t i) const {
  if (i >= nodes_.size()) throw std::out_of_range("ControlProblem::solver");
  if (!solvers_[i]) {
    solvers_[i] = std::make_unique<SpdSolver>(ctx_.stiffness(nodes_[i]), ctx_.tol());
  }
  return *solvers_[i];
}

const std::vector<GridFunction>& ControlProblem::states(const GridFunction& z) const {
  if (z.mesh != ctx_.mesh()) throw std::invalid_argument("states: z on wrong mesh");
  if (have_states_ && cached_z_ == z.values) return cached_states_;
  const std::vector<double> rhs = ctx_.mass().apply(z.values);
  cached_states_.clear();
  cached_states_.reserve(nodes_.size());
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    GridFunction u(ctx_.mesh());
    u.values = solver(i).solve(rhs);
    cached_states_.push_back(std::move(u));
  }
  cached_z_ = z.values;
  have_states_ = true;
  return cached_states_;
}

double objective(const ControlProblem& prob, const GridFunction& z) {
  const double zn = l2_norm(prob.ctx().mass(), z);
  return misfit_term(prob, z) + 0.5 * prob.alpha() * zn * zn;
}

GridFunction gradient(const ControlProblem& prob, const GridFunction& z) {
  const std::size_t n = prob.node_count();
  GridFunction g = z;
  g *= prob.alpha();
  if (n == 0) return g;
  const std::vector<GridFunction>& us = prob.states(z);
  GridFunction qsum(prob.ctx().mesh());
  for (std::size_t i = 0; i < n; ++i) {
    GridFunction d = us[i] - prob.u0();
    GridFunction q(prob.ctx().mesh());
    q.values = prob.solver(i).solve(prob.ctx().mass().apply(d.values));
    qsum += q;
  }
  qsum *= 1.0 / static_cast<double>(n);
  return g + qsum;
}

double armijo(const ControlProblem& prob, const GridFunction& z, const GridFunction& g,
              const DescentConfig& cfg, std::size_t* trials) {
  const double j0 = objective(prob, z);
  const double gn = l2_norm(prob.ctx().mass(), g);
  double eta = 1.0;
  for (std::size_t t = 0; t < cfg.max_armijo_backtracks; ++t) {
    GridFunction trial = z - eta * g;
    const double jt = objective(prob, trial);
    if (jt - j0 <= -eta * cfg.gamma * gn * gn) {
      if (trials) *trials = t + 1;
      return eta;
    }
    eta *= cfg.beta;
  }
  throw std::runtime_error("armijo: backtracking exhausted");
}

double projected_armijo(const ControlProblem& prob, const GridFunction& z, const GridFunction& g,
                        const DescentConfig& cfg, std::size_t* trials) {
  if (!prob.bounds()) throw std::invalid_argument("projected_armijo: problem has no bounds");
  const double j0 = objective(prob, z);
  double eta = 1.0;
  for (std::size_t t = 0; t < cfg.max_armijo_backtracks; ++t) {
    GridFunction trial = project(z - eta * g, *prob.bounds());
    const double jt = objective(prob, trial);
    const double step = l2_norm(prob.ctx().mass(), z - trial);
    if (jt - j0 <= -(cfg.gamma / eta) * step * step) {
      if (trials) *trials = t + 1;
      return eta;
    }
    eta *= cfg.beta;
  }
  throw std::runtime_error("projected_armijo: backtracking exhausted");
}

DescentResult gradient_descent(const ControlProblem& prob, const GridFunction& z0,
                               const DescentConfig& cfg) {
  DescentResult res;
  res.z = z0;
  for (std::size_t iter = 0;; ++iter) {
    const GridFunction g = gradient(prob, res.z);
    const double gn = l2_norm(prob.ctx().mass(), g);
    const double j = objective(prob, res.z);
    TraceRow row{iter, j, misfit_term(prob, res.z), gn, 0.0, 0};
    if (gn <= cfg.tol) {
      res.trace.push_back(row);
      res.converged = true;
      res.iterations = iter;
      return res;
    }
    if (iter >= cfg.max_iter) {
      res.trace.push_back(row);
      res.iterations = iter;
      return res;
    }
    std::size_t trials = 0;
    const double eta = armijo(prob, res.z, g, cfg, &trials);
    row.eta = eta;
    row.armijo_trials = trials;
    res.trace.push_back(row);
    res.z = res.z - eta * g;
  }
}

DescentResult projected_gradient_descent(const ControlProblem& prob, const GridFunction& z0,
                                         const DescentConfig& cfg) {
  if (!prob.bounds()) {
    throw std::invalid_argument("projected_gradient_descent: problem has no bounds");
  }
  const BoxBounds& box = *prob.bounds();
  for (std::size_t i = 0; i < z0.values.size(); ++i) {
    if (z0.values[i] < box.lo.values[i] - 1e-12 || z0.values[i] > box.hi.values[i] + 1e-12) {
      throw std::invalid_argument("projected_gradient_descent: infeasible start");
    }
  }
  DescentResult res;
  res.z = z0;
  for (std::size_t iter = 0;; ++iter) {
    const GridFunction g = gradient(prob, res.z);
    const double stat = l2_norm(prob.ctx().mass(), res.z - project(res.z - g, box));
    const double j = objective(prob, res.z);
    TraceRow row{iter, j, misfit_term(prob, res.z), stat, 0.0, 0};
    if (stat <= cfg.tol) {
      res.trace.push_back(row);
      res.converged = true;
      res.iterations = iter;
      return res;
    }
    if (iter >= cfg.max_iter) {
      res.trace.push_back(row);
      res.iterations = iter;
      return res;
    }
    std::size_t trials = 0;
    const double eta = projected_armijo(prob, res.z, g, cfg, &trials);
    row.eta = eta;
    row.armijo_trials = trials;
    res.trace.push_back(row);
    res.z = project(res.z - eta * g, box);
  }
}

void export_trace_csv(const DescentTrace& trace, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("export_trace_csv: cannot open " + path);
  out << "iter,J,misfit,grad_norm_or_stationarity,eta,armijo_trials\n";
  char buf[160];
  for (const TraceRow& r : trace) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g,%zu", r.iter, r.j, r.misfit,
                  r.residual, r.eta, r.armijo_trials);
    out << buf << '\n';
  }
}

}  // namespace qmcopt
