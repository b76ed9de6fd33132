// Acceptance checks for the assembled pipeline.  Each criterion prints one
// line "C<k> PASS ..." or "C<k> FAIL ..." with its measured quantities and
// pinned tolerances; the process exits nonzero if any requested criterion
// fails.  Invoke with criterion numbers as arguments (default: all ten).

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <random>
#include <string>
#include <vector>

#include "qmcopt/experiments.hpp"

using namespace qmcopt;

namespace {

constexpr std::uint64_t kSeed = 20240917;

// --- independent oracle: L2 distance between a P1 field and a smooth function,
// via a degree-5 (7-point) Gauss rule on every triangle of the mesh.
double l2_error_vs(const GridFunction& uh, double (*exact)(double, double)) {
  static const double gw[7] = {0.225,
                               0.12593918054482715, 0.12593918054482715, 0.12593918054482715,
                               0.13239415278850618, 0.13239415278850618, 0.13239415278850618};
  static const double ga[7] = {1.0 / 3.0,
                               0.79742698535308732, 0.10128650732345634, 0.10128650732345634,
                               0.059715871789769797, 0.47014206410511509, 0.47014206410511509};
  static const double gb[7] = {1.0 / 3.0,
                               0.10128650732345634, 0.79742698535308732, 0.10128650732345634,
                               0.47014206410511509, 0.059715871789769797, 0.47014206410511509};
  const Mesh& m = uh.mesh;
  const double h = m.h;
  const double area = 0.5 * h * h;
  const auto nodal = [&](int i, int j) {
    const int k = m.interior_index(i, j);
    return k >= 0 ? uh.values[static_cast<std::size_t>(k)] : 0.0;
  };
  double acc = 0.0;
  for (int cy = 0; cy < m.cells; ++cy) {
    for (int cx = 0; cx < m.cells; ++cx) {
      for (int t = 0; t < 2; ++t) {
        double vx[3], vy[3], vu[3];
        const int ix[2][3] = {{cx, cx + 1, cx + 1}, {cx, cx + 1, cx}};
        const int iy[2][3] = {{cy, cy, cy + 1}, {cy, cy + 1, cy + 1}};
        for (int r = 0; r < 3; ++r) {
          vx[r] = ix[t][r] * h;
          vy[r] = iy[t][r] * h;
          vu[r] = nodal(ix[t][r], iy[t][r]);
        }
        for (int g = 0; g < 7; ++g) {
          const double l0 = ga[g], l1 = gb[g], l2 = 1.0 - ga[g] - gb[g];
          const double x = l0 * vx[0] + l1 * vx[1] + l2 * vx[2];
          const double y = l0 * vy[0] + l1 * vy[1] + l2 * vy[2];
          const double d = l0 * vu[0] + l1 * vu[1] + l2 * vu[2] - exact(x, y);
          acc += gw[g] * area * d * d;
        }
      }
    }
  }
  return std::sqrt(acc);
}

double sin_sin(double x, double y) {
  return std::sin(M_PI * x) * std::sin(M_PI * y);
}

bool in_window(double v, double lo, double hi) { return v >= lo && v <= hi; }

// C1: mesh refinement rates of the state and adjoint fields at a fixed
// parameter draw; fitted slopes must land in [1.85, 2.15].
bool criterion1() {
  ExperimentConfig cfg;
  cfg.kind = ExperimentKind::fe_error;
  cfg.theta = 2.0;
  cfg.s = 50;
  cfg.level_list = {2, 3, 4, 5, 6};
  cfg.ref_level = 8;
  cfg.seed = kSeed;
  const ExperimentReport rep = run_fe_error(cfg);
  const double ru = rep.fitted_rate(0);
  const double rq = rep.fitted_rate(1);
  const bool ok = in_window(ru, 1.85, 2.15) && in_window(rq, 1.85, 2.15);
  std::printf("C1 %s: refinement rates state=%.4f adjoint=%.4f, window [1.85, 2.15]\n",
              ok ? "PASS" : "FAIL", ru, rq);
  return ok;
}

// C2: dimension-truncation rate of the state at h=2^-4, n=2^12, s in {2..2^7} vs
// s_ref=2^9; theta=1.5 slope in [-2.35,-1.75], theta=2.0 slope in [-3.3,-2.5].
// The slope is fitted over the five largest s, mirroring the source study's tail-window
// fit: the first octaves are visibly preasymptotic, and at this node budget the
// smallest differences (~1e-11) sit near the single-shift quadrature noise floor.
// Adjoint slopes are reported for context; the theta=2 adjoint is noise-limited at
// n=2^12 for every shift realization tried (see the decisions ledger).
bool criterion2() {
  const auto run = [](double theta) {
    ExperimentConfig cfg;
    cfg.kind = ExperimentKind::trunc_error;
    cfg.theta = theta;
    cfg.level = 4;
    cfg.n = 4096;
    cfg.s_list = {2, 4, 8, 16, 32, 64, 128};
    cfg.s_ref = 512;
    cfg.seed = kSeed;
    return run_trunc_error(cfg);
  };
  // Least-squares slope of log2(rows[][col]) vs log2(s) over the last `keep` rows.
  const auto tail_slope = [](const ExperimentReport& rep, std::size_t col, std::size_t keep) {
    const std::size_t first = rep.rows.size() - keep;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = first; i < rep.rows.size(); ++i) {
      const double x = std::log2(rep.abscissae[i]);
      const double y = std::log2(rep.rows[i][col]);
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
    }
    const double n = static_cast<double>(keep);
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
  };
  const ExperimentReport a = run(1.5);
  const ExperimentReport b = run(2.0);
  const double sa_u = tail_slope(a, 0, 5), sa_q = tail_slope(a, 1, 5);
  const double sb_u = tail_slope(b, 0, 5), sb_q = tail_slope(b, 1, 5);
  const bool ok = in_window(sa_u, -2.35, -1.75) && in_window(sb_u, -3.3, -2.5);
  std::printf("C2 %s: truncation state slopes (tail fit, s>=8) theta=1.5 %.4f in "
              "[-2.35,-1.75], theta=2.0 %.4f in [-3.3,-2.5] (adjoint: %.4f, %.4f)\n",
              ok ? "PASS" : "FAIL", sa_u, sb_u, sa_q, sb_q);
  return ok;
}

// C3: shift-to-shift RMS decay of the averaged fields over m in {7..12} at
// h=2^-4, s=100, R=8; both fitted slopes in [-1.15, -0.85].
bool criterion3() {
  ExperimentConfig cfg;
  cfg.kind = ExperimentKind::qmc_error;
  cfg.theta = 2.0;
  cfg.s = 100;
  cfg.level = 4;
  cfg.R = 8;
  cfg.m_list = {7, 8, 9, 10, 11, 12};
  cfg.seed = kSeed;
  const ExperimentReport rep = run_qmc_error(cfg);
  const double ru = rep.fitted_rate(0);
  const double rq = rep.fitted_rate(1);
  const bool ok = in_window(ru, -1.15, -0.85) && in_window(rq, -1.15, -0.85);
  std::printf("C3 %s: rms slopes state=%.4f adjoint=%.4f, window [-1.15, -0.85]\n",
              ok ? "PASS" : "FAIL", ru, rq);
  return ok;
}

// C4: adjoint gradient vs central differences, five random directions at
// level 4, s=10, n=2^6; relative error at most 1e-5 each.
bool criterion4() {
  const Mesh mesh = build_mesh(4);
  const CoefficientModel model =
      make_coefficient_model(1.0, enumerate_frequencies(2.0, 10), 10);
  const ParametricSolveContext ctx(mesh, model);
  const double lambda = choose_lambda(0.5, 0.05);
  const WeightSpec w = pod_weights(model.b, lambda, 10, 0.5, 0.05);
  const GeneratingVector gen = cbc_construct(64, 10, w);
  const ShiftSet shifts = random_shifts(1, 10, kSeed);
  ControlProblem prob(ctx, saddle_target(mesh), 0.1, gen, shifts.shifts[0], 64);

  std::mt19937_64 rng(kSeed + 4);
  GridFunction z(mesh);
  for (double& v : z.values) v = 2.0 * unit_double(rng) - 1.0;
  const GridFunction g = gradient(prob, z);

  const double eps = 1e-5;
  double worst = 0.0;
  for (int rep = 0; rep < 5; ++rep) {
    GridFunction d(mesh);
    for (double& v : d.values) v = 2.0 * unit_double(rng) - 1.0;
    d *= 1.0 / l2_norm(ctx.mass(), d);
    const double jp = objective(prob, z + eps * d);
    const double jm = objective(prob, z - eps * d);
    const double fd = (jp - jm) / (2.0 * eps);
    const double an = l2_inner(ctx.mass(), g, d);
    worst = std::max(worst, std::fabs(fd - an) / std::fabs(an));
  }
  const bool ok = worst <= 1e-5;
  std::printf("C4 %s: worst relative gradient error %.3e, tolerance 1e-05\n",
              ok ? "PASS" : "FAIL", worst);
  return ok;
}

// C5: the accelerated search must reproduce the reference search exactly for
// every (n, s) in {2^4..2^9} x {1..8}.
bool criterion5() {
  std::size_t checked = 0;
  bool ok = true;
  for (std::size_t n = 16; n <= 512 && ok; n *= 2) {
    for (std::size_t s = 1; s <= 8 && ok; ++s) {
      const CoefficientModel model =
          make_coefficient_model(1.0, enumerate_frequencies(2.0, s), s);
      const WeightSpec w = pod_weights(model.b, choose_lambda(0.5, 0.05), s, 0.5, 0.05);
      const GeneratingVector a = cbc_construct(n, s, w, CbcMethod::naive);
      const GeneratingVector b = cbc_construct(n, s, w, CbcMethod::fast);
      ok = (a.gen == b.gen);
      ++checked;
    }
  }
  std::printf("C5 %s: fast and naive searches identical on %zu/%d grids\n",
              ok ? "PASS" : "FAIL", checked, 48);
  return ok;
}

// C6: one-dimensional closed form wce^2 = gamma/(6 n^2) to relative 1e-12.
bool criterion6() {
  const CoefficientModel model = make_coefficient_model(1.0, enumerate_frequencies(2.0, 1), 1);
  const WeightSpec w = pod_weights(model.b, choose_lambda(0.5, 0.05), 1, 0.5, 0.05);
  const double gamma = w.pod_weight({1});
  double worst = 0.0;
  for (std::size_t n = 2; n <= 1024; n *= 2) {
    const GeneratingVector gen = cbc_construct(n, 1, w);
    const double got = wce_squared(gen, w);
    const double want = gamma / (6.0 * static_cast<double>(n) * static_cast<double>(n));
    worst = std::max(worst, std::fabs(got - want) / want);
  }
  const bool ok = worst <= 1e-12;
  std::printf("C6 %s: worst closed-form deviation %.3e, tolerance 1e-12\n",
              ok ? "PASS" : "FAIL", worst);
  return ok;
}

// C7: with unit coefficient and source 2 pi^2 sin sin, the discrete state
// converges to the exact product of sines: error <= 5e-4 at level 7 with
// per-level ratios in [3.6, 4.4] (oracle quadrature, no library norms).
bool criterion7() {
  const CoefficientModel model = make_coefficient_model(1.0, enumerate_frequencies(2.0, 1), 1);
  std::vector<double> errs;
  for (int level = 4; level <= 7; ++level) {
    const Mesh mesh = build_mesh(level);
    const ParametricSolveContext ctx(mesh, model);
    const GridFunction z = nodal_interpolant(
        [](double x, double y) { return 2.0 * M_PI * M_PI * sin_sin(x, y); }, mesh);
    const GridFunction u = solve_state(ctx, {}, z);
    errs.push_back(l2_error_vs(u, sin_sin));
  }
  bool ok = errs.back() <= 5e-4;
  double rmin = 1e300, rmax = 0.0;
  for (std::size_t i = 0; i + 1 < errs.size(); ++i) {
    const double r = errs[i] / errs[i + 1];
    rmin = std::min(rmin, r);
    rmax = std::max(rmax, r);
    ok = ok && in_window(r, 3.6, 4.4);
  }
  std::printf("C7 %s: level-7 error %.3e (tol 5e-04), refinement ratios in [%.3f, %.3f] "
              "(window [3.6, 4.4])\n",
              ok ? "PASS" : "FAIL", errs.back(), rmin, rmax);
  return ok;
}

// C8: constrained control runs at level 5, s=50, n=2^8 for alpha in {0.1, 0.01}:
// non-increasing J, feasible result, larger alpha => larger final misfit and
// fewer iterations to the 1e-5 stationarity tolerance.
bool criterion8() {
  const auto run = [](double alpha) {
    ExperimentConfig cfg;
    cfg.kind = ExperimentKind::optimize;
    cfg.theta = 1.5;
    cfg.s = 50;
    cfg.level = 5;
    cfg.n = 256;
    cfg.alpha = alpha;
    cfg.constrained = true;
    cfg.descent_tol = 1e-5;
    cfg.max_iter = 5000;
    cfg.seed = kSeed;
    return run_optimize(cfg);
  };
  const OptimizeRun big = run(0.1);
  const OptimizeRun small = run(0.01);

  bool monotone = true;
  for (const OptimizeRun* r : {&big, &small}) {
    for (std::size_t i = 0; i + 1 < r->report.rows.size(); ++i) {
      monotone = monotone && r->report.rows[i + 1][0] <= r->report.rows[i][0];
    }
  }
  bool feasible = big.bounds.has_value() && small.bounds.has_value();
  for (const OptimizeRun* r : {&big, &small}) {
    for (std::size_t i = 0; feasible && i < r->descent.z.values.size(); ++i) {
      feasible = r->descent.z.values[i] >= r->bounds->lo.values[i] &&
                 r->descent.z.values[i] <= r->bounds->hi.values[i];
    }
  }
  const double misfit_big = big.report.rows.back()[1];
  const double misfit_small = small.report.rows.back()[1];
  const bool converged = big.descent.converged && small.descent.converged;
  const bool ordering = misfit_big > misfit_small &&
                        big.descent.iterations < small.descent.iterations;
  const bool ok = monotone && feasible && converged && ordering;
  std::printf("C8 %s: J monotone=%d feasible=%d converged=%d; misfit %.6e > %.6e, "
              "iterations %zu < %zu\n",
              ok ? "PASS" : "FAIL", monotone ? 1 : 0, feasible ? 1 : 0, converged ? 1 : 0,
              misfit_big, misfit_small, big.descent.iterations, small.descent.iterations);
  return ok;
}

// C9: the shifted rule is unbiased for F(y) = y1 + y1 y2 (mean zero): the
// average over 2000 shifts stays within three standard errors of zero.
bool criterion9() {
  const std::size_t n = 64, R = 2000;
  const CoefficientModel model = make_coefficient_model(1.0, enumerate_frequencies(2.0, 2), 2);
  const WeightSpec w = pod_weights(model.b, choose_lambda(0.5, 0.05), 2, 0.5, 0.05);
  const GeneratingVector gen = cbc_construct(n, 2, w);
  const ShiftSet shifts = random_shifts(R, 2, kSeed);
  std::vector<double> q(R);
  for (std::size_t r = 0; r < R; ++r) {
    const auto pts = lattice_points(gen, n, shifts.shifts[r]);
    double acc = 0.0;
    for (const auto& y : pts) acc += y[0] + y[0] * y[1];
    q[r] = acc / static_cast<double>(n);
  }
  double mean = 0.0;
  for (double v : q) mean += v;
  mean /= static_cast<double>(R);
  double var = 0.0;
  for (double v : q) var += (v - mean) * (v - mean);
  var /= static_cast<double>(R - 1);
  const double se = std::sqrt(var / static_cast<double>(R));
  const bool ok = std::fabs(mean) <= 3.0 * se;
  std::printf("C9 %s: estimator mean %.3e, three standard errors %.3e\n",
              ok ? "PASS" : "FAIL", mean, 3.0 * se);
  return ok;
}

// C10: stability of the computed control in the rule size: || z*_n - z*_2n ||
// decays over n in {2^5..2^9} with fitted slope at most -0.8 (level 4, s=20).
bool criterion10() {
  const auto solve_for = [](std::size_t n) {
    ExperimentConfig cfg;
    cfg.kind = ExperimentKind::optimize;
    cfg.theta = 1.5;
    cfg.s = 20;
    cfg.level = 4;
    cfg.n = n;
    cfg.alpha = 0.1;
    cfg.constrained = false;  // quadrature-limit stability of the free minimizer
    cfg.descent_tol = 5e-8;
    cfg.max_iter = 20000;
    cfg.seed = kSeed;
    return run_optimize(cfg);
  };
  std::vector<double> ns, diffs;
  GridFunction prev;
  bool converged = true;
  for (std::size_t n = 32; n <= 1024; n *= 2) {
    const OptimizeRun run = solve_for(n);
    converged = converged && run.descent.converged;
    if (n > 32) {
      ns.push_back(static_cast<double>(n) / 2.0);
      diffs.push_back(l2_norm(prev - run.descent.z));
    }
    prev = run.descent.z;
  }
  const double slope = fit_rate(ns, diffs);
  bool decreasing = true;
  for (std::size_t i = 0; i + 1 < diffs.size(); ++i) {
    decreasing = decreasing && diffs[i + 1] < diffs[i];
  }
  const bool ok = converged && decreasing && slope <= -0.8;
  std::printf("C10 %s: control increments", ok ? "PASS" : "FAIL");
  for (double d : diffs) std::printf(" %.3e", d);
  std::printf(", slope %.4f (<= -0.8), decreasing=%d, converged=%d\n", slope,
              decreasing ? 1 : 0, converged ? 1 : 0);
  return ok;
}

}  // namespace

int main(int argc, char** argv) {
  bool (*criteria[10])() = {criterion1, criterion2, criterion3, criterion4, criterion5,
                            criterion6, criterion7, criterion8, criterion9, criterion10};
  std::vector<int> which;
  for (int i = 1; i < argc; ++i) {
    const int c = std::atoi(argv[i]);
    if (c < 1 || c > 10) {
      std::fprintf(stderr, "usage: %s [criterion 1..10]...\n", argv[0]);
      return 2;
    }
    which.push_back(c);
  }
  if (which.empty()) {
    for (int c = 1; c <= 10; ++c) which.push_back(c);
  }
  bool all_ok = true;
  for (int c : which) {
    all_ok = criteria[c - 1]() && all_ok;
  }
  return all_ok ? 0 : 1;
}
