#include "qmcopt/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <stdexcept>

namespace qmcopt {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fmt(std::size_t v) { return std::to_string(v); }

std::string fmt_hex(std::uint64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%016" PRIx64, v);
  return buf;
}

template <class T>
std::string join(const std::vector<T>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(xs[i]);
  }
  return out;
}

const char* kind_name(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::fe_error: return "fe_error";
    case ExperimentKind::trunc_error: return "trunc_error";
    case ExperimentKind::qmc_error: return "qmc_error";
    case ExperimentKind::optimize: return "optimize";
  }
  throw std::invalid_argument("unknown experiment kind");
}

// Effective weight-design parameters and the matching POD weights for a model.
struct WeightSetup {
  double p;
  double lambda;
  WeightSpec w;
};

WeightSetup make_weights(const ExperimentConfig& cfg, const CoefficientModel& model) {
  if (cfg.theta <= 1.0) throw std::invalid_argument("experiment: theta must exceed 1");
  const double p = cfg.p > 0.0 ? cfg.p : 1.0 / cfg.theta;
  const double lambda = choose_lambda(p, cfg.delta);
  return {p, lambda, pod_weights(model.b, lambda, model.s, p, cfg.delta)};
}

void echo_common(ExperimentReport& rep, const ExperimentConfig& cfg, double p_eff,
                 double lambda) {
  rep.metadata.emplace_back("kind", kind_name(cfg.kind));
  rep.metadata.emplace_back("theta", fmt(cfg.theta));
  rep.metadata.emplace_back("p", fmt(p_eff));
  rep.metadata.emplace_back("delta", fmt(cfg.delta));
  rep.metadata.emplace_back("lambda", fmt(lambda));
  rep.metadata.emplace_back("seed", std::to_string(cfg.seed));
}

// Appends fitted_rate_<column> entries for every column whose values permit a
// log-log fit (at least two rows, all positive).
void echo_rates(ExperimentReport& rep) {
  for (std::size_t c = 0; c < rep.columns.size(); ++c) {
    bool ok = rep.abscissae.size() >= 2;
    for (const auto& row : rep.rows) ok = ok && row[c] > 0.0;
    if (ok) {
      rep.metadata.emplace_back("fitted_rate_" + rep.columns[c], fmt(rep.fitted_rate(c)));
    }
  }
}

std::uint64_t generator_hash(const GeneratingVector& gen, double lambda, double p,
                             double theta) {
  return fnv1a64(serialize_generating_vector(gen, lambda, p, theta));
}

struct Stopwatch {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
};

}  // namespace

double fit_rate(const std::vector<double>& abscissae, const std::vector<double>& values) {
  if (abscissae.size() != values.size()) {
    throw std::invalid_argument("fit_rate: mismatched lengths");
  }
  if (abscissae.size() < 2) throw std::invalid_argument("fit_rate: need at least two rows");
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < abscissae.size(); ++i) {
    if (!(abscissae[i] > 0.0) || !(values[i] > 0.0)) {
      throw std::invalid_argument("fit_rate: abscissae and values must be positive");
    }
    const double x = std::log2(abscissae[i]);
    const double y = std::log2(values[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double m = static_cast<double>(abscissae.size());
  const double denom = m * sxx - sx * sx;
  if (denom == 0.0) throw std::invalid_argument("fit_rate: degenerate abscissae");
  return (m * sxy - sx * sy) / denom;
}

double ExperimentReport::fitted_rate(std::size_t column) const {
  if (column >= columns.size()) throw std::invalid_argument("fitted_rate: no such column");
  std::vector<double> vals;
  vals.reserve(rows.size());
  for (const auto& row : rows) vals.push_back(row[column]);
  return fit_rate(abscissae, vals);
}

double rms_over_shifts(const std::vector<GridFunction>& estimates) {
  const std::size_t R = estimates.size();
  if (R < 2) throw std::invalid_argument("rms_over_shifts: need at least two estimates");
  for (const auto& q : estimates) {
    if (q.mesh != estimates.front().mesh) {
      throw std::invalid_argument("rms_over_shifts: estimates live on different meshes");
    }
  }
  GridFunction mean(estimates.front().mesh);
  for (const auto& q : estimates) mean += q;
  mean *= 1.0 / static_cast<double>(R);
  const SparseOperator mass = assemble_mass(mean.mesh);
  double acc = 0.0;
  for (const auto& q : estimates) {
    const double d = l2_norm(mass, mean - q);
    acc += d * d;
  }
  return std::sqrt(acc / (static_cast<double>(R) * static_cast<double>(R - 1)));
}

AveragedFields averaged_fields(const ParametricSolveContext& ctx,
                               const std::vector<std::vector<double>>& nodes,
                               const GridFunction& z, const GridFunction& u0) {
  if (nodes.empty()) throw std::invalid_argument("averaged_fields: empty node set");
  GridFunction su(ctx.mesh());
  GridFunction sq(ctx.mesh());
  for (const auto& y : nodes) {
    const auto [u, q] = state_and_adjoint(ctx, y, z, u0);
    su += u;
    sq += q;
  }
  const double inv = 1.0 / static_cast<double>(nodes.size());
  su *= inv;
  sq *= inv;
  return {std::move(su), std::move(sq)};
}

GridFunction ramp_control(const Mesh& mesh) {
  return nodal_interpolant([](double, double x2) { return x2; }, mesh);
}

GridFunction saddle_target(const Mesh& mesh) {
  return nodal_interpolant([](double x1, double x2) { return x1 * x1 - x2 * x2; }, mesh);
}

namespace {

// In the convergence studies z and u0 are analytic data, and neither vanishes on the
// boundary. Feeding them in as zero-boundary nodal interpolants would misstate the
// loads over every boundary-adjacent cell (an O(1) data defect on an O(h) strip) and
// visibly flattens the coarse-level error decay. The L2 projections instead satisfy
// M p = load_moments(f) with the true data integrated over the whole domain, so the
// remaining data error is orthogonal to the P1 space.
GridFunction projected_source(const Mesh& mesh) {
  return l2_project([](double, double x2) { return x2; }, mesh);
}

GridFunction projected_target(const Mesh& mesh) {
  return l2_project([](double x1, double x2) { return x1 * x1 - x2 * x2; }, mesh);
}

}  // namespace

BoxBounds control_box_bounds(const Mesh& mesh) {
  const auto in_square = [](double t) { return (t >= 0.125 && t <= 0.375); };
  const auto in_square_hi = [](double t) { return (t >= 0.625 && t <= 0.875); };
  GridFunction lo = nodal_interpolant(
      [&](double x1, double x2) {
        const bool flat = (in_square(x1) || in_square_hi(x1)) && in_square_hi(x2);
        return flat ? 0.0 : -1.0;
      },
      mesh);
  GridFunction hi = nodal_interpolant(
      [&](double x1, double x2) {
        const bool flat = (in_square(x1) || in_square_hi(x1)) && in_square(x2);
        return flat ? 0.0 : 1.0;
      },
      mesh);
  return {std::move(lo), std::move(hi)};
}

ExperimentReport run_fe_error(const ExperimentConfig& cfg) {
  Stopwatch clock;
  if (cfg.level_list.empty()) throw std::invalid_argument("fe_error: empty level list");
  if (cfg.s == 0) throw std::invalid_argument("fe_error: s must be positive");
  const int max_level = *std::max_element(cfg.level_list.begin(), cfg.level_list.end());
  if (cfg.ref_level <= max_level) {
    throw std::invalid_argument("fe_error: reference level must exceed every study level");
  }

  const FrequencyTable freqs = enumerate_frequencies(cfg.theta, cfg.s);
  const CoefficientModel model = make_coefficient_model(1.0, freqs, cfg.s);
  const WeightSetup ws = make_weights(cfg, model);

  ExperimentReport rep;
  rep.abscissa_name = "h";
  rep.columns = {"state_error", "adjoint_error"};
  echo_common(rep, cfg, ws.p, ws.lambda);
  rep.metadata.emplace_back("s", fmt(cfg.s));
  rep.metadata.emplace_back("levels", join(cfg.level_list));
  rep.metadata.emplace_back("ref_level", std::to_string(cfg.ref_level));
  rep.metadata.emplace_back("variant", cfg.averaged ? "averaged" : "fixed_draw");
  rep.metadata.emplace_back("data_representation", "l2_projection");

  // Parameter draws: either one seeded point of [-1/2,1/2]^s or a shifted rule.
  std::vector<std::vector<double>> nodes;
  if (cfg.averaged) {
    const GeneratingVector gen = cbc_construct(cfg.n, cfg.s, ws.w);
    const ShiftSet shifts = random_shifts(1, cfg.s, cfg.seed);
    nodes = lattice_points(gen, cfg.n, shifts.shifts[0]);
    rep.metadata.emplace_back("n", fmt(cfg.n));
    rep.metadata.emplace_back("generator_hash",
                              fmt_hex(generator_hash(gen, ws.lambda, ws.p, cfg.theta)));
  } else {
    std::mt19937_64 rng(cfg.seed);
    std::vector<double> y(cfg.s);
    for (double& v : y) v = unit_double(rng) - 0.5;
    nodes.push_back(std::move(y));
    rep.metadata.emplace_back("generator_hash", "none");
  }

  const Mesh ref_mesh = build_mesh(cfg.ref_level);
  const ParametricSolveContext ref_ctx(ref_mesh, model);
  const AveragedFields ref =
      averaged_fields(ref_ctx, nodes, projected_source(ref_mesh), projected_target(ref_mesh));

  for (int level : cfg.level_list) {
    const Mesh mesh = build_mesh(level);
    const ParametricSolveContext ctx(mesh, model);
    const AveragedFields f =
        averaged_fields(ctx, nodes, projected_source(mesh), projected_target(mesh));
    const double eu = l2_norm(ref_ctx.mass(), prolongate(f.state, cfg.ref_level) - ref.state);
    const double eq =
        l2_norm(ref_ctx.mass(), prolongate(f.adjoint, cfg.ref_level) - ref.adjoint);
    rep.abscissae.push_back(mesh.h);
    rep.rows.push_back({eu, eq});
  }

  echo_rates(rep);
  rep.elapsed_seconds = clock.seconds();
  if (!cfg.output.empty()) write_report_csv(rep, cfg.output);
  return rep;
}

ExperimentReport run_trunc_error(const ExperimentConfig& cfg) {
  Stopwatch clock;
  if (cfg.s_list.empty()) throw std::invalid_argument("trunc_error: empty dimension list");
  if (cfg.s_ref == 0) throw std::invalid_argument("trunc_error: reference dimension is zero");
  for (std::size_t s : cfg.s_list) {
    if (s == 0 || s > cfg.s_ref) {
      throw std::invalid_argument(
          "trunc_error: study dimensions must lie in [1, reference dimension]");
    }
  }

  const FrequencyTable freqs = enumerate_frequencies(cfg.theta, cfg.s_ref);
  const CoefficientModel model = make_coefficient_model(1.0, freqs, cfg.s_ref);
  const WeightSetup ws = make_weights(cfg, model);
  const GeneratingVector gen = cbc_construct(cfg.n, cfg.s_ref, ws.w);
  const ShiftSet shifts = random_shifts(1, cfg.s_ref, cfg.seed);
  const std::vector<std::vector<double>> nodes = lattice_points(gen, cfg.n, shifts.shifts[0]);

  ExperimentReport rep;
  rep.abscissa_name = "s";
  rep.columns = {"state_error", "adjoint_error"};
  echo_common(rep, cfg, ws.p, ws.lambda);
  rep.metadata.emplace_back("s_list", join(cfg.s_list));
  rep.metadata.emplace_back("s_ref", fmt(cfg.s_ref));
  rep.metadata.emplace_back("data_representation", "l2_projection");
  rep.metadata.emplace_back("level", std::to_string(cfg.level));
  rep.metadata.emplace_back("n", fmt(cfg.n));
  rep.metadata.emplace_back("generator_hash",
                            fmt_hex(generator_hash(gen, ws.lambda, ws.p, cfg.theta)));

  const Mesh mesh = build_mesh(cfg.level);
  const ParametricSolveContext ctx(mesh, model);
  const GridFunction z = projected_source(mesh);
  const GridFunction u0 = projected_target(mesh);
  const AveragedFields ref = averaged_fields(ctx, nodes, z, u0);

  for (std::size_t s : cfg.s_list) {
    std::vector<std::vector<double>> truncated;
    truncated.reserve(nodes.size());
    for (const auto& y : nodes) {
      truncated.emplace_back(y.begin(), y.begin() + static_cast<std::ptrdiff_t>(s));
    }
    const AveragedFields f = averaged_fields(ctx, truncated, z, u0);
    rep.abscissae.push_back(static_cast<double>(s));
    rep.rows.push_back({l2_norm(ctx.mass(), f.state - ref.state),
                        l2_norm(ctx.mass(), f.adjoint - ref.adjoint)});
  }

  echo_rates(rep);
  rep.elapsed_seconds = clock.seconds();
  if (!cfg.output.empty()) write_report_csv(rep, cfg.output);
  return rep;
}

ExperimentReport run_qmc_error(const ExperimentConfig& cfg) {
  Stopwatch clock;
  if (cfg.m_list.empty()) throw std::invalid_argument("qmc_error: empty rule-size list");
  for (int m : cfg.m_list) {
    if (m < 1 || m > 30) throw std::invalid_argument("qmc_error: m out of range");
  }
  if (cfg.R < 2) throw std::invalid_argument("qmc_error: need at least two shifts");
  if (cfg.s == 0) throw std::invalid_argument("qmc_error: s must be positive");

  const FrequencyTable freqs = enumerate_frequencies(cfg.theta, cfg.s);
  const CoefficientModel model = make_coefficient_model(1.0, freqs, cfg.s);
  const WeightSetup ws = make_weights(cfg, model);
  const ShiftSet shifts = random_shifts(cfg.R, cfg.s, cfg.seed);

  ExperimentReport rep;
  rep.abscissa_name = "n";
  rep.columns = {"state_rms", "adjoint_rms"};
  echo_common(rep, cfg, ws.p, ws.lambda);
  rep.metadata.emplace_back("s", fmt(cfg.s));
  rep.metadata.emplace_back("level", std::to_string(cfg.level));
  rep.metadata.emplace_back("m_list", join(cfg.m_list));
  rep.metadata.emplace_back("R", fmt(cfg.R));
  rep.metadata.emplace_back("data_representation", "l2_projection");

  const Mesh mesh = build_mesh(cfg.level);
  const ParametricSolveContext ctx(mesh, model);
  const GridFunction z = projected_source(mesh);
  const GridFunction u0 = projected_target(mesh);

  for (int m : cfg.m_list) {
    const std::size_t n = std::size_t{1} << m;
    const GeneratingVector gen = cbc_construct(n, cfg.s, ws.w);
    rep.metadata.emplace_back("generator_hash_m" + std::to_string(m),
                              fmt_hex(generator_hash(gen, ws.lambda, ws.p, cfg.theta)));
    std::vector<GridFunction> states;
    std::vector<GridFunction> adjoints;
    states.reserve(cfg.R);
    adjoints.reserve(cfg.R);
    for (std::size_t r = 0; r < cfg.R; ++r) {
      AveragedFields f = averaged_fields(ctx, lattice_points(gen, n, shifts.shifts[r]), z, u0);
      states.push_back(std::move(f.state));
      adjoints.push_back(std::move(f.adjoint));
    }
    rep.abscissae.push_back(static_cast<double>(n));
    rep.rows.push_back({rms_over_shifts(states), rms_over_shifts(adjoints)});
  }

  echo_rates(rep);
  rep.elapsed_seconds = clock.seconds();
  if (!cfg.output.empty()) write_report_csv(rep, cfg.output);
  return rep;
}

OptimizeRun run_optimize(const ExperimentConfig& cfg) {
  Stopwatch clock;
  if (cfg.s == 0) throw std::invalid_argument("optimize: s must be positive");
  if (cfg.n == 0) throw std::invalid_argument("optimize: n must be positive");

  const FrequencyTable freqs = enumerate_frequencies(cfg.theta, cfg.s);
  const CoefficientModel model = make_coefficient_model(1.0, freqs, cfg.s);
  const WeightSetup ws = make_weights(cfg, model);
  const GeneratingVector gen = cbc_construct(cfg.n, cfg.s, ws.w);
  const ShiftSet shifts = random_shifts(1, cfg.s, cfg.seed);

  const Mesh mesh = build_mesh(cfg.level);
  const ParametricSolveContext ctx(mesh, model);
  const GridFunction u0 = saddle_target(mesh);
  GridFunction z0 = ramp_control(mesh);

  std::optional<BoxBounds> bounds;
  if (cfg.constrained) {
    bounds = control_box_bounds(mesh);
    z0 = project(z0, *bounds);
  }

  ControlProblem prob(ctx, u0, cfg.alpha, gen, shifts.shifts[0], cfg.n, bounds);
  DescentConfig dc;
  dc.tol = cfg.descent_tol;
  dc.max_iter = cfg.max_iter;
  const DescentResult res = cfg.constrained ? projected_gradient_descent(prob, z0, dc)
                                            : gradient_descent(prob, z0, dc);

  OptimizeRun out;
  out.descent = res;
  out.bounds = std::move(bounds);
  ExperimentReport& rep = out.report;
  rep.abscissa_name = "iter";
  rep.columns = {"J", "avg_sq_diff", "residual", "eta", "armijo_trials"};
  echo_common(rep, cfg, ws.p, ws.lambda);
  rep.metadata.emplace_back("s", fmt(cfg.s));
  rep.metadata.emplace_back("level", std::to_string(cfg.level));
  rep.metadata.emplace_back("n", fmt(cfg.n));
  rep.metadata.emplace_back("alpha", fmt(cfg.alpha));
  rep.metadata.emplace_back("target_representation", "nodal_interpolant");
  rep.metadata.emplace_back("constrained", cfg.constrained ? "1" : "0");
  rep.metadata.emplace_back("descent_tol", fmt(cfg.descent_tol));
  rep.metadata.emplace_back("max_iter", fmt(cfg.max_iter));
  rep.metadata.emplace_back("generator_hash",
                            fmt_hex(generator_hash(gen, ws.lambda, ws.p, cfg.theta)));
  rep.metadata.emplace_back("avg_sq_diff_definition",
                            "mean over lattice nodes of ||u - u0||_{L2}^2 (no 1/2 factor)");
  rep.metadata.emplace_back("converged", res.converged ? "1" : "0");
  rep.metadata.emplace_back("iterations", fmt(res.iterations));

  for (const TraceRow& row : res.trace) {
    rep.abscissae.push_back(static_cast<double>(row.iter));
    rep.rows.push_back({row.j, 2.0 * row.misfit, row.residual, row.eta,
                        static_cast<double>(row.armijo_trials)});
  }

  rep.elapsed_seconds = clock.seconds();
  if (!cfg.output.empty()) write_report_csv(rep, cfg.output);
  if (!cfg.control_output.empty()) export_grid_csv(res.z, cfg.control_output);
  return out;
}

void write_report_csv(const ExperimentReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_report_csv: cannot open " + path);
  for (const auto& [key, value] : report.metadata) {
    out << "# " << key << '=' << value << '\n';
  }
  out << report.abscissa_name;
  for (const auto& c : report.columns) out << ',' << c;
  out << '\n';
  for (std::size_t i = 0; i < report.rows.size(); ++i) {
    out << fmt(report.abscissae[i]);
    for (double v : report.rows[i]) out << ',' << fmt(v);
    out << '\n';
  }
  if (!out) throw std::runtime_error("write_report_csv: write failed for " + path);
}

}  // namespace qmcopt
