// Command-line front end for the convergence studies and control runs.
//
// Subcommands: fe-error, trunc-error, qmc-error, optimize, cbc.  Every option
// can also come from an INI-style config file (--config) with one [section]
// per subcommand, e.g.
//
//   [qmc-error]
//   theta=1.5
//   m-list=7,8,9,10
//
// Each study writes a CSV report and prints the fitted rates; exit code is 0
// on success and 1 with a diagnostic on any validation or solver failure.

#include <cinttypes>
#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "qmcopt/experiments.hpp"

namespace {

using qmcopt::ExperimentConfig;
using qmcopt::ExperimentKind;
using qmcopt::ExperimentReport;

void add_weight_options(CLI::App* cmd, ExperimentConfig& cfg) {
  cmd->add_option("--theta", cfg.theta, "Decay exponent of the coefficient fluctuations")
      ->capture_default_str();
  cmd->add_option("--p", cfg.p, "Summability exponent for the weight design (0 = 1/theta)")
      ->capture_default_str();
  cmd->add_option("--delta", cfg.delta, "Rate-loss parameter of the lambda choice")
      ->capture_default_str();
  cmd->add_option("--seed", cfg.seed, "Seed for draws and random shifts")
      ->capture_default_str();
}

void print_rates(const ExperimentReport& rep) {
  for (const auto& [key, value] : rep.metadata) {
    if (key.rfind("fitted_rate_", 0) == 0) {
      std::printf("%s: %s\n", key.c_str(), value.c_str());
    }
  }
  std::printf("elapsed: %.2fs\n", rep.elapsed_seconds);
}

void report_written(const std::string& path) {
  if (!path.empty()) std::printf("wrote %s\n", path.c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lattice-rule quadrature studies for elliptic optimal control"};
  app.set_config("--config", "", "INI config file with one [section] per subcommand");
  app.require_subcommand(1);

  ExperimentConfig fe;
  fe.kind = ExperimentKind::fe_error;
  fe.level_list = {2, 3, 4, 5};
  fe.ref_level = 7;
  fe.s = 100;
  fe.n = 128;
  fe.output = "fe_error.csv";
  CLI::App* fe_cmd = app.add_subcommand("fe-error", "Mesh-refinement error study");
  add_weight_options(fe_cmd, fe);
  fe_cmd->add_option("--s", fe.s, "Parametric dimension")->capture_default_str();
  fe_cmd->add_option("--levels", fe.level_list, "Study mesh levels")
      ->delimiter(',')
      ->capture_default_str();
  fe_cmd->add_option("--ref-level", fe.ref_level, "Reference mesh level")
      ->capture_default_str();
  fe_cmd->add_flag("--averaged", fe.averaged, "Compare lattice-averaged fields");
  fe_cmd->add_option("--n", fe.n, "Lattice size for --averaged")->capture_default_str();
  fe_cmd->add_option("--output", fe.output, "Report CSV path")->capture_default_str();

  ExperimentConfig tr;
  tr.kind = ExperimentKind::trunc_error;
  tr.s_list = {2, 4, 8, 16, 32, 64, 128};
  tr.s_ref = 512;
  tr.level = 4;
  tr.n = 4096;
  tr.output = "trunc_error.csv";
  CLI::App* tr_cmd = app.add_subcommand("trunc-error", "Dimension-truncation error study");
  add_weight_options(tr_cmd, tr);
  tr_cmd->add_option("--s-list", tr.s_list, "Study dimensions")
      ->delimiter(',')
      ->capture_default_str();
  tr_cmd->add_option("--s-ref", tr.s_ref, "Reference dimension")->capture_default_str();
  tr_cmd->add_option("--level", tr.level, "Mesh level")->capture_default_str();
  tr_cmd->add_option("--n", tr.n, "Lattice size")->capture_default_str();
  tr_cmd->add_option("--output", tr.output, "Report CSV path")->capture_default_str();

  ExperimentConfig qm;
  qm.kind = ExperimentKind::qmc_error;
  qm.s = 100;
  qm.level = 4;
  qm.R = 8;
  qm.m_list = {7, 8, 9, 10, 11, 12};
  qm.output = "qmc_error.csv";
  CLI::App* qm_cmd = app.add_subcommand("qmc-error", "Shifted-lattice RMS error study");
  add_weight_options(qm_cmd, qm);
  qm_cmd->add_option("--s", qm.s, "Parametric dimension")->capture_default_str();
  qm_cmd->add_option("--level", qm.level, "Mesh level")->capture_default_str();
  qm_cmd->add_option("--m-list", qm.m_list, "Rule sizes as exponents (n = 2^m)")
      ->delimiter(',')
      ->capture_default_str();
  qm_cmd->add_option("--shifts", qm.R, "Number of random shifts")->capture_default_str();
  qm_cmd->add_option("--output", qm.output, "Report CSV path")->capture_default_str();

  ExperimentConfig op;
  op.kind = ExperimentKind::optimize;
  op.theta = 1.5;
  op.s = 50;
  op.level = 5;
  op.n = 256;
  op.alpha = 0.1;
  op.output = "optimize.csv";
  op.control_output = "control.csv";
  bool unconstrained = false;
  CLI::App* op_cmd = app.add_subcommand("optimize", "Projected gradient-descent control run");
  add_weight_options(op_cmd, op);
  op_cmd->add_option("--s", op.s, "Parametric dimension")->capture_default_str();
  op_cmd->add_option("--level", op.level, "Mesh level")->capture_default_str();
  op_cmd->add_option("--n", op.n, "Lattice size")->capture_default_str();
  op_cmd->add_option("--alpha", op.alpha, "Regularization weight")->capture_default_str();
  op_cmd->add_flag("--unconstrained", unconstrained, "Drop the box constraints");
  op_cmd->add_option("--tol", op.descent_tol, "Stationarity tolerance")
      ->capture_default_str();
  op_cmd->add_option("--max-iter", op.max_iter, "Iteration cap")->capture_default_str();
  op_cmd->add_option("--output", op.output, "Trace CSV path")->capture_default_str();
  op_cmd->add_option("--control-output", op.control_output, "Final control CSV path")
      ->capture_default_str();

  ExperimentConfig cb;
  cb.theta = 2.0;
  cb.s = 100;
  cb.n = 4096;
  std::string cb_output = "lattice_vector.txt";
  CLI::App* cb_cmd =
      app.add_subcommand("cbc", "Construct a generating vector and save it to a file");
  add_weight_options(cb_cmd, cb);
  cb_cmd->add_option("--s", cb.s, "Number of components")->capture_default_str();
  cb_cmd->add_option("--n", cb.n, "Number of lattice points (power of two)")
      ->capture_default_str();
  cb_cmd->add_option("--output", cb_output, "Vector file path")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*fe_cmd) {
      const ExperimentReport rep = qmcopt::run_fe_error(fe);
      report_written(fe.output);
      print_rates(rep);
    } else if (*tr_cmd) {
      const ExperimentReport rep = qmcopt::run_trunc_error(tr);
      report_written(tr.output);
      print_rates(rep);
    } else if (*qm_cmd) {
      const ExperimentReport rep = qmcopt::run_qmc_error(qm);
      report_written(qm.output);
      print_rates(rep);
    } else if (*op_cmd) {
      op.constrained = !unconstrained;
      const qmcopt::OptimizeRun run = qmcopt::run_optimize(op);
      report_written(op.output);
      report_written(op.control_output);
      std::printf("converged: %s after %zu iterations, final J = %.6g\n",
                  run.descent.converged ? "yes" : "no", run.descent.iterations,
                  run.report.rows.back()[0]);
      std::printf("elapsed: %.2fs\n", run.report.elapsed_seconds);
    } else if (*cb_cmd) {
      if (cb.theta <= 1.0) throw std::invalid_argument("cbc: theta must exceed 1");
      const double p = cb.p > 0.0 ? cb.p : 1.0 / cb.theta;
      const double lambda = qmcopt::choose_lambda(p, cb.delta);
      const qmcopt::CoefficientModel model = qmcopt::make_coefficient_model(
          1.0, qmcopt::enumerate_frequencies(cb.theta, cb.s), cb.s);
      const qmcopt::WeightSpec w = qmcopt::pod_weights(model.b, lambda, cb.s, p, cb.delta);
      std::vector<double> prefix;
      const qmcopt::GeneratingVector gen = qmcopt::cbc_construct(
          cb.n, cb.s, w, qmcopt::CbcMethod::fast, &prefix);
      qmcopt::save_generating_vector(cb_output, gen, lambda, p, cb.theta);
      const std::uint64_t hash = qmcopt::fnv1a64(
          qmcopt::serialize_generating_vector(gen, lambda, p, cb.theta));
      std::printf("wrote %s (n=%zu, s=%zu, wce=%.6e, hash=%016" PRIx64 ")\n",
                  cb_output.c_str(), cb.n, cb.s, std::sqrt(prefix.back()), hash);
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
