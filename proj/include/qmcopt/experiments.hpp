#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qmcopt/fem.hpp"
#include "qmcopt/field.hpp"
#include "qmcopt/lattice.hpp"
#include "qmcopt/optimize.hpp"
#include "qmcopt/pde.hpp"

namespace qmcopt {

enum class ExperimentKind { fe_error, trunc_error, qmc_error, optimize };

// Settings shared by the convergence studies and the control runs.  Defaults
// are desk-scale; the full-size runs are reachable by overriding them.
struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::fe_error;

  double theta = 2.0;  // decay exponent of the coefficient fluctuations
  double p = 0.0;      // summability exponent for the weight design; 0 = use 1/theta
  double delta = 0.05; // rate-loss parameter of the lambda choice

  std::size_t s = 100;              // parametric dimension (single-dimension studies)
  std::vector<std::size_t> s_list;  // truncation study: dimensions to compare
  std::size_t s_ref = 512;          // truncation study: reference dimension

  int level = 4;                // mesh level (single-level studies)
  std::vector<int> level_list;  // refinement study: levels to compare
  int ref_level = 7;            // refinement study: reference level

  std::size_t n = 256;      // lattice size (single-rule studies)
  std::vector<int> m_list;  // lattice study: one rule of size 2^m per entry
  std::size_t R = 8;        // number of random shifts (lattice study)
  std::uint64_t seed = 1;

  bool averaged = false;  // refinement study: compare lattice-averaged fields

  double alpha = 0.01;       // control regularization weight
  bool constrained = true;   // control run: use the box-constrained descent
  double descent_tol = 1e-5;
  std::size_t max_iter = 5000;

  std::string output;          // report CSV path ("" = do not write)
  std::string control_output;  // control run: final control CSV path ("" = skip)
};

// Tabular result of one experiment: an abscissa column plus named value
// columns, with an ordered key=value metadata block echoed into the CSV.
// elapsed_seconds is kept out of the metadata so identical configs produce
// bit-identical files.
struct ExperimentReport {
  std::string abscissa_name;
  std::vector<std::string> columns;
  std::vector<double> abscissae;
  std::vector<std::vector<double>> rows;  // rows[i][c] pairs with abscissae[i]
  std::vector<std::pair<std::string, std::string>> metadata;
  double elapsed_seconds = 0.0;

  // Least-squares slope of log2(rows[.][column]) against log2(abscissa).
  // Requires at least two rows and strictly positive values.
  double fitted_rate(std::size_t column) const;
};

// Least-squares slope of log2(values) against log2(abscissae).
double fit_rate(const std::vector<double>& abscissae, const std::vector<double>& values);

// sqrt( 1/(R(R-1)) * sum_r ||Qbar - Q_r||^2_{L2} ) with Qbar the mean field.
// Requires R >= 2 estimates on a common mesh.
double rms_over_shifts(const std::vector<GridFunction>& estimates);

// Mean state and mean adjoint over a set of parameter nodes.
struct AveragedFields {
  GridFunction state;
  GridFunction adjoint;
};
AveragedFields averaged_fields(const ParametricSolveContext& ctx,
                               const std::vector<std::vector<double>>& nodes,
                               const GridFunction& z, const GridFunction& u0);

// Nodal interpolants of the study's source and tracking profiles.
GridFunction ramp_control(const Mesh& mesh);   // z(x) = x2
GridFunction saddle_target(const Mesh& mesh);  // u0(x) = x1^2 - x2^2

// Piecewise-constant box profile of the constrained control study: the lower
// bound is -1 except on two sub-squares of the upper half where it is 0, and
// the upper bound is +1 except on two sub-squares of the lower half where it
// is 0 (closed squares [1/8,3/8] and [5/8,7/8] in each coordinate).
BoxBounds control_box_bounds(const Mesh& mesh);

// Refinement study: errors of the state/adjoint fields on each study level
// against a prolongated reference-level solve, either for one seeded
// parameter draw or (averaged=true) for lattice-averaged fields.
ExperimentReport run_fe_error(const ExperimentConfig& cfg);

// Truncation study: one rule constructed at the reference dimension; each
// study dimension reuses the same points with the trailing coordinates
// dropped, so the quadrature error cancels in the comparison.
ExperimentReport run_trunc_error(const ExperimentConfig& cfg);

// Lattice study: for each rule size, the shift-to-shift RMS of the averaged
// state and adjoint fields over R independent random shifts.
ExperimentReport run_qmc_error(const ExperimentConfig& cfg);

// Control run: projected (or free) gradient descent from the ramp initial
// guess; the report carries one row per iterate.  The avg_sq_diff column is
// the mean over lattice nodes of the squared L2 distance between state and
// target, without the 1/2 factor of the objective.
struct OptimizeRun {
  ExperimentReport report;
  DescentResult descent;
  std::optional<BoxBounds> bounds;
};
OptimizeRun run_optimize(const ExperimentConfig& cfg);

// CSV layout: "# key=value" metadata lines, a header row, then data rows.
void write_report_csv(const ExperimentReport& report, const std::string& path);

}  // namespace qmcopt
