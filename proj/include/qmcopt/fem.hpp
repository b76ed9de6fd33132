#pragma once
// P1 finite elements on uniform right-triangle meshes of (0,1)^2 with homogeneous
// Dirichlet boundary (interior-only degrees of freedom). Mesh geometry is implicit:
// level k gives h = 2^-k, (2^k+1)^2 grid vertices, every cell split along the
// bottom-left -> top-right diagonal.

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

namespace qmcopt {

struct Mesh {
  int level = 1;
  int cells = 2;  // 2^level per side
  double h = 0.5;

  int nside() const { return cells + 1; }  // grid vertices per side
  std::size_t vertex_count() const {
    return static_cast<std::size_t>(nside()) * static_cast<std::size_t>(nside());
  }
  std::size_t interior_count() const {
    return static_cast<std::size_t>(cells - 1) * static_cast<std::size_t>(cells - 1);
  }
  std::size_t triangle_count() const {
    return 2u * static_cast<std::size_t>(cells) * static_cast<std::size_t>(cells);
  }
  // Interior dof index of grid vertex (i, j), or -1 on the boundary. Row-major in j.
  long interior_index(int i, int j) const {
    if (i <= 0 || j <= 0 || i >= cells || j >= cells) return -1;
    return static_cast<long>(j - 1) * (cells - 1) + (i - 1);
  }
  bool operator==(const Mesh& o) const { return level == o.level; }
  bool operator!=(const Mesh& o) const { return level != o.level; }
};

Mesh build_mesh(int level);  // 1 <= level <= 12 (memory guard)

struct GridFunction {
  Mesh mesh;
  std::vector<double> values;  // interior dofs, boundary implicitly zero

  GridFunction() = default;
  explicit GridFunction(const Mesh& m) : mesh(m), values(m.interior_count(), 0.0) {}

  GridFunction& operator+=(const GridFunction& o);
  GridFunction& operator-=(const GridFunction& o);
  GridFunction& operator*=(double c);
};

GridFunction operator+(GridFunction a, const GridFunction& b);
GridFunction operator-(GridFunction a, const GridFunction& b);
GridFunction operator*(double c, GridFunction a);

// Symmetric sparse matrix in CSR layout.
struct SparseOperator {
  std::size_t n = 0;
  std::vector<int> row_ptr;  // n+1 entries
  std::vector<int> col;
  std::vector<double> val;

  void apply(const double* x, double* y) const;
  std::vector<double> apply(const std::vector<double>& x) const;
};

// Stiffness with per-triangle centroid sampling of the coefficient:
//   A(i,j) = sum_T coeff(centroid_T) * int_T grad(phi_i).grad(phi_j).
// Throws if a coefficient sample is not positive.
SparseOperator assemble_stiffness(const Mesh& mesh,
                                  const std::function<double(double, double)>& coeff);

// Same, but with the coefficient given per triangle. Triangle t of cell (cx, cy) has
// index 2*(cy*cells + cx) + t, t = 0 for the lower-right triangle (diagonal split
// bottom-left -> top-right), t = 1 for the upper-left one. Centroids of the two
// triangles are (cx + 2/3, cy + 1/3)*h and (cx + 1/3, cy + 2/3)*h.
SparseOperator assemble_stiffness(const Mesh& mesh, const std::vector<double>& tri_coeff);

// Exact P1 mass matrix over interior dofs.
SparseOperator assemble_mass(const Mesh& mesh);
// Full mass matrix over all grid vertices (row-major grid indexing); used by the
// partition-of-unity checks, not by the solvers.
SparseOperator assemble_mass_full(const Mesh& mesh);

// Jacobi-preconditioned conjugate gradients. Returns v with ||A v - rhs|| <= tol*||rhs||
// (explicitly verified); throws on non-convergence. max_iter = 0 picks a default.
std::vector<double> solve_spd(const SparseOperator& A, const std::vector<double>& rhs,
                              double tol = 1e-10, std::size_t max_iter = 0);

// Banded Cholesky (LL^T) for the repeated-solve paths; same residual contract as CG.
class BandCholesky {
 public:
  BandCholesky() = default;
  static BandCholesky factor(const SparseOperator& A);  // throws if not SPD
  void solve(const double* b, double* x) const;
  std::vector<double> solve(const std::vector<double>& b) const;
  std::size_t n() const { return n_; }

 private:
  std::size_t n_ = 0;
  std::size_t bw_ = 0;
  std::vector<double> band_;  // band_[d * n_ + i] = L(i+d, i), d = 0..bw_
};

// Facade choosing direct (small bands) or CG (large) under one residual contract.
class SpdSolver {
 public:
  SpdSolver() = default;
  explicit SpdSolver(SparseOperator A, double tol = 1e-10);
  std::vector<double> solve(const std::vector<double>& rhs) const;
  bool direct() const { return direct_; }

 private:
  SparseOperator a_;
  BandCholesky chol_;
  bool direct_ = false;
  double tol_ = 1e-10;
};

// L2 inner products via the interior mass matrix.
double l2_inner(const SparseOperator& mass, const GridFunction& f, const GridFunction& g);
double l2_norm(const SparseOperator& mass, const GridFunction& f);
// Convenience overloads that assemble the mass matrix on the fly.
double l2_inner(const GridFunction& f, const GridFunction& g);
double l2_norm(const GridFunction& f);

// Exact piecewise-linear interpolation onto a finer nested mesh.
GridFunction prolongate(const GridFunction& f, int to_level);

GridFunction nodal_interpolant(const std::function<double(double, double)>& expr,
                               const Mesh& mesh);

// Load vector b_i = int_Omega f(x) phi_i(x) dx over interior dofs, computed with a
// degree-5 (7-point) triangle rule; exact for polynomial f up to total degree 4.
std::vector<double> load_moments(const std::function<double(double, double)>& f,
                                 const Mesh& mesh);

// L2-orthogonal projection of f onto the P1 space: solves M p = load_moments(f).
// Prefer this over nodal_interpolant when representing analytic data in convergence
// studies; it keeps the data error orthogonal to the space instead of adding an
// interpolation component with its own O(h^2) constant.
GridFunction l2_project(const std::function<double(double, double)>& f, const Mesh& mesh,
                        double tol = 1e-12);

// CSV rows (x1,x2,value) over all vertices including boundary zeros, row-major by grid index.
void export_grid_csv(const GridFunction& f, const std::string& path);

}  // namespace qmcopt
