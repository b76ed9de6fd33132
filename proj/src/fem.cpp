#include "qmcopt/fem.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace qmcopt {

namespace {

void check_same_mesh(const Mesh& a, const Mesh& b, const char* what) {
  if (a != b) throw std::invalid_argument(std::string(what) + ": mesh level mismatch");
}

// Stable COO -> CSR with duplicate accumulation. Insertion order is preserved within
// equal (row, col) runs so that symmetric contribution sequences compress to bitwise
// symmetric matrices.
SparseOperator compress(std::size_t n, const std::vector<int>& rows, const std::vector<int>& cols,
                        const std::vector<double>& vals) {
  SparseOperator A;
  A.n = n;
  std::vector<int> count(n, 0);
  for (int r : rows) ++count[static_cast<std::size_t>(r)];
  std::vector<std::size_t> start(n + 1, 0);
  for (std::size_t i = 0; i < n; ++i) start[i + 1] = start[i] + static_cast<std::size_t>(count[i]);
  std::vector<std::pair<int, double>> scratch(rows.size());
  {
    std::vector<std::size_t> fill(start.begin(), start.end() - 1);
    for (std::size_t t = 0; t < rows.size(); ++t) {
      scratch[fill[static_cast<std::size_t>(rows[t])]++] = {cols[t], vals[t]};
    }
  }
  A.row_ptr.assign(n + 1, 0);
  for (std::size_t r = 0; r < n; ++r) {
    auto first = scratch.begin() + static_cast<std::ptrdiff_t>(start[r]);
    auto last = scratch.begin() + static_cast<std::ptrdiff_t>(start[r + 1]);
    std::stable_sort(first, last,
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    for (auto it = first; it != last;) {
      int c = it->first;
      double sum = 0.0;
      while (it != last && it->first == c) {
        sum += it->second;
        ++it;
      }
      A.col.push_back(c);
      A.val.push_back(sum);
    }
    A.row_ptr[r + 1] = static_cast<int>(A.col.size());
  }
  return A;
}

struct Tri {
  // Grid coordinates of the three vertices.
  int gi[3];
  int gj[3];
};

// The two triangles of cell (cx, cy); diagonal from (cx,cy) to (cx+1,cy+1).
inline void cell_triangles(int cx, int cy, Tri& t1, Tri& t2) {
  t1 = {{cx, cx + 1, cx + 1}, {cy, cy, cy + 1}};
  t2 = {{cx, cx + 1, cx}, {cy, cy + 1, cy + 1}};
}

}  // namespace

Mesh build_mesh(int level) {
  if (level < 1 || level > 12) throw std::invalid_argument("build_mesh: level out of range [1,12]");
  Mesh m;
  m.level = level;
  m.cells = 1 << level;
  m.h = std::ldexp(1.0, -level);
  return m;
}

GridFunction& GridFunction::operator+=(const GridFunction& o) {
  check_same_mesh(mesh, o.mesh, "GridFunction+=");
  for (std::size_t i = 0; i < values.size(); ++i) values[i] += o.values[i];
  return *this;
}
GridFunction& GridFunction::operator-=(const GridFunction& o) {
  check_same_mesh(mesh, o.mesh, "GridFunction-=");
  for (std::size_t i = 0; i < values.size(); ++i) values[i] -= o.values[i];
  return *this;
}
GridFunction& GridFunction::operator*=(double c) {
  for (double& v : values) v *= c;
  return *this;
}
GridFunction operator+(GridFunction a, const GridFunction& b) { return a += b; }
GridFunction operator-(GridFunction a, const GridFunction& b) { return a -= b; }
GridFunction operator*(double c, GridFunction a) { return a *= c; }

void SparseOperator::apply(const double* x, double* y) const {
  for (std::size_t r = 0; r < n; ++r) {
    double acc = 0.0;
    for (int p = row_ptr[r]; p < row_ptr[r + 1]; ++p) {
      acc += val[static_cast<std::size_t>(p)] * x[col[static_cast<std::size_t>(p)]];
    }
    y[r] = acc;
  }
}

std::vector<double> SparseOperator::apply(const std::vector<double>& x) const {
  if (x.size() != n) throw std::invalid_argument("SparseOperator::apply: size mismatch");
  std::vector<double> y(n);
  apply(x.data(), y.data());
  return y;
}

namespace {

template <class CoeffAt>
SparseOperator assemble_stiffness_impl(const Mesh& mesh, CoeffAt&& coeff_at) {
  const double h = mesh.h;
  std::vector<int> rows, cols;
  std::vector<double> vals;
  rows.reserve(mesh.triangle_count() * 9);
  cols.reserve(mesh.triangle_count() * 9);
  vals.reserve(mesh.triangle_count() * 9);

  std::size_t tindex = 0;
  Tri tris[2];
  for (int cy = 0; cy < mesh.cells; ++cy) {
    for (int cx = 0; cx < mesh.cells; ++cx) {
      cell_triangles(cx, cy, tris[0], tris[1]);
      for (const Tri& t : tris) {
        double x[3], y[3];
        long dof[3];
        for (int v = 0; v < 3; ++v) {
          x[v] = t.gi[v] * h;
          y[v] = t.gj[v] * h;
          dof[v] = mesh.interior_index(t.gi[v], t.gj[v]);
        }
        const double cx0 = (x[0] + x[1] + x[2]) / 3.0;
        const double cy0 = (y[0] + y[1] + y[2]) / 3.0;
        const double a = coeff_at(tindex++, cx0, cy0);
        if (!(a > 0.0)) {
          throw std::runtime_error("assemble_stiffness: non-positive coefficient sample");
        }
        const double b[3] = {y[1] - y[2], y[2] - y[0], y[0] - y[1]};
        const double c[3] = {x[2] - x[1], x[0] - x[2], x[1] - x[0]};
        const double area2 = (x[1] - x[0]) * (y[2] - y[0]) - (x[2] - x[0]) * (y[1] - y[0]);
        const double scale = a / (2.0 * area2);  // a / (4 * area)
        double K[3][3];
        for (int r = 0; r < 3; ++r) {
          for (int cidx = 0; cidx <= r; ++cidx) {
            K[r][cidx] = scale * (b[r] * b[cidx] + c[r] * c[cidx]);
            K[cidx][r] = K[r][cidx];
          }
        }
        for (int r = 0; r < 3; ++r) {
          if (dof[r] < 0) continue;
          for (int cidx = 0; cidx < 3; ++cidx) {
            if (dof[cidx] < 0) continue;
            rows.push_back(static_cast<int>(dof[r]));
            cols.push_back(static_cast<int>(dof[cidx]));
            vals.push_back(K[r][cidx]);
          }
        }
      }
    }
  }
  return compress(mesh.interior_count(), rows, cols, vals);
}

}  // namespace

SparseOperator assemble_stiffness(const Mesh& mesh,
                                  const std::function<double(double, double)>& coeff) {
  return assemble_stiffness_impl(
      mesh, [&](std::size_t, double x, double y) { return coeff(x, y); });
}

SparseOperator assemble_stiffness(const Mesh& mesh, const std::vector<double>& tri_coeff) {
  if (tri_coeff.size() != mesh.triangle_count()) {
    throw std::invalid_argument("assemble_stiffness: triangle coefficient size mismatch");
  }
  return assemble_stiffness_impl(
      mesh, [&](std::size_t t, double, double) { return tri_coeff[t]; });
}

namespace {

SparseOperator assemble_mass_impl(const Mesh& mesh, bool full) {
  const double h = mesh.h;
  const double a12 = h * h / 24.0;  // area/12 with area = h^2/2
  const int ns = mesh.nside();
  const std::size_t n = full ? mesh.vertex_count() : mesh.interior_count();
  std::vector<int> rows, cols;
  std::vector<double> vals;
  rows.reserve(mesh.triangle_count() * 9);
  cols.reserve(mesh.triangle_count() * 9);
  vals.reserve(mesh.triangle_count() * 9);

  Tri tris[2];
  for (int cy = 0; cy < mesh.cells; ++cy) {
    for (int cx = 0; cx < mesh.cells; ++cx) {
      cell_triangles(cx, cy, tris[0], tris[1]);
      for (const Tri& t : tris) {
        long dof[3];
        for (int v = 0; v < 3; ++v) {
          dof[v] = full ? static_cast<long>(t.gj[v]) * ns + t.gi[v]
                        : mesh.interior_index(t.gi[v], t.gj[v]);
        }
        for (int r = 0; r < 3; ++r) {
          if (dof[r] < 0) continue;
          for (int cidx = 0; cidx < 3; ++cidx) {
            if (dof[cidx] < 0) continue;
            rows.push_back(static_cast<int>(dof[r]));
            cols.push_back(static_cast<int>(dof[cidx]));
            vals.push_back(r == cidx ? 2.0 * a12 : a12);
          }
        }
      }
    }
  }
  return compress(n, rows, cols, vals);
}

}  // namespace

SparseOperator assemble_mass(const Mesh& mesh) { return assemble_mass_impl(mesh, false); }
SparseOperator assemble_mass_full(const Mesh& mesh) { return assemble_mass_impl(mesh, true); }

std::vector<double> solve_spd(const SparseOperator& A, const std::vector<double>& rhs, double tol,
                              std::size_t max_iter) {
  const std::size_t n = A.n;
  if (rhs.size() != n) throw std::invalid_argument("solve_spd: size mismatch");
  if (max_iter == 0) max_iter = 20 * n + 200;

  double bnorm2 = 0.0;
  for (double v : rhs) bnorm2 += v * v;
  std::vector<double> x(n, 0.0);
  if (bnorm2 == 0.0) return x;
  const double target = tol * std::sqrt(bnorm2);

  std::vector<double> diag(n);
  for (std::size_t r = 0; r < n; ++r) {
    double d = 0.0;
    for (int p = A.row_ptr[r]; p < A.row_ptr[r + 1]; ++p) {
      if (A.col[static_cast<std::size_t>(p)] == static_cast<int>(r)) {
        d = A.val[static_cast<std::size_t>(p)];
      }
    }
    if (!(d > 0.0)) throw std::runtime_error("solve_spd: non-positive diagonal");
    diag[r] = d;
  }

  std::vector<double> r(rhs), z(n), p(n), q(n);
  std::size_t iters = 0;
  for (int restart = 0; restart < 3; ++restart) {
    // (Re)initialize from the true residual.
    if (restart > 0) {
      A.apply(x.data(), q.data());
      for (std::size_t i = 0; i < n; ++i) r[i] = rhs[i] - q[i];
    }
    for (std::size_t i = 0; i < n; ++i) z[i] = r[i] / diag[i];
    p = z;
    double rz = std::inner_product(r.begin(), r.end(), z.begin(), 0.0);
    while (iters < max_iter) {
      double rnorm = std::sqrt(std::inner_product(r.begin(), r.end(), r.begin(), 0.0));
      if (rnorm <= 0.25 * target) break;
      A.apply(p.data(), q.data());
      const double pq = std::inner_product(p.begin(), p.end(), q.begin(), 0.0);
      if (!(pq > 0.0)) throw std::runtime_error("solve_spd: operator not positive definite");
      const double alpha = rz / pq;
      for (std::size_t i = 0; i < n; ++i) x[i] += alpha * p[i];
      for (std::size_t i = 0; i < n; ++i) r[i] -= alpha * q[i];
      for (std::size_t i = 0; i < n; ++i) z[i] = r[i] / diag[i];
      const double rz_new = std::inner_product(r.begin(), r.end(), z.begin(), 0.0);
      const double beta = rz_new / rz;
      rz = rz_new;
      for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
      ++iters;
    }
    // Verify the contract on the explicit residual.
    A.apply(x.data(), q.data());
    double res2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = rhs[i] - q[i];
      res2 += d * d;
    }
    if (std::sqrt(res2) <= target) return x;
    if (iters >= max_iter) break;
  }
  throw std::runtime_error("solve_spd: no convergence within max_iter");
}

BandCholesky BandCholesky::factor(const SparseOperator& A) {
  BandCholesky f;
  f.n_ = A.n;
  std::size_t bw = 0;
  for (std::size_t r = 0; r < A.n; ++r) {
    for (int p = A.row_ptr[r]; p < A.row_ptr[r + 1]; ++p) {
      const long d = static_cast<long>(r) - A.col[static_cast<std::size_t>(p)];
      if (d > 0 && static_cast<std::size_t>(d) > bw) bw = static_cast<std::size_t>(d);
    }
  }
  f.bw_ = bw;
  f.band_.assign((bw + 1) * A.n, 0.0);
  // Load lower band: band_[d*n + j] = A(j+d, j).
  for (std::size_t r = 0; r < A.n; ++r) {
    for (int p = A.row_ptr[r]; p < A.row_ptr[r + 1]; ++p) {
      const int c = A.col[static_cast<std::size_t>(p)];
      if (c <= static_cast<int>(r)) {
        f.band_[(r - static_cast<std::size_t>(c)) * A.n + static_cast<std::size_t>(c)] =
            A.val[static_cast<std::size_t>(p)];
      }
    }
  }
  const std::size_t n = f.n_;
  auto L = [&](std::size_t i, std::size_t j) -> double& { return f.band_[(i - j) * n + j]; };
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t k0 = (j > bw) ? j - bw : 0;
    double t = L(j, j);
    for (std::size_t k = k0; k < j; ++k) t -= L(j, k) * L(j, k);
    if (!(t > 0.0)) throw std::runtime_error("BandCholesky: matrix not positive definite");
    const double ljj = std::sqrt(t);
    L(j, j) = ljj;
    const std::size_t imax = std::min(j + bw, n - 1);
    for (std::size_t i = j + 1; i <= imax; ++i) {
      const std::size_t ik0 = (i > bw) ? i - bw : 0;
      double s = L(i, j);
      for (std::size_t k = std::max(k0, ik0); k < j; ++k) s -= L(i, k) * L(j, k);
      L(i, j) = s / ljj;
    }
  }
  return f;
}

void BandCholesky::solve(const double* b, double* x) const {
  const std::size_t n = n_, bw = bw_;
  auto L = [&](std::size_t i, std::size_t j) -> double { return band_[(i - j) * n + j]; };
  // Forward: L y = b
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t k0 = (i > bw) ? i - bw : 0;
    double t = b[i];
    for (std::size_t k = k0; k < i; ++k) t -= L(i, k) * x[k];
    x[i] = t / L(i, i);
  }
  // Backward: L^T x = y
  for (std::size_t ii = n; ii-- > 0;) {
    const std::size_t kmax = std::min(ii + bw, n - 1);
    double t = x[ii];
    for (std::size_t k = ii + 1; k <= kmax; ++k) t -= L(k, ii) * x[k];
    x[ii] = t / L(ii, ii);
  }
}

std::vector<double> BandCholesky::solve(const std::vector<double>& b) const {
  if (b.size() != n_) throw std::invalid_argument("BandCholesky::solve: size mismatch");
  std::vector<double> x(n_);
  solve(b.data(), x.data());
  return x;
}

SpdSolver::SpdSolver(SparseOperator A, double tol) : a_(std::move(A)), tol_(tol) {
  std::size_t bw = 0;
  for (std::size_t r = 0; r < a_.n; ++r) {
    for (int p = a_.row_ptr[r]; p < a_.row_ptr[r + 1]; ++p) {
      const long d = static_cast<long>(r) - a_.col[static_cast<std::size_t>(p)];
      if (d > 0 && static_cast<std::size_t>(d) > bw) bw = static_cast<std::size_t>(d);
    }
  }
  direct_ = (bw + 1) * a_.n <= 4'000'000;  // band storage guard (~32 MB)
  if (direct_) chol_ = BandCholesky::factor(a_);
}

std::vector<double> SpdSolver::solve(const std::vector<double>& rhs) const {
  if (!direct_) return solve_spd(a_, rhs, tol_);
  std::vector<double> x = chol_.solve(rhs);
  // Residual contract check; fall back to CG polish in the (unexpected) failure case.
  std::vector<double> ax = a_.apply(x);
  double r2 = 0.0, b2 = 0.0;
  for (std::size_t i = 0; i < rhs.size(); ++i) {
    const double d = rhs[i] - ax[i];
    r2 += d * d;
    b2 += rhs[i] * rhs[i];
  }
  if (r2 > tol_ * tol_ * b2) return solve_spd(a_, rhs, tol_);
  return x;
}

double l2_inner(const SparseOperator& mass, const GridFunction& f, const GridFunction& g) {
  check_same_mesh(f.mesh, g.mesh, "l2_inner");
  if (mass.n != f.values.size()) throw std::invalid_argument("l2_inner: mass size mismatch");
  std::vector<double> mg = mass.apply(g.values);
  return std::inner_product(f.values.begin(), f.values.end(), mg.begin(), 0.0);
}

double l2_norm(const SparseOperator& mass, const GridFunction& f) {
  const double q = l2_inner(mass, f, f);
  return q > 0.0 ? std::sqrt(q) : 0.0;
}

double l2_inner(const GridFunction& f, const GridFunction& g) {
  return l2_inner(assemble_mass(f.mesh), f, g);
}

double l2_norm(const GridFunction& f) { return l2_norm(assemble_mass(f.mesh), f); }

GridFunction prolongate(const GridFunction& f, int to_level) {
  if (to_level < f.mesh.level) throw std::invalid_argument("prolongate: target level coarser");
  if (f.values.size() != f.mesh.interior_count()) {
    throw std::invalid_argument("prolongate: malformed grid function");
  }
  GridFunction cur = f;
  while (cur.mesh.level < to_level) {
    const Mesh& cm = cur.mesh;
    const Mesh fm = build_mesh(cm.level + 1);
    const int cn = cm.nside(), fn = fm.nside();
    // Expand to the full coarse grid (boundary zeros), refine, restrict to interior.
    std::vector<double> C(static_cast<std::size_t>(cn) * cn, 0.0);
    for (int j = 1; j < cm.cells; ++j) {
      for (int i = 1; i < cm.cells; ++i) {
        C[static_cast<std::size_t>(j) * cn + i] =
            cur.values[static_cast<std::size_t>(cm.interior_index(i, j))];
      }
    }
    auto cat = [&](int i, int j) { return C[static_cast<std::size_t>(j) * cn + i]; };
    std::vector<double> F(static_cast<std::size_t>(fn) * fn, 0.0);
    for (int j = 0; j < fn; ++j) {
      for (int i = 0; i < fn; ++i) {
        double v;
        const bool oi = i & 1, oj = j & 1;
        if (!oi && !oj) {
          v = cat(i / 2, j / 2);
        } else if (oi && !oj) {
          v = 0.5 * (cat(i / 2, j / 2) + cat(i / 2 + 1, j / 2));
        } else if (!oi && oj) {
          v = 0.5 * (cat(i / 2, j / 2) + cat(i / 2, j / 2 + 1));
        } else {
          // Cell center sits on the bottom-left -> top-right diagonal.
          v = 0.5 * (cat(i / 2, j / 2) + cat(i / 2 + 1, j / 2 + 1));
        }
        F[static_cast<std::size_t>(j) * fn + i] = v;
      }
    }
    GridFunction next(fm);
    for (int j = 1; j < fm.cells; ++j) {
      for (int i = 1; i < fm.cells; ++i) {
        next.values[static_cast<std::size_t>(fm.interior_index(i, j))] =
            F[static_cast<std::size_t>(j) * fn + i];
      }
    }
    cur = std::move(next);
  }
  return cur;
}

GridFunction nodal_interpolant(const std::function<double(double, double)>& expr,
                               const Mesh& mesh) {
  GridFunction f(mesh);
  for (int j = 1; j < mesh.cells; ++j) {
    for (int i = 1; i < mesh.cells; ++i) {
      const double v = expr(i * mesh.h, j * mesh.h);
      if (!std::isfinite(v)) throw std::invalid_argument("nodal_interpolant: non-finite value");
      f.values[static_cast<std::size_t>(mesh.interior_index(i, j))] = v;
    }
  }
  return f;
}

std::vector<double> load_moments(const std::function<double(double, double)>& f,
                                 const Mesh& mesh) {
  // Degree-5 rule of Radon: centroid plus two symmetric orbits, barycentric coordinates.
  static const double qw[7] = {0.225,
                               0.132394152788506, 0.132394152788506, 0.132394152788506,
                               0.125939180544827, 0.125939180544827, 0.125939180544827};
  static const double ql[7][3] = {
      {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0},
      {0.059715871789770, 0.470142064105115, 0.470142064105115},
      {0.470142064105115, 0.059715871789770, 0.470142064105115},
      {0.470142064105115, 0.470142064105115, 0.059715871789770},
      {0.797426985353087, 0.101286507323456, 0.101286507323456},
      {0.101286507323456, 0.797426985353087, 0.101286507323456},
      {0.101286507323456, 0.101286507323456, 0.797426985353087}};
  const int c = mesh.cells;
  const double h = mesh.h;
  const double area = 0.5 * h * h;
  std::vector<double> b(mesh.interior_count(), 0.0);
  for (int cy = 0; cy < c; ++cy) {
    for (int cx = 0; cx < c; ++cx) {
      // Same vertex order as assemble_stiffness: t = 0 lower-right, t = 1 upper-left.
      const int vx[2][3] = {{cx, cx + 1, cx + 1}, {cx, cx + 1, cx}};
      const int vy[2][3] = {{cy, cy, cy + 1}, {cy, cy + 1, cy + 1}};
      for (int t = 0; t < 2; ++t) {
        for (int q = 0; q < 7; ++q) {
          double x1 = 0.0, x2 = 0.0;
          for (int k = 0; k < 3; ++k) {
            x1 += ql[q][k] * vx[t][k] * h;
            x2 += ql[q][k] * vy[t][k] * h;
          }
          const double v = f(x1, x2);
          if (!std::isfinite(v)) throw std::invalid_argument("load_moments: non-finite value");
          for (int k = 0; k < 3; ++k) {
            const long d = mesh.interior_index(vx[t][k], vy[t][k]);
            if (d >= 0) b[static_cast<std::size_t>(d)] += area * qw[q] * ql[q][k] * v;
          }
        }
      }
    }
  }
  return b;
}

GridFunction l2_project(const std::function<double(double, double)>& f, const Mesh& mesh,
                        double tol) {
  const SpdSolver mass(assemble_mass(mesh), tol);
  GridFunction p(mesh);
  p.values = mass.solve(load_moments(f, mesh));
  return p;
}

void export_grid_csv(const GridFunction& f, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("export_grid_csv: cannot open " + path);
  out << "x1,x2,value\n";
  const Mesh& m = f.mesh;
  char buf[96];
  for (int j = 0; j < m.nside(); ++j) {
    for (int i = 0; i < m.nside(); ++i) {
      const long d = m.interior_index(i, j);
      const double v = d >= 0 ? f.values[static_cast<std::size_t>(d)] : 0.0;
      std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g", i * m.h, j * m.h, v);
      out << buf << '\n';
    }
  }
}

}  // namespace qmcopt
