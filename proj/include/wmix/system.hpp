#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>
#include <cmath>
#include <iostream>
#include <map>
#include <ostream>
#include <stdexcept>
#include <vector>

#include "wmix/femcore.hpp"

namespace wmix {

/// Essential flux data: facet id -> prescribed net flux in the global
/// normal direction. Ordered map keeps assembly deterministic.
using FixedDofs = std::map<int, double>;

/// Essential Neumann data for the bottom boundary: the general problem
/// prescribes sigma . n_out = f on Gamma_N with n_out the outward normal.
/// At y = 0 the outward normal is -e_y while facet DOFs measure flux in the
/// +y direction, so the prescribed net flux is -int_F f.
inline FixedDofs neumann_face_data(const ScalarField& f, const TensorMesh& mesh,
                                   int quad_order = 8) {
  FixedDofs fixed;
  const Quad1D gl = gauss_legendre(quad_order);
  static const TriQuad tq = triangle_quad(4);
  for (int i = 0; i < mesh.n_facets(); ++i) {
    const auto& fc = mesh.facets[i];
    if (fc.tag != FacetTag::GammaN) continue;
    double val = 0.0;
    if (mesh.dim_base == 1) {
      const double x0 = mesh.x_breaks[fc.base_id], x1 = mesh.x_breaks[fc.base_id + 1];
      for (int q = 0; q < quad_order; ++q) {
        const double x = 0.5 * (x0 + x1) + 0.5 * (x1 - x0) * gl.nodes[q];
        val += 0.5 * (x1 - x0) * gl.weights[q] * f(Point{x, 0.0, 0.0});
      }
    } else {
      const auto& tri = mesh.base.triangles[fc.base_id];
      const auto& a = mesh.base.vertices[tri[0]];
      const auto& b = mesh.base.vertices[tri[1]];
      const auto& c = mesh.base.vertices[tri[2]];
      for (std::size_t q = 0; q < tq.points.size(); ++q) {
        const double x1c =
            a.x1 + (b.x1 - a.x1) * tq.points[q].x1 + (c.x1 - a.x1) * tq.points[q].x2;
        const double x2c =
            a.x2 + (b.x2 - a.x2) * tq.points[q].x1 + (c.x2 - a.x2) * tq.points[q].x2;
        val += tq.weights[q] * 2.0 * fc.area * f(Point{x1c, x2c, 0.0});
      }
    }
    fixed[i] = -val;
  }
  return fixed;
}

/// Assembled saddle-point system over the free flux DOFs and the cell
/// pressures, [[A, B^T],[B, 0]], with essential DOFs eliminated
/// symmetrically. A carries the weight a^{-1}; B has one +-1 entry per free
/// facet of each cell. In the pure-Neumann case one cell pressure is pinned
/// and the system drops that row/column.
struct SaddleSystem {
  Eigen::SparseMatrix<double> A;  // free x free weighted mass
  Eigen::SparseMatrix<double> B;  // active cells x free
  Eigen::VectorXd rhs_flux;       // from eliminated essential DOFs
  Eigen::VectorXd rhs_cell;       // int_K g minus eliminated contributions
  std::vector<int> free_of_facet;  // facet -> free index, -1 if fixed
  std::vector<int> facet_of_free;
  FixedDofs fixed;
  bool pure_neumann = false;
  int pinned_cell = -1;            // only set in the pure-Neumann case
  std::vector<int> row_of_cell;    // cell -> B row, -1 for the pinned cell
  std::vector<int> cell_of_row;
  Eigen::VectorXd pressure_diag;   // int_K a per active cell (preconditioner)
  std::vector<double> cell_weight; // int_K a for every cell (mean-zero shift)
  const TensorMesh* mesh = nullptr;

  int n_flux() const { return int(A.rows()); }
  int n_cell() const { return int(B.rows()); }
  int size() const { return n_flux() + n_cell(); }
};

/// Discrete mixed solution bound to its mesh: one net-flux value per facet
/// (fixed facets carry their prescribed values exactly) and one scalar per cell.
struct DiscreteSolution {
  const TensorMesh* mesh = nullptr;
  DofVector sigma;
  std::vector<double> u;
};

inline SaddleSystem assemble(const TensorMesh& mesh, const WeightDescriptor& w_inv,
                             const ScalarField& g, const FixedDofs& fixed,
                             int quad_order = 8) {
  SaddleSystem sys;
  sys.mesh = &mesh;
  sys.fixed = fixed;
  const int nf = mesh.n_facets();
  const int nc = mesh.n_cells();

  sys.free_of_facet.assign(nf, -1);
  bool any_free_boundary = false;
  for (int i = 0; i < nf; ++i) {
    if (fixed.count(i)) continue;
    sys.free_of_facet[i] = int(sys.facet_of_free.size());
    sys.facet_of_free.push_back(i);
    if (mesh.facets[i].tag != FacetTag::Interior) any_free_boundary = true;
  }
  const int n1 = int(sys.facet_of_free.size());
  if (n1 == 0)
    throw std::invalid_argument("assemble: every facet is fixed; system is degenerate");

  sys.pure_neumann = !any_free_boundary;
  sys.pinned_cell = sys.pure_neumann ? 0 : -1;
  sys.row_of_cell.assign(nc, -1);
  for (int c = 0; c < nc; ++c) {
    if (c == sys.pinned_cell) continue;
    sys.row_of_cell[c] = int(sys.cell_of_row.size());
    sys.cell_of_row.push_back(c);
  }
  const int n2 = int(sys.cell_of_row.size());

  // int_K a (reciprocal of the assembled weight), exact for power weights.
  sys.cell_weight.resize(nc);
  for (int c = 0; c < nc; ++c) {
    const auto& k = mesh.cells[c];
    if (w_inv.is_power()) {
      const double base_area = k.volume / (mesh.y_breaks[k.slab + 1] - mesh.y_breaks[k.slab]);
      sys.cell_weight[c] = base_area * power_integral(mesh.y_breaks[k.slab],
                                                      mesh.y_breaks[k.slab + 1],
                                                      -w_inv.gamma(), 0);
    } else {
      const ScalarField recip = [&w_inv](const Point& p) { return 1.0 / w_inv(p); };
      sys.cell_weight[c] = project_p0(recip, mesh, quad_order)[c] * k.volume;
    }
  }
  sys.pressure_diag.resize(n2);
  for (int r = 0; r < n2; ++r) sys.pressure_diag[r] = sys.cell_weight[sys.cell_of_row[r]];

  std::vector<Eigen::Triplet<double>> ta, tb;
  sys.rhs_flux = Eigen::VectorXd::Zero(n1);
  sys.rhs_cell = Eigen::VectorXd::Zero(n2);

  const std::vector<double> gavg = project_p0(g, mesh, quad_order);
  for (int c = 0; c < nc; ++c) {
    const auto& k = mesh.cells[c];
    const LocalMatrix M = local_mass(mesh, c, w_inv, quad_order);
    for (int i = 0; i < k.nf; ++i) {
      const int fi = k.facet[i];
      const int ri = sys.free_of_facet[fi];
      if (ri < 0) continue;
      for (int j = 0; j < k.nf; ++j) {
        const int fj = k.facet[j];
        const int rj = sys.free_of_facet[fj];
        if (rj >= 0)
          ta.emplace_back(ri, rj, M.m[i][j]);
        else
          sys.rhs_flux[ri] -= M.m[i][j] * fixed.at(fj);
      }
    }
    const int row = sys.row_of_cell[c];
    if (row < 0) continue;
    double rc = gavg[c] * k.volume;
    for (int i = 0; i < k.nf; ++i) {
      const int fi = k.facet[i];
      const int ri = sys.free_of_facet[fi];
      if (ri >= 0)
        tb.emplace_back(row, ri, k.sign[i]);
      else
        rc -= k.sign[i] * fixed.at(fi);
    }
    sys.rhs_cell[row] = rc;
  }
  sys.A.resize(n1, n1);
  sys.A.setFromTriplets(ta.begin(), ta.end());
  sys.B.resize(n2, n1);
  sys.B.setFromTriplets(tb.begin(), tb.end());

  if (sys.pure_neumann) {
    // Compatibility check: total source must match the prescribed outflow.
    double outflow = 0.0, scale = 0.0;
    for (const auto& [fi, val] : fixed) {
      const auto& fc = mesh.facets[fi];
      if (fc.tag == FacetTag::Interior) continue;
      outflow += (fc.cell_minus >= 0 ? val : -val);
      scale += std::abs(val);
    }
    double source = 0.0;
    for (int c = 0; c < nc; ++c) source += gavg[c] * mesh.cells[c].volume;
    if (std::abs(source - outflow) > 1e-10 * std::max(1.0, scale))
      std::cerr << "wmix: warning: incompatible pure-Neumann data, int g - outflow = "
                << source - outflow << "\n";
  }
  return sys;
}

enum class SolveMethod { Auto, Minres, Dense };

/// Diagnostics from a solve.
struct SolveReport {
  int iterations = 0;
  double residual = 0.0;        // final relative KKT residual
  double mass_imbalance = 0.0;  // max per-cell |sum sgn flux - int g|
  bool used_dense = false;
  std::vector<double> history;  // sampled relative residuals
};

namespace detail {

/// Apply the reduced KKT operator [[A, B^T],[B, 0]].
inline Eigen::VectorXd kkt_apply(const SaddleSystem& s, const Eigen::VectorXd& x) {
  const int n1 = s.n_flux(), n2 = s.n_cell();
  Eigen::VectorXd r(n1 + n2);
  r.head(n1) = s.A * x.head(n1) + s.B.transpose() * x.tail(n2);
  r.tail(n2) = s.B * x.head(n1);
  return r;
}

/// Preconditioned MINRES with the block-diagonal preconditioner
/// [diag(A), diag(int_K a)], after symmetric diagonal equilibration of A.
/// The iteration runs on the equilibrated operator; convergence is declared
/// on the true relative residual of the original reduced KKT system.
inline Eigen::VectorXd minres_solve(const SaddleSystem& sys, double tol,
                                    SolveReport* report) {
  const int n1 = sys.n_flux(), n2 = sys.n_cell();
  const int n = n1 + n2;

  Eigen::VectorXd d(n1);
  for (int i = 0; i < n1; ++i) {
    const double aii = sys.A.coeff(i, i);
    d[i] = 1.0 / std::sqrt(std::max(aii, 1e-300));
  }
  Eigen::SparseMatrix<double> As = sys.A;
  for (int k = 0; k < As.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(As, k); it; ++it)
      it.valueRef() *= d[it.row()] * d[it.col()];
  Eigen::SparseMatrix<double> Bs = sys.B;
  for (int k = 0; k < Bs.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(Bs, k); it; ++it)
      it.valueRef() *= d[it.col()];

  Eigen::VectorXd b(n);
  b.head(n1) = d.asDiagonal() * sys.rhs_flux;
  b.tail(n2) = sys.rhs_cell;
  Eigen::VectorXd borig(n);
  borig.head(n1) = sys.rhs_flux;
  borig.tail(n2) = sys.rhs_cell;
  const double bnorm_orig = borig.norm();

  Eigen::VectorXd minv(n);
  for (int i = 0; i < n1; ++i) {
    const double aii = As.coeff(i, i);  // ~1 after equilibration
    minv[i] = 1.0 / std::max(aii, 1e-300);
  }
  for (int i = 0; i < n2; ++i) minv[n1 + i] = 1.0 / sys.pressure_diag[i];

  const auto apply = [&](const Eigen::VectorXd& x) {
    Eigen::VectorXd r(n);
    r.head(n1) = As * x.head(n1) + Bs.transpose() * x.tail(n2);
    r.tail(n2) = Bs * x.head(n1);
    return r;
  };
  const auto true_rel_residual = [&](const Eigen::VectorXd& x) {
    Eigen::VectorXd xo = x;
    xo.head(n1) = d.asDiagonal() * x.head(n1);
    const double rn = (borig - kkt_apply(sys, xo)).norm();
    return rn / std::max(bnorm_orig, 1e-300);
  };

  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  if (bnorm_orig == 0.0) return x;

  // Paige-Saunders MINRES with SPD diagonal preconditioner.
  Eigen::VectorXd r1 = b;
  Eigen::VectorXd y = minv.asDiagonal() * r1;
  double beta1 = std::sqrt(r1.dot(y));
  if (beta1 == 0.0) return x;
  double oldb = 0.0, beta = beta1, dbar = 0.0, epsln = 0.0;
  double phibar = beta1, cs = -1.0, sn = 0.0;
  Eigen::VectorXd r2 = r1;
  Eigen::VectorXd w = Eigen::VectorXd::Zero(n), w2 = Eigen::VectorXd::Zero(n);
  const int maxit = std::max(20000, 60 * int(std::sqrt(double(n))));
  const int check_every = 25;
  std::vector<double> history;
  int it = 0;
  double best = 1e300;
  for (it = 1; it <= maxit; ++it) {
    Eigen::VectorXd v = y / beta;
    y = apply(v);
    if (it >= 2) y -= (beta / oldb) * r1;
    const double alfa = v.dot(y);
    y -= (alfa / beta) * r2;
    r1 = r2;
    r2 = y;
    y = minv.asDiagonal() * r2;
    oldb = beta;
    beta = std::sqrt(std::max(r2.dot(y), 0.0));
    const double oldeps = epsln;
    const double delta = cs * dbar + sn * alfa;
    const double gbar = sn * dbar - cs * alfa;
    epsln = sn * beta;
    dbar = -cs * beta;
    double gam = std::hypot(gbar, beta);
    gam = std::max(gam, 1e-300);
    cs = gbar / gam;
    sn = beta / gam;
    const double phi = cs * phibar;
    phibar = sn * phibar;
    Eigen::VectorXd w1 = w2;
    w2 = w;
    w = (v - oldeps * w1 - delta * w2) / gam;
    x += phi * w;
    if (phibar / beta1 <= 0.05 * tol || it % check_every == 0 || it == maxit) {
      const double rel = true_rel_residual(x);
      best = std::min(best, rel);
      history.push_back(rel);
      if (history.size() > 64) history.erase(history.begin());
      if (rel <= tol) break;
    }
    if (beta == 0.0) break;
  }
  const double final_rel = true_rel_residual(x);
  if (report) {
    report->iterations = it;
    report->residual = final_rel;
    report->history = history;
  }
  if (final_rel > tol) {
    std::string msg = "minres_solve: no convergence in " + std::to_string(it) +
                      " iterations; residual history:";
    for (double h : history) msg += " " + std::to_string(h);
    throw std::runtime_error(msg);
  }
  x.head(n1) = d.asDiagonal() * x.head(n1);
  return x;
}

inline Eigen::VectorXd dense_solve(const SaddleSystem& sys) {
  const int n1 = sys.n_flux(), n2 = sys.n_cell();
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n1 + n2, n1 + n2);
  for (int k = 0; k < sys.A.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(sys.A, k); it; ++it)
      K(it.row(), it.col()) = it.value();
  for (int k = 0; k < sys.B.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(sys.B, k); it; ++it) {
      K(n1 + it.row(), it.col()) = it.value();
      K(it.col(), n1 + it.row()) = it.value();
    }
  Eigen::VectorXd b(n1 + n2);
  b.head(n1) = sys.rhs_flux;
  b.tail(n2) = sys.rhs_cell;
  return Eigen::PartialPivLU<Eigen::MatrixXd>(K).solve(b);
}

}  // namespace detail

/// Solve the saddle system to the requested relative KKT residual. Systems
/// below 2000 unknowns go to a dense LU by default (also the test oracle);
/// larger ones use preconditioned MINRES. The cell block of the symmetric
/// form carries -u, so the scalar variable is negated on extraction; in the
/// pure-Neumann case the result is shifted to weighted mean zero.
inline DiscreteSolution solve(const SaddleSystem& sys, double tol = 1e-11,
                              SolveMethod method = SolveMethod::Auto,
                              SolveReport* report = nullptr) {
  if (!(tol >= 1e-14 && tol <= 1e-6))
    throw std::invalid_argument("solve: tol must lie in [1e-14, 1e-6]");
  const int n1 = sys.n_flux(), n2 = sys.n_cell();
  const bool dense =
      method == SolveMethod::Dense || (method == SolveMethod::Auto && sys.size() < 2000);
  Eigen::VectorXd z;
  if (dense) {
    z = detail::dense_solve(sys);
    Eigen::VectorXd b(n1 + n2);
    b.head(n1) = sys.rhs_flux;
    b.tail(n2) = sys.rhs_cell;
    const double bn = b.norm();
    const double rel =
        bn == 0.0 ? 0.0 : (b - detail::kkt_apply(sys, z)).norm() / bn;
    if (report) {
      report->iterations = 1;
      report->residual = rel;
      report->used_dense = true;
    }
    if (rel > tol)
      throw std::runtime_error("solve: dense factorization residual above tolerance");
  } else {
    z = detail::minres_solve(sys, tol, report);
  }

  DiscreteSolution sol;
  sol.mesh = sys.mesh;
  sol.sigma.assign(sys.mesh->n_facets(), 0.0);
  for (const auto& [f, val] : sys.fixed) sol.sigma[f] = val;
  for (int i = 0; i < n1; ++i) sol.sigma[sys.facet_of_free[i]] = z[i];
  sol.u.assign(sys.mesh->n_cells(), 0.0);
  for (int r = 0; r < n2; ++r) sol.u[sys.cell_of_row[r]] = -z[n1 + r];
  if (sys.pure_neumann) {
    double num = 0.0, den = 0.0;
    for (int c = 0; c < sys.mesh->n_cells(); ++c) {
      num += sol.u[c] * sys.cell_weight[c];
      den += sys.cell_weight[c];
    }
    for (auto& v : sol.u) v -= num / den;
  }
  if (report) {
    double worst = 0.0;
    for (int r = 0; r < n2; ++r) {
      double bal = -sys.rhs_cell[r];
      const int c = sys.cell_of_row[r];
      const auto& k = sys.mesh->cells[c];
      for (int i = 0; i < k.nf; ++i) {
        const int fi = k.facet[i];
        if (sys.free_of_facet[fi] >= 0) bal += k.sign[i] * sol.sigma[fi];
      }
      worst = std::max(worst, std::abs(bal));
    }
    report->mass_imbalance = worst;
  }
  return sol;
}

/// Coordinate-format text dump (one `i j value` line per entry) of the
/// reduced KKT matrix, for offline inspection.
inline void dump_matrix(const SaddleSystem& sys, std::ostream& os) {
  const int n1 = sys.n_flux();
  char buf[128];
  const auto emit = [&](int i, int j, double v) {
    std::snprintf(buf, sizeof buf, "%d %d %.17g\n", i, j, v);
    os << buf;
  };
  for (int k = 0; k < sys.A.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(sys.A, k); it; ++it)
      emit(int(it.row()), int(it.col()), it.value());
  for (int k = 0; k < sys.B.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(sys.B, k); it; ++it) {
      emit(n1 + int(it.row()), int(it.col()), it.value());
      emit(int(it.col()), n1 + int(it.row()), it.value());
    }
}

}  // namespace wmix
