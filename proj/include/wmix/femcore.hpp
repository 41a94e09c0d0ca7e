#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "wmix/mesh.hpp"
#include "wmix/quadrature.hpp"

namespace wmix {

/// One value per global facet: the net normal flux through that facet in the
/// direction of the global facet normal. A single shared value per facet
/// makes H(div) conformity automatic.
using DofVector = std::vector<double>;

/// Local weighted mass matrix, M_ij = int_cell y^gamma phi_i . phi_j.
struct LocalMatrix {
  int n = 0;
  std::array<std::array<double, 5>, 5> m{};
};

/// Incidence signs (the integral of div of each facet basis function) and
/// the cell volume; these are the only ingredients of the divergence block.
struct LocalDiv {
  int n = 0;
  std::array<double, 5> sign{};
  double volume = 0.0;
};

inline LocalDiv local_div(const TensorMesh& mesh, int cell) {
  const auto& c = mesh.cells[cell];
  LocalDiv d;
  d.n = c.nf;
  d.volume = c.volume;
  for (int i = 0; i < c.nf; ++i) d.sign[i] = c.sign[i];
  return d;
}

namespace detail {

/// int_K psi_k . psi_l over the triangle, psi_k(x) = (x - p_k) / (2|K|),
/// the lowest-order Raviart-Thomas basis with unit outward flux through the
/// edge opposite p_k. Quadratic integrand; the degree-4 rule is exact.
inline std::array<std::array<double, 3>, 3> tri_rt_products(
    const TensorMesh::PrismGeom& g) {
  static const TriQuad rule = triangle_quad(4);
  std::array<std::array<double, 3>, 3> M{};
  for (std::size_t q = 0; q < rule.points.size(); ++q) {
    const double x1 = g.p[0].x1 + (g.p[1].x1 - g.p[0].x1) * rule.points[q].x1 +
                      (g.p[2].x1 - g.p[0].x1) * rule.points[q].x2;
    const double x2 = g.p[0].x2 + (g.p[1].x2 - g.p[0].x2) * rule.points[q].x1 +
                      (g.p[2].x2 - g.p[0].x2) * rule.points[q].x2;
    const double w = rule.weights[q] * 2.0 * g.area;  // rule weights sum to 1/2
    for (int k = 0; k < 3; ++k)
      for (int l = 0; l <= k; ++l) {
        const double dot = (x1 - g.p[k].x1) * (x1 - g.p[l].x1) +
                           (x2 - g.p[k].x2) * (x2 - g.p[l].x2);
        M[k][l] += w * dot / (4.0 * g.area * g.area);
      }
  }
  for (int k = 0; k < 3; ++k)
    for (int l = k + 1; l < 3; ++l) M[k][l] = M[l][k];
  return M;
}

}  // namespace detail

/// Exact weighted local mass matrix for the weight y^gamma: the y-direction
/// integrals are closed-form power integrals, the base direction is exact
/// polynomial integration. Basis functions are normalized to unit net flux
/// through their facet (in the global normal direction) and zero through the
/// others.
inline LocalMatrix local_mass(const TensorMesh& mesh, int cell, const PowerWeight& w) {
  const auto& c = mesh.cells[cell];
  LocalMatrix M;
  M.n = c.nf;
  const double g = w.gamma;
  if (mesh.dim_base == 1) {
    const auto r = mesh.rect(cell);
    const double hx = r.hx(), hy = r.hy();
    const double I0 = power_integral(r.y0, r.y1, g, 0);
    const double I1 = power_integral(r.y0, r.y1, g, 1);
    const double I2 = power_integral(r.y0, r.y1, g, 2);
    // x-pair block: phi_L = ((x1-x)/(hx hy), 0), phi_R = ((x-x0)/(hx hy), 0).
    M.m[0][0] = M.m[1][1] = I0 * hx / (3.0 * hy * hy);
    M.m[0][1] = M.m[1][0] = I0 * hx / (6.0 * hy * hy);
    // y-pair block: phi_B = (0,(y1-y)/(hx hy)), phi_T = (0,(y-y0)/(hx hy)).
    const double den = hx * hy * hy;
    M.m[2][2] = (r.y1 * r.y1 * I0 - 2.0 * r.y1 * I1 + I2) / den;
    M.m[3][3] = (I2 - 2.0 * r.y0 * I1 + r.y0 * r.y0 * I0) / den;
    M.m[2][3] = M.m[3][2] = (-I2 + (r.y0 + r.y1) * I1 - r.y0 * r.y1 * I0) / den;
    return M;
  }
  const auto p = mesh.prism(cell);
  const double hy = p.hy();
  const double I0 = power_integral(p.y0, p.y1, g, 0);
  const double I1 = power_integral(p.y0, p.y1, g, 1);
  const double I2 = power_integral(p.y0, p.y1, g, 2);
  const auto tri = detail::tri_rt_products(p);
  for (int k = 0; k < 3; ++k)
    for (int l = 0; l < 3; ++l)
      M.m[k][l] = I0 / (hy * hy) * p.esign[k] * p.esign[l] * tri[k][l];
  const double den = p.area * hy * hy;
  M.m[3][3] = (p.y1 * p.y1 * I0 - 2.0 * p.y1 * I1 + I2) / den;
  M.m[4][4] = (I2 - 2.0 * p.y0 * I1 + p.y0 * p.y0 * I0) / den;
  M.m[3][4] = M.m[4][3] = (-I2 + (p.y0 + p.y1) * I1 - p.y0 * p.y1 * I0) / den;
  return M;
}

/// Evaluate the local basis combination sum_i dof_i phi_i at a point of the
/// cell, dof_i taken from the global vector. On rectangles the y-component is
/// affine in y and independent of x (and vice versa); same structure on prisms.
inline Vec eval_rt(const TensorMesh& mesh, const DofVector& dofs, int cell,
                   const Point& pt) {
  if (!mesh.contains(cell, pt))
    throw std::invalid_argument("eval_rt: point outside cell");
  const auto& c = mesh.cells[cell];
  Vec v;
  if (mesh.dim_base == 1) {
    const auto r = mesh.rect(cell);
    const double den = r.hx() * r.hy();
    v.x1 = (dofs[c.facet[0]] * (r.x1 - pt.x1) + dofs[c.facet[1]] * (pt.x1 - r.x0)) / den;
    v.y = (dofs[c.facet[2]] * (r.y1 - pt.y) + dofs[c.facet[3]] * (pt.y - r.y0)) / den;
    return v;
  }
  const auto p = mesh.prism(cell);
  const double hy = p.hy();
  for (int k = 0; k < 3; ++k) {
    const double s = dofs[c.facet[k]] * p.esign[k] / (2.0 * p.area * hy);
    v.x1 += s * (pt.x1 - p.p[k].x1);
    v.x2 += s * (pt.x2 - p.p[k].x2);
  }
  v.y = (dofs[c.facet[3]] * (p.y1 - pt.y) + dofs[c.facet[4]] * (pt.y - p.y0)) /
        (p.area * hy);
  return v;
}

/// Cellwise divergence of an RT0 field (constant per cell):
/// sum_i sign_i dof_i / |cell|.
inline double div_rt(const TensorMesh& mesh, const DofVector& dofs, int cell) {
  const auto& c = mesh.cells[cell];
  double s = 0.0;
  for (int i = 0; i < c.nf; ++i) s += c.sign[i] * dofs[c.facet[i]];
  return s / c.volume;
}

/// Raviart-Thomas interpolation: DOF on facet F is int_F field . n_F dS with
/// n_F the global facet normal. Facet integrals use Gauss rules of the given
/// order per direction (degree-4 symmetric rule on triangle facets).
inline DofVector interpolate_rt(const VectorField& field, const TensorMesh& mesh,
                                int quad_order = 8) {
  DofVector dofs(mesh.n_facets(), 0.0);
  const Quad1D gl = gauss_legendre(quad_order);
  static const TriQuad tq = triangle_quad(4);
  for (int i = 0; i < mesh.n_facets(); ++i) {
    const auto& f = mesh.facets[i];
    double val = 0.0;
    if (mesh.dim_base == 1) {
      if (f.kind == FacetKind::Vertical) {
        const double y0 = mesh.y_breaks[f.level], y1 = mesh.y_breaks[f.level + 1];
        const double x = mesh.x_breaks[f.base_id];
        for (int q = 0; q < quad_order; ++q) {
          const double y = 0.5 * (y0 + y1) + 0.5 * (y1 - y0) * gl.nodes[q];
          val += 0.5 * (y1 - y0) * gl.weights[q] * field(Point{x, 0.0, y}).x1;
        }
      } else {
        const double x0 = mesh.x_breaks[f.base_id], x1 = mesh.x_breaks[f.base_id + 1];
        const double y = mesh.y_breaks[f.level];
        for (int q = 0; q < quad_order; ++q) {
          const double x = 0.5 * (x0 + x1) + 0.5 * (x1 - x0) * gl.nodes[q];
          val += 0.5 * (x1 - x0) * gl.weights[q] * field(Point{x, 0.0, y}).y;
        }
      }
    } else {
      if (f.kind == FacetKind::Vertical) {
        const auto& e = mesh.base.edges[f.base_id];
        const auto& a = mesh.base.vertices[e.a];
        const auto& b = mesh.base.vertices[e.b];
        const double y0 = mesh.y_breaks[f.level], y1 = mesh.y_breaks[f.level + 1];
        for (int qt = 0; qt < quad_order; ++qt) {
          const double t = 0.5 + 0.5 * gl.nodes[qt];
          const double x1c = a.x1 + t * (b.x1 - a.x1);
          const double x2c = a.x2 + t * (b.x2 - a.x2);
          for (int qy = 0; qy < quad_order; ++qy) {
            const double y = 0.5 * (y0 + y1) + 0.5 * (y1 - y0) * gl.nodes[qy];
            const Vec v = field(Point{x1c, x2c, y});
            val += 0.25 * e.length * (y1 - y0) * gl.weights[qt] * gl.weights[qy] *
                   (v.x1 * e.n1 + v.x2 * e.n2);
          }
        }
      } else {
        const auto& tri = mesh.base.triangles[f.base_id];
        const auto& a = mesh.base.vertices[tri[0]];
        const auto& b = mesh.base.vertices[tri[1]];
        const auto& c = mesh.base.vertices[tri[2]];
        const double y = mesh.y_breaks[f.level];
        for (std::size_t q = 0; q < tq.points.size(); ++q) {
          const double x1c = a.x1 + (b.x1 - a.x1) * tq.points[q].x1 +
                             (c.x1 - a.x1) * tq.points[q].x2;
          const double x2c = a.x2 + (b.x2 - a.x2) * tq.points[q].x1 +
                             (c.x2 - a.x2) * tq.points[q].x2;
          val += tq.weights[q] * 2.0 * f.area * field(Point{x1c, x2c, y}).y;
        }
      }
    }
    dofs[i] = val;
  }
  return dofs;
}

/// L2 projection onto piecewise constants: cell averages by quadrature.
inline std::vector<double> project_p0(const ScalarField& g, const TensorMesh& mesh,
                                      int quad_order = 8) {
  std::vector<double> vals(mesh.n_cells(), 0.0);
  const Quad1D gl = gauss_legendre(quad_order);
  static const TriQuad tq = triangle_quad(4);
  for (int c = 0; c < mesh.n_cells(); ++c) {
    double sum = 0.0;
    if (mesh.dim_base == 1) {
      const auto r = mesh.rect(c);
      for (int qx = 0; qx < quad_order; ++qx) {
        const double x = 0.5 * (r.x0 + r.x1) + 0.5 * r.hx() * gl.nodes[qx];
        for (int qy = 0; qy < quad_order; ++qy) {
          const double y = 0.5 * (r.y0 + r.y1) + 0.5 * r.hy() * gl.nodes[qy];
          sum += 0.25 * r.hx() * r.hy() * gl.weights[qx] * gl.weights[qy] *
                 g(Point{x, 0.0, y});
        }
      }
    } else {
      const auto p = mesh.prism(c);
      for (std::size_t q = 0; q < tq.points.size(); ++q) {
        const double x1c = p.p[0].x1 + (p.p[1].x1 - p.p[0].x1) * tq.points[q].x1 +
                           (p.p[2].x1 - p.p[0].x1) * tq.points[q].x2;
        const double x2c = p.p[0].x2 + (p.p[1].x2 - p.p[0].x2) * tq.points[q].x1 +
                           (p.p[2].x2 - p.p[0].x2) * tq.points[q].x2;
        for (int qy = 0; qy < quad_order; ++qy) {
          const double y = 0.5 * (p.y0 + p.y1) + 0.5 * p.hy() * gl.nodes[qy];
          sum += tq.weights[q] * 2.0 * p.area * 0.5 * p.hy() * gl.weights[qy] *
                 g(Point{x1c, x2c, y});
        }
      }
    }
    vals[c] = sum / mesh.cells[c].volume;
  }
  return vals;
}

/// Quadrature-based local mass matrix for a generic (callback) weight;
/// tensor Gauss rules of the given order. Used when the coefficient is not
/// a power of y.
inline LocalMatrix local_mass(const TensorMesh& mesh, int cell,
                              const WeightDescriptor& w, int quad_order = 8) {
  if (w.is_power()) return local_mass(mesh, cell, PowerWeight(w.gamma()));
  const auto& c = mesh.cells[cell];
  LocalMatrix M;
  M.n = c.nf;
  const Quad1D gl = gauss_legendre(quad_order);
  static const TriQuad tq = triangle_quad(4);
  DofVector unit(mesh.n_facets(), 0.0);
  const auto accumulate = [&](const Point& pt, double wq) {
    std::array<Vec, 5> phi;
    for (int i = 0; i < c.nf; ++i) {
      unit[c.facet[i]] = 1.0;
      phi[i] = eval_rt(mesh, unit, cell, pt);
      unit[c.facet[i]] = 0.0;
    }
    const double a = w(pt) * wq;
    for (int i = 0; i < c.nf; ++i)
      for (int j = 0; j <= i; ++j)
        M.m[i][j] += a * (phi[i].x1 * phi[j].x1 + phi[i].x2 * phi[j].x2 +
                          phi[i].y * phi[j].y);
  };
  if (mesh.dim_base == 1) {
    const auto r = mesh.rect(cell);
    for (int qx = 0; qx < quad_order; ++qx)
      for (int qy = 0; qy < quad_order; ++qy) {
        const Point pt{0.5 * (r.x0 + r.x1) + 0.5 * r.hx() * gl.nodes[qx], 0.0,
                       0.5 * (r.y0 + r.y1) + 0.5 * r.hy() * gl.nodes[qy]};
        accumulate(pt, 0.25 * r.hx() * r.hy() * gl.weights[qx] * gl.weights[qy]);
      }
  } else {
    const auto p = mesh.prism(cell);
    for (std::size_t q = 0; q < tq.points.size(); ++q)
      for (int qy = 0; qy < quad_order; ++qy) {
        const Point pt{
            p.p[0].x1 + (p.p[1].x1 - p.p[0].x1) * tq.points[q].x1 +
                (p.p[2].x1 - p.p[0].x1) * tq.points[q].x2,
            p.p[0].x2 + (p.p[1].x2 - p.p[0].x2) * tq.points[q].x1 +
                (p.p[2].x2 - p.p[0].x2) * tq.points[q].x2,
            0.5 * (p.y0 + p.y1) + 0.5 * p.hy() * gl.nodes[qy]};
        accumulate(pt, tq.weights[q] * 2.0 * p.area * 0.5 * p.hy() * gl.weights[qy]);
      }
  }
  for (int i = 0; i < c.nf; ++i)
    for (int j = i + 1; j < c.nf; ++j) M.m[i][j] = M.m[j][i];
  return M;
}

}  // namespace wmix
