#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "wmix/types.hpp"

namespace wmix {

/// Parameters of a graded tensor-product mesh of the cylinder Omega x (0,L):
/// N slabs in y with breaks y_j = (j/N)^(2/(2-beta)) L, and base_resolution
/// cells per unit length of Omega in each base direction.
struct GradedSpec {
  int num_slabs;        // N, roughly 1/h
  double height;        // L
  double beta;          // grading exponent, stronger grading as beta -> 2
  int base_resolution;  // base cells per unit length

  GradedSpec(int n, double l, double b, int base)
      : num_slabs(n), height(l), beta(b), base_resolution(base) {
    if (n < 2) throw std::invalid_argument("GradedSpec: need at least 2 slabs");
    if (!(l >= 1.0)) throw std::invalid_argument("GradedSpec: height must be >= 1");
    if (!(b < 2.0)) throw std::invalid_argument("GradedSpec: beta must be < 2");
    if (base < 1) throw std::invalid_argument("GradedSpec: base_resolution must be >= 1");
  }

  /// The grading condition tied to the weight exponent: beta in (1-alpha, 2).
  void validate_for_weight(double alpha) const {
    if (!(beta > 1.0 - alpha && beta < 2.0))
      throw std::invalid_argument("GradedSpec: beta must lie in (1-alpha, 2)");
  }
};

/// y_j = (j/N)^(2/(2-beta)) L for j = 0..N; strictly increasing, endpoint exact.
inline std::vector<double> graded_breaks(int N, double L, double beta) {
  if (N < 2) throw std::invalid_argument("graded_breaks: N must be >= 2");
  if (!(L > 0.0)) throw std::invalid_argument("graded_breaks: L must be > 0");
  if (!(beta < 2.0))
    throw std::invalid_argument("graded_breaks: beta >= 2 is an invalid grading");
  const double q = 2.0 / (2.0 - beta);
  std::vector<double> y(N + 1);
  for (int j = 0; j <= N; ++j) y[j] = std::pow(double(j) / N, q) * L;
  y[0] = 0.0;
  y[N] = L;
  return y;
}

/// Empirical constant of the slab-increment bound: the max over j >= 1 of
/// (y_{j+1}-y_j)^2 / (h^2 y_j^beta L^(2-beta)). Bounded uniformly in N for
/// fixed beta in (0,2).
inline double check_increment_bound(const std::vector<double>& breaks, double beta,
                                    double L, double h) {
  if (breaks.size() < 3)
    throw std::invalid_argument("check_increment_bound: need at least 2 slabs");
  double worst = 0.0;
  for (std::size_t j = 1; j + 1 < breaks.size(); ++j) {
    const double dy = breaks[j + 1] - breaks[j];
    const double denom = h * h * std::pow(breaks[j], beta) * std::pow(L, 2.0 - beta);
    worst = std::max(worst, dy * dy / denom);
  }
  return worst;
}

/// Conforming triangulation of the unit square: vertices, CCW triangles,
/// and oriented edges. Edge normals follow a fixed global convention
/// (lexicographically positive), so a shared edge has one well-defined
/// normal direction for both triangles.
struct TriBase {
  struct Pt2 {
    double x1, x2;
  };
  struct Edge {
    int a, b;          // vertex indices, a < b
    double n1, n2;     // global unit normal
    double length;
  };

  std::vector<Pt2> vertices;
  std::vector<std::array<int, 3>> triangles;
  std::vector<Edge> edges;
  std::vector<std::array<int, 3>> tri_edges;     // edge k is opposite vertex k
  std::vector<std::array<double, 3>> tri_esign;  // +1 if global normal points out of the triangle
  std::vector<double> tri_area;

  /// max over triangles of h_K / rho_K (diameter over inscribed-ball diameter).
  double shape_regularity() const {
    double worst = 0.0;
    for (std::size_t t = 0; t < triangles.size(); ++t) {
      const auto& tri = triangles[t];
      double per = 0.0, hk = 0.0;
      for (int k = 0; k < 3; ++k) {
        const Pt2& p = vertices[tri[k]];
        const Pt2& q = vertices[tri[(k + 1) % 3]];
        const double e = std::hypot(q.x1 - p.x1, q.x2 - p.x2);
        per += e;
        hk = std::max(hk, e);
      }
      const double rho = 4.0 * tri_area[t] / per;  // inscribed diameter
      worst = std::max(worst, hk / rho);
    }
    return worst;
  }
};

namespace detail {

inline void register_tri_edges(TriBase& base, std::map<std::pair<int, int>, int>& edge_ids,
                               int t) {
  const auto& tri = base.triangles[t];
  for (int k = 0; k < 3; ++k) {
    const int p = tri[(k + 1) % 3];
    const int q = tri[(k + 2) % 3];
    const auto key = std::minmax(p, q);
    auto it = edge_ids.find(key);
    if (it == edge_ids.end()) {
      const auto& pa = base.vertices[key.first];
      const auto& pb = base.vertices[key.second];
      const double tx = pb.x1 - pa.x1, ty = pb.x2 - pa.x2;
      const double len = std::hypot(tx, ty);
      double n1 = ty / len, n2 = -tx / len;
      if (n1 < -1e-12 || (std::abs(n1) <= 1e-12 && n2 < 0.0)) {
        n1 = -n1;
        n2 = -n2;
      }
      it = edge_ids.emplace(key, int(base.edges.size())).first;
      base.edges.push_back({key.first, key.second, n1, n2, len});
    }
    const int e = it->second;
    base.tri_edges[t][k] = e;
    // Outward normal on the CCW edge p -> q.
    const auto& pa = base.vertices[p];
    const auto& pb = base.vertices[q];
    const double ox = pb.x2 - pa.x2, oy = -(pb.x1 - pa.x1);
    const auto& ed = base.edges[e];
    base.tri_esign[t][k] = (ox * ed.n1 + oy * ed.n2 > 0.0) ? 1.0 : -1.0;
  }
}

}  // namespace detail

/// m x m grid of squares, each split into two CCW triangles by the diagonal
/// from the lower-left to the upper-right corner.
inline TriBase triangulate_unit_square(int m) {
  if (m < 1) throw std::invalid_argument("triangulate_unit_square: m must be >= 1");
  TriBase base;
  const auto vid = [m](int i, int j) { return j * (m + 1) + i; };
  for (int j = 0; j <= m; ++j)
    for (int i = 0; i <= m; ++i)
      base.vertices.push_back({double(i) / m, double(j) / m});
  for (int j = 0; j < m; ++j)
    for (int i = 0; i < m; ++i) {
      base.triangles.push_back({vid(i, j), vid(i + 1, j), vid(i + 1, j + 1)});
      base.triangles.push_back({vid(i, j), vid(i + 1, j + 1), vid(i, j + 1)});
    }
  const int T = int(base.triangles.size());
  base.tri_edges.resize(T);
  base.tri_esign.resize(T);
  base.tri_area.resize(T);
  std::map<std::pair<int, int>, int> edge_ids;
  for (int t = 0; t < T; ++t) {
    const auto& tri = base.triangles[t];
    const auto& a = base.vertices[tri[0]];
    const auto& b = base.vertices[tri[1]];
    const auto& c = base.vertices[tri[2]];
    const double cross =
        (b.x1 - a.x1) * (c.x2 - a.x2) - (b.x2 - a.x2) * (c.x1 - a.x1);
    if (cross <= 0.0)
      throw std::logic_error("triangulate_unit_square: non-CCW triangle");
    base.tri_area[t] = 0.5 * cross;
    detail::register_tri_edges(base, edge_ids, t);
  }
  return base;
}

enum class FacetTag { Interior, GammaN, GammaD };
enum class FacetKind { Vertical, Horizontal };

/// Tensor-product mesh of Omega x (0,L). Cells are rectangles (1D base) or
/// triangle-based prisms (2D base); facets carry a global unit normal,
/// the adjacent cells, and boundary tags (GammaN: bottom, GammaD: lateral
/// and top). Immutable after construction.
class TensorMesh {
 public:
  struct Facet {
    FacetKind kind;
    FacetTag tag;
    double area;
    double n1, n2, ny;   // global unit normal
    int cell_minus = -1;  // cell the normal points out of (incidence sign +1)
    int cell_plus = -1;   // cell the normal points into (incidence sign -1)
    int base_id;          // x-break / edge id (vertical), base cell (horizontal)
    int level;            // slab (vertical), y-break index (horizontal)
  };

  struct Cell {
    int base_id;
    int slab;
    double volume;
    int nf;                        // 4 for rectangles, 5 for prisms
    std::array<int, 5> facet;      // rect: left,right,bottom,top; prism: e0,e1,e2,bottom,top
    std::array<double, 5> sign;    // incidence signs (integral of div of the facet basis)
  };

  int dim_base = 1;
  std::vector<double> x_breaks;  // 1D base
  TriBase base;                  // 2D base
  std::vector<double> y_breaks;
  std::vector<Cell> cells;
  std::vector<Facet> facets;

  int n_base_cells() const {
    return dim_base == 1 ? int(x_breaks.size()) - 1 : int(base.triangles.size());
  }
  int n_slabs() const { return int(y_breaks.size()) - 1; }
  int n_cells() const { return int(cells.size()); }
  int n_facets() const { return int(facets.size()); }
  int cell_id(int base_cell, int slab) const { return slab * n_base_cells() + base_cell; }

  /// Geometry of a rectangle cell (1D base).
  struct RectGeom {
    double x0, x1, y0, y1;
    double hx() const { return x1 - x0; }
    double hy() const { return y1 - y0; }
  };
  RectGeom rect(int c) const {
    const Cell& k = cells[c];
    return {x_breaks[k.base_id], x_breaks[k.base_id + 1], y_breaks[k.slab],
            y_breaks[k.slab + 1]};
  }

  /// Geometry of a prism cell (2D base).
  struct PrismGeom {
    std::array<TriBase::Pt2, 3> p;
    double area;
    double y0, y1;
    std::array<double, 3> esign;
    double hy() const { return y1 - y0; }
  };
  PrismGeom prism(int c) const {
    const Cell& k = cells[c];
    const auto& tri = base.triangles[k.base_id];
    PrismGeom g;
    for (int i = 0; i < 3; ++i) g.p[i] = base.vertices[tri[i]];
    g.area = base.tri_area[k.base_id];
    g.y0 = y_breaks[k.slab];
    g.y1 = y_breaks[k.slab + 1];
    g.esign = base.tri_esign[k.base_id];
    return g;
  }

  bool contains(int c, const Point& pt, double tol = 1e-12) const {
    const Cell& k = cells[c];
    if (pt.y < y_breaks[k.slab] - tol || pt.y > y_breaks[k.slab + 1] + tol) return false;
    if (dim_base == 1)
      return pt.x1 >= x_breaks[k.base_id] - tol && pt.x1 <= x_breaks[k.base_id + 1] + tol;
    const PrismGeom g = prism(c);
    for (int e = 0; e < 3; ++e) {
      const auto& a = g.p[(e + 1) % 3];
      const auto& b = g.p[(e + 2) % 3];
      const double cr = (b.x1 - a.x1) * (pt.x2 - a.x2) - (b.x2 - a.x2) * (pt.x1 - a.x1);
      if (cr < -tol * 2.0 * g.area) return false;
    }
    return true;
  }
};

/// Build the graded tensor mesh over the unit interval/square base.
inline TensorMesh build_mesh(const GradedSpec& spec, int dim_base) {
  if (dim_base != 1 && dim_base != 2)
    throw std::invalid_argument("build_mesh: dim_base must be 1 or 2");
  TensorMesh mesh;
  mesh.dim_base = dim_base;
  mesh.y_breaks = graded_breaks(spec.num_slabs, spec.height, spec.beta);
  const int N = spec.num_slabs;

  if (dim_base == 1) {
    const int m = spec.base_resolution;
    mesh.x_breaks.resize(m + 1);
    for (int i = 0; i <= m; ++i) mesh.x_breaks[i] = double(i) / m;
    const int nv = (m + 1) * N;  // vertical facets first
    const auto vf = [m](int i, int j) { return j * (m + 1) + i; };
    const auto hf = [m, nv](int i, int j) { return nv + j * m + i; };
    mesh.facets.resize(nv + m * (N + 1));
    mesh.cells.resize(std::size_t(m) * N);
    for (int j = 0; j < N; ++j) {
      const double y0 = mesh.y_breaks[j], y1 = mesh.y_breaks[j + 1];
      for (int i = 0; i <= m; ++i) {
        TensorMesh::Facet& f = mesh.facets[vf(i, j)];
        f.kind = FacetKind::Vertical;
        f.tag = (i == 0 || i == m) ? FacetTag::GammaD : FacetTag::Interior;
        f.area = y1 - y0;
        f.n1 = 1.0;
        f.n2 = 0.0;
        f.ny = 0.0;
        f.base_id = i;
        f.level = j;
        if (i > 0) f.cell_minus = mesh.cell_id(i - 1, j);
        if (i < m) f.cell_plus = mesh.cell_id(i, j);
      }
    }
    for (int j = 0; j <= N; ++j)
      for (int i = 0; i < m; ++i) {
        TensorMesh::Facet& f = mesh.facets[hf(i, j)];
        f.kind = FacetKind::Horizontal;
        f.tag = (j == 0) ? FacetTag::GammaN
                         : (j == N ? FacetTag::GammaD : FacetTag::Interior);
        f.area = mesh.x_breaks[i + 1] - mesh.x_breaks[i];
        f.n1 = 0.0;
        f.n2 = 0.0;
        f.ny = 1.0;
        f.base_id = i;
        f.level = j;
        if (j > 0) f.cell_minus = mesh.cell_id(i, j - 1);
        if (j < N) f.cell_plus = mesh.cell_id(i, j);
      }
    for (int j = 0; j < N; ++j)
      for (int i = 0; i < m; ++i) {
        TensorMesh::Cell& c = mesh.cells[mesh.cell_id(i, j)];
        c.base_id = i;
        c.slab = j;
        c.nf = 4;
        c.volume = (mesh.x_breaks[i + 1] - mesh.x_breaks[i]) *
                   (mesh.y_breaks[j + 1] - mesh.y_breaks[j]);
        c.facet = {vf(i, j), vf(i + 1, j), hf(i, j), hf(i, j + 1), -1};
        c.sign = {-1.0, +1.0, -1.0, +1.0, 0.0};
      }
    return mesh;
  }

  mesh.base = triangulate_unit_square(spec.base_resolution);
  const int T = int(mesh.base.triangles.size());
  const int E = int(mesh.base.edges.size());
  const int nv = E * N;
  const auto vf = [E](int e, int j) { return j * E + e; };
  const auto hf = [T, nv](int t, int j) { return nv + j * T + t; };
  mesh.facets.resize(nv + T * (N + 1));
  mesh.cells.resize(std::size_t(T) * N);
  // Edge -> adjacent triangles with their orientation signs.
  std::vector<std::array<int, 2>> edge_tri(E, {-1, -1});
  std::vector<std::array<double, 2>> edge_sgn(E, {0.0, 0.0});
  for (int t = 0; t < T; ++t)
    for (int k = 0; k < 3; ++k) {
      const int e = mesh.base.tri_edges[t][k];
      const int slot = edge_tri[e][0] < 0 ? 0 : 1;
      edge_tri[e][slot] = t;
      edge_sgn[e][slot] = mesh.base.tri_esign[t][k];
    }
  for (int j = 0; j < N; ++j) {
    const double hy = mesh.y_breaks[j + 1] - mesh.y_breaks[j];
    for (int e = 0; e < E; ++e) {
      TensorMesh::Facet& f = mesh.facets[vf(e, j)];
      const auto& ed = mesh.base.edges[e];
      f.kind = FacetKind::Vertical;
      f.tag = (edge_tri[e][1] < 0) ? FacetTag::GammaD : FacetTag::Interior;
      f.area = ed.length * hy;
      f.n1 = ed.n1;
      f.n2 = ed.n2;
      f.ny = 0.0;
      f.base_id = e;
      f.level = j;
      for (int slot = 0; slot < 2; ++slot) {
        if (edge_tri[e][slot] < 0) continue;
        const int c = mesh.cell_id(edge_tri[e][slot], j);
        if (edge_sgn[e][slot] > 0)
          f.cell_minus = c;
        else
          f.cell_plus = c;
      }
    }
  }
  for (int j = 0; j <= N; ++j)
    for (int t = 0; t < T; ++t) {
      TensorMesh::Facet& f = mesh.facets[hf(t, j)];
      f.kind = FacetKind::Horizontal;
      f.tag = (j == 0) ? FacetTag::GammaN
                       : (j == N ? FacetTag::GammaD : FacetTag::Interior);
      f.area = mesh.base.tri_area[t];
      f.n1 = 0.0;
      f.n2 = 0.0;
      f.ny = 1.0;
      f.base_id = t;
      f.level = j;
      if (j > 0) f.cell_minus = mesh.cell_id(t, j - 1);
      if (j < N) f.cell_plus = mesh.cell_id(t, j);
    }
  for (int j = 0; j < N; ++j)
    for (int t = 0; t < T; ++t) {
      TensorMesh::Cell& c = mesh.cells[mesh.cell_id(t, j)];
      c.base_id = t;
      c.slab = j;
      c.nf = 5;
      c.volume = mesh.base.tri_area[t] * (mesh.y_breaks[j + 1] - mesh.y_breaks[j]);
      c.facet = {vf(mesh.base.tri_edges[t][0], j), vf(mesh.base.tri_edges[t][1], j),
                 vf(mesh.base.tri_edges[t][2], j), hf(t, j), hf(t, j + 1)};
      c.sign = {mesh.base.tri_esign[t][0], mesh.base.tri_esign[t][1],
                mesh.base.tri_esign[t][2], -1.0, +1.0};
    }
  return mesh;
}

/// Plain-text mesh dump for debugging: one line per cell, one per facet.
inline void dump_mesh(const TensorMesh& mesh, std::ostream& os) {
  const auto tag_name = [](FacetTag t) {
    switch (t) {
      case FacetTag::GammaN: return "gamma_n";
      case FacetTag::GammaD: return "gamma_d";
      default: return "interior";
    }
  };
  char buf[256];
  for (int c = 0; c < mesh.n_cells(); ++c) {
    const auto& k = mesh.cells[c];
    std::snprintf(buf, sizeof buf, "cell %d %d %d %.17g\n", c, k.base_id, k.slab, k.volume);
    os << buf;
  }
  for (int i = 0; i < mesh.n_facets(); ++i) {
    const auto& f = mesh.facets[i];
    if (mesh.dim_base == 1)
      std::snprintf(buf, sizeof buf, "facet %d %s %.17g %.17g %.17g %d %d\n", i,
                    tag_name(f.tag), f.area, f.n1, f.ny, f.cell_minus, f.cell_plus);
    else
      std::snprintf(buf, sizeof buf, "facet %d %s %.17g %.17g %.17g %.17g %d %d\n", i,
                    tag_name(f.tag), f.area, f.n1, f.n2, f.ny, f.cell_minus, f.cell_plus);
    os << buf;
  }
}

}  // namespace wmix
