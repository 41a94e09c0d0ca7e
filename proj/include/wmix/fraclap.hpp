#pragma once

#include <cmath>
#include <memory>
#include <optional>
#include <stdexcept>
#include <vector>

#include "wmix/specfun.hpp"
#include "wmix/system.hpp"

namespace wmix {

/// Truncated Caffarelli-Silvestre extension problem for (-Delta)^s v = f on
/// the unit interval/square: div(y^alpha grad u) = 0 on Omega x (0,L) with
/// the weighted Neumann trace d_s f at y = 0 and zero Dirichlet data on the
/// lateral and top boundaries. The built-in sine mode uses
/// f = lambda1^s * prod sin(pi x_i), whose extension is known in closed form
/// through the modified Bessel function K_s.
struct ExtensionProblem {
  double s;          // fractional order, in (0,1)
  double alpha;      // 1 - 2s
  int dim_base;      // n, 1 or 2
  double lambda1;    // first Dirichlet eigenvalue of Omega
  double c1 = 1.0;   // truncation constant: L = max(1, c1 |log h|)
  double beta;       // grading exponent, in (1-alpha, 2)
  double d_s;        // 2^(1-2s) Gamma(1-s)/Gamma(s)
  double tol = 1e-11;
  int quad_base = 8;
  int quad_y = 12;
  int quad_y_first = 24;
  bool sine_mode = true;
  ScalarField custom_f;  // Neumann datum on Omega when sine_mode is false

  double truncation_height(int N) const {
    return std::max(1.0, c1 * std::log(double(N)));
  }
};

inline ExtensionProblem make_sine_problem(double s, int dim_base, double c1 = 1.0,
                                          std::optional<double> beta = {}) {
  if (!(s > 0.0 && s < 1.0))
    throw std::invalid_argument("make_sine_problem: s must lie in (0,1)");
  if (dim_base != 1 && dim_base != 2)
    throw std::invalid_argument("make_sine_problem: dim_base must be 1 or 2");
  ExtensionProblem p;
  p.s = s;
  p.alpha = 1.0 - 2.0 * s;
  p.dim_base = dim_base;
  p.lambda1 = (dim_base == 1) ? M_PI * M_PI : 2.0 * M_PI * M_PI;
  p.c1 = c1;
  p.beta = beta ? *beta : 0.5 * ((1.0 - p.alpha) + 2.0);
  if (!(p.beta > 1.0 - p.alpha && p.beta < 2.0))
    throw std::invalid_argument("make_sine_problem: beta must lie in (1-alpha, 2)");
  p.d_s = d_s_const(s);
  return p;
}

inline ExtensionProblem make_extension_problem(double s, int dim_base, ScalarField f,
                                               double c1 = 1.0,
                                               std::optional<double> beta = {}) {
  ExtensionProblem p = make_sine_problem(s, dim_base, c1, beta);
  p.sine_mode = false;
  p.custom_f = std::move(f);
  return p;
}

namespace detail {

/// sine factor and its base gradient: S = prod sin(pi x_i).
inline double sine_val(const ExtensionProblem& p, double x1, double x2) {
  double v = std::sin(M_PI * x1);
  if (p.dim_base == 2) v *= std::sin(M_PI * x2);
  return v;
}
inline void sine_grad(const ExtensionProblem& p, double x1, double x2, double& g1,
                      double& g2) {
  if (p.dim_base == 1) {
    g1 = M_PI * std::cos(M_PI * x1);
    g2 = 0.0;
  } else {
    g1 = M_PI * std::cos(M_PI * x1) * std::sin(M_PI * x2);
    g2 = M_PI * std::sin(M_PI * x1) * std::cos(M_PI * x2);
  }
}

}  // namespace detail

/// Vertical profile of the sine-mode extension,
/// phi(y) = (2^(1-s)/Gamma(s)) (sqrt(lambda1) y)^s K_s(sqrt(lambda1) y),
/// normalized so that phi(0+) = 1.
inline double profile(const ExtensionProblem& p, double y) {
  if (y == 0.0) return 1.0;  // z^s K_s(z) -> 2^(s-1) Gamma(s)
  const double c = std::pow(2.0, 1.0 - p.s) / gamma_fn(p.s);
  const double z = std::sqrt(p.lambda1) * y;
  return c * std::pow(z, p.s) * bessel_k(p.s, z);
}

/// phi'(y) by the product rule, with K_s' from the central-derivative identity.
inline double profile_deriv(const ExtensionProblem& p, double y) {
  if (!(y > 0.0)) throw std::domain_error("profile_deriv: y must be > 0");
  const double c = std::pow(2.0, 1.0 - p.s) / gamma_fn(p.s);
  const double m = std::sqrt(p.lambda1);
  const double z = m * y;
  return c * m * std::pow(z, p.s) *
         (p.s / z * bessel_k(p.s, z) + bessel_k_deriv(p.s, z));
}

/// Neumann datum of the fractional problem, f = lambda1^s * prod sin(pi x_i).
inline double rhs_f(const ExtensionProblem& p, const Point& pt) {
  if (!p.sine_mode) return p.custom_f(pt);
  return std::pow(p.lambda1, p.s) * detail::sine_val(p, pt.x1, pt.x2);
}

/// Exact extension u(x,y) = phi(y) * prod sin(pi x_i); at y = 0 the limit
/// equals the fractional solution v(x).
inline double exact_u(const ExtensionProblem& p, const Point& pt) {
  if (!p.sine_mode) throw std::logic_error("exact_u: no closed form for custom data");
  return profile(p, pt.y) * detail::sine_val(p, pt.x1, pt.x2);
}

/// Exact fractional solution v(x) = prod sin(pi x_i).
inline double exact_v(const ExtensionProblem& p, const Point& pt) {
  if (!p.sine_mode) throw std::logic_error("exact_v: no closed form for custom data");
  return detail::sine_val(p, pt.x1, pt.x2);
}

/// Exact flux sigma = -y^alpha grad u, for y > 0.
inline Vec exact_sigma(const ExtensionProblem& p, const Point& pt) {
  if (!p.sine_mode) throw std::logic_error("exact_sigma: no closed form for custom data");
  if (!(pt.y > 0.0)) throw std::domain_error("exact_sigma: need y > 0");
  const double ya = std::pow(pt.y, p.alpha);
  double g1, g2;
  detail::sine_grad(p, pt.x1, pt.x2, g1, g2);
  Vec v;
  v.x1 = -ya * profile(p, pt.y) * g1;
  v.x2 = -ya * profile(p, pt.y) * g2;
  v.y = -ya * profile_deriv(p, pt.y) * detail::sine_val(p, pt.x1, pt.x2);
  return v;
}

/// A solved truncated extension problem; owns its mesh.
struct ExtensionRun {
  std::shared_ptr<const TensorMesh> mesh;
  DiscreteSolution sol;
  SolveReport report;
  double height = 0.0;  // L actually used
};

/// Build the graded mesh for h = 1/N and L = max(1, c1 log N), prescribe the
/// bottom flux (face averages of d_s f in the +y normal convention), and
/// solve with zero interior source.
inline ExtensionRun setup_and_solve(const ExtensionProblem& p, int N,
                                    SolveMethod method = SolveMethod::Auto) {
  if (N < 2) throw std::invalid_argument("setup_and_solve: N must be >= 2");
  ExtensionRun run;
  run.height = p.truncation_height(N);
  GradedSpec spec(N, run.height, p.beta, N);
  spec.validate_for_weight(p.alpha);
  run.mesh = std::make_shared<TensorMesh>(build_mesh(spec, p.dim_base));

  // sigma_y(x, 0+) = d_s f, i.e. sigma . n_out = -d_s f in the outward
  // convention used by neumann_face_data.
  const double ds = p.d_s;
  const ScalarField neumann = [&p, ds](const Point& pt) { return -ds * rhs_f(p, pt); };
  const FixedDofs fixed = neumann_face_data(neumann, *run.mesh, p.quad_base);

  const ScalarField zero = [](const Point&) { return 0.0; };
  SaddleSystem sys =
      assemble(*run.mesh, PowerWeight(-p.alpha), zero, fixed, p.quad_base);
  run.sol = solve(sys, p.tol, method, &run.report);
  return run;
}

namespace detail {

/// Base-direction quadrature data for one base cell, with the sine factor
/// and its gradient cached at the nodes.
struct BaseRule {
  std::vector<double> w;
  std::vector<double> x1, x2;
  std::vector<double> sv, g1, g2;
  // RT basis data: 1D stores the two hat factors; 2D stores psi_k components.
  std::vector<double> bl, br;                 // (x1-x)/hx, (x-x0)/hx  (1D)
  std::vector<std::array<double, 6>> psi;     // psi_k at node, k-major (2D)
};

inline std::vector<BaseRule> base_rules(const ExtensionProblem& p,
                                        const TensorMesh& mesh) {
  std::vector<BaseRule> out(mesh.n_base_cells());
  if (mesh.dim_base == 1) {
    const Quad1D gl = gauss_legendre(p.quad_base);
    for (int i = 0; i < mesh.n_base_cells(); ++i) {
      BaseRule& r = out[i];
      const double x0 = mesh.x_breaks[i], x1 = mesh.x_breaks[i + 1];
      const double hx = x1 - x0;
      for (int q = 0; q < p.quad_base; ++q) {
        const double x = 0.5 * (x0 + x1) + 0.5 * hx * gl.nodes[q];
        r.w.push_back(0.5 * hx * gl.weights[q]);
        r.x1.push_back(x);
        r.x2.push_back(0.0);
        r.sv.push_back(sine_val(p, x, 0.0));
        double g1, g2;
        sine_grad(p, x, 0.0, g1, g2);
        r.g1.push_back(g1);
        r.g2.push_back(g2);
        r.bl.push_back((x1 - x) / hx);
        r.br.push_back((x - x0) / hx);
      }
    }
    return out;
  }
  const TriQuad tq = triangle_quad(4);
  for (int t = 0; t < mesh.n_base_cells(); ++t) {
    BaseRule& r = out[t];
    const auto& tri = mesh.base.triangles[t];
    const auto& a = mesh.base.vertices[tri[0]];
    const auto& b = mesh.base.vertices[tri[1]];
    const auto& c = mesh.base.vertices[tri[2]];
    const double area = mesh.base.tri_area[t];
    for (std::size_t q = 0; q < tq.points.size(); ++q) {
      const double x1 =
          a.x1 + (b.x1 - a.x1) * tq.points[q].x1 + (c.x1 - a.x1) * tq.points[q].x2;
      const double x2 =
          a.x2 + (b.x2 - a.x2) * tq.points[q].x1 + (c.x2 - a.x2) * tq.points[q].x2;
      r.w.push_back(tq.weights[q] * 2.0 * area);
      r.x1.push_back(x1);
      r.x2.push_back(x2);
      r.sv.push_back(sine_val(p, x1, x2));
      double g1, g2;
      sine_grad(p, x1, x2, g1, g2);
      r.g1.push_back(g1);
      r.g2.push_back(g2);
      std::array<double, 6> psi{};
      const TriBase::Pt2 vtx[3] = {a, b, c};
      for (int k = 0; k < 3; ++k) {
        psi[2 * k] = (x1 - vtx[k].x1) / (2.0 * area);
        psi[2 * k + 1] = (x2 - vtx[k].x2) / (2.0 * area);
      }
      r.psi.push_back(psi);
    }
  }
  return out;
}

/// y-rule for one slab of a weighted error norm. On the first slab the rule
/// absorbs y^sing_exp (the leading singular behavior of the integrand); the
/// caller multiplies the integrand by y^(weight_exp - sing_exp). Interior
/// slabs use a log-substituted Gauss rule, accurate across the strongly
/// graded slab ratios, and the caller multiplies by the full y^weight_exp.
struct SlabRule {
  Quad1D q;
  double resid_exp;  // multiply |err|^2 by y^resid_exp
};

inline SlabRule slab_rule(const ExtensionProblem& p, const TensorMesh& mesh, int slab,
                          double weight_exp, double sing_exp) {
  SlabRule r;
  const double y0 = mesh.y_breaks[slab], y1 = mesh.y_breaks[slab + 1];
  if (slab == 0) {
    r.q = singular_slab_quad(y1, sing_exp, p.quad_y_first);
    r.resid_exp = weight_exp - sing_exp;
  } else {
    r.q = log_gauss(p.quad_y, y0, y1);
    r.resid_exp = weight_exp;
  }
  return r;
}

}  // namespace detail

/// || sigma - sigma_h || in the y^(-alpha)-weighted L2 norm over the
/// truncated cylinder, by per-cell quadrature. The first-slab rule absorbs
/// y^(-|alpha|): for alpha > 0 that is the norm weight itself, for alpha < 0
/// it is the leading singularity of the exact flux.
inline double error_sigma(const ExtensionProblem& p, const DiscreteSolution& sol) {
  const TensorMesh& mesh = *sol.mesh;
  const auto rules = detail::base_rules(p, mesh);
  const int nb = mesh.n_base_cells();
  double acc = 0.0;
  for (int j = 0; j < mesh.n_slabs(); ++j) {
    const auto sr = detail::slab_rule(p, mesh, j, -p.alpha, -std::abs(p.alpha));
    const double y0 = mesh.y_breaks[j], y1 = mesh.y_breaks[j + 1];
    const double hy = y1 - y0;
    const int ny = int(sr.q.nodes.size());
    std::vector<double> ya(ny), phv(ny), pdv(ny), resid(ny);
    for (int k = 0; k < ny; ++k) {
      ya[k] = std::pow(sr.q.nodes[k], p.alpha);
      phv[k] = profile(p, sr.q.nodes[k]);
      pdv[k] = profile_deriv(p, sr.q.nodes[k]);
      resid[k] = std::pow(sr.q.nodes[k], sr.resid_exp);
    }
    for (int i = 0; i < nb; ++i) {
      const auto& r = rules[i];
      const int cell = mesh.cell_id(i, j);
      const auto& ce = mesh.cells[cell];
      const double base_area = ce.volume / hy;
      const double db = sol.sigma[ce.facet[ce.nf - 2]];
      const double dt = sol.sigma[ce.facet[ce.nf - 1]];
      for (int k = 0; k < ny; ++k) {
        const double y = sr.q.nodes[k];
        const double sy_h = (db * (y1 - y) + dt * (y - y0)) / (base_area * hy);
        double sum = 0.0;
        for (std::size_t q = 0; q < r.w.size(); ++q) {
          double h1, h2 = 0.0;
          if (mesh.dim_base == 1) {
            h1 = (sol.sigma[ce.facet[0]] * r.bl[q] + sol.sigma[ce.facet[1]] * r.br[q]) /
                 hy;
          } else {
            h1 = 0.0;
            for (int kk = 0; kk < 3; ++kk) {
              const double dk = sol.sigma[ce.facet[kk]] * ce.sign[kk] / hy;
              h1 += dk * r.psi[q][2 * kk];
              h2 += dk * r.psi[q][2 * kk + 1];
            }
          }
          const double e1 = -ya[k] * phv[k] * r.g1[q] - h1;
          const double e2 = -ya[k] * phv[k] * r.g2[q] - h2;
          const double e3 = -ya[k] * pdv[k] * r.sv[q] - sy_h;
          sum += r.w[q] * (e1 * e1 + e2 * e2 + e3 * e3);
        }
        acc += sr.q.weights[k] * resid[k] * sum;
      }
    }
  }
  return std::sqrt(acc);
}

/// || u - u_h || in the y^alpha-weighted L2 norm over the truncated cylinder.
inline double error_u(const ExtensionProblem& p, const DiscreteSolution& sol) {
  const TensorMesh& mesh = *sol.mesh;
  const auto rules = detail::base_rules(p, mesh);
  const int nb = mesh.n_base_cells();
  double acc = 0.0;
  for (int j = 0; j < mesh.n_slabs(); ++j) {
    const auto sr = detail::slab_rule(p, mesh, j, p.alpha, std::min(p.alpha, 0.0));
    const int ny = int(sr.q.nodes.size());
    std::vector<double> phv(ny), resid(ny);
    for (int k = 0; k < ny; ++k) {
      phv[k] = profile(p, sr.q.nodes[k]);
      resid[k] = std::pow(sr.q.nodes[k], sr.resid_exp);
    }
    for (int i = 0; i < nb; ++i) {
      const auto& r = rules[i];
      const double uh = sol.u[mesh.cell_id(i, j)];
      for (int k = 0; k < ny; ++k) {
        double sum = 0.0;
        for (std::size_t q = 0; q < r.w.size(); ++q) {
          const double e = phv[k] * r.sv[q] - uh;
          sum += r.w[q] * e * e;
        }
        acc += sr.q.weights[k] * resid[k] * sum;
      }
    }
  }
  return std::sqrt(acc);
}

/// Piecewise-constant trace approximation on the base partition.
struct TraceSolution {
  const TensorMesh* mesh = nullptr;
  std::vector<double> value;  // one per base cell

  double value_at(const Point& pt) const {
    if (mesh->dim_base == 1) {
      const auto& xb = mesh->x_breaks;
      for (std::size_t i = 0; i + 1 < xb.size(); ++i)
        if (pt.x1 <= xb[i + 1] || i + 2 == xb.size()) return value[i];
    }
    for (int t = 0; t < mesh->n_base_cells(); ++t)
      if (mesh->contains(mesh->cell_id(t, 0), Point{pt.x1, pt.x2, 0.0})) return value[t];
    throw std::invalid_argument("TraceSolution: point outside the base domain");
  }
};

/// Flux-integral trace correction: per base cell,
/// v = u_h(first slab) + int_0^{y1} tau0(y) y^(-alpha) sigma_y(x,y) dy with
/// tau0 = (y1-y)/y1 and sigma_y the (affine) vertical flux in the first-slab
/// cell of that column. Closed form through power integrals.
inline TraceSolution postprocess_trace(const ExtensionProblem& p,
                                       const DiscreteSolution& sol) {
  const TensorMesh& mesh = *sol.mesh;
  TraceSolution tr;
  tr.mesh = &mesh;
  tr.value.resize(mesh.n_base_cells());
  const double y1 = mesh.y_breaks[1];
  const double I0 = power_integral(0.0, y1, -p.alpha, 0);
  const double I1 = power_integral(0.0, y1, -p.alpha, 1);
  const double I2 = power_integral(0.0, y1, -p.alpha, 2);
  for (int i = 0; i < mesh.n_base_cells(); ++i) {
    const int c = mesh.cell_id(i, 0);
    const auto& ce = mesh.cells[c];
    const double base_area = ce.volume / y1;
    const double db = sol.sigma[ce.facet[ce.nf - 2]];
    const double dt = sol.sigma[ce.facet[ce.nf - 1]];
    // int tau0 y^-a (db (y1-y) + dt y) / (A y1) dy
    const double corr =
        (db * (y1 * y1 * I0 - 2.0 * y1 * I1 + I2) + dt * (y1 * I1 - I2)) /
        (base_area * y1 * y1);
    tr.value[i] = sol.u[c] + corr;
  }
  return tr;
}

/// The full flux integral int_0^L y^(-alpha) sigma_y(x,y) dy per base cell
/// (equal to the trace correction formula on solved systems).
inline std::vector<double> trace_flux_integral(const ExtensionProblem& p,
                                               const DiscreteSolution& sol) {
  const TensorMesh& mesh = *sol.mesh;
  std::vector<double> out(mesh.n_base_cells(), 0.0);
  for (int j = 0; j < mesh.n_slabs(); ++j) {
    const double y0 = mesh.y_breaks[j], y1 = mesh.y_breaks[j + 1];
    const double hy = y1 - y0;
    const double J0 = power_integral(y0, y1, -p.alpha, 0);
    const double J1 = power_integral(y0, y1, -p.alpha, 1);
    for (int i = 0; i < mesh.n_base_cells(); ++i) {
      const int c = mesh.cell_id(i, j);
      const auto& ce = mesh.cells[c];
      const double base_area = ce.volume / hy;
      const double db = sol.sigma[ce.facet[ce.nf - 2]];
      const double dt = sol.sigma[ce.facet[ce.nf - 1]];
      out[i] += (db * (y1 * J0 - J1) + dt * (J1 - y0 * J0)) / (base_area * hy);
    }
  }
  return out;
}

/// L2(Omega) distance between the piecewise-constant trace and the exact v.
inline double error_v(const ExtensionProblem& p, const TraceSolution& tr) {
  const TensorMesh& mesh = *tr.mesh;
  double acc = 0.0;
  if (mesh.dim_base == 1) {
    const Quad1D gl = gauss_legendre(p.quad_base);
    for (int i = 0; i < mesh.n_base_cells(); ++i) {
      const double x0 = mesh.x_breaks[i], x1 = mesh.x_breaks[i + 1];
      for (int q = 0; q < p.quad_base; ++q) {
        const double x = 0.5 * (x0 + x1) + 0.5 * (x1 - x0) * gl.nodes[q];
        const double e = exact_v(p, Point{x, 0.0, 0.0}) - tr.value[i];
        acc += 0.5 * (x1 - x0) * gl.weights[q] * e * e;
      }
    }
    return std::sqrt(acc);
  }
  const TriQuad tq = triangle_quad(4);
  for (int t = 0; t < mesh.n_base_cells(); ++t) {
    const auto& tri = mesh.base.triangles[t];
    const auto& a = mesh.base.vertices[tri[0]];
    const auto& b = mesh.base.vertices[tri[1]];
    const auto& c = mesh.base.vertices[tri[2]];
    for (std::size_t q = 0; q < tq.points.size(); ++q) {
      const double x1 =
          a.x1 + (b.x1 - a.x1) * tq.points[q].x1 + (c.x1 - a.x1) * tq.points[q].x2;
      const double x2 =
          a.x2 + (b.x2 - a.x2) * tq.points[q].x1 + (c.x2 - a.x2) * tq.points[q].x2;
      const double e = exact_v(p, Point{x1, x2, 0.0}) - tr.value[t];
      acc += tq.weights[q] * 2.0 * mesh.base.tri_area[t] * e * e;
    }
  }
  return std::sqrt(acc);
}

}  // namespace wmix
