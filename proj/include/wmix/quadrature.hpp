#pragma once

#include <cmath>
#include <stdexcept>
#include <utility>
#include <variant>
#include <vector>

#include "wmix/types.hpp"

namespace wmix {

/// Power weight y^gamma. The restriction gamma in (-1,1) keeps both the
/// weight and its reciprocal in the Muckenhoupt class A2 (strong A2 as well),
/// which is what the weighted forms require.
struct PowerWeight {
  double gamma;

  explicit PowerWeight(double g) : gamma(g) {
    if (!(g > -1.0 && g < 1.0))
      throw std::invalid_argument("PowerWeight: exponent must lie in (-1,1)");
  }
};

/// int_{y0}^{y1} y^(gamma+k) dy in closed form.
/// Requires gamma+k > -1 when y0 == 0; uses the log branch when gamma+k == -1.
inline double power_integral(double y0, double y1, double gamma, int k) {
  if (k < 0) throw std::invalid_argument("power_integral: k must be >= 0");
  if (!(y0 >= 0.0 && y1 > y0))
    throw std::invalid_argument("power_integral: need 0 <= y0 < y1");
  const double p = gamma + k + 1.0;
  if (y0 == 0.0 && p <= 0.0)
    throw std::domain_error("power_integral: divergent integral at y=0");
  if (std::abs(p) < 1e-14) return std::log(y1 / y0);
  return (std::pow(y1, p) - std::pow(y0, p)) / p;
}

/// One-dimensional quadrature rule. sum(weights[i] * g(nodes[i]))
/// approximates an integral over (lo,hi); for weighted rules the weight
/// function is folded into the weights.
struct Quad1D {
  std::vector<double> nodes;
  std::vector<double> weights;
  double lo = -1.0;
  double hi = 1.0;
};

/// Gauss-Legendre rule on (-1,1), exact for polynomials of degree <= 2*order-1.
inline Quad1D gauss_legendre(int order) {
  if (order < 1 || order > 64)
    throw std::invalid_argument("gauss_legendre: order must be in [1,64]");
  Quad1D q;
  q.nodes.resize(order);
  q.weights.resize(order);
  const int n = order;
  for (int i = 0; i < (n + 1) / 2; ++i) {
    // Newton iteration from the Chebyshev-like initial guess.
    double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      if (n == 1) p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      const double pn = (n == 1) ? x : p1;
      const double pm = (n == 1) ? 1.0 : p0;
      dp = n * (x * pn - pm) / (x * x - 1.0);
      const double dx = pn / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    q.nodes[i] = -x;
    q.nodes[n - 1 - i] = x;
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    q.weights[i] = w;
    q.weights[n - 1 - i] = w;
  }
  if (n % 2 == 1) q.nodes[n / 2] = 0.0;
  return q;
}

/// Gauss-Legendre mapped to (lo,hi).
inline Quad1D gauss_legendre(int order, double lo, double hi) {
  Quad1D q = gauss_legendre(order);
  const double c = 0.5 * (lo + hi), r = 0.5 * (hi - lo);
  for (int i = 0; i < order; ++i) {
    q.nodes[i] = c + r * q.nodes[i];
    q.weights[i] *= r;
  }
  q.lo = lo;
  q.hi = hi;
  return q;
}

/// Gauss rule in tau = log(y) on (lo,hi), 0 < lo < hi. The returned weights
/// include the Jacobian y, so sum(w_i g(y_i)) ~ int g(y) dy. Accurate for
/// integrands of the form y^mu * (smooth) even when hi/lo spans decades,
/// which is the situation on strongly graded slabs.
inline Quad1D log_gauss(int order, double lo, double hi) {
  if (!(lo > 0.0 && hi > lo))
    throw std::invalid_argument("log_gauss: need 0 < lo < hi");
  Quad1D q = gauss_legendre(order, std::log(lo), std::log(hi));
  for (int i = 0; i < order; ++i) {
    const double y = std::exp(q.nodes[i]);
    q.nodes[i] = y;
    q.weights[i] *= y;
  }
  q.lo = lo;
  q.hi = hi;
  return q;
}

/// Rule on (0,b) absorbing the weight y^gamma, gamma in (-1,0]:
/// sum(w_i g(y_i)) ~ int_0^b y^gamma g(y) dy.
/// Uses the substitution y = b u^(2/(1+gamma)), which maps the weighted
/// integral to 2 b^(1+gamma)/(1+gamma) * int_0^1 u g(y(u)) du and is then
/// evaluated by Gauss-Legendre in u. The doubled grading exponent keeps
/// post-substitution endpoint exponents high enough that monomials g = y^k
/// integrate to ~1e-12 relative accuracy at order 24.
inline Quad1D singular_slab_quad(double b, double gamma, int order) {
  if (!(b > 0.0)) throw std::invalid_argument("singular_slab_quad: b must be > 0");
  if (gamma <= -1.0)
    throw std::domain_error("singular_slab_quad: divergent weight, gamma <= -1");
  if (gamma > 0.0)
    throw std::invalid_argument(
        "singular_slab_quad: gamma must be <= 0 (use gauss_legendre and "
        "evaluate the weight explicitly for positive exponents)");
  Quad1D u = gauss_legendre(order, 0.0, 1.0);
  Quad1D q;
  q.nodes.resize(order);
  q.weights.resize(order);
  const double m = 2.0 / (1.0 + gamma);
  const double c = 2.0 * std::pow(b, 1.0 + gamma) / (1.0 + gamma);
  for (int i = 0; i < order; ++i) {
    q.nodes[i] = b * std::pow(u.nodes[i], m);
    q.weights[i] = c * u.weights[i] * u.nodes[i];
  }
  q.lo = 0.0;
  q.hi = b;
  return q;
}

/// Symmetric quadrature on the reference triangle {x>=0, y>=0, x+y<=1},
/// exact for total degree <= order, order in {1,2,3,4}. Weights sum to 1/2.
struct TriQuad {
  struct Pt {
    double x1, x2;
  };
  std::vector<Pt> points;
  std::vector<double> weights;
};

inline TriQuad triangle_quad(int order) {
  TriQuad q;
  switch (order) {
    case 1:
      q.points = {{1.0 / 3.0, 1.0 / 3.0}};
      q.weights = {0.5};
      break;
    case 2:
      q.points = {{1.0 / 6.0, 1.0 / 6.0}, {2.0 / 3.0, 1.0 / 6.0}, {1.0 / 6.0, 2.0 / 3.0}};
      q.weights = {1.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0};
      break;
    case 3:
    case 4: {
      // Six-point degree-4 rule; the two orbits have closed-form parameters.
      const double r = std::sqrt(38.0 - 44.0 * std::sqrt(2.0 / 5.0));
      const double a1 = (8.0 - std::sqrt(10.0) + r) / 18.0;
      const double a2 = (8.0 - std::sqrt(10.0) - r) / 18.0;
      const double t = std::sqrt(213125.0 - 53320.0 * std::sqrt(10.0));
      const double w1 = (620.0 + t) / 3720.0 / 2.0;
      const double w2 = (620.0 - t) / 3720.0 / 2.0;
      for (auto [a, w] : {std::pair{a1, w1}, std::pair{a2, w2}}) {
        const double b = 1.0 - 2.0 * a;
        q.points.push_back({b, a});
        q.points.push_back({a, b});
        q.points.push_back({a, a});
        q.weights.insert(q.weights.end(), 3, w);
      }
      break;
    }
    default:
      throw std::invalid_argument("triangle_quad: unsupported order (need 1..4)");
  }
  return q;
}

/// Scalar coefficient a(x,y): either a power weight y^gamma (integrated in
/// closed form wherever it appears) or a generic positive callback
/// (integrated by tensor Gauss rules).
class WeightDescriptor {
 public:
  WeightDescriptor(PowerWeight w) : rep_(w) {}  // NOLINT(google-explicit-constructor)
  WeightDescriptor(ScalarField f) : rep_(std::move(f)) {}  // NOLINT

  bool is_power() const { return std::holds_alternative<PowerWeight>(rep_); }
  double gamma() const { return std::get<PowerWeight>(rep_).gamma; }

  double operator()(const Point& p) const {
    if (is_power()) return std::pow(p.y, gamma());
    return std::get<ScalarField>(rep_)(p);
  }

 private:
  std::variant<PowerWeight, ScalarField> rep_;
};

/// Axis-aligned box inside the cylinder closure; x2 extent ignored for a 1D base.
struct Box {
  double x1lo = 0.0, x1hi = 1.0;
  double x2lo = 0.0, x2hi = 1.0;
  double ylo = 0.0, yhi = 1.0;
  int dim_base = 1;
};

/// The bracketed product (avg of w)(avg of 1/w) over the box, the quantity
/// whose supremum over rectangles defines the strong-A2 constant.
inline double a2_product(const Box& box, const WeightDescriptor& w, int order = 16) {
  if (!(box.x1hi > box.x1lo && box.yhi > box.ylo))
    throw std::invalid_argument("a2_product: empty box");
  if (w.is_power()) {
    const double g = w.gamma();
    if (box.ylo == 0.0 && (g <= -1.0 || -g <= -1.0))
      throw std::domain_error("a2_product: divergent weight integral");
    const double len = box.yhi - box.ylo;
    const double avg_w = power_integral(box.ylo, box.yhi, g, 0) / len;
    const double avg_inv = power_integral(box.ylo, box.yhi, -g, 0) / len;
    return avg_w * avg_inv;
  }
  const Quad1D qx1 = gauss_legendre(order, box.x1lo, box.x1hi);
  const Quad1D qy = gauss_legendre(order, box.ylo, box.yhi);
  double vol = (box.x1hi - box.x1lo) * (box.yhi - box.ylo);
  double sw = 0.0, si = 0.0;
  if (box.dim_base == 2) {
    const Quad1D qx2 = gauss_legendre(order, box.x2lo, box.x2hi);
    vol *= (box.x2hi - box.x2lo);
    for (int i = 0; i < order; ++i)
      for (int j = 0; j < order; ++j)
        for (int k = 0; k < order; ++k) {
          const Point p{qx1.nodes[i], qx2.nodes[j], qy.nodes[k]};
          const double ww = qx1.weights[i] * qx2.weights[j] * qy.weights[k];
          const double v = w(p);
          sw += ww * v;
          si += ww / v;
        }
  } else {
    for (int i = 0; i < order; ++i)
      for (int k = 0; k < order; ++k) {
        const Point p{qx1.nodes[i], 0.0, qy.nodes[k]};
        const double ww = qx1.weights[i] * qy.weights[k];
        const double v = w(p);
        sw += ww * v;
        si += ww / v;
      }
  }
  return (sw / vol) * (si / vol);
}

}  // namespace wmix
