#pragma once

#include <cmath>
#include <stdexcept>

#include "wmix/quadrature.hpp"

namespace wmix {

/// Gamma function for x > 0 (Lanczos approximation, g = 7, with reflection
/// below 1/2). Relative accuracy ~1e-13 on the range used here, (0,3).
inline double gamma_fn(double x) {
  if (!(x > 0.0)) throw std::domain_error("gamma_fn: argument must be > 0");
  if (x < 0.5) return M_PI / (std::sin(M_PI * x) * gamma_fn(1.0 - x));
  static const double c[9] = {
      0.99999999999980993,      676.5203681218851,     -1259.1392167224028,
      771.32342877765313,      -176.61502916214059,    12.507343278686905,
      -0.13857109526572012,    9.9843695780195716e-6, 1.5056327351493116e-7};
  const double z = x - 1.0;
  double a = c[0];
  for (int i = 1; i < 9; ++i) a += c[i] / (z + i);
  const double t = z + 7.5;
  return std::sqrt(2.0 * M_PI) * std::pow(t, z + 0.5) * std::exp(-t) * a;
}

namespace detail {

/// Integrand of the cosh representation, with e^{-z} factored out to avoid
/// underflow: K_s(z) = e^{-z} * int_0^T e^{-z(cosh t - 1)} cosh(s t) dt.
inline double bessel_k_scaled_integral(double s, double z) {
  // Truncation point: beyond T the integrand is below e^{-43} relative to
  // the t=0 value. Solved by fixed point since the cosh(st) growth matters
  // for small z.
  double t_cut = std::acosh(1.0 + (43.0 + s) / z);
  for (int it = 0; it < 8; ++it)
    t_cut = std::acosh(1.0 + (43.0 + s * t_cut) / z);

  static const Quad1D base = gauss_legendre(24);
  const double sqz = std::sqrt(z);
  double sum = 0.0;
  double t0 = 0.0;
  while (t0 < t_cut) {
    // Panel width follows the local derivative scale of the integrand.
    const double rate = 1.0 + sqz + z * std::sinh(t0) + s;
    const double w = std::min(1.5 / rate, t_cut - t0);
    const double c = t0 + 0.5 * w, r = 0.5 * w;
    for (int i = 0; i < 24; ++i) {
      const double t = c + r * base.nodes[i];
      sum += r * base.weights[i] *
             std::exp(-z * (std::cosh(t) - 1.0)) * std::cosh(s * t);
    }
    t0 += w;
  }
  return sum;
}

}  // namespace detail

/// Modified Bessel function of the second kind K_s(z), z > 0, |s| <= 2.5.
/// Evaluated by composite Gauss quadrature of the integral representation
/// K_s(z) = int_0^inf e^{-z cosh t} cosh(s t) dt, truncated where the
/// integrand drops below ~1e-18 of its peak. Underflows to 0 for very
/// large z (e^{-z} below the double range).
inline double bessel_k(double s, double z) {
  if (!(z > 0.0)) throw std::domain_error("bessel_k: argument must be > 0");
  s = std::abs(s);  // K_{-s} = K_s
  if (s > 2.5) throw std::domain_error("bessel_k: order out of supported range");
  return std::exp(-z) * detail::bessel_k_scaled_integral(s, z);
}

/// K_s'(z) = -(K_{s-1}(z) + K_{s+1}(z)) / 2.
inline double bessel_k_deriv(double s, double z) {
  return -0.5 * (bessel_k(s - 1.0, z) + bessel_k(s + 1.0, z));
}

/// Normalization constant d_s = 2^(1-2s) Gamma(1-s)/Gamma(s) linking the
/// extension's Neumann flux to the fractional Laplacian.
inline double d_s_const(double s) {
  if (!(s > 0.0 && s < 1.0))
    throw std::domain_error("d_s_const: s must lie in (0,1)");
  return std::pow(2.0, 1.0 - 2.0 * s) * gamma_fn(1.0 - s) / gamma_fn(s);
}

}  // namespace wmix
