#pragma once

#include <functional>

namespace wmix {

/// Point in the cylinder Omega x (0,L). The base coordinates are (x1,x2)
/// (x2 unused for a 1D base) and y is the extension direction.
struct Point {
  double x1 = 0.0;
  double x2 = 0.0;
  double y = 0.0;
};

/// Vector field value, components ordered like Point.
struct Vec {
  double x1 = 0.0;
  double x2 = 0.0;
  double y = 0.0;
};

using ScalarField = std::function<double(const Point&)>;
using VectorField = std::function<Vec(const Point&)>;

}  // namespace wmix
