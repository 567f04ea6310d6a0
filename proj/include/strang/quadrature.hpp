// Gauss rules on segments, triangles and polygons.

#pragma once

#include <span>
#include <vector>

#include "strang/mesh.hpp"

namespace strang {

struct Quadrature {
  std::vector<Point> nodes;
  std::vector<double> weights;
  int degree = 0;  // polynomials up to this total degree are integrated exactly

  std::size_t size() const { return nodes.size(); }
  double sum_weights() const;
};

/// n-point Gauss-Legendre rule on [0, 1] as (node, weight) pairs.
std::vector<std::pair<double, double>> gauss_legendre(int n);

Quadrature segment_quadrature(const Point& a, const Point& b, int degree);
Quadrature triangle_quadrature(const Point& a, const Point& b, const Point& c, int degree);

/// Sub-triangulates from the vertex centroid when every fan triangle is
/// positively oriented, otherwise by ear clipping.
Quadrature polygon_quadrature(std::span<const Point> loop, int degree);
Quadrature polygon_quadrature(const Mesh& mesh, std::size_t cell, int degree);
Quadrature face_quadrature(const Mesh& mesh, std::size_t face, int degree);

}  // namespace strang
