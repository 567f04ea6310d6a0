#include "strang/quadrature.hpp"

#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

namespace strang {

double Quadrature::sum_weights() const { return std::accumulate(weights.begin(), weights.end(), 0.0); }

namespace {

// Legendre P_n(x) and its derivative by the three-term recurrence.
std::pair<double, double> legendre(int n, double x) {
  double p0 = 1.0, p1 = x;
  for (int j = 2; j <= n; ++j) {
    const double p2 = ((2.0 * j - 1.0) * x * p1 - (j - 1.0) * p0) / j;
    p0 = p1;
    p1 = p2;
  }
  return {p1, n * (x * p1 - p0) / (x * x - 1.0)};
}

}  // namespace

std::vector<std::pair<double, double>> gauss_legendre(int n) {
  if (n < 1) throw std::invalid_argument("gauss_legendre: n must be positive");
  std::vector<std::pair<double, double>> rule(static_cast<std::size_t>(n));
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    for (int it = 0; it < 100; ++it) {
      const auto [p, dp] = legendre(n, x);
      const double dx = p / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    const double dp = legendre(n, x).second;
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule[static_cast<std::size_t>(i)] = {0.5 * (1.0 - x), 0.5 * w};
    rule[static_cast<std::size_t>(n - 1 - i)] = {0.5 * (1.0 + x), 0.5 * w};
  }
  return rule;
}

Quadrature segment_quadrature(const Point& a, const Point& b, int degree) {
  const int n = std::max(1, (degree + 2) / 2);
  const double len = (b - a).norm();
  Quadrature q;
  q.degree = 2 * n - 1;
  for (auto [s, w] : gauss_legendre(n)) {
    q.nodes.push_back(a + s * (b - a));
    q.weights.push_back(w * len);
  }
  return q;
}

Quadrature triangle_quadrature(const Point& a, const Point& b, const Point& c, int degree) {
  // Collapsed tensor rule: x = a + s (b - a) + (1 - s) t (c - a), Jacobian 2|T|(1 - s).
  const int n = std::max(1, (degree + 3) / 2);
  const auto rule = gauss_legendre(n);
  const double area2 = (b - a).x() * (c - a).y() - (b - a).y() * (c - a).x();
  Quadrature q;
  q.degree = 2 * n - 2;
  for (auto [s, ws] : rule)
    for (auto [t, wt] : rule) {
      q.nodes.push_back(a + s * (b - a) + (1.0 - s) * t * (c - a));
      q.weights.push_back(area2 * (1.0 - s) * ws * wt);
    }
  return q;
}

namespace {

double orient(const Point& a, const Point& b, const Point& c) {
  return (b - a).x() * (c - a).y() - (b - a).y() * (c - a).x();
}

bool inside_triangle(const Point& p, const Point& a, const Point& b, const Point& c) {
  return orient(a, b, p) >= 0 && orient(b, c, p) >= 0 && orient(c, a, p) >= 0;
}

std::vector<std::array<Point, 3>> ear_clip(std::span<const Point> loop) {
  std::vector<std::size_t> idx(loop.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::vector<std::array<Point, 3>> tris;
  while (idx.size() > 3) {
    bool clipped = false;
    for (std::size_t i = 0; i < idx.size(); ++i) {
      const std::size_t ip = idx[(i + idx.size() - 1) % idx.size()], ic = idx[i], in = idx[(i + 1) % idx.size()];
      if (orient(loop[ip], loop[ic], loop[in]) <= 0) continue;
      bool ear = true;
      for (std::size_t j : idx)
        if (j != ip && j != ic && j != in && inside_triangle(loop[j], loop[ip], loop[ic], loop[in])) {
          ear = false;
          break;
        }
      if (!ear) continue;
      tris.push_back({loop[ip], loop[ic], loop[in]});
      idx.erase(idx.begin() + static_cast<std::ptrdiff_t>(i));
      clipped = true;
      break;
    }
    if (!clipped) throw std::runtime_error("polygon_quadrature: ear clipping failed (self-intersecting polygon?)");
  }
  if (orient(loop[idx[0]], loop[idx[1]], loop[idx[2]]) <= 0)
    throw std::runtime_error("polygon_quadrature: ear clipping failed (self-intersecting polygon?)");
  tris.push_back({loop[idx[0]], loop[idx[1]], loop[idx[2]]});
  return tris;
}

}  // namespace

Quadrature polygon_quadrature(std::span<const Point> loop, int degree) {
  if (degree < 0) throw std::invalid_argument("polygon_quadrature: negative degree");
  Point center = Point::Zero();
  for (const auto& p : loop) center += p;
  center /= static_cast<double>(loop.size());
  std::vector<std::array<Point, 3>> tris;
  bool fan = true;
  for (std::size_t i = 0; i < loop.size(); ++i) {
    const Point& a = loop[i];
    const Point& b = loop[(i + 1) % loop.size()];
    if (orient(center, a, b) <= 0) {
      fan = false;
      break;
    }
    tris.push_back({center, a, b});
  }
  if (!fan) tris = ear_clip(loop);
  Quadrature q;
  for (const auto& t : tris) {
    auto tq = triangle_quadrature(t[0], t[1], t[2], degree);
    q.degree = tq.degree;
    q.nodes.insert(q.nodes.end(), tq.nodes.begin(), tq.nodes.end());
    q.weights.insert(q.weights.end(), tq.weights.begin(), tq.weights.end());
  }
  return q;
}

Quadrature polygon_quadrature(const Mesh& mesh, std::size_t cell, int degree) {
  std::vector<Point> loop;
  for (auto v : mesh.cell(cell).vertices) loop.push_back(mesh.vertices()[v]);
  return polygon_quadrature(loop, degree);
}

Quadrature face_quadrature(const Mesh& mesh, std::size_t face, int degree) {
  const Face& f = mesh.face(face);
  return segment_quadrature(mesh.vertices()[f.vertices[0]], mesh.vertices()[f.vertices[1]], degree);
}

}  // namespace strang
