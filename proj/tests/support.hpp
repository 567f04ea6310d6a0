// Independent oracles and generators shared by the unit and acceptance tests.

#pragma once

#include <cmath>
#include <numbers>
#include <random>

#include "strang/fv.hpp"

namespace strang::testing {

// Single convex cell with vertices at random angles on a jittered ellipse.
inline Mesh random_polygon(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> nv(3, 8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int n = nv(rng);
  std::vector<double> angles;
  for (int i = 0; i < n; ++i) angles.push_back(2.0 * std::numbers::pi * (i + 0.8 * u(rng)) / n);
  const double a = 0.5 + u(rng), b = 0.5 + u(rng);
  const Point shift(u(rng) * 3.0, u(rng) * 3.0);
  const double scale = std::pow(10.0, -2.0 * u(rng));
  std::vector<Point> pts;
  std::vector<std::size_t> loop;
  for (int i = 0; i < n; ++i) {
    pts.push_back(shift + scale * Point(a * std::cos(angles[std::size_t(i)]), b * std::sin(angles[std::size_t(i)])));
    loop.push_back(std::size_t(i));
  }
  return Mesh::from_cells(pts, {loop});
}

inline Matrix2d random_tensor(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double th = u(rng) * std::numbers::pi, l1 = 0.1 + u(rng), l2 = 0.1 + 5.0 * u(rng);
  Eigen::Matrix2d R;
  R << std::cos(th), -std::sin(th), std::sin(th), std::cos(th);
  const Matrix2d K = R * Eigen::Vector2d(l1, l2).asDiagonal() * R.transpose();
  return make_tensor(K(0, 0), 0.5 * (K(0, 1) + K(1, 0)), K(1, 1));
}

// MFV local problem assembled by probing the defining bilinear form with unit
// flux families and unit unknown vectors, each term evaluated from its
// definition (gradient as a sum over faces, residual face by face).
inline MatrixXd hmm_brute_force(const Mesh& mesh, std::size_t c, const Matrix2d& K, double lambda_max, double stab) {
  const Cell& T = mesh.cell(c);
  const std::size_t n = T.num_faces();
  const auto N = static_cast<Eigen::Index>(n);
  auto gradient = [&](const VectorXd& f) {
    Point s = Point::Zero();
    for (std::size_t i = 0; i < n; ++i) s += f[Eigen::Index(i)] * (mesh.face(T.faces[i]).centroid - T.point);
    return Point(-K.inverse() * s / T.measure);
  };
  auto residual = [&](const VectorXd& f, std::size_t i) {
    return f[Eigen::Index(i)] + mesh.face(T.faces[i]).measure * (K * gradient(f)).dot(T.normals[i]);
  };
  auto form = [&](const VectorXd& f, const VectorXd& g) {
    double s = T.measure * (K * gradient(f)).dot(gradient(g));
    for (std::size_t i = 0; i < n; ++i)
      s += stab * T.distances[i] / (mesh.face(T.faces[i]).measure * lambda_max) * residual(f, i) * residual(g, i);
    return s;
  };
  MatrixXd M(N, N), rhs(N, N + 1);
  for (std::size_t i = 0; i < n; ++i) {
    const VectorXd ei = VectorXd::Unit(Eigen::Index(n), Eigen::Index(i));
    for (std::size_t j = 0; j < n; ++j) M(Eigen::Index(i), Eigen::Index(j)) = form(VectorXd::Unit(Eigen::Index(n), Eigen::Index(j)), ei);
    for (std::size_t k = 0; k <= n; ++k) {
      const VectorXd v = VectorXd::Unit(Eigen::Index(n + 1), Eigen::Index(k));
      double s = 0.0;
      for (std::size_t f = 0; f < n; ++f) s += (v[0] - v[Eigen::Index(f + 1)]) * ei[Eigen::Index(f)];
      rhs(Eigen::Index(i), Eigen::Index(k)) = s;
    }
  }
  return M.fullPivLu().solve(rhs);
}

// Tensor grid of cell points with matching face points: keeps
// K-admissibility for diagonal K while |x_T - x_F| differs from the half widths.
inline Mesh shifted_point_grid() {
  const Mesh base = build_cartesian(4, 3);
  const double ox[] = {0.05, -0.03, 0.0, 0.07}, oy[] = {-0.04, 0.02, 0.06};
  std::vector<Point> cp, fp;
  for (std::size_t c = 0; c < base.num_cells(); ++c) cp.push_back(base.cell(c).centroid + Point(ox[c % 4], oy[c / 4]));
  for (std::size_t f = 0; f < base.num_faces(); ++f) {
    const Face& F = base.face(f);
    const Point& x1 = cp[std::size_t(F.cells[0])];
    fp.push_back(std::abs(F.normal.x()) > 0.5 ? Point(F.centroid.x(), x1.y()) : Point(x1.x(), F.centroid.y()));
  }
  return base.with_points(cp, fp);
}

// Two-point boundedness constant: max over (T, F) of (d_TF |K n| / (lambda_max |x_F - x_T|))^2.
inline double tpfa_bound_closed_form(const Mesh& mesh, const DiffusionField& field) {
  double closed = 0.0;
  for (const Cell& T : mesh.cells()) {
    const Matrix2d& K = field.tensor(T.subdomain);
    for (std::size_t i = 0; i < T.num_faces(); ++i) {
      const double r = T.distances[i] * (K * T.normals[i]).norm() /
                       (field.info(T.subdomain).lambda_max * (mesh.face(T.faces[i]).point - T.point).norm());
      closed = std::max(closed, r * r);
    }
  }
  return closed;
}

}  // namespace strang::testing
