// Scaled monomial bases on cells and faces, L2 and oblique elliptic projectors.

#pragma once

#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "strang/mesh.hpp"
#include "strang/quadrature.hpp"

namespace strang {

using Eigen::Matrix2d;
using Eigen::MatrixXd;
using Eigen::VectorXd;

inline constexpr int poly_dim(int k) { return k < 0 ? 0 : (k + 1) * (k + 2) / 2; }

/// Monomials ((x - center)/scale)^alpha ordered by total degree, then by
/// decreasing power of x: 1, X, Y, X^2, XY, Y^2, ...
class CellBasis {
 public:
  CellBasis() = default;
  CellBasis(Point center, double scale, int degree);

  int degree() const { return degree_; }
  int size() const { return poly_dim(degree_); }
  const Point& center() const { return center_; }
  double scale() const { return scale_; }
  std::pair<int, int> exponent(int j) const { return exponents_[static_cast<std::size_t>(j)]; }

  VectorXd eval(const Point& x) const;
  /// Rows are basis functions, columns the x and y derivatives.
  Eigen::Matrix<double, Eigen::Dynamic, 2> grad(const Point& x) const;

 private:
  Point center_ = Point::Zero();
  double scale_ = 1.0;
  int degree_ = 0;
  std::vector<std::pair<int, int>> exponents_;
};

/// Monomials ((x - center).tangent / scale)^j on a face, j = 0..degree.
class FaceBasis {
 public:
  FaceBasis() = default;
  FaceBasis(Point center, Point tangent, double scale, int degree);

  int degree() const { return degree_; }
  int size() const { return degree_ + 1; }
  VectorXd eval(const Point& x) const;

 private:
  Point center_ = Point::Zero();
  Point tangent_ = Point(1.0, 0.0);
  double scale_ = 1.0;
  int degree_ = 0;
};

CellBasis cell_basis(const Mesh& mesh, std::size_t cell, int degree);
FaceBasis face_basis(const Mesh& mesh, std::size_t face, int degree);

/// Polynomial expressed in a CellBasis.
struct CellPolynomial {
  CellBasis basis;
  VectorXd coeffs;

  double value(const Point& x) const { return basis.eval(x).dot(coeffs); }
  Point gradient(const Point& x) const { return basis.grad(x).transpose() * coeffs; }
};

/// Analytic scalar function with its gradient.
struct ScalarField {
  std::function<double(const Point&)> value;
  std::function<Point(const Point&)> gradient;
};

MatrixXd mass_matrix(const CellBasis& basis, const Quadrature& q);
MatrixXd mass_matrix(const FaceBasis& basis, const Quadrature& q);
/// (K grad phi_i, grad phi_j) on the cell.
MatrixXd stiffness_matrix(const CellBasis& basis, const Matrix2d& K, const Quadrature& q);

/// Solves M c = rhs for a symmetric positive definite Gram matrix. When the
/// condition estimate exceeds 1e8 the basis is re-orthogonalised by modified
/// Gram-Schmidt in the M inner product before solving.
VectorXd solve_gram(const MatrixXd& M, const VectorXd& rhs);

/// Coefficients of the L2 projection of f onto P^l(T) in cell_basis(mesh, cell, l).
VectorXd l2_project(const Mesh& mesh, std::size_t cell, const std::function<double(const Point&)>& f, int l,
                    int extra_degree = 10);

enum class Closure { cell_mean, boundary_mean };

/// Oblique elliptic projection of an explicit function onto P^k(T):
/// (K grad pi v, grad w) = (K grad v, grad w) for all w in P^k, plus the closure.
VectorXd oblique_project(const Mesh& mesh, std::size_t cell, const Matrix2d& K, const ScalarField& v, int k,
                         Closure closure, int extra_degree = 10);

enum class ProjectorKind { l2, oblique };

struct ProjectorRateRow {
  std::size_t n = 0;  // cells per direction
  double h = 0.0;
  double err_l2 = 0.0;        // ||v - pi v||
  double err_h1 = 0.0;        // |v - pi v|_{H^1}, broken
  double err_weighted = 0.0;  // ||K^{1/2} grad(v - pi v)||, broken
  double err_trace = 0.0;     // (sum_T h_T ||v - pi v||^2_{dT})^{1/2}
  double eoc_l2 = 0.0, eoc_h1 = 0.0, eoc_weighted = 0.0, eoc_trace = 0.0;
};

/// Projection errors of v on uniform Cartesian meshes of the unit square with
/// `sizes` cells per direction; EOCs between consecutive rows (first row 0).
std::vector<ProjectorRateRow> projector_rate_study(ProjectorKind kind, const Matrix2d& K, const ScalarField& v,
                                                   int k, const std::vector<std::size_t>& sizes,
                                                   Closure closure = Closure::cell_mean);

/// log(e0/e1)/log(h0/h1).
double eoc(double e0, double e1, double h0, double h1);

}  // namespace strang
