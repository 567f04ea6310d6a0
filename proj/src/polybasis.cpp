#include "strang/polybasis.hpp"

#include <cmath>
#include <stdexcept>

namespace strang {

CellBasis::CellBasis(Point center, double scale, int degree) : center_(center), scale_(scale), degree_(degree) {
  if (degree < 0) throw std::invalid_argument("CellBasis: negative degree");
  for (int d = 0; d <= degree; ++d)
    for (int b = 0; b <= d; ++b) exponents_.emplace_back(d - b, b);
}

namespace {

// powers[i] = t^i for i = 0..n.
std::vector<double> powers(double t, int n) {
  std::vector<double> p(static_cast<std::size_t>(n) + 1, 1.0);
  for (int i = 1; i <= n; ++i) p[static_cast<std::size_t>(i)] = p[static_cast<std::size_t>(i) - 1] * t;
  return p;
}

}  // namespace

VectorXd CellBasis::eval(const Point& x) const {
  const auto px = powers((x.x() - center_.x()) / scale_, degree_);
  const auto py = powers((x.y() - center_.y()) / scale_, degree_);
  VectorXd out(size());
  for (int j = 0; j < size(); ++j) {
    const auto [a, b] = exponents_[static_cast<std::size_t>(j)];
    out[j] = px[static_cast<std::size_t>(a)] * py[static_cast<std::size_t>(b)];
  }
  return out;
}

Eigen::Matrix<double, Eigen::Dynamic, 2> CellBasis::grad(const Point& x) const {
  const auto px = powers((x.x() - center_.x()) / scale_, degree_);
  const auto py = powers((x.y() - center_.y()) / scale_, degree_);
  Eigen::Matrix<double, Eigen::Dynamic, 2> g(size(), 2);
  for (int j = 0; j < size(); ++j) {
    const auto [a, b] = exponents_[static_cast<std::size_t>(j)];
    const auto ua = static_cast<std::size_t>(a), ub = static_cast<std::size_t>(b);
    g(j, 0) = a == 0 ? 0.0 : a * px[ua - 1] * py[ub] / scale_;
    g(j, 1) = b == 0 ? 0.0 : b * px[ua] * py[ub - 1] / scale_;
  }
  return g;
}

FaceBasis::FaceBasis(Point center, Point tangent, double scale, int degree)
    : center_(center), tangent_(tangent), scale_(scale), degree_(degree) {
  if (degree < 0) throw std::invalid_argument("FaceBasis: negative degree");
}

VectorXd FaceBasis::eval(const Point& x) const {
  const double s = (x - center_).dot(tangent_) / scale_;
  VectorXd out(size());
  double p = 1.0;
  for (int j = 0; j <= degree_; ++j, p *= s) out[j] = p;
  return out;
}

CellBasis cell_basis(const Mesh& mesh, std::size_t cell, int degree) {
  const Cell& c = mesh.cell(cell);
  return CellBasis(c.centroid, c.diameter, degree);
}

FaceBasis face_basis(const Mesh& mesh, std::size_t face, int degree) {
  const Face& f = mesh.face(face);
  return FaceBasis(f.centroid, f.tangent, f.diameter, degree);
}

MatrixXd mass_matrix(const CellBasis& basis, const Quadrature& q) {
  MatrixXd M = MatrixXd::Zero(basis.size(), basis.size());
  for (std::size_t i = 0; i < q.size(); ++i) {
    const VectorXd phi = basis.eval(q.nodes[i]);
    M.noalias() += q.weights[i] * phi * phi.transpose();
  }
  return M;
}

MatrixXd mass_matrix(const FaceBasis& basis, const Quadrature& q) {
  MatrixXd M = MatrixXd::Zero(basis.size(), basis.size());
  for (std::size_t i = 0; i < q.size(); ++i) {
    const VectorXd phi = basis.eval(q.nodes[i]);
    M.noalias() += q.weights[i] * phi * phi.transpose();
  }
  return M;
}

MatrixXd stiffness_matrix(const CellBasis& basis, const Matrix2d& K, const Quadrature& q) {
  MatrixXd S = MatrixXd::Zero(basis.size(), basis.size());
  for (std::size_t i = 0; i < q.size(); ++i) {
    const auto g = basis.grad(q.nodes[i]);
    S.noalias() += q.weights[i] * (g * K * g.transpose());
  }
  return S;
}

VectorXd solve_gram(const MatrixXd& M, const VectorXd& rhs) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(M, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff(), hi = eig.eigenvalues().maxCoeff();
  if (!(lo > 0.0)) throw std::runtime_error("solve_gram: Gram matrix is not positive definite");
  if (hi / lo <= 1e8) return M.llt().solve(rhs);
  // Modified Gram-Schmidt in the M inner product, applied twice; then M^{-1} = Q Q^T.
  const Eigen::Index n = M.rows();
  MatrixXd Q = MatrixXd::Identity(n, n);
  for (int pass = 0; pass < 2; ++pass)
    for (Eigen::Index i = 0; i < n; ++i) {
      VectorXd v = Q.col(i);
      for (Eigen::Index j = 0; j < i; ++j) v -= Q.col(j).dot(M * v) * Q.col(j);
      Q.col(i) = v / std::sqrt(v.dot(M * v));
    }
  return Q * (Q.transpose() * rhs);
}

VectorXd l2_project(const Mesh& mesh, std::size_t cell, const std::function<double(const Point&)>& f, int l,
                    int extra_degree) {
  const CellBasis basis = cell_basis(mesh, cell, l);
  const Quadrature q = polygon_quadrature(mesh, cell, 2 * l + extra_degree);
  VectorXd rhs = VectorXd::Zero(basis.size());
  for (std::size_t i = 0; i < q.size(); ++i) rhs += q.weights[i] * f(q.nodes[i]) * basis.eval(q.nodes[i]);
  return solve_gram(mass_matrix(basis, q), rhs);
}

VectorXd oblique_project(const Mesh& mesh, std::size_t cell, const Matrix2d& K, const ScalarField& v, int k,
                         Closure closure, int extra_degree) {
  if (k < 0) throw std::invalid_argument("oblique_project: negative degree");
  const CellBasis basis = cell_basis(mesh, cell, k);
  const Quadrature q = polygon_quadrature(mesh, cell, 2 * k + extra_degree);
  MatrixXd G = stiffness_matrix(basis, K, q);
  VectorXd rhs = VectorXd::Zero(basis.size());
  for (std::size_t i = 0; i < q.size(); ++i)
    rhs += q.weights[i] * (basis.grad(q.nodes[i]) * (K * v.gradient(q.nodes[i])));
  // Closure replaces the (singular) constant row.
  G.row(0).setZero();
  rhs[0] = 0.0;
  if (closure == Closure::cell_mean) {
    for (std::size_t i = 0; i < q.size(); ++i) {
      G.row(0) += q.weights[i] * basis.eval(q.nodes[i]).transpose();
      rhs[0] += q.weights[i] * v.value(q.nodes[i]);
    }
  } else {
    for (std::size_t f : mesh.cell(cell).faces) {
      const Quadrature fq = face_quadrature(mesh, f, k + extra_degree);
      for (std::size_t i = 0; i < fq.size(); ++i) {
        G.row(0) += fq.weights[i] * basis.eval(fq.nodes[i]).transpose();
        rhs[0] += fq.weights[i] * v.value(fq.nodes[i]);
      }
    }
  }
  Eigen::FullPivLU<MatrixXd> lu(G);
  if (lu.rank() < G.rows()) throw std::runtime_error("oblique_project: rank-deficient gradient Gram matrix");
  return lu.solve(rhs);
}

double eoc(double e0, double e1, double h0, double h1) { return std::log(e0 / e1) / std::log(h0 / h1); }

std::vector<ProjectorRateRow> projector_rate_study(ProjectorKind kind, const Matrix2d& K, const ScalarField& v,
                                                   int k, const std::vector<std::size_t>& sizes, Closure closure) {
  std::vector<ProjectorRateRow> rows;
  const Eigen::SelfAdjointEigenSolver<Matrix2d> eig(K);
  const Matrix2d Khalf = eig.operatorSqrt();
  for (std::size_t n : sizes) {
    const Mesh mesh = build_cartesian(n, n);
    ProjectorRateRow row;
    row.n = n;
    double l2 = 0, h1 = 0, wt = 0, tr = 0;
    for (std::size_t c = 0; c < mesh.num_cells(); ++c) {
      row.h = std::max(row.h, mesh.cell(c).diameter);
      CellPolynomial p{cell_basis(mesh, c, k), {}};
      p.coeffs = kind == ProjectorKind::l2 ? l2_project(mesh, c, v.value, k)
                                           : oblique_project(mesh, c, K, v, k, closure);
      const Quadrature q = polygon_quadrature(mesh, c, 2 * k + 8);
      for (std::size_t i = 0; i < q.size(); ++i) {
        const Point& x = q.nodes[i];
        const double e = v.value(x) - p.value(x);
        const Point ge = v.gradient(x) - p.gradient(x);
        l2 += q.weights[i] * e * e;
        h1 += q.weights[i] * ge.squaredNorm();
        wt += q.weights[i] * (Khalf * ge).squaredNorm();
      }
      for (std::size_t f : mesh.cell(c).faces) {
        const Quadrature fq = face_quadrature(mesh, f, 2 * k + 8);
        for (std::size_t i = 0; i < fq.size(); ++i) {
          const double e = v.value(fq.nodes[i]) - p.value(fq.nodes[i]);
          tr += mesh.cell(c).diameter * fq.weights[i] * e * e;
        }
      }
    }
    row.err_l2 = std::sqrt(l2);
    row.err_h1 = std::sqrt(h1);
    row.err_weighted = std::sqrt(wt);
    row.err_trace = std::sqrt(tr);
    if (!rows.empty()) {
      const auto& prev = rows.back();
      row.eoc_l2 = eoc(prev.err_l2, row.err_l2, prev.h, row.h);
      row.eoc_h1 = eoc(prev.err_h1, row.err_h1, prev.h, row.h);
      row.eoc_weighted = eoc(prev.err_weighted, row.err_weighted, prev.h, row.h);
      row.eoc_trace = eoc(prev.err_trace, row.err_trace, prev.h, row.h);
    }
    rows.push_back(row);
  }
  return rows;
}

}  // namespace strang
