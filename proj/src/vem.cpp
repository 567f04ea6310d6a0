#include "strang/vem.hpp"

#include <exception>
#include <stdexcept>

namespace strang {

namespace {

Eigen::Index ix(std::size_t i) { return static_cast<Eigen::Index>(i); }

// Position of X^p Y^q in the cell basis ordering.
int monomial_index(int p, int q) { return poly_dim(p + q - 1) + q; }

// div(K grad m_b) expanded in the degree k-2 monomials of the same basis.
MatrixXd divergence_coefficients(const CellBasis& basis, const Matrix2d& K, int k) {
  MatrixXd out = MatrixXd::Zero(poly_dim(k - 2), basis.size());
  const double s2 = basis.scale() * basis.scale();
  for (int b = 0; b < basis.size(); ++b) {
    const auto [p, q] = basis.exponent(b);
    if (p >= 2) out(monomial_index(p - 2, q), b) += K(0, 0) * p * (p - 1) / s2;
    if (p >= 1 && q >= 1) out(monomial_index(p - 1, q - 1), b) += 2.0 * K(0, 1) * p * q / s2;
    if (q >= 2) out(monomial_index(p, q - 2), b) += K(1, 1) * q * (q - 1) / s2;
  }
  return out;
}

// DOFs measured against L2-orthonormal face and cell bases: block (M / |X|)^{-1}.
MatrixXd moment_metric(const Mesh& mesh, std::size_t cell, int k) {
  const Cell& T = mesh.cell(cell);
  const int nc = poly_dim(k - 2);
  const Eigen::Index nf = ix(T.num_faces());
  MatrixXd W = MatrixXd::Zero(nf * k + nc, nf * k + nc);
  for (std::size_t i = 0; i < T.num_faces(); ++i) {
    const std::size_t f = T.faces[i];
    const MatrixXd M = mass_matrix(face_basis(mesh, f, k - 1), face_quadrature(mesh, f, 2 * k)) / mesh.face(f).measure;
    W.block(ix(i) * k, ix(i) * k, k, k) = M.inverse();
  }
  if (nc > 0) {
    const MatrixXd M = mass_matrix(cell_basis(mesh, cell, k - 2), polygon_quadrature(mesh, cell, 2 * k)) / T.measure;
    W.bottomRightCorner(nc, nc) = M.inverse();
  }
  return W;
}

void check_degree(int k) {
  if (k != 1 && k != 2) throw std::invalid_argument("virtual elements: degree must be 1 or 2");
}

}  // namespace

std::vector<std::size_t> VemSpace::local_dofs(const Mesh& mesh, std::size_t cell) const {
  std::vector<std::size_t> out;
  for (std::size_t f : mesh.cell(cell).faces)
    for (int j = 0; j < k; ++j) out.push_back(face_dof(f, j));
  for (int a = 0; a < cell_dofs(); ++a) out.push_back(cell_dof(cell, a));
  return out;
}

VemSpace make_vem_space(const Mesh& mesh, int k) {
  check_degree(k);
  VemSpace s;
  s.k = k;
  s.load_degree = k - 1;
  s.num_faces = mesh.num_faces();
  s.num_cells = mesh.num_cells();
  return s;
}

VectorXd vem_function_dofs(const Mesh& mesh, std::size_t cell, int k, const std::function<double(const Point&)>& v,
                           int extra_degree) {
  check_degree(k);
  const Cell& T = mesh.cell(cell);
  const int nc = poly_dim(k - 2);
  VectorXd out = VectorXd::Zero(ix(T.num_faces() * std::size_t(k)) + nc);
  for (std::size_t i = 0; i < T.num_faces(); ++i) {
    const std::size_t f = T.faces[i];
    const FaceBasis fb = face_basis(mesh, f, k - 1);
    const Quadrature q = face_quadrature(mesh, f, k - 1 + extra_degree);
    for (std::size_t n = 0; n < q.size(); ++n)
      out.segment(ix(i) * k, k) += q.weights[n] * v(q.nodes[n]) * fb.eval(q.nodes[n]);
    out.segment(ix(i) * k, k) /= mesh.face(f).measure;
  }
  if (nc > 0) {
    const CellBasis cb = cell_basis(mesh, cell, k - 2);
    const Quadrature q = polygon_quadrature(mesh, cell, k - 2 + extra_degree);
    for (std::size_t n = 0; n < q.size(); ++n) out.tail(nc) += q.weights[n] * v(q.nodes[n]) * cb.eval(q.nodes[n]);
    out.tail(nc) /= T.measure;
  }
  return out;
}

MatrixXd vem_projector_matrix(const Mesh& mesh, std::size_t cell, const Matrix2d& K, int k) {
  check_degree(k);
  const Cell& T = mesh.cell(cell);
  const CellBasis basis = cell_basis(mesh, cell, k);
  const int np = basis.size(), nc = poly_dim(k - 2);
  const Eigen::Index nf = ix(T.num_faces()), ndof = nf * k + nc;

  MatrixXd G = stiffness_matrix(basis, K, polygon_quadrature(mesh, cell, 2 * k));
  MatrixXd B = MatrixXd::Zero(np, ndof);

  // (K grad Pi v, grad m_b) = -(v, div K grad m_b)_T + sum_F (v, K grad m_b . n)_F
  if (nc > 0) B.rightCols(nc) = -T.measure * divergence_coefficients(basis, K, k).transpose();
  for (std::size_t i = 0; i < T.num_faces(); ++i) {
    const std::size_t f = T.faces[i];
    const FaceBasis fb = face_basis(mesh, f, k - 1);
    const Quadrature q = face_quadrature(mesh, f, 2 * k);
    const MatrixXd Mf = mass_matrix(fb, q);
    MatrixXd rhs = MatrixXd::Zero(k, np);
    for (std::size_t n = 0; n < q.size(); ++n)
      rhs += q.weights[n] * fb.eval(q.nodes[n]) * (basis.grad(q.nodes[n]) * (K * T.normals[i])).transpose();
    const MatrixXd trace = Mf.ldlt().solve(rhs);  // face coefficients of K grad m_b . n
    B.block(0, ix(i) * k, np, k) += mesh.face(f).measure * trace.transpose();
  }

  // Closure replaces the constant row.
  G.row(0).setZero();
  B.row(0).setZero();
  if (k == 1) {
    for (std::size_t i = 0; i < T.num_faces(); ++i) {
      const Quadrature q = face_quadrature(mesh, T.faces[i], k + 1);
      for (std::size_t n = 0; n < q.size(); ++n) G.row(0) += q.weights[n] * basis.eval(q.nodes[n]).transpose();
      B(0, ix(i) * k) = mesh.face(T.faces[i]).measure;
    }
  } else {
    const Quadrature q = polygon_quadrature(mesh, cell, k);
    for (std::size_t n = 0; n < q.size(); ++n) G.row(0) += q.weights[n] * basis.eval(q.nodes[n]).transpose();
    B(0, nf * k) = T.measure;
  }
  Eigen::FullPivLU<MatrixXd> lu(G);
  if (lu.rank() < G.rows()) throw std::runtime_error("virtual elements: singular projector system");
  return lu.solve(B);
}

CellPolynomial vem_projector_from_dofs(const Mesh& mesh, std::size_t cell, const Matrix2d& K, int k,
                                       const VectorXd& dofs) {
  const MatrixXd P = vem_projector_matrix(mesh, cell, K, k);
  if (dofs.size() != P.cols()) throw std::invalid_argument("vem_projector_from_dofs: incomplete DOF vector");
  return {cell_basis(mesh, cell, k), P * dofs};
}

VemLocal vem_local(const Mesh& mesh, std::size_t cell, const Matrix2d& K, int k,
                   const std::function<double(const Point&)>& f) {
  VemLocal out;
  out.cell = cell;
  const Cell& T = mesh.cell(cell);
  const CellBasis basis = cell_basis(mesh, cell, k);
  const int np = basis.size(), nc = poly_dim(k - 2), nl = poly_dim(k - 1);
  out.projector = vem_projector_matrix(mesh, cell, K, k);
  const Eigen::Index ndof = out.projector.cols(), nfd = ndof - nc;

  out.dofs_of_basis = MatrixXd::Zero(ndof, np);
  for (int a = 0; a < np; ++a)
    out.dofs_of_basis.col(a) = vem_function_dofs(mesh, cell, k, [&](const Point& x) { return basis.eval(x)[a]; }, 2);

  const Quadrature q = polygon_quadrature(mesh, cell, 2 * k);
  out.consistency = out.projector.transpose() * stiffness_matrix(basis, K, q) * out.projector;
  const MatrixXd R = MatrixXd::Identity(ndof, ndof) - out.dofs_of_basis * out.projector;
  out.stabilization = tensor_info(K).lambda_max * R.transpose() * moment_metric(mesh, cell, k) * R;
  out.stiffness = out.consistency + out.stabilization;

  // Moments (v, m_a), |a| <= l: DOFs up to degree k - 2, projector above.
  const MatrixXd M = mass_matrix(basis, q);
  MatrixXd L = M.topRows(nl) * out.projector;
  for (int a = 0; a < nc; ++a) {
    L.row(a).setZero();
    L(a, nfd + a) = T.measure;
  }
  const Quadrature qf = polygon_quadrature(mesh, cell, k - 1 + 10);
  VectorXd fm = VectorXd::Zero(nl);
  for (std::size_t n = 0; n < qf.size(); ++n) fm += qf.weights[n] * f(qf.nodes[n]) * basis.eval(qf.nodes[n]).head(nl);
  out.load = L.transpose() * solve_gram(M.topLeftCorner(nl, nl), fm);
  return out;
}

VectorXd vem_interpolate(const Mesh& mesh, const VemSpace& space, const ManufacturedCase& c) {
  const int k = space.k;
  VectorXd out = VectorXd::Zero(ix(space.full_size()));
  for (std::size_t f = 0; f < mesh.num_faces(); ++f) {
    const Face& F = mesh.face(f);
    const int sub = mesh.cell(std::size_t(F.cells[0])).subdomain;
    const FaceBasis fb = face_basis(mesh, f, k - 1);
    const Quadrature q = face_quadrature(mesh, f, k - 1 + 10);
    VectorXd m = VectorXd::Zero(k);
    for (std::size_t n = 0; n < q.size(); ++n) m += q.weights[n] * c.u(q.nodes[n], sub) * fb.eval(q.nodes[n]);
    out.segment(ix(space.face_dof(f, 0)), k) = m / F.measure;
  }
  const int nc = space.cell_dofs();
  if (nc > 0) {
    for (std::size_t t = 0; t < mesh.num_cells(); ++t) {
      const int sub = mesh.cell(t).subdomain;
      const CellBasis cb = cell_basis(mesh, t, k - 2);
      const Quadrature q = polygon_quadrature(mesh, t, k - 2 + 10);
      VectorXd m = VectorXd::Zero(nc);
      for (std::size_t n = 0; n < q.size(); ++n) m += q.weights[n] * c.u(q.nodes[n], sub) * cb.eval(q.nodes[n]);
      out.segment(ix(space.cell_dof(t, 0)), nc) = m / mesh.cell(t).measure;
    }
  }
  return out;
}

DiscreteScheme assemble_vem(std::shared_ptr<const Mesh> mesh_ptr, int k, const ManufacturedCase& c, Exec exec) {
  const Mesh& mesh = *mesh_ptr;
  const VemSpace space = make_vem_space(mesh, k);
  c.field.check_compatible(mesh);
  const std::size_t nc = mesh.num_cells(), N = space.full_size();

  std::vector<VemLocal> locals(nc);
  std::vector<std::exception_ptr> errors(nc);
#pragma omp parallel for schedule(static) if (exec == Exec::parallel)
  for (std::ptrdiff_t tt = 0; tt < std::ptrdiff_t(nc); ++tt) {
    const auto t = std::size_t(tt);
    try {
      const int sub = mesh.cell(t).subdomain;
      locals[t] = vem_local(mesh, t, c.field.tensor(sub), k, [&](const Point& x) { return c.f(x, sub); });
    } catch (...) {
      errors[t] = std::current_exception();
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  std::vector<Triplet> ta;
  VectorXd b = VectorXd::Zero(ix(N));
  auto projectors = std::make_shared<std::vector<MatrixXd>>(nc);
  auto dof_lists = std::make_shared<std::vector<std::vector<std::size_t>>>(nc);
  for (std::size_t t = 0; t < nc; ++t) {
    const std::vector<std::size_t> idx = space.local_dofs(mesh, t);
    const MatrixXd& S = locals[t].stiffness;
    for (std::size_t i = 0; i < idx.size(); ++i) {
      b[ix(idx[i])] += locals[t].load[ix(i)];
      for (std::size_t j = 0; j < idx.size(); ++j) ta.push_back({idx[i], idx[j], S(ix(i), ix(j))});
    }
    (*projectors)[t] = std::move(locals[t].projector);
    (*dof_lists)[t] = idx;
  }
  std::vector<bool> pinned(N, false);
  for (std::size_t f : mesh.boundary_faces())
    for (int j = 0; j < k; ++j) pinned[space.face_dof(f, j)] = true;
  const DofMap dofs = DofMap::make(N, pinned);
  auto interp = [mesh_ptr, space](const ManufacturedCase& cs) { return vem_interpolate(*mesh_ptr, space, cs); };

  DiscreteScheme s;
  s.label = "vem" + std::to_string(k);
  s.mesh = mesh_ptr;
  s.source = &c;
  const SparseMatrix A = SparseMatrix::from_triplets(N, N, std::move(ta));
  reduce_system(A, b, A, dofs, dofs.restrict_pinned(interp(c)), s);
  s.interpolate_full = interp;
  s.reconstruct = [mesh_ptr, k, projectors, dof_lists](const VectorXd& full) {
    PiecewisePolynomial p(mesh_ptr->num_cells());
    for (std::size_t t = 0; t < p.size(); ++t) {
      const auto& idx = (*dof_lists)[t];
      VectorXd local(ix(idx.size()));
      for (std::size_t i = 0; i < idx.size(); ++i) local[ix(i)] = full[ix(idx[i])];
      p[t].basis = cell_basis(*mesh_ptr, t, k);
      p[t].coeffs = (*projectors)[t] * local;
    }
    return p;
  };
  s.gamma_exact = 1.0;
  s.gamma_theory = 1.0;
  return s;
}

}  // namespace strang
