// Nonconforming virtual elements of degree 1 and 2 on polygons.
//
// Degrees of freedom of v on a cell T:
//   face moments  |F|^{-1} (v, m_j^F)_F, j < k, in face_basis order,
//   cell moments  |T|^{-1} (v, m_a)_T,  |a| <= k - 2, in cell_basis order.
// Face moments belong to the global face and are shared by both neighbours.
// The stabilisation measures DOFs in the metric of L2-orthonormalised moment
// bases, W = blockdiag((M_F / |F|)^{-1}, (M_T / |T|)^{-1}).

#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "strang/framework.hpp"

namespace strang {

struct VemSpace {
  int k = 1;
  int load_degree = 0;  // l of the load projector
  std::size_t num_faces = 0, num_cells = 0;

  int face_dofs() const { return k; }
  int cell_dofs() const { return poly_dim(k - 2); }
  std::size_t face_dof(std::size_t f, int j) const { return f * std::size_t(k) + std::size_t(j); }
  std::size_t cell_dof(std::size_t c, int a) const {
    return num_faces * std::size_t(k) + c * std::size_t(cell_dofs()) + std::size_t(a);
  }
  std::size_t full_size() const { return cell_dof(num_cells, 0); }
  /// Global indices of the local DOFs of a cell: faces in local order, then the cell.
  std::vector<std::size_t> local_dofs(const Mesh& mesh, std::size_t cell) const;
};

/// k in {1, 2}; l = k - 1.
VemSpace make_vem_space(const Mesh& mesh, int k);

struct VemLocal {
  std::size_t cell = 0;
  MatrixXd projector;      // local DOFs -> coefficients in cell_basis(k)
  MatrixXd dofs_of_basis;  // column a: DOFs of the a-th monomial
  MatrixXd consistency;    // (K grad Pi v, grad Pi w)
  MatrixXd stabilization;  // lambda_max (I - D Pi)^T W (I - D Pi), W the moment metric
  MatrixXd stiffness;
  VectorXd load;           // (f, pi^{0,l} v)
};

/// Local DOFs of an explicit function.
VectorXd vem_function_dofs(const Mesh& mesh, std::size_t cell, int k, const std::function<double(const Point&)>& v,
                           int extra_degree = 10);

/// Oblique projector as a matrix acting on the local DOFs. Closure: boundary
/// mean for k = 1, cell mean for k = 2.
MatrixXd vem_projector_matrix(const Mesh& mesh, std::size_t cell, const Matrix2d& K, int k);

CellPolynomial vem_projector_from_dofs(const Mesh& mesh, std::size_t cell, const Matrix2d& K, int k,
                                       const VectorXd& dofs);

/// Local stiffness and load. Moments of v of degree above k - 2 needed by the
/// load projector are those of Pi v.
VemLocal vem_local(const Mesh& mesh, std::size_t cell, const Matrix2d& K, int k,
                   const std::function<double(const Point&)>& f);

/// Boundary face DOFs are pinned to the moments of u. N_X = N_Y = A, gamma = 1,
/// and the reconstruction is the patched projector.
DiscreteScheme assemble_vem(std::shared_ptr<const Mesh> mesh, int k, const ManufacturedCase& c,
                            Exec exec = Exec::parallel);

/// Global DOFs of the exact solution.
VectorXd vem_interpolate(const Mesh& mesh, const VemSpace& space, const ManufacturedCase& c);

}  // namespace strang
