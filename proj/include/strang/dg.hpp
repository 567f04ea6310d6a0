// Symmetric weighted interior penalty discontinuous Galerkin on polygons.

#pragma once

#include <memory>
#include <vector>

#include "strang/framework.hpp"

namespace strang {

class DgError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Broken P^k space: cell c owns unknowns c * dim + j in cell_basis(c, k) order.
struct DgSpace {
  int k = 1;
  std::size_t num_cells = 0;
  int local_size() const { return poly_dim(k); }
  std::size_t index(std::size_t cell, int j) const { return cell * std::size_t(local_size()) + std::size_t(j); }
  std::size_t size() const { return num_cells * std::size_t(local_size()); }
};

struct DgWeights {
  double omega1 = 0.5, omega2 = 0.5;
  double lambda = 1.0;  // 2 d1 d2 / (d1 + d2)
};

/// omega1 = sqrt(d2) / (sqrt(d1) + sqrt(d2)). Throws DgError unless d1, d2 > 0.
DgWeights dg_weights(double delta1, double delta2);

struct DgFaceData {
  double delta1 = 0.0, delta2 = 0.0;  // (K_T n) . n on each side
  DgWeights weights;                  // boundary faces: omega1 = 1, lambda = delta1
  double h = 0.0;                     // face diameter
};

std::vector<DgFaceData> dg_face_data(const Mesh& mesh, const DiffusionField& field);

/// max over (T, F) of sqrt(h_F lambda_max(trace mass on F, mass on T)) for P^k(T).
double ctr_estimate(const Mesh& mesh, int k);

struct JumpAverage {
  double jump = 0.0;     // v_T1 - v_T2, boundary: v
  double average = 0.0;  // (omega1 K_T1 grad v_T1 + omega2 K_T2 grad v_T2) . n_F
};

/// `right` is ignored on boundary faces.
JumpAverage jump_avg_eval(const Mesh& mesh, const DiffusionField& field, std::size_t face, const CellPolynomial& left,
                          const CellPolynomial& right, const Point& x);

/// Penalty threshold C_tr^2 N_boundary below which coercivity is not guaranteed.
double swip_threshold(const Mesh& mesh, int k);

/// Dirichlet data enters weakly through the boundary faces. N_X = N_Y is the
/// norm ||K^{1/2} grad_h v||^2 + s_h(v, v), the interpolant the broken L2
/// projection. A penalty at or below the threshold adds a warning.
DiscreteScheme assemble_swip(std::shared_ptr<const Mesh> mesh, int k, double eta, const ManufacturedCase& c,
                             Exec exec = Exec::parallel);

inline constexpr double kDefaultPenalty = 10.0;

}  // namespace strang
