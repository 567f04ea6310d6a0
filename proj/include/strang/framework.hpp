// Scheme-independent error machinery: discrete problems with pinned boundary
// unknowns, consistency errors and their dual norms, stability constants, the
// two-sided energy bound and the duality identity behind improved L2 rates.

#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "strang/linalg.hpp"
#include "strang/model.hpp"
#include "strang/polybasis.hpp"

namespace strang {

/// Splits the full unknown vector into free and pinned (Dirichlet) entries.
struct DofMap {
  std::size_t full_size = 0;
  std::vector<std::size_t> free;    // ascending
  std::vector<std::size_t> pinned;  // ascending

  static DofMap make(std::size_t full_size, const std::vector<bool>& is_pinned);
  VectorXd restrict_free(const VectorXd& full) const;
  VectorXd restrict_pinned(const VectorXd& full) const;
  VectorXd expand(const VectorXd& free_values, const VectorXd& pinned_values) const;
};

/// Piecewise polynomial on the mesh, one CellPolynomial per cell.
using PiecewisePolynomial = std::vector<CellPolynomial>;

/// Assembled discrete problem a_h(u_h, v) = l_h(v) on the free unknowns.
/// Row i of A tests with the i-th free basis function, column j is the j-th
/// trial function, so a_h(w, v) = v^T A w.
struct DiscreteScheme {
  std::string label;
  std::shared_ptr<const Mesh> mesh;
  const ManufacturedCase* source = nullptr;  // case the load vector was built from

  SparseMatrix A;
  VectorXd b;
  SparseMatrix NX, NY;
  bool symmetric = true;

  DofMap dofs;
  VectorXd pinned_values;  // interpolated boundary data of `source`

  /// Full-length interpolant of any case on this discretisation.
  std::function<VectorXd(const ManufacturedCase&)> interpolate_full;
  /// Reconstruction of a full-length vector as a piecewise polynomial (optional).
  std::function<PiecewisePolynomial(const VectorXd&)> reconstruct;

  std::optional<double> gamma_theory;  // a priori coercivity constant, if known
  std::optional<double> gamma_exact;   // exact value by construction, if known
  std::vector<std::string> warnings;   // non-fatal assembly diagnostics

  std::size_t ndof() const { return dofs.free.size(); }
  /// Free part of the interpolant.
  VectorXd interpolate(const ManufacturedCase& c) const { return dofs.restrict_free(interpolate_full(c)); }
  /// Full vector with the boundary data of `source` (lift = true) or zero.
  VectorXd expand(const VectorXd& free_values, bool lift) const;
};

/// Keeps rows and columns of the free unknowns and moves pinned columns, times
/// `pinned_values`, to the right-hand side.
void reduce_system(const SparseMatrix& A_full, const VectorXd& b_full, const SparseMatrix& N_full,
                   const DofMap& dofs, const VectorXd& pinned_values, DiscreteScheme& out);

enum class SolverKind { direct, pcg };

/// Normwise backward error ||b - A x|| / (||A||_F ||x|| + ||b||).
double backward_error(const SparseMatrix& A, const VectorXd& x, const VectorXd& b);

/// Solves A u_h = b with backward error <= 1e-12. Direct: sparse LDL^T (symmetric)
/// or LU, with refinement. PCG: Jacobi CG, falling back to the direct path when
/// it stagnates above the tolerance.
VectorXd solve_scheme(const DiscreteScheme& s, SolverKind kind = SolverKind::direct, Exec exec = Exec::parallel);

/// e = b - A I_h u for the case that produced b.
VectorXd consistency_vector(const DiscreteScheme& s, const ManufacturedCase& c);
double consistency_dual_norm(const DiscreteScheme& s, const ManufacturedCase& c);

struct Stability {
  double gamma = 0.0;  // numerical
  std::optional<double> theory;
  bool coercive = false;
};

/// Smallest eigenvalue of ((A + A^T)/2, N_X); exact value when the scheme
/// declares one.
Stability stability_constant(const DiscreteScheme& s, std::uint64_t seed = 0);

struct BoundReport {
  double err_norm = 0.0;  // ||u_h - I_h u||_X
  double gamma = 0.0;
  std::optional<double> gamma_theory;
  double cons_dual = 0.0;     // ||E_h(u; .)||_{Y*}
  double slack_upper = 0.0;   // cons_dual / gamma - err_norm
  double form_norm = 0.0;     // lower estimate of ||a_h||
  double slack_lower = 0.0;   // form_norm * err_norm - cons_dual
  double residual = 0.0;      // error equation check A (u_h - I_h u) = e, as a backward error
  double defect = 0.0;        // ||A (u_h - I_h u) - e||_{Y*}: round-off allowance of the bound
  double scale = 0.0;         // max(err_norm, cons_dual / gamma)
  bool ok = false;            // both slacks >= -(1e-9 scale + defect / gamma)
  VectorXd u_h;               // free part
};

/// Thrown by verify_energy_bound when the scheme is not coercive.
class NonCoerciveError : public std::runtime_error {
 public:
  NonCoerciveError(const std::string& what, double gamma) : std::runtime_error(what), gamma(gamma) {}
  double gamma;
};

BoundReport verify_energy_bound(const DiscreteScheme& s, const ManufacturedCase& c, std::uint64_t seed = 0,
                                std::optional<Stability> stability = std::nullopt);

struct DualityRecord {
  double g_term = 0.0;       // g(r_h(u_h - I_h u))
  double dual_term = 0.0;    // dual consistency error at u_h - I_h u
  double primal_dual = 0.0;  // E_h(u; I_h z)
  double residual = 0.0;     // |g - dual - primal_dual| / max(|g|, |dual|, |primal_dual|)
};

/// Duality identity with g(w) = (f_z, w) for the manufactured dual solution z.
/// Requires a reconstruction and a symmetric scheme.
DualityRecord aubin_nitsche_identity(const DiscreteScheme& s, const ManufacturedCase& c,
                                     const ManufacturedCase& dual_z);

/// (f, p) summed over cells for a piecewise polynomial p.
double integrate_against(const Mesh& mesh, const PiecewisePolynomial& p,
                         const std::function<double(const Point&, int)>& f, int extra_degree = 8);

struct FieldErrors {
  double l2 = 0.0;      // ||p - u||
  double energy = 0.0;  // ||K^{1/2} grad_h (p - u)||
};

FieldErrors reconstruction_errors(const Mesh& mesh, const PiecewisePolynomial& p, const ManufacturedCase& c,
                                  int extra_degree = 8);

}  // namespace strang
