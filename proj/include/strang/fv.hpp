// Finite volume fluxes and schemes: hybrid (cell and face unknowns) with TPFA
// or HMM fluxes, cell-centred with MPFA group-gradient fluxes.

#pragma once

#include <array>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "strang/framework.hpp"

namespace strang {

class FvError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class FluxKind { hybrid, cell_centred };
enum class MpfaStrategy { uniform, l_proxy, g_proxy };

inline constexpr std::size_t kNoSlot = std::numeric_limits<std::size_t>::max();

/// Sparse linear functional over the unknowns.
using SparseRow = std::vector<std::pair<std::size_t, double>>;

/// MPFA group: two faces of cell T_G sharing a vertex.
struct MpfaGroup {
  std::size_t cell = 0;    // T_G
  std::size_t vertex = 0;  // shared vertex
  std::array<std::size_t, 2> faces{};
  Matrix2d A = Matrix2d::Zero();
  std::array<std::size_t, 3> stencil{};  // extended unknowns: T_G, then across faces[0], faces[1]
  Eigen::Matrix<double, 2, 3> B = Eigen::Matrix<double, 2, 3>::Zero();
  Eigen::Matrix<double, 2, 3> gradient = Eigen::Matrix<double, 2, 3>::Zero();  // A^{-1} B
  double condition = std::numeric_limits<double>::infinity();
  bool invertible = false;
};

struct FluxFamily {
  FluxKind kind = FluxKind::hybrid;
  std::string label;
  std::size_t num_cells = 0;

  /// Hybrid: per cell, row i is F_TF for the i-th local face acting on
  /// (v_T, v_F for the local faces in order).
  std::vector<MatrixXd> local;

  /// Cell-centred: per face, the flux out of cells[0] over the extended
  /// unknowns (cells, then one slot per boundary face carrying its value).
  std::vector<SparseRow> face_rows;
  std::vector<std::size_t> boundary_slot;  // per face, kNoSlot for internal faces

  /// MPFA bookkeeping: all groups and, per face, (group, theta) pairs.
  std::vector<MpfaGroup> groups;
  std::vector<std::vector<std::pair<std::size_t, double>>> weights;

  std::optional<double> gamma_theory;  // a priori coercivity constant when the family has one

  std::size_t extended_size() const;
  /// Cell-centred flux F_TF as a row over extended unknowns, signed for cell T.
  SparseRow cell_face_row(const Mesh& mesh, std::size_t cell, std::size_t local_face) const;
};

/// Angle between x_F - x_T and K_T n_TF, maximised over all (T, F).
double tpfa_admissibility_angle(const Mesh& mesh, const DiffusionField& field);

/// Two-point fluxes |F| |K n| (v_T - v_F) / |x_T - x_F|. Throws FvError
/// ("mesh not K-admissible") when some x_F - x_T deviates from K_T n_TF by
/// more than 1e-8 rad.
FluxFamily tpfa_fluxes(const Mesh& mesh, const DiffusionField& field, Exec exec = Exec::parallel);

/// Mixed finite volume fluxes with the diagonal stabilisation
/// B_FF = stab_scale d_TF / (|F| lambda_max). Face points must be centroids.
FluxFamily hmm_fluxes(const Mesh& mesh, const DiffusionField& field, double stab_scale = 1.0,
                      Exec exec = Exec::parallel);

/// Local HMM flux matrix of one cell: F = M^{-1} D v with D rows (1, -e_F).
MatrixXd hmm_local(const Mesh& mesh, std::size_t cell, const Matrix2d& K, double lambda_max, double stab_scale);

/// Group of the two faces of `cell` meeting at its `local_vertex`-th vertex.
/// Extended unknowns follow FluxFamily::face_rows.
MpfaGroup mpfa_group_gradient(const Mesh& mesh, const DiffusionField& field, std::size_t cell,
                              std::size_t local_vertex);

FluxFamily mpfa_fluxes(const Mesh& mesh, const DiffusionField& field, MpfaStrategy strategy,
                       Exec exec = Exec::parallel);

std::string strategy_name(MpfaStrategy s);

/// Hybrid unknowns: cells 0..nc-1, then faces nc + f. Boundary faces are pinned
/// to u(x_F).
DiscreteScheme assemble_hybrid_fv(std::shared_ptr<const Mesh> mesh, const FluxFamily& fluxes,
                                  const ManufacturedCase& c);
/// Cell-centred unknowns; boundary slots are pinned to u(x_F).
DiscreteScheme assemble_cellcentred_fv(std::shared_ptr<const Mesh> mesh, const FluxFamily& fluxes,
                                       const ManufacturedCase& c);

struct FluxResiduals {
  std::vector<std::vector<double>> cell_face;  // hybrid: per cell, per local face
  std::vector<double> face;                    // cell-centred: per face, flux out of cells[0]
  double aggregate = 0.0;
  double max_abs = 0.0;
};

/// int_F K grad u . n_TF + F_TF(I_h u) with Gauss rules of the given exactness,
/// and the weighted aggregate that bounds gamma ||u_h - I_h u||.
FluxResiduals flux_consistency_residuals(const Mesh& mesh, const FluxFamily& fluxes, const ManufacturedCase& c,
                                         int quadrature_degree = 6);

struct FluxQuality {
  double linear_exactness = 0.0;  // max relative flux error over random affine probes
  std::optional<double> bound_constant;  // C_b, hybrid families only
  double gamma = 0.0;
};

FluxQuality flux_quality_checks(std::shared_ptr<const Mesh> mesh, const DiffusionField& field,
                                const FluxFamily& fluxes, std::uint64_t seed = 0);

/// Hybrid: max over cells of |sum_F F_TF(u_h) - int_T f| / max(|int_T f|, sum |F_TF|);
/// also the face equation F_TF + F_T'F at u_h, relative to the flux size.
struct BalanceCheck {
  double cell = 0.0;
  double face = 0.0;
};
BalanceCheck hybrid_balance(const DiscreteScheme& s, const FluxFamily& fluxes, const ManufacturedCase& c,
                            const VectorXd& u_h);

/// Coefficient-wise |F_TF + F_T'F| over internal faces, relative to the largest coefficient.
double cellcentred_conservativity_defect(const Mesh& mesh, const FluxFamily& fluxes);

}  // namespace strang
