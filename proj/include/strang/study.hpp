// Batch studies over mesh sequences: convergence tables, bound audits,
// anisotropy sweeps and projector rates, with CSV and Markdown output.

#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "strang/dg.hpp"
#include "strang/fv.hpp"
#include "strang/vem.hpp"

namespace strang {

/// Failure with a process exit code: 2 unknown scheme or case, 3 TPFA mesh
/// not K-admissible.
class StudyError : public std::runtime_error {
 public:
  StudyError(const std::string& what, int exit_code) : std::runtime_error(what), exit_code(exit_code) {}
  int exit_code;
};

struct StudySpec {
  std::string scheme = "dg1";  // tpfa, hmm, mpfa-uniform, mpfa-l, mpfa-g, vem1, vem2, dg1, dg2, dg3 (or vem, dg with k)
  std::string case_name = "smooth-sine";
  int k = 0;                   // degree for "vem" / "dg"; 0 when the name carries it
  CaseParams params;
  double perturb = 0.0;        // amplitude; 0 gives the plain Cartesian family
  std::uint64_t seed = 0;
  std::size_t n0 = 8, levels = 4;
  double eta = kDefaultPenalty;
  double stab_scale = 1.0;
  std::optional<MpfaStrategy> mpfa;  // overrides the suffix of an mpfa-* name
  Exec exec = Exec::parallel;
};

/// "cartesian" or "perturbed:amplitude:seed".
void apply_mesh_family(StudySpec& spec, const std::string& family);
/// Seed from STRANG_LAB_SEED, else 0.
std::uint64_t default_seed();
std::vector<std::string> scheme_names();

/// Mesh of level `level`: (n0 2^level)^2 cells, vertical strips matching the
/// case subdomains, optionally perturbed.
std::shared_ptr<const Mesh> study_mesh(const StudySpec& spec, std::size_t level);

struct BuiltScheme {
  DiscreteScheme scheme;
  std::optional<FluxFamily> fluxes;  // finite volume schemes
  int degree = 1;                    // r in h^r
  bool polynomial_reconstruction = false;  // reconstruction carries a gradient
};

BuiltScheme build_scheme(const StudySpec& spec, std::shared_ptr<const Mesh> mesh, const ManufacturedCase& c);
ManufacturedCase study_case(const StudySpec& spec);

struct ConvergenceRow {
  std::size_t level = 0, n = 0, ndof = 0;
  double h = 0.0;
  double err_energy = 0.0;                   // ||u_h - I_h u||_X
  std::optional<double> err_energy_recons;   // ||K^1/2 grad_h(r_h u_h - u)||
  double err_l2 = 0.0;                       // ||r_h u_h - u||
  double cons_dual = 0.0;
  double gamma_num = 0.0;
  std::optional<double> gamma_theory;
  std::optional<double> slack_upper, slack_lower;  // empty when not coercive
  bool bound_ok = false;
  bool coercive = false;
  std::vector<std::string> warnings;
};

/// EOC between consecutive levels; empty for level 0, "exact" when both
/// errors are below 1e-9.
struct Eoc {
  std::optional<double> value;
  bool exact = false;
};

struct ConvergenceReport {
  StudySpec spec;
  std::vector<ConvergenceRow> rows;

  std::vector<Eoc> eoc_energy() const;
  std::vector<Eoc> eoc_energy_recons() const;
  std::vector<Eoc> eoc_l2() const;
  std::vector<Eoc> eoc_cons_dual() const;
  bool all_coercive() const;
  bool slacks_ok() const;
  /// 0 ok, 4 not coercive, 1 slack failure.
  int exit_code() const;
};

ConvergenceReport run_convergence(const StudySpec& spec);

/// Least-squares slope of log e against log h.
double lsq_slope(const std::vector<double>& h, const std::vector<double>& e);

std::string convergence_csv(const ConvergenceReport& r);
std::string convergence_markdown(const ConvergenceReport& r);

struct AuditRow {
  std::size_t level = 0;
  double h = 0.0;
  BoundReport bound;
  std::optional<DualityRecord> duality;  // symmetric schemes with a reconstruction
  bool coercive = true;
};

struct AuditReport {
  StudySpec spec;
  std::vector<AuditRow> rows;
  std::vector<Eoc> eoc_primal_dual() const;
  int exit_code() const;
};

/// Energy bound per level and the duality identity with dual z = smooth sine.
AuditReport run_bound_audit(const StudySpec& spec);
std::string audit_csv(const AuditReport& r);

struct SweepRow {
  double eps = 1.0;
  std::vector<double> h, err, normalized;  // err / (sqrt(alpha lambda_max) h^r)
};

struct SweepReport {
  std::vector<SweepRow> rows;
  double ratio = 1.0;  // max / min normalised error over eps on the finest level
};

/// K = diag(1, eps), smooth-sine case, error ||u_h - I_h u||_X.
SweepReport run_anisotropy_sweep(const StudySpec& spec, const std::vector<double>& eps);
std::string sweep_csv(const SweepReport& r);

struct ProjectorSpec {
  ProjectorKind kind = ProjectorKind::oblique;
  int k = 1;
  double eps = 1.0;                 // K = diag(1, eps)
  std::string function = "sine";    // sine | affine | wave
  std::size_t n0 = 4, levels = 4;
  Closure closure = Closure::cell_mean;
};

std::vector<ProjectorRateRow> run_projector_rates(const ProjectorSpec& spec);
std::string projector_csv(const std::vector<ProjectorRateRow>& rows);

}  // namespace strang
