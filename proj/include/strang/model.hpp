// Piecewise-constant diffusion fields and manufactured solutions on the unit square.

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "strang/mesh.hpp"
#include "strang/polybasis.hpp"

namespace strang {

/// Symmetric tensor from its three independent entries.
Matrix2d make_tensor(double kxx, double kxy, double kyy);

struct TensorInfo {
  Matrix2d K = Matrix2d::Identity();
  double lambda_min = 1.0;
  double lambda_max = 1.0;
  double alpha() const { return lambda_max / lambda_min; }
};

/// Eigenvalue bounds of a symmetric 2x2 tensor; throws if not positive definite.
TensorInfo tensor_info(const Matrix2d& K);

/// SPD tensor per subdomain. Subdomains are vertical strips of the unit square
/// delimited by `breaks` (0 = breaks[0] < ... < breaks[n] = 1).
class DiffusionField {
 public:
  DiffusionField() : DiffusionField(Matrix2d::Identity()) {}
  explicit DiffusionField(const Matrix2d& K);
  DiffusionField(std::vector<Matrix2d> tensors, std::vector<double> breaks);

  int num_subdomains() const { return static_cast<int>(tensors_.size()); }
  const Matrix2d& tensor(int subdomain) const;
  const TensorInfo& info(int subdomain) const;
  const TensorInfo& cell(const Mesh& mesh, std::size_t c) const { return info(mesh.cell(c).subdomain); }
  const std::vector<double>& breaks() const { return breaks_; }
  int subdomain_at(const Point& x) const;

  /// Throws MeshError if some cell's subdomain tag disagrees with the strip
  /// containing its centroid, i.e. the interfaces are not mesh lines.
  void check_compatible(const Mesh& mesh) const;

 private:
  std::vector<Matrix2d> tensors_;
  std::vector<TensorInfo> infos_;
  std::vector<double> breaks_;
};

/// Exact solution data for -div(K grad u) = f. All callables take the
/// subdomain index so that piecewise definitions can pick their branch.
struct ManufacturedCase {
  std::string name;
  DiffusionField field;
  std::function<double(const Point&, int)> u;
  std::function<Point(const Point&, int)> grad;
  std::function<double(const Point&, int)> f;
  bool homogeneous = true;  // u = 0 on the boundary
  std::vector<bool> smooth;  // per subdomain

  Point flux(const Point& x, int sub) const { return field.tensor(sub) * grad(x, sub); }
  ScalarField restricted(int sub) const;
};

struct CaseCheck {
  double residual = 0.0;        // max |f + div(K grad u)| / max(1, max|f|)
  double boundary = 0.0;        // max |u| on the boundary (homogeneous cases)
  double interface_jump = 0.0;  // max normal flux jump across strip interfaces
  bool ok = false;
};

/// Finite-difference residual of the analytic flux at random interior points,
/// boundary trace and interface flux continuity.
CaseCheck validate_case(const ManufacturedCase& c, std::uint64_t seed = 0);

/// u = sin(pi x) sin(pi y) with constant K.
ManufacturedCase case_smooth_sine(const Matrix2d& K = Matrix2d::Identity());
/// u = a + b.x, f = 0, Dirichlet data taken from u.
ManufacturedCase case_affine(const Matrix2d& K = Matrix2d::Identity(), double a = 0.5, Point b = Point(1.0, -0.5));
/// u = x^2 - xy + y^2/2 + x, constant K, Dirichlet data taken from u.
ManufacturedCase case_quadratic(const Matrix2d& K = Matrix2d::Identity());

struct LayeredSlopes {
  double left = 0.0, right = 0.0;
};
/// Slopes of the continuous piecewise-linear u with u(0) = 0, u(1) = 1 and
/// k_left * s_left = k_right * s_right.
LayeredSlopes layered_slopes(double k_left, double k_right, double x_interface);
/// Two isotropic strips split at x_interface; u depends on x only.
ManufacturedCase case_layered(double k_left, double k_right, double x_interface = 0.5);

struct CaseParams {
  Matrix2d K = Matrix2d::Identity();  // for constant-coefficient cases
  double k_left = 1.0, k_right = 4.0, x_interface = 0.5;
};

/// Registry lookup: "affine", "smooth-sine", "quadratic", "layered".
ManufacturedCase make_case(const std::string& name, const CaseParams& params = {});
std::vector<std::string> case_names();

}  // namespace strang
