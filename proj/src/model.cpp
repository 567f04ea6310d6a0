#include "strang/model.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace strang {

Matrix2d make_tensor(double kxx, double kxy, double kyy) {
  Matrix2d K;
  K << kxx, kxy, kxy, kyy;
  return K;
}

TensorInfo tensor_info(const Matrix2d& K) {
  if (K(0, 1) != K(1, 0)) throw std::invalid_argument("diffusion tensor is not symmetric");
  const double tr = K.trace(), det = K.determinant();
  const double disc = std::sqrt(std::max(0.0, 0.25 * tr * tr - det));
  TensorInfo info;
  info.K = K;
  info.lambda_max = 0.5 * tr + disc;
  // det / lambda_max avoids cancellation for strongly anisotropic tensors.
  info.lambda_min = info.lambda_max > 0.0 ? det / info.lambda_max : 0.0;
  if (!(info.lambda_min > 0.0)) throw std::invalid_argument("diffusion tensor is not positive definite");
  return info;
}

DiffusionField::DiffusionField(const Matrix2d& K) : DiffusionField(std::vector<Matrix2d>{K}, {0.0, 1.0}) {}

DiffusionField::DiffusionField(std::vector<Matrix2d> tensors, std::vector<double> breaks)
    : tensors_(std::move(tensors)), breaks_(std::move(breaks)) {
  if (tensors_.empty() || breaks_.size() != tensors_.size() + 1)
    throw std::invalid_argument("DiffusionField: need n tensors and n+1 strip breaks");
  for (std::size_t i = 0; i + 1 < breaks_.size(); ++i)
    if (!(breaks_[i] < breaks_[i + 1])) throw std::invalid_argument("DiffusionField: breaks must increase");
  for (const auto& K : tensors_) infos_.push_back(tensor_info(K));
}

const Matrix2d& DiffusionField::tensor(int s) const { return tensors_.at(static_cast<std::size_t>(s)); }
const TensorInfo& DiffusionField::info(int s) const { return infos_.at(static_cast<std::size_t>(s)); }

int DiffusionField::subdomain_at(const Point& x) const {
  for (std::size_t i = 1; i + 1 < breaks_.size(); ++i)
    if (x.x() < breaks_[i]) return static_cast<int>(i - 1);
  return num_subdomains() - 1;
}

void DiffusionField::check_compatible(const Mesh& mesh) const {
  for (std::size_t c = 0; c < mesh.num_cells(); ++c) {
    const Cell& cell = mesh.cell(c);
    if (cell.subdomain >= num_subdomains() || cell.subdomain != subdomain_at(cell.centroid))
      throw MeshError("cell " + std::to_string(c) + ": subdomain tag " + std::to_string(cell.subdomain) +
                      " does not match the diffusion partition (interface not representable by the mesh)");
    for (auto v : cell.vertices) {
      const double x = mesh.vertices()[v].x();
      const double lo = breaks_[static_cast<std::size_t>(cell.subdomain)];
      const double hi = breaks_[static_cast<std::size_t>(cell.subdomain) + 1];
      if (x < lo - 1e-12 || x > hi + 1e-12)
        throw MeshError("cell " + std::to_string(c) + " crosses a subdomain interface");
    }
  }
}

ScalarField ManufacturedCase::restricted(int sub) const {
  return {[this, sub](const Point& x) { return u(x, sub); }, [this, sub](const Point& x) { return grad(x, sub); }};
}

CaseCheck validate_case(const ManufacturedCase& c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto unit = [&rng] { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
  const double delta = 1e-4;
  CaseCheck out;
  const auto& br = c.field.breaks();
  double fmax = 1.0;
  std::vector<std::pair<Point, int>> samples;
  for (int s = 0; s < c.field.num_subdomains(); ++s) {
    const double lo = br[static_cast<std::size_t>(s)], hi = br[static_cast<std::size_t>(s) + 1];
    for (int i = 0; i < 100; ++i) {
      const Point x(lo + 2 * delta + (hi - lo - 4 * delta) * unit(), 2 * delta + (1 - 4 * delta) * unit());
      samples.emplace_back(x, s);
      fmax = std::max(fmax, std::abs(c.f(x, s)));
    }
  }
  for (const auto& [x, s] : samples) {
    const Point ex(delta, 0.0), ey(0.0, delta);
    const double div = (c.flux(x + ex, s).x() - c.flux(x - ex, s).x()) / (2 * delta) +
                       (c.flux(x + ey, s).y() - c.flux(x - ey, s).y()) / (2 * delta);
    out.residual = std::max(out.residual, std::abs(c.f(x, s) + div) / fmax);
  }
  if (c.homogeneous) {
    for (int i = 0; i < 100; ++i) {
      const double t = unit();
      const Point pts[4] = {{t, 0.0}, {1.0, t}, {t, 1.0}, {0.0, t}};
      const Point& p = pts[i % 4];
      out.boundary = std::max(out.boundary, std::abs(c.u(p, c.field.subdomain_at(p))));
    }
  }
  for (std::size_t i = 1; i + 1 < br.size(); ++i) {
    for (int j = 0; j < 20; ++j) {
      const Point p(br[i], unit());
      const int left = static_cast<int>(i) - 1, right = static_cast<int>(i);
      out.interface_jump = std::max(out.interface_jump, std::abs(c.flux(p, left).x() - c.flux(p, right).x()));
    }
  }
  out.ok = out.residual <= 1e-5 && out.boundary <= 1e-12 && out.interface_jump <= 1e-10;
  return out;
}

ManufacturedCase case_smooth_sine(const Matrix2d& K) {
  using std::numbers::pi;
  ManufacturedCase c;
  c.name = "smooth-sine";
  c.field = DiffusionField(K);
  c.u = [](const Point& x, int) { return std::sin(pi * x.x()) * std::sin(pi * x.y()); };
  c.grad = [](const Point& x, int) {
    return Point(pi * std::cos(pi * x.x()) * std::sin(pi * x.y()), pi * std::sin(pi * x.x()) * std::cos(pi * x.y()));
  };
  const double kxx = K(0, 0), kxy = K(0, 1), kyy = K(1, 1);
  c.f = [kxx, kxy, kyy](const Point& x, int) {
    const double ss = std::sin(pi * x.x()) * std::sin(pi * x.y());
    const double cc = std::cos(pi * x.x()) * std::cos(pi * x.y());
    return pi * pi * ((kxx + kyy) * ss - 2.0 * kxy * cc);
  };
  c.homogeneous = true;
  c.smooth = {true};
  return c;
}

ManufacturedCase case_affine(const Matrix2d& K, double a, Point b) {
  ManufacturedCase c;
  c.name = "affine";
  c.field = DiffusionField(K);
  c.u = [a, b](const Point& x, int) { return a + b.dot(x); };
  c.grad = [b](const Point&, int) { return b; };
  c.f = [](const Point&, int) { return 0.0; };
  c.homogeneous = false;
  c.smooth = {true};
  return c;
}

ManufacturedCase case_quadratic(const Matrix2d& K) {
  ManufacturedCase c;
  c.name = "quadratic";
  c.field = DiffusionField(K);
  c.u = [](const Point& x, int) {
    return x.x() * x.x() - x.x() * x.y() + 0.5 * x.y() * x.y() + x.x();
  };
  c.grad = [](const Point& x, int) { return Point(2 * x.x() - x.y() + 1.0, -x.x() + x.y()); };
  // Hessian [[2, -1], [-1, 1]].
  const double f = -(2.0 * K(0, 0) - 2.0 * K(0, 1) + K(1, 1));
  c.f = [f](const Point&, int) { return f; };
  c.homogeneous = false;
  c.smooth = {true};
  return c;
}

LayeredSlopes layered_slopes(double k_left, double k_right, double x_interface) {
  if (!(k_left > 0.0 && k_right > 0.0)) throw std::invalid_argument("layered case: coefficients must be positive");
  if (!(x_interface > 0.0 && x_interface < 1.0)) throw std::invalid_argument("layered case: interface must lie in (0, 1)");
  LayeredSlopes s;
  s.left = 1.0 / (x_interface + (1.0 - x_interface) * k_left / k_right);
  s.right = k_left * s.left / k_right;
  return s;
}

ManufacturedCase case_layered(double k_left, double k_right, double x_interface) {
  const LayeredSlopes s = layered_slopes(k_left, k_right, x_interface);
  ManufacturedCase c;
  c.name = "layered";
  c.field = DiffusionField({k_left * Matrix2d::Identity(), k_right * Matrix2d::Identity()}, {0.0, x_interface, 1.0});
  c.u = [s, x_interface](const Point& x, int sub) {
    return sub == 0 ? s.left * x.x() : s.left * x_interface + s.right * (x.x() - x_interface);
  };
  c.grad = [s](const Point&, int sub) { return Point(sub == 0 ? s.left : s.right, 0.0); };
  c.f = [](const Point&, int) { return 0.0; };
  c.homogeneous = false;
  c.smooth = {true, true};
  return c;
}

std::vector<std::string> case_names() { return {"affine", "smooth-sine", "quadratic", "layered"}; }

ManufacturedCase make_case(const std::string& name, const CaseParams& p) {
  if (name == "affine") return case_affine(p.K);
  if (name == "smooth-sine") return case_smooth_sine(p.K);
  if (name == "quadratic") return case_quadratic(p.K);
  if (name == "layered") return case_layered(p.k_left, p.k_right, p.x_interface);
  throw std::invalid_argument("unknown case '" + name + "'");
}

}  // namespace strang
