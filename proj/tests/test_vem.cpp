#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "strang/vem.hpp"
#include "support.hpp"

using namespace strang;
using namespace strang::testing;

namespace {

ScalarField wave() {
  return {[](const Point& x) { return std::sin(2.0 * x.x() + 0.5) * std::exp(x.y()); },
          [](const Point& x) {
            return Point(2.0 * std::cos(2.0 * x.x() + 0.5) * std::exp(x.y()), std::sin(2.0 * x.x() + 0.5) * std::exp(x.y()));
          }};
}

double eoc_of(double e0, double e1) { return std::log(e0 / e1) / std::log(2.0); }

}  // namespace

TEST_CASE("dof counts") {
  const Mesh mesh = build_cartesian(3, 4);
  for (int k : {1, 2}) {
    const VemSpace s = make_vem_space(mesh, k);
    CHECK(s.full_size() == mesh.num_faces() * std::size_t(k) + mesh.num_cells() * std::size_t(poly_dim(k - 2)));
    auto m = std::make_shared<const Mesh>(mesh);
    const DiscreteScheme d = assemble_vem(m, k, case_affine());
    CHECK(d.ndof() == mesh.internal_faces().size() * std::size_t(k) + mesh.num_cells() * std::size_t(poly_dim(k - 2)));
    CHECK(d.symmetric);
  }
  CHECK_THROWS(make_vem_space(mesh, 3));
}

TEST_CASE("projector reproduces polynomials on random polygons") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const Mesh mesh = random_polygon(rng);
    const Matrix2d K = random_tensor(rng);
    for (int k : {1, 2}) {
      const VemLocal L = vem_local(mesh, 0, K, k, [](const Point&) { return 1.0; });
      const MatrixXd PD = L.projector * L.dofs_of_basis;
      CHECK((PD - MatrixXd::Identity(PD.rows(), PD.cols())).cwiseAbs().maxCoeff() <= 1e-10);
      // Stiffness is symmetric PSD with the constants as its only kernel.
      const Eigen::SelfAdjointEigenSolver<MatrixXd> eig(L.stiffness);
      const double top = eig.eigenvalues().maxCoeff();
      CHECK(std::abs(eig.eigenvalues()[0]) <= 1e-10 * top);
      CHECK(eig.eigenvalues()[1] >= 1e-8 * top);
      CHECK((L.stiffness * L.dofs_of_basis.col(0)).norm() <= 1e-10 * top);
    }
  }
}

TEST_CASE("boundary-mean projection of x^2 on the unit square") {
  // Oracle by hand: the gradient block forces slope (1, 0); the boundary
  // integral of x^2 is 1/3 + 1/3 + 0 + 1 = 5/3 over perimeter 4, that of x is 2,
  // so pi v = x + c with 4 c = 5/3 - 2.
  const Mesh mesh = build_cartesian(1, 1);
  for (double eps : {1.0, 1e-3}) {
    const Matrix2d K = make_tensor(1.0, 0.0, eps);
    const VectorXd d = vem_function_dofs(mesh, 0, 1, [](const Point& x) { return x.x() * x.x(); });
    const CellPolynomial p = vem_projector_from_dofs(mesh, 0, K, 1, d);
    for (const Point& x : {Point(0.1, 0.2), Point(0.7, 0.9), Point(1.0, 0.0)})
      CHECK(p.value(x) == doctest::Approx(x.x() - 1.0 / 12.0).epsilon(1e-12));
  }
}

TEST_CASE("projector of the interpolant equals the oblique projector of the function") {
  const Mesh mesh = perturb(build_cartesian(4, 4), 0.25, 5);
  const ScalarField v = wave();
  for (int k : {1, 2}) {
    const Closure closure = k == 1 ? Closure::boundary_mean : Closure::cell_mean;
    for (const Matrix2d& K : {Matrix2d(Matrix2d::Identity()), make_tensor(1.0, 0.0, 1e-4), make_tensor(2.0, 0.7, 0.5)})
      for (std::size_t c : {std::size_t(0), std::size_t(5), std::size_t(10)}) {
        const CellPolynomial p = vem_projector_from_dofs(mesh, c, K, k, vem_function_dofs(mesh, c, k, v.value));
        const VectorXd q = oblique_project(mesh, c, K, v, k, closure);
        CHECK((p.coeffs - q).norm() <= 1e-10 * q.norm());
      }
  }
}

TEST_CASE("first-order consistency block against a flux oracle") {
  // For k = 1 the projected gradient is |T|^{-1} sum_F |F| v_F n_F.
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 5; ++trial) {
    const Mesh mesh = random_polygon(rng);
    const Matrix2d K = random_tensor(rng);
    const Cell& T = mesh.cell(0);
    const VemLocal L = vem_local(mesh, 0, K, 1, [](const Point&) { return 0.0; });
    const auto n = Eigen::Index(T.num_faces());
    MatrixXd g(2, n);
    for (Eigen::Index i = 0; i < n; ++i)
      g.col(i) = mesh.face(T.faces[std::size_t(i)]).measure * T.normals[std::size_t(i)] / T.measure;
    const MatrixXd oracle = T.measure * g.transpose() * K * g;
    CHECK((L.consistency - oracle).cwiseAbs().maxCoeff() <= 1e-11 * oracle.cwiseAbs().maxCoeff());
  }
}

TEST_CASE("constant load integrates the projected mean") {
  const Mesh mesh = perturb(build_cartesian(3, 3), 0.3, 2);
  const Matrix2d K = make_tensor(1.5, 0.2, 0.8);
  for (int k : {1, 2}) {
    const VemLocal L = vem_local(mesh, 4, K, k, [](const Point&) { return 1.0; });
    const CellBasis basis = cell_basis(mesh, 4, k);
    const Quadrature q = polygon_quadrature(mesh, 4, k + 2);
    for (Eigen::Index i = 0; i < L.load.size(); ++i) {
      // Mean of a basis function: its cell DOF for k = 2, the mean of its projection for k = 1.
      double oracle = 0.0;
      if (k == 2 && i == L.load.size() - 1) {
        oracle = mesh.cell(4).measure;
      } else if (k == 1) {
        for (std::size_t n = 0; n < q.size(); ++n) oracle += q.weights[n] * basis.eval(q.nodes[n]).dot(L.projector.col(i));
      }
      CHECK(L.load[i] == doctest::Approx(oracle).epsilon(1e-12).scale(mesh.cell(4).measure));
    }
  }
}

TEST_CASE("polynomial solutions are reproduced") {
  auto mesh = std::make_shared<const Mesh>(perturb(build_cartesian(6, 6), 0.25, 9));
  const ManufacturedCase aff = case_affine(make_tensor(3.0, 0.5, 0.4));
  const ManufacturedCase quad = case_quadratic(make_tensor(3.0, 0.5, 0.4));
  for (int k : {1, 2}) {
    const DiscreteScheme s = assemble_vem(mesh, k, aff);
    const BoundReport r = verify_energy_bound(s, aff);
    const double scale = std::sqrt(s.interpolate(aff).dot(s.A * s.interpolate(aff)));
    CHECK(r.err_norm <= 1e-9 * scale);
    CHECK(r.gamma == 1.0);
  }
  const DiscreteScheme s2 = assemble_vem(mesh, 2, quad);
  const VectorXd Iu = s2.interpolate(quad);
  CHECK((solve_scheme(s2) - Iu).norm() <= 1e-9 * Iu.norm());
}

TEST_CASE("energy bound holds with equality") {
  auto mesh = std::make_shared<const Mesh>(perturb(build_cartesian(8, 8), 0.2, 4));
  const ManufacturedCase u = case_smooth_sine(make_tensor(1.0, 0.3, 0.6));
  for (int k : {1, 2}) {
    const BoundReport r = verify_energy_bound(assemble_vem(mesh, k, u), u);
    CHECK(r.ok);
    CHECK(r.err_norm > 0.0);
    CHECK(std::abs(r.slack_upper) <= 1e-10 * r.scale);
    CHECK(r.form_norm == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("duality identity with the patched projector") {
  auto mesh = std::make_shared<const Mesh>(build_cartesian(8, 8));
  const ManufacturedCase u = case_smooth_sine();
  const DiscreteScheme s = assemble_vem(mesh, 2, u);
  CHECK(aubin_nitsche_identity(s, u, u).residual <= 1e-9);
  CHECK(aubin_nitsche_identity(s, u, case_quadratic()).residual <= 1e-9);
}

TEST_CASE("convergence on the sine case") {
  const ManufacturedCase u = case_smooth_sine();
  for (int k : {1, 2}) {
    std::vector<FieldErrors> errs;
    for (std::size_t n : {8, 16, 32}) {
      auto mesh = std::make_shared<const Mesh>(build_cartesian(n, n));
      const DiscreteScheme s = assemble_vem(mesh, k, u);
      errs.push_back(reconstruction_errors(*mesh, s.reconstruct(s.expand(solve_scheme(s), true)), u));
    }
    const double e_en = eoc_of(errs[1].energy, errs[2].energy), e_l2 = eoc_of(errs[1].l2, errs[2].l2);
    CHECK(e_en >= k - 0.15);
    CHECK(e_en <= k + 0.3);
    CHECK(e_l2 >= k + 0.7);
  }
}

TEST_CASE("parallel and serial assembly agree") {
  auto mesh = std::make_shared<const Mesh>(perturb(build_cartesian(10, 10), 0.2, 3));
  const ManufacturedCase u = case_smooth_sine();
  const DiscreteScheme a = assemble_vem(mesh, 2, u, Exec::serial), b = assemble_vem(mesh, 2, u, Exec::parallel);
  CHECK(a.A.values() == b.A.values());
  CHECK(a.b == b.b);
}
