#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "strang/model.hpp"

using namespace strang;
using std::numbers::pi;

TEST_CASE("tensor info") {
  const TensorInfo t = tensor_info(make_tensor(2.0, 0.5, 1.0));
  const Eigen::SelfAdjointEigenSolver<Matrix2d> eig(t.K);
  CHECK(t.lambda_min == doctest::Approx(eig.eigenvalues()[0]).epsilon(1e-14));
  CHECK(t.lambda_max == doctest::Approx(eig.eigenvalues()[1]).epsilon(1e-14));
  CHECK(t.alpha() >= 1.0);
  const Matrix2d back = eig.eigenvectors() * eig.eigenvalues().asDiagonal() * eig.eigenvectors().transpose();
  CHECK((back - t.K).cwiseAbs().maxCoeff() <= 1e-13);
  CHECK(tensor_info(make_tensor(1.0, 0.0, 1e-8)).lambda_min == doctest::Approx(1e-8).epsilon(1e-12));
  CHECK_THROWS(tensor_info(make_tensor(1.0, 2.0, 1.0)));
  Matrix2d bad;
  bad << 1.0, 0.1, 0.2, 1.0;
  CHECK_THROWS(tensor_info(bad));
}

TEST_CASE("diffusion field strips") {
  const DiffusionField f({Matrix2d::Identity(), 4.0 * Matrix2d::Identity()}, {0.0, 0.5, 1.0});
  CHECK(f.subdomain_at(Point(0.2, 0.3)) == 0);
  CHECK(f.subdomain_at(Point(0.7, 0.3)) == 1);
  CHECK_NOTHROW(f.check_compatible(build_cartesian(4, 4, {}, 2)));
  CHECK_THROWS_AS(f.check_compatible(build_cartesian(4, 4)), MeshError);
  CHECK_THROWS_AS(f.check_compatible(build_cartesian(3, 3)), MeshError);
  CHECK_THROWS(DiffusionField({Matrix2d::Identity()}, {0.0, 0.5, 1.0}));
}

TEST_CASE("smooth sine sources") {
  const Point x(0.3, 0.8);
  const double ss = std::sin(pi * 0.3) * std::sin(pi * 0.8);
  CHECK(case_smooth_sine().f(x, 0) == doctest::Approx(2 * pi * pi * ss).epsilon(1e-14));
  const double eps = 1e-3;
  CHECK(case_smooth_sine(make_tensor(1, 0, eps)).f(x, 0) == doctest::Approx((1 + eps) * pi * pi * ss).epsilon(1e-14));
  for (const auto& K : {Matrix2d(Matrix2d::Identity()), make_tensor(1, 0, 1e-4), make_tensor(3, 0.7, 0.5)}) {
    const CaseCheck chk = validate_case(case_smooth_sine(K));
    CHECK(chk.ok);
    CHECK(chk.residual <= 1e-5);
    CHECK(chk.boundary <= 1e-12);
  }
}

TEST_CASE("affine and quadratic cases") {
  const ManufacturedCase a = case_affine(Matrix2d::Identity(), 0.0, Point(1.0, 0.0));
  CHECK(a.grad(Point(0.2, 0.4), 0) == Point(1.0, 0.0));
  CHECK(a.f(Point(0.2, 0.4), 0) == 0.0);
  CHECK_FALSE(a.homogeneous);
  const ManufacturedCase one = case_affine(Matrix2d::Identity(), 1.0, Point::Zero());
  CHECK(one.flux(Point(0.5, 0.5), 0).norm() == 0.0);
  CHECK(validate_case(case_affine(make_tensor(2, 0.3, 1))).ok);
  CHECK(validate_case(case_quadratic(make_tensor(2, 0.3, 1))).ok);
}

TEST_CASE("layered case slopes") {
  const LayeredSlopes same = layered_slopes(1, 1, 0.5);
  CHECK(same.left == doctest::Approx(1.0));
  CHECK(same.right == doctest::Approx(1.0));
  const LayeredSlopes s = layered_slopes(1, 4, 0.5);
  CHECK(s.left == doctest::Approx(8.0 / 5.0).epsilon(1e-15));
  CHECK(s.right == doctest::Approx(2.0 / 5.0).epsilon(1e-15));
  CHECK(0.5 * s.left + 0.5 * s.right == doctest::Approx(1.0).epsilon(1e-15));

  for (double eps : {1e-2, 1e-4, 1e-8}) {
    const LayeredSlopes e = layered_slopes(eps, 1, 0.5);
    CHECK(eps * e.left == doctest::Approx(2 * eps / (eps + 1)).epsilon(1e-14));
  }

  const ManufacturedCase c = case_layered(1, 4, 0.5);
  CHECK(c.u(Point(0.0, 0.3), 0) == 0.0);
  CHECK(c.u(Point(1.0, 0.3), 1) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(c.u(Point(0.5, 0.3), 0) == doctest::Approx(c.u(Point(0.5, 0.3), 1)).epsilon(1e-15));
  const CaseCheck chk = validate_case(c);
  CHECK(chk.ok);
  CHECK(chk.interface_jump <= 1e-10);
  CHECK_THROWS(case_layered(0, 1, 0.5));
  CHECK_THROWS(case_layered(1, 1, 1.0));
}

TEST_CASE("validator catches a wrong source") {
  ManufacturedCase c = case_smooth_sine();
  c.f = [](const Point& x, int) { return 2.1 * pi * pi * std::sin(pi * x.x()) * std::sin(pi * x.y()); };
  CHECK_FALSE(validate_case(c).ok);
  ManufacturedCase d = case_layered(1, 4, 0.5);
  d.grad = [](const Point&, int) { return Point(1.0, 0.0); };
  CHECK(validate_case(d).interface_jump > 1.0);
}

TEST_CASE("registry") {
  for (const auto& n : case_names()) CHECK(make_case(n).name == n);
  CHECK_THROWS(make_case("nope"));
}
