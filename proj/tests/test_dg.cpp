#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "strang/dg.hpp"

using namespace strang;

namespace {

double eoc_of(double e0, double e1) { return std::log(e0 / e1) / std::log(2.0); }

}  // namespace

TEST_CASE("penalty weights") {
  DgWeights w = dg_weights(1.0, 1.0);
  CHECK(w.omega1 == doctest::Approx(0.5));
  CHECK(w.omega2 == doctest::Approx(0.5));
  CHECK(w.lambda == doctest::Approx(1.0));
  w = dg_weights(1.0, 4.0);
  CHECK(w.omega1 == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(w.omega2 == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
  CHECK(w.lambda == doctest::Approx(8.0 / 5.0).epsilon(1e-15));
  w = dg_weights(1e-8, 1.0);
  CHECK(w.lambda == doctest::Approx(2e-8).epsilon(1e-7));
  CHECK(w.omega1 == doctest::Approx(1.0).epsilon(1e-3));
  CHECK_THROWS_AS(dg_weights(0.0, 1.0), DgError);
  CHECK_THROWS_AS(dg_weights(1.0, -2.0), DgError);

  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-6.0, 6.0);
  for (int i = 0; i < 1000; ++i) {
    const double d1 = std::pow(10.0, u(rng)), d2 = std::pow(10.0, u(rng));
    const DgWeights x = dg_weights(d1, d2);
    CHECK(x.omega1 + x.omega2 == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(std::max(x.omega1 * std::sqrt(d1), x.omega2 * std::sqrt(d2)) <= std::sqrt(x.lambda / 2.0) * (1.0 + 1e-12));
  }
}

TEST_CASE("face data on a layered mesh") {
  const Mesh mesh = build_cartesian(2, 1, {}, 2);
  const DiffusionField field({make_tensor(1.0, 0.0, 1.0), make_tensor(4.0, 0.0, 1.0)}, {0.0, 0.5, 1.0});
  const std::vector<DgFaceData> data = dg_face_data(mesh, field);
  for (std::size_t f = 0; f < mesh.num_faces(); ++f) {
    const DgFaceData& d = data[f];
    if (mesh.face(f).is_boundary()) {
      CHECK(d.weights.omega1 == 1.0);
      CHECK(d.weights.lambda == d.delta1);
    } else {
      CHECK(d.delta1 == doctest::Approx(1.0));
      CHECK(d.delta2 == doctest::Approx(4.0));
      CHECK(d.weights.lambda == doctest::Approx(1.6));
    }
  }
}

TEST_CASE("jump and weighted average") {
  const Mesh mesh = build_cartesian(2, 1, {}, 2);
  const DiffusionField field({make_tensor(1.0, 0.0, 1.0), make_tensor(4.0, 0.0, 1.0)}, {0.0, 0.5, 1.0});
  const std::size_t f = mesh.internal_faces()[0];
  const Point x = mesh.face(f).centroid;
  auto poly = [&](std::size_t c, const VectorXd& coeffs) { return CellPolynomial{cell_basis(mesh, c, 1), coeffs}; };
  // v = x on both sides.
  const VectorXd lx0 = l2_project(mesh, 0, [](const Point& p) { return p.x(); }, 1);
  const VectorXd lx1 = l2_project(mesh, 1, [](const Point& p) { return p.x(); }, 1);
  const JumpAverage ja = jump_avg_eval(mesh, field, f, poly(0, lx0), poly(1, lx1), x);
  CHECK(std::abs(ja.jump) <= 1e-14);
  CHECK(ja.average == doctest::Approx(2.0).epsilon(1e-13));
  // v = 1 on T1, 0 on T2.
  const JumpAverage one = jump_avg_eval(mesh, field, f, poly(0, VectorXd::Unit(3, 0)), poly(1, VectorXd::Zero(3)), x);
  CHECK(one.jump == doctest::Approx(1.0));
}

TEST_CASE("discrete trace constant") {
  // Constants: h_F |F| / |T| = 1 on the unit square.
  CHECK(ctr_estimate(build_cartesian(1, 1), 0) == doctest::Approx(1.0).epsilon(1e-13));
  // P1 on a square: profiles in x alone reach the 1D bound v(0)^2 / ||v||^2 = 4.
  CHECK(ctr_estimate(build_cartesian(1, 1), 1) == doctest::Approx(2.0).epsilon(1e-12));
  for (int k : {1, 2, 3})
    CHECK(ctr_estimate(build_cartesian(8, 8), k) == doctest::Approx(ctr_estimate(build_cartesian(2, 2), k)).epsilon(1e-10));

  // Random sampling oracle on one perturbed cell, k = 2: 10^4 polynomials per
  // face, drawn uniformly on the unit sphere of L2(T).
  const Mesh mesh = Mesh::from_cells({Point(0, 0), Point(1.1, 0.1), Point(0.9, 0.8), Point(-0.1, 1.2)}, {{0, 1, 2, 3}});
  const double ctr = ctr_estimate(mesh, 2);
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g;
  double sampled = 0.0;
  const CellBasis basis = cell_basis(mesh, 0, 2);
  const Quadrature qc = polygon_quadrature(mesh, 0, 6);
  MatrixXd MT = MatrixXd::Zero(6, 6);
  for (std::size_t n = 0; n < qc.size(); ++n) MT += qc.weights[n] * basis.eval(qc.nodes[n]) * basis.eval(qc.nodes[n]).transpose();
  const MatrixXd L = MT.llt().matrixL();
  for (std::size_t f : mesh.cell(0).faces) {
    const Quadrature qf = face_quadrature(mesh, f, 6);
    for (int s = 0; s < 10000; ++s) {
      VectorXd z(6);
      for (Eigen::Index i = 0; i < 6; ++i) z[i] = g(rng);
      const VectorXd a = L.transpose().triangularView<Eigen::Upper>().solve(z);
      double num = 0.0, den = 0.0;
      for (std::size_t n = 0; n < qf.size(); ++n) num += qf.weights[n] * std::pow(basis.eval(qf.nodes[n]).dot(a), 2);
      for (std::size_t n = 0; n < qc.size(); ++n) den += qc.weights[n] * std::pow(basis.eval(qc.nodes[n]).dot(a), 2);
      sampled = std::max(sampled, std::sqrt(mesh.face(f).diameter * num / den));
    }
  }
  CHECK(sampled <= ctr * (1.0 + 1e-12));
  CHECK(sampled >= 0.98 * ctr);
}

TEST_CASE("polynomial solutions are reproduced") {
  auto mesh = std::make_shared<const Mesh>(perturb(build_cartesian(5, 5), 0.25, 6));
  const Matrix2d K = make_tensor(2.0, 0.4, 0.7);
  for (int k : {1, 2, 3}) {
    const ManufacturedCase c = k == 1 ? case_affine(K) : case_quadratic(K);
    const DiscreteScheme s = assemble_swip(mesh, k, 40.0 * k * k, c);
    CHECK(s.symmetric);
    CHECK(s.A.asymmetry() <= 1e-12);
    const VectorXd Iu = s.interpolate(c);
    CHECK((solve_scheme(s) - Iu).norm() <= 1e-9 * Iu.norm());
  }
}

TEST_CASE("layered coefficients with harmonic weights") {
  auto mesh = std::make_shared<const Mesh>(build_cartesian(8, 8, {}, 2));
  const ManufacturedCase c = case_layered(1.0, 100.0);
  const DiscreteScheme s = assemble_swip(mesh, 1, kDefaultPenalty, c);
  const BoundReport r = verify_energy_bound(s, c);
  const VectorXd Iu = s.interpolate(c);
  CHECK(r.err_norm <= 1e-9 * std::sqrt(Iu.dot(s.NX * Iu)));
  CHECK(r.ok);
}

TEST_CASE("coercivity against the theoretical constant") {
  auto mesh = std::make_shared<const Mesh>(build_cartesian(8, 8));
  const ManufacturedCase c = case_smooth_sine();
  CHECK(swip_threshold(*mesh, 1) == doctest::Approx(16.0).epsilon(1e-10));
  for (double eta : {kDefaultPenalty, 17.6, 100.0}) {
    const DiscreteScheme s = assemble_swip(mesh, 1, eta, c);
    const Stability st = stability_constant(s);
    CHECK(*st.theory == doctest::Approx((eta - 16.0) / (1.0 + eta)).epsilon(1e-10));
    CHECK(st.gamma >= *st.theory - 1e-6);
    CHECK(st.coercive);
    CHECK(s.warnings.empty() == (eta > 16.0));
  }
  // Dense oracle for the generalized eigenvalue.
  const DiscreteScheme s = assemble_swip(std::make_shared<const Mesh>(build_cartesian(4, 4)), 2, 10.0, c);
  const Eigen::GeneralizedSelfAdjointEigenSolver<MatrixXd> oracle(s.A.to_dense(), s.NX.to_dense(),
                                                                   Eigen::EigenvaluesOnly);
  CHECK(stability_constant(s).gamma == doctest::Approx(oracle.eigenvalues()[0]).epsilon(1e-7));
  CHECK_THROWS_AS(assemble_swip(mesh, 4, 10.0, c), DgError);
  CHECK_THROWS_AS(assemble_swip(mesh, 1, 0.0, c), DgError);
}

TEST_CASE("energy bound and duality identity") {
  auto mesh = std::make_shared<const Mesh>(perturb(build_cartesian(8, 8), 0.2, 8));
  const ManufacturedCase u = case_smooth_sine(make_tensor(1.0, 0.2, 0.5));
  for (int k : {1, 2}) {
    const DiscreteScheme s = assemble_swip(mesh, k, kDefaultPenalty, u);
    const BoundReport r = verify_energy_bound(s, u);
    CHECK(r.ok);
    CHECK(r.slack_upper >= 0.0);
    CHECK(r.slack_lower >= 0.0);
    CHECK(aubin_nitsche_identity(s, u, u).residual <= 1e-9);
  }
}

TEST_CASE("convergence on the sine case") {
  const ManufacturedCase u = case_smooth_sine();
  for (int k : {1, 2}) {
    std::vector<FieldErrors> errs;
    std::vector<double> disc;
    for (std::size_t n : {8, 16, 32}) {
      auto mesh = std::make_shared<const Mesh>(build_cartesian(n, n));
      const DiscreteScheme s = assemble_swip(mesh, k, kDefaultPenalty, u);
      const VectorXd uh = solve_scheme(s), w = uh - s.interpolate(u);
      errs.push_back(reconstruction_errors(*mesh, s.reconstruct(uh), u));
      disc.push_back(std::sqrt(w.dot(s.NX * w)));
    }
    CHECK(eoc_of(errs[1].energy, errs[2].energy) >= k - 0.15);
    CHECK(eoc_of(errs[1].energy, errs[2].energy) <= k + 0.3);
    CHECK(eoc_of(errs[1].l2, errs[2].l2) >= k + 0.8);
    CHECK(eoc_of(disc[1], disc[2]) >= k - 0.15);
  }
}

TEST_CASE("penalty sweep leaves the rate unchanged") {
  // Rate of ||u_h - I_h u||_X on the finest pair; below 32 cells the large
  // penalty is still preasymptotic.
  const ManufacturedCase u = case_smooth_sine();
  std::vector<double> rates;
  for (double eta : {1.1 * 16.0, 10.0, 100.0}) {
    std::vector<double> e;
    for (std::size_t n : {32, 64}) {
      auto mesh = std::make_shared<const Mesh>(build_cartesian(n, n));
      const DiscreteScheme s = assemble_swip(mesh, 1, eta, u);
      const VectorXd w = solve_scheme(s) - s.interpolate(u);
      e.push_back(std::sqrt(w.dot(s.NX * w)));
    }
    rates.push_back(eoc_of(e[0], e[1]));
  }
  CHECK(std::abs(rates[0] - rates[1]) <= 0.1);
  CHECK(std::abs(rates[0] - rates[2]) <= 0.1);
}

TEST_CASE("parallel and serial assembly agree") {
  auto mesh = std::make_shared<const Mesh>(perturb(build_cartesian(6, 6), 0.2, 1));
  const ManufacturedCase u = case_smooth_sine();
  const DiscreteScheme a = assemble_swip(mesh, 2, 10.0, u, Exec::serial);
  const DiscreteScheme b = assemble_swip(mesh, 2, 10.0, u, Exec::parallel);
  CHECK(a.A.values() == b.A.values());
  CHECK(a.b == b.b);
}
