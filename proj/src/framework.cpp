#include "strang/framework.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

namespace strang {

DofMap DofMap::make(std::size_t full_size, const std::vector<bool>& is_pinned) {
  if (is_pinned.size() != full_size) throw std::invalid_argument("DofMap: mask size mismatch");
  DofMap m;
  m.full_size = full_size;
  for (std::size_t i = 0; i < full_size; ++i) (is_pinned[i] ? m.pinned : m.free).push_back(i);
  return m;
}

VectorXd DofMap::restrict_free(const VectorXd& full) const {
  VectorXd out(static_cast<Eigen::Index>(free.size()));
  for (std::size_t i = 0; i < free.size(); ++i) out[Eigen::Index(i)] = full[Eigen::Index(free[i])];
  return out;
}

VectorXd DofMap::restrict_pinned(const VectorXd& full) const {
  VectorXd out(static_cast<Eigen::Index>(pinned.size()));
  for (std::size_t i = 0; i < pinned.size(); ++i) out[Eigen::Index(i)] = full[Eigen::Index(pinned[i])];
  return out;
}

VectorXd DofMap::expand(const VectorXd& free_values, const VectorXd& pinned_values) const {
  VectorXd out = VectorXd::Zero(static_cast<Eigen::Index>(full_size));
  for (std::size_t i = 0; i < free.size(); ++i) out[Eigen::Index(free[i])] = free_values[Eigen::Index(i)];
  for (std::size_t i = 0; i < pinned.size() && i < std::size_t(pinned_values.size()); ++i)
    out[Eigen::Index(pinned[i])] = pinned_values[Eigen::Index(i)];
  return out;
}

VectorXd DiscreteScheme::expand(const VectorXd& free_values, bool lift) const {
  return dofs.expand(free_values, lift ? pinned_values : VectorXd::Zero(Eigen::Index(dofs.pinned.size())));
}

void reduce_system(const SparseMatrix& A_full, const VectorXd& b_full, const SparseMatrix& N_full,
                   const DofMap& dofs, const VectorXd& pinned_values, DiscreteScheme& out) {
  out.dofs = dofs;
  out.pinned_values = pinned_values;
  out.A = A_full.submatrix(dofs.free, dofs.free);
  out.NX = N_full.submatrix(dofs.free, dofs.free);
  out.NY = out.NX;
  out.b = dofs.restrict_free(b_full);
  if (!dofs.pinned.empty() && pinned_values.size() > 0) {
    const SparseMatrix AFP = A_full.submatrix(dofs.free, dofs.pinned);
    out.b -= AFP * pinned_values;
  }
  out.symmetric = out.A.asymmetry() <= 1e-12;
}

double backward_error(const SparseMatrix& A, const VectorXd& x, const VectorXd& b) {
  double fro = 0.0;
  for (double v : A.values()) fro += v * v;
  const double den = std::sqrt(fro) * x.norm() + b.norm();
  return den > 0.0 ? (b - A * x).norm() / den : 0.0;
}

namespace {

template <class Solve>
VectorXd refine(const SparseMatrix& A, const VectorXd& b, VectorXd x, const Solve& solve) {
  for (int it = 0; it < 3 && backward_error(A, x, b) > 1e-15; ++it) x += solve(VectorXd(b - A * x));
  return x;
}

VectorXd solve_direct(const DiscreteScheme& s) {
  const Eigen::SparseMatrix<double> m = s.A.to_eigen();
  if (s.symmetric) {
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(m);
    if (ldlt.info() != Eigen::Success) throw LinalgError("solve_scheme: factorization failed");
    return refine(s.A, s.b, ldlt.solve(s.b), [&](const VectorXd& r) { return VectorXd(ldlt.solve(r)); });
  }
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  Eigen::SparseMatrix<double> c = m;
  c.makeCompressed();
  lu.compute(c);
  if (lu.info() != Eigen::Success) throw LinalgError("solve_scheme: singular matrix");
  return refine(s.A, s.b, lu.solve(s.b), [&](const VectorXd& r) { return VectorXd(lu.solve(r)); });
}

}  // namespace

VectorXd solve_scheme(const DiscreteScheme& s, SolverKind kind, Exec exec) {
  const auto n = static_cast<Eigen::Index>(s.A.rows());
  if (s.b.norm() == 0.0) return VectorXd::Zero(n);
  VectorXd x;
  bool done = false;
  if (kind == SolverKind::pcg && s.symmetric) {
    CgOptions opts;
    opts.rel_tol = 1e-13;
    opts.exec = exec;
    try {
      x = solve_spd(s.A, s.b, opts);
      done = backward_error(s.A, x, s.b) <= 1e-12;
    } catch (const NotConvergedError&) {
    }
  }
  if (!done) x = solve_direct(s);
  const double res = backward_error(s.A, x, s.b);
  if (!(res <= 1e-12)) throw NotConvergedError("solve_scheme: backward error above 1e-12", res);
  return x;
}

VectorXd consistency_vector(const DiscreteScheme& s, const ManufacturedCase& c) {
  return s.b - s.A * s.interpolate(c);
}

double consistency_dual_norm(const DiscreteScheme& s, const ManufacturedCase& c) {
  return dual_norm(consistency_vector(s, c), s.NY);
}

Stability stability_constant(const DiscreteScheme& s, std::uint64_t seed) {
  Stability out;
  out.theory = s.gamma_theory;
  if (s.gamma_exact) {
    out.gamma = *s.gamma_exact;
  } else if (s.symmetric) {
    out.gamma = min_generalized_eig(s.A, s.NX, 1e-8, seed).value;
  } else {
    const SparseMatrix At = s.A.transpose();
    std::vector<Triplet> t;
    for (const SparseMatrix* M : {&s.A, &At})
      for (std::size_t r = 0; r < M->rows(); ++r)
        for (std::size_t k = M->offsets()[r]; k < M->offsets()[r + 1]; ++k)
          t.push_back({r, M->columns()[k], 0.5 * M->values()[k]});
    out.gamma = min_generalized_eig(SparseMatrix::from_triplets(s.A.rows(), s.A.cols(), std::move(t)), s.NX, 1e-8,
                                    seed)
                    .value;
  }
  out.coercive = out.gamma > 0.0;
  return out;
}

BoundReport verify_energy_bound(const DiscreteScheme& s, const ManufacturedCase& c, std::uint64_t seed,
                                std::optional<Stability> stability) {
  const Stability stab = stability ? *stability : stability_constant(s, seed);
  if (!stab.coercive) throw NonCoerciveError(s.label + ": scheme is not coercive", stab.gamma);

  BoundReport r;
  r.gamma = stab.gamma;
  r.gamma_theory = stab.theory;
  r.u_h = solve_scheme(s);
  const VectorXd Iu = s.interpolate(c);
  const VectorXd w = r.u_h - Iu;
  const VectorXd e = s.b - s.A * Iu;
  r.err_norm = std::sqrt(std::max(0.0, w.dot(s.NX * w)));
  r.cons_dual = dual_norm(e, s.NY);
  r.slack_upper = r.cons_dual / r.gamma - r.err_norm;

  // a(w, v) / (|w| |v|) at the maximizing v = N_Y^{-1} e certifies cons / err
  // as a lower bound of the form norm, whatever the sampled estimate gives.
  r.form_norm = form_norm_estimate(s.A, s.NX, s.NY, seed);
  if (r.err_norm > 0.0) r.form_norm = std::max(r.form_norm, r.cons_dual / r.err_norm);
  r.slack_lower = r.form_norm * r.err_norm - r.cons_dual;

  const VectorXd d = s.A * w - e;
  double fro = 0.0;
  for (double v : s.A.values()) fro += v * v;
  r.residual = d.norm() / std::max(std::sqrt(fro) * (r.u_h.norm() + Iu.norm()) + s.b.norm(), 1e-300);
  r.defect = dual_norm(d, s.NY);
  r.scale = std::max(r.err_norm, r.cons_dual / r.gamma);
  const double tol = 1e-9 * r.scale + r.defect / r.gamma;
  r.ok = r.slack_upper >= -tol && r.slack_lower >= -(1e-9 * r.scale * r.form_norm + r.defect);
  return r;
}

DualityRecord aubin_nitsche_identity(const DiscreteScheme& s, const ManufacturedCase& c,
                                     const ManufacturedCase& dual_z) {
  if (!s.reconstruct) throw std::invalid_argument(s.label + ": no reconstruction available");
  if (!s.symmetric) throw std::invalid_argument(s.label + ": duality identity needs a symmetric scheme");
  const VectorXd u_h = solve_scheme(s);
  const VectorXd w = u_h - s.interpolate(c);
  const VectorXd e = s.b - s.A * s.interpolate(c);
  const VectorXd Iz = s.interpolate(dual_z);

  DualityRecord out;
  out.g_term = integrate_against(*s.mesh, s.reconstruct(s.expand(w, false)), dual_z.f);
  out.dual_term = out.g_term - Iz.dot(s.A * w);
  out.primal_dual = Iz.dot(e);
  const double m = std::max({std::abs(out.g_term), std::abs(out.dual_term), std::abs(out.primal_dual), 1e-300});
  out.residual = std::abs(out.g_term - out.dual_term - out.primal_dual) / m;
  return out;
}

double integrate_against(const Mesh& mesh, const PiecewisePolynomial& p,
                         const std::function<double(const Point&, int)>& f, int extra_degree) {
  double total = 0.0;
  for (std::size_t c = 0; c < mesh.num_cells(); ++c) {
    const Quadrature q = polygon_quadrature(mesh, c, p[c].basis.degree() + extra_degree);
    const int sub = mesh.cell(c).subdomain;
    double s = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) s += q.weights[i] * p[c].value(q.nodes[i]) * f(q.nodes[i], sub);
    total += s;
  }
  return total;
}

FieldErrors reconstruction_errors(const Mesh& mesh, const PiecewisePolynomial& p, const ManufacturedCase& c,
                                  int extra_degree) {
  double l2 = 0.0, en = 0.0;
  for (std::size_t t = 0; t < mesh.num_cells(); ++t) {
    const Quadrature q = polygon_quadrature(mesh, t, 2 * p[t].basis.degree() + extra_degree);
    const int sub = mesh.cell(t).subdomain;
    const Matrix2d& K = c.field.tensor(sub);
    for (std::size_t i = 0; i < q.size(); ++i) {
      const Point& x = q.nodes[i];
      const double dv = p[t].value(x) - c.u(x, sub);
      const Point dg = p[t].gradient(x) - c.grad(x, sub);
      l2 += q.weights[i] * dv * dv;
      en += q.weights[i] * dg.dot(K * dg);
    }
  }
  return {std::sqrt(l2), std::sqrt(en)};
}

}  // namespace strang
