#include "strang/dg.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <exception>
#include <sstream>

namespace strang {

namespace {

Eigen::Index ix(std::size_t i) { return static_cast<Eigen::Index>(i); }

double normal_diffusion(const Matrix2d& K, const Point& n) { return (K * n).dot(n); }

struct Block {
  std::size_t row_cell, col_cell;
  MatrixXd A, N;
};

}  // namespace

DgWeights dg_weights(double delta1, double delta2) {
  if (!(delta1 > 0.0) || !(delta2 > 0.0)) throw DgError("dg_weights: normal diffusivities must be positive");
  const double s1 = std::sqrt(delta1), s2 = std::sqrt(delta2);
  DgWeights w;
  w.omega1 = s2 / (s1 + s2);
  w.omega2 = 1.0 - w.omega1;
  w.lambda = 2.0 * delta1 * delta2 / (delta1 + delta2);
  return w;
}

std::vector<DgFaceData> dg_face_data(const Mesh& mesh, const DiffusionField& field) {
  std::vector<DgFaceData> out(mesh.num_faces());
  for (std::size_t f = 0; f < mesh.num_faces(); ++f) {
    const Face& F = mesh.face(f);
    DgFaceData& d = out[f];
    d.h = F.diameter;
    d.delta1 = normal_diffusion(field.tensor(mesh.cell(std::size_t(F.cells[0])).subdomain), F.normal);
    if (F.is_boundary()) {
      d.weights = {1.0, 0.0, d.delta1};
    } else {
      d.delta2 = normal_diffusion(field.tensor(mesh.cell(std::size_t(F.cells[1])).subdomain), F.normal);
      d.weights = dg_weights(d.delta1, d.delta2);
    }
  }
  return out;
}

double ctr_estimate(const Mesh& mesh, int k) {
  double best = 0.0;
  for (std::size_t c = 0; c < mesh.num_cells(); ++c) {
    const CellBasis basis = cell_basis(mesh, c, k);
    const MatrixXd MT = mass_matrix(basis, polygon_quadrature(mesh, c, 2 * k));
    for (std::size_t f : mesh.cell(c).faces) {
      const Quadrature q = face_quadrature(mesh, f, 2 * k);
      const MatrixXd MF = mass_matrix(basis, q);
      const Eigen::GeneralizedSelfAdjointEigenSolver<MatrixXd> eig(MF, MT, Eigen::EigenvaluesOnly);
      best = std::max(best, mesh.face(f).diameter * eig.eigenvalues().maxCoeff());
    }
  }
  return std::sqrt(best);
}

JumpAverage jump_avg_eval(const Mesh& mesh, const DiffusionField& field, std::size_t face, const CellPolynomial& left,
                          const CellPolynomial& right, const Point& x) {
  const Face& F = mesh.face(face);
  const Matrix2d& K1 = field.tensor(mesh.cell(std::size_t(F.cells[0])).subdomain);
  JumpAverage out;
  if (F.is_boundary()) {
    out.jump = left.value(x);
    out.average = (K1 * left.gradient(x)).dot(F.normal);
    return out;
  }
  const Matrix2d& K2 = field.tensor(mesh.cell(std::size_t(F.cells[1])).subdomain);
  const DgWeights w = dg_weights(normal_diffusion(K1, F.normal), normal_diffusion(K2, F.normal));
  out.jump = left.value(x) - right.value(x);
  out.average = (w.omega1 * (K1 * left.gradient(x)) + w.omega2 * (K2 * right.gradient(x))).dot(F.normal);
  return out;
}

double swip_threshold(const Mesh& mesh, int k) {
  const double ctr = ctr_estimate(mesh, k);
  return ctr * ctr * double(regularity_metrics(mesh).max_faces_per_cell);
}

DiscreteScheme assemble_swip(std::shared_ptr<const Mesh> mesh_ptr, int k, double eta, const ManufacturedCase& c,
                             Exec exec) {
  if (k < 1 || k > 3) throw DgError("assemble_swip: degree must be 1, 2 or 3");
  if (!(eta > 0.0)) throw DgError("assemble_swip: penalty must be positive");
  const Mesh& mesh = *mesh_ptr;
  c.field.check_compatible(mesh);
  const DgSpace space{k, mesh.num_cells()};
  const int nb = space.local_size();
  const std::size_t nc = mesh.num_cells(), nf = mesh.num_faces(), N = space.size();
  const std::vector<DgFaceData> data = dg_face_data(mesh, c.field);
  std::vector<CellBasis> bases(nc);
  for (std::size_t t = 0; t < nc; ++t) bases[t] = cell_basis(mesh, t, k);

  VectorXd b = VectorXd::Zero(ix(N));
  std::vector<MatrixXd> cell_blocks(nc);
#pragma omp parallel for schedule(static) if (exec == Exec::parallel)
  for (std::ptrdiff_t tt = 0; tt < std::ptrdiff_t(nc); ++tt) {
    const auto t = std::size_t(tt);
    const int sub = mesh.cell(t).subdomain;
    cell_blocks[t] = stiffness_matrix(bases[t], c.field.tensor(sub), polygon_quadrature(mesh, t, 2 * k));
    const Quadrature q = polygon_quadrature(mesh, t, k + 10);
    VectorXd l = VectorXd::Zero(nb);
    for (std::size_t n = 0; n < q.size(); ++n) l += q.weights[n] * c.f(q.nodes[n], sub) * bases[t].eval(q.nodes[n]);
    b.segment(ix(space.index(t, 0)), nb) = l;
  }

  // Face couplings: up to four blocks per face, (test side, trial side).
  std::vector<std::vector<Block>> face_blocks(nf);
  std::vector<VectorXd> face_loads(nf);
#pragma omp parallel for schedule(static) if (exec == Exec::parallel)
  for (std::ptrdiff_t ff = 0; ff < std::ptrdiff_t(nf); ++ff) {
    const auto f = std::size_t(ff);
    const Face& F = mesh.face(f);
    const DgFaceData& d = data[f];
    const double pen = d.weights.lambda / d.h;
    const int sides = F.is_boundary() ? 1 : 2;
    std::array<std::size_t, 2> cells{std::size_t(F.cells[0]), 0};
    if (sides == 2) cells[1] = std::size_t(F.cells[1]);
    const std::array<double, 2> sign{1.0, -1.0}, omega{d.weights.omega1, d.weights.omega2};
    const Quadrature q = face_quadrature(mesh, f, 2 * k + 2);
    std::array<MatrixXd, 2> val, flux;  // per side: basis values and omega K grad . n, one column per node
    for (int s = 0; s < sides; ++s) {
      const Matrix2d& K = c.field.tensor(mesh.cell(cells[std::size_t(s)]).subdomain);
      val[std::size_t(s)].resize(nb, ix(q.size()));
      flux[std::size_t(s)].resize(nb, ix(q.size()));
      for (std::size_t n = 0; n < q.size(); ++n) {
        const CellBasis& B = bases[cells[std::size_t(s)]];
        val[std::size_t(s)].col(ix(n)) = sign[std::size_t(s)] * B.eval(q.nodes[n]);
        flux[std::size_t(s)].col(ix(n)) = omega[std::size_t(s)] * (B.grad(q.nodes[n]) * (K * F.normal));
      }
    }
    Eigen::Map<const VectorXd> w(q.weights.data(), ix(q.size()));
    for (int a = 0; a < sides; ++a)
      for (int bb = 0; bb < sides; ++bb) {
        const MatrixXd& Va = val[std::size_t(a)];
        const MatrixXd& Vb = val[std::size_t(bb)];
        const MatrixXd jj = Va * w.asDiagonal() * Vb.transpose();
        Block blk{cells[std::size_t(a)], cells[std::size_t(bb)], {}, pen * jj};
        blk.A = eta * pen * jj - Va * w.asDiagonal() * flux[std::size_t(bb)].transpose() -
                flux[std::size_t(a)] * w.asDiagonal() * Vb.transpose();
        face_blocks[f].push_back(std::move(blk));
      }
    if (F.is_boundary()) {
      // Weak Dirichlet data: eta lambda/h (g, v) - (g, K grad v . n).
      const int sub = mesh.cell(cells[0]).subdomain;
      const Quadrature qg = face_quadrature(mesh, f, k + 10);
      const Matrix2d& K = c.field.tensor(sub);
      VectorXd l = VectorXd::Zero(nb);
      for (std::size_t n = 0; n < qg.size(); ++n) {
        const CellBasis& B = bases[cells[0]];
        const double g = c.u(qg.nodes[n], sub);
        l += qg.weights[n] * g * (eta * pen * B.eval(qg.nodes[n]) - B.grad(qg.nodes[n]) * (K * F.normal));
      }
      face_loads[f] = std::move(l);
    }
  }

  std::vector<Triplet> ta, tn;
  auto push = [&](std::size_t rc, std::size_t cc, const MatrixXd& A, const MatrixXd& M) {
    for (int i = 0; i < nb; ++i)
      for (int j = 0; j < nb; ++j) {
        ta.push_back({space.index(rc, i), space.index(cc, j), A(i, j)});
        tn.push_back({space.index(rc, i), space.index(cc, j), M(i, j)});
      }
  };
  for (std::size_t t = 0; t < nc; ++t) push(t, t, cell_blocks[t], cell_blocks[t]);
  for (std::size_t f = 0; f < nf; ++f) {
    for (const Block& blk : face_blocks[f]) push(blk.row_cell, blk.col_cell, blk.A, blk.N);
    if (face_loads[f].size() > 0) b.segment(ix(space.index(std::size_t(mesh.face(f).cells[0]), 0)), nb) += face_loads[f];
  }

  DiscreteScheme s;
  s.label = "dg" + std::to_string(k);
  s.mesh = mesh_ptr;
  s.source = &c;
  reduce_system(SparseMatrix::from_triplets(N, N, std::move(ta)), b, SparseMatrix::from_triplets(N, N, std::move(tn)),
                DofMap::make(N, std::vector<bool>(N, false)), VectorXd(), s);
  s.interpolate_full = [mesh_ptr, k](const ManufacturedCase& cs) {
    const Mesh& m = *mesh_ptr;
    const auto nb_ = Eigen::Index(poly_dim(k));
    VectorXd v(ix(m.num_cells()) * nb_);
    for (std::size_t t = 0; t < m.num_cells(); ++t) {
      const int sub = m.cell(t).subdomain;
      v.segment(ix(t) * nb_, nb_) = l2_project(m, t, [&](const Point& x) { return cs.u(x, sub); }, k);
    }
    return v;
  };
  s.reconstruct = [mesh_ptr, k](const VectorXd& full) {
    const Mesh& m = *mesh_ptr;
    const auto nb_ = Eigen::Index(poly_dim(k));
    PiecewisePolynomial p(m.num_cells());
    for (std::size_t t = 0; t < m.num_cells(); ++t) p[t] = {cell_basis(m, t, k), full.segment(ix(t) * nb_, nb_)};
    return p;
  };
  const double threshold = swip_threshold(mesh, k);
  s.gamma_theory = (eta - threshold) / (1.0 + eta);
  if (eta <= threshold) {
    std::ostringstream msg;
    msg << s.label << ": penalty " << eta << " does not exceed C_tr^2 N = " << threshold
        << "; coercivity is checked numerically only";
    s.warnings.push_back(msg.str());
  }
  return s;
}

}  // namespace strang
