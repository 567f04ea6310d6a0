#include "strang/fv.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <sstream>

namespace strang {

namespace {

double cross(const Point& a, const Point& b) { return a.x() * b.y() - a.y() * b.x(); }

double angle_between(const Point& a, const Point& b) { return std::atan2(std::abs(cross(a, b)), a.dot(b)); }

std::vector<std::size_t> boundary_slots(const Mesh& mesh) {
  std::vector<std::size_t> slot(mesh.num_faces(), kNoSlot);
  for (std::size_t i = 0; i < mesh.boundary_faces().size(); ++i) slot[mesh.boundary_faces()[i]] = i;
  return slot;
}

MatrixXd difference_operator(std::size_t n) {
  MatrixXd D = MatrixXd::Zero(Eigen::Index(n), Eigen::Index(n + 1));
  for (std::size_t i = 0; i < n; ++i) {
    D(Eigen::Index(i), 0) = 1.0;
    D(Eigen::Index(i), Eigen::Index(i + 1)) = -1.0;
  }
  return D;
}

double cell_integral(const Mesh& mesh, std::size_t c, const std::function<double(const Point&, int)>& f) {
  const Quadrature q = polygon_quadrature(mesh, c, 8);
  const int sub = mesh.cell(c).subdomain;
  double s = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) s += q.weights[i] * f(q.nodes[i], sub);
  return s;
}

// int_F K_T grad u|_T . n_TF
double exact_flux(const Mesh& mesh, std::size_t cell, std::size_t local_face, const ManufacturedCase& c, int degree) {
  const Cell& T = mesh.cell(cell);
  const Quadrature q = face_quadrature(mesh, T.faces[local_face], degree);
  double s = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) s += q.weights[i] * c.flux(q.nodes[i], T.subdomain).dot(T.normals[local_face]);
  return s;
}

VectorXd local_interpolant(const Mesh& mesh, std::size_t cell, const std::function<double(const Point&, int)>& u) {
  const Cell& T = mesh.cell(cell);
  VectorXd v(Eigen::Index(T.num_faces() + 1));
  v[0] = u(T.point, T.subdomain);
  for (std::size_t i = 0; i < T.num_faces(); ++i) v[Eigen::Index(i + 1)] = u(mesh.face(T.faces[i]).point, T.subdomain);
  return v;
}

VectorXd extended_interpolant(const Mesh& mesh, const std::function<double(const Point&, int)>& u) {
  const std::size_t nc = mesh.num_cells();
  VectorXd v(Eigen::Index(nc + mesh.boundary_faces().size()));
  for (std::size_t c = 0; c < nc; ++c) v[Eigen::Index(c)] = u(mesh.cell(c).point, mesh.cell(c).subdomain);
  for (std::size_t i = 0; i < mesh.boundary_faces().size(); ++i) {
    const Face& F = mesh.face(mesh.boundary_faces()[i]);
    v[Eigen::Index(nc + i)] = u(F.point, mesh.cell(std::size_t(F.cells[0])).subdomain);
  }
  return v;
}

PiecewisePolynomial piecewise_constant(const Mesh& mesh, const VectorXd& cell_values) {
  PiecewisePolynomial p(mesh.num_cells());
  for (std::size_t c = 0; c < mesh.num_cells(); ++c) {
    p[c].basis = cell_basis(mesh, c, 0);
    p[c].coeffs = VectorXd::Constant(1, cell_values[Eigen::Index(c)]);
  }
  return p;
}

double apply(const SparseRow& row, const VectorXd& v) {
  double s = 0.0;
  for (const auto& [j, a] : row) s += a * v[Eigen::Index(j)];
  return s;
}

ManufacturedCase zero_case(const DiffusionField& field) {
  ManufacturedCase c;
  c.name = "zero";
  c.field = field;
  c.u = [](const Point&, int) { return 0.0; };
  c.grad = [](const Point&, int) { return Point(Point::Zero()); };
  c.f = [](const Point&, int) { return 0.0; };
  c.smooth.assign(std::size_t(field.num_subdomains()), true);
  return c;
}

}  // namespace

std::size_t FluxFamily::extended_size() const {
  if (kind == FluxKind::hybrid) return num_cells + boundary_slot.size();
  std::size_t nb = 0;
  for (std::size_t s : boundary_slot) nb += s != kNoSlot;
  return num_cells + nb;
}

SparseRow FluxFamily::cell_face_row(const Mesh& mesh, std::size_t cell, std::size_t local_face) const {
  const std::size_t f = mesh.cell(cell).faces[local_face];
  const double sign = mesh.face(f).cells[0] == int(cell) ? 1.0 : -1.0;
  SparseRow row = face_rows[f];
  for (auto& e : row) e.second *= sign;
  return row;
}

// ---------------------------------------------------------------------------
// Two-point fluxes

double tpfa_admissibility_angle(const Mesh& mesh, const DiffusionField& field) {
  double worst = 0.0;
  for (std::size_t c = 0; c < mesh.num_cells(); ++c) {
    const Cell& T = mesh.cell(c);
    const Matrix2d& K = field.tensor(T.subdomain);
    for (std::size_t i = 0; i < T.num_faces(); ++i)
      worst = std::max(worst, angle_between(mesh.face(T.faces[i]).point - T.point, K * T.normals[i]));
  }
  return worst;
}

FluxFamily tpfa_fluxes(const Mesh& mesh, const DiffusionField& field, Exec exec) {
  field.check_compatible(mesh);
  const std::size_t nc = mesh.num_cells();
  for (std::size_t c = 0; c < nc; ++c) {
    const Cell& T = mesh.cell(c);
    const Matrix2d& K = field.tensor(T.subdomain);
    for (std::size_t i = 0; i < T.num_faces(); ++i) {
      const Point d = mesh.face(T.faces[i]).point - T.point;
      if (d.norm() == 0.0) throw FvError("x_T coincides with x_F in cell " + std::to_string(c));
      const double angle = angle_between(d, K * T.normals[i]);
      if (!(angle < 1e-8)) {
        std::ostringstream os;
        os << "mesh not K-admissible: cell " << c << ", face " << T.faces[i] << " (angle " << angle << " rad)";
        throw FvError(os.str());
      }
    }
  }

  FluxFamily out;
  out.kind = FluxKind::hybrid;
  out.label = "tpfa";
  out.num_cells = nc;
  out.boundary_slot = boundary_slots(mesh);
  out.local.resize(nc);
  std::vector<double> ratio(nc, 0.0);
#pragma omp parallel for schedule(static) if (exec == Exec::parallel)
  for (std::ptrdiff_t cc = 0; cc < std::ptrdiff_t(nc); ++cc) {
    const auto c = std::size_t(cc);
    const Cell& T = mesh.cell(c);
    const TensorInfo& info = field.info(T.subdomain);
    const std::size_t n = T.num_faces();
    MatrixXd phi = MatrixXd::Zero(Eigen::Index(n), Eigen::Index(n + 1));
    double r = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      const Face& F = mesh.face(T.faces[i]);
      const double dist = (F.point - T.point).norm();
      const double knorm = (info.K * T.normals[i]).norm();
      const double tau = F.measure * knorm / dist;
      phi(Eigen::Index(i), 0) = tau;
      phi(Eigen::Index(i), Eigen::Index(i + 1)) = -tau;
      r = std::min(r, T.distances[i] * knorm / (info.lambda_min * dist));
    }
    out.local[c] = std::move(phi);
    ratio[c] = r;
  }
  out.gamma_theory = *std::min_element(ratio.begin(), ratio.end());
  return out;
}

// ---------------------------------------------------------------------------
// Mixed finite volume fluxes

MatrixXd hmm_local(const Mesh& mesh, std::size_t cell, const Matrix2d& K, double lambda_max, double stab_scale) {
  const Cell& T = mesh.cell(cell);
  const auto n = Eigen::Index(T.num_faces());
  Eigen::Matrix<double, Eigen::Dynamic, 2> X(n, 2), FN(n, 2);
  VectorXd bdiag(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Face& F = mesh.face(T.faces[std::size_t(i)]);
    X.row(i) = (F.centroid - T.point).transpose();
    FN.row(i) = F.measure * T.normals[std::size_t(i)].transpose();
    bdiag[i] = stab_scale * T.distances[std::size_t(i)] / (F.measure * lambda_max);
  }
  // G(f) = -K^{-1} X^T f / |T|,  R(f) = f + FN K G(f)
  const Eigen::Matrix<double, 2, Eigen::Dynamic> G = -(K.inverse() * X.transpose()) / T.measure;
  const MatrixXd R = MatrixXd::Identity(n, n) + FN * K * G;
  const MatrixXd M = T.measure * G.transpose() * K * G + R.transpose() * bdiag.asDiagonal() * R;
  const Eigen::LLT<MatrixXd> llt(M);
  if (llt.info() != Eigen::Success) throw FvError("HMM local system singular in cell " + std::to_string(cell));
  return llt.solve(difference_operator(std::size_t(n)));
}

FluxFamily hmm_fluxes(const Mesh& mesh, const DiffusionField& field, double stab_scale, Exec exec) {
  if (!(stab_scale > 0.0)) throw std::invalid_argument("hmm_fluxes: stab_scale must be positive");
  field.check_compatible(mesh);
  for (std::size_t f = 0; f < mesh.num_faces(); ++f)
    if ((mesh.face(f).point - mesh.face(f).centroid).norm() > 1e-14 * mesh.face(f).diameter)
      throw FvError("HMM requires face centroids as face points (face " + std::to_string(f) + ")");

  const std::size_t nc = mesh.num_cells();
  FluxFamily out;
  out.kind = FluxKind::hybrid;
  out.label = "hmm";
  out.num_cells = nc;
  out.boundary_slot = boundary_slots(mesh);
  out.local.resize(nc);
  std::vector<char> failed(nc, 0);
#pragma omp parallel for schedule(static) if (exec == Exec::parallel)
  for (std::ptrdiff_t cc = 0; cc < std::ptrdiff_t(nc); ++cc) {
    const auto c = std::size_t(cc);
    const TensorInfo& info = field.info(mesh.cell(c).subdomain);
    try {
      out.local[c] = hmm_local(mesh, c, info.K, info.lambda_max, stab_scale);
    } catch (const FvError&) {
      failed[c] = 1;
    }
  }
  for (std::size_t c = 0; c < nc; ++c)
    if (failed[c]) throw FvError("HMM local system singular in cell " + std::to_string(c));
  return out;
}

// ---------------------------------------------------------------------------
// Multi-point fluxes

MpfaGroup mpfa_group_gradient(const Mesh& mesh, const DiffusionField& field, std::size_t cell,
                              std::size_t local_vertex) {
  const Cell& T = mesh.cell(cell);
  const std::size_t n = T.num_faces();
  const std::size_t nc = mesh.num_cells();
  const std::array<std::size_t, 2> local = {(local_vertex + n - 1) % n, local_vertex};
  const Matrix2d& KG = field.tensor(T.subdomain);

  MpfaGroup g;
  g.cell = cell;
  g.vertex = T.vertices[local_vertex];
  g.stencil[0] = cell;
  for (int r = 0; r < 2; ++r) {
    const std::size_t li = local[std::size_t(r)];
    const std::size_t f = T.faces[li];
    const Face& F = mesh.face(f);
    const Point& nG = T.normals[li];
    g.faces[std::size_t(r)] = f;
    if (F.is_boundary()) {
      const double w = nG.dot(KG * nG) / T.distances[li];
      g.A.row(r) = (w * (F.point - T.point)).transpose();
      g.B(r, 0) = -w;
      g.B(r, r + 1) = w;
      const auto& bf = mesh.boundary_faces();  // ascending
      g.stencil[std::size_t(r + 1)] = nc + std::size_t(std::lower_bound(bf.begin(), bf.end(), f) - bf.begin());
    } else {
      const std::size_t other = std::size_t(F.cells[0] == int(cell) ? F.cells[1] : F.cells[0]);
      const Cell& To = mesh.cell(other);
      const std::size_t lo = To.local_index(f);
      const Matrix2d& KT = field.tensor(To.subdomain);
      const Point& nT = To.normals[lo];
      const double w = nT.dot(KT * nT) / To.distances[lo];
      g.A.row(r) = (w * (To.point - T.point) + KG * nG + KT * nT).transpose();
      g.B(r, 0) = -w;
      g.B(r, r + 1) = w;
      g.stencil[std::size_t(r + 1)] = other;
    }
  }
  try {
    for (int j = 0; j < 3; ++j) {
      const DenseSolution s = solve_dense(g.A, g.B.col(j));
      g.gradient.col(j) = s.x;
      g.condition = s.condition;
    }
    g.invertible = true;
  } catch (const LinalgError&) {
    g.invertible = false;
    g.gradient.setZero();
    g.condition = condition_number(g.A);
  }
  return g;
}

std::string strategy_name(MpfaStrategy s) {
  switch (s) {
    case MpfaStrategy::uniform:
      return "mpfa-uniform";
    case MpfaStrategy::l_proxy:
      return "mpfa-l-proxy";
    case MpfaStrategy::g_proxy:
      return "mpfa-g-proxy";
  }
  return "mpfa";
}

FluxFamily mpfa_fluxes(const Mesh& mesh, const DiffusionField& field, MpfaStrategy strategy, Exec exec) {
  field.check_compatible(mesh);
  for (std::size_t f = 0; f < mesh.num_faces(); ++f)
    if ((mesh.face(f).point - mesh.face(f).centroid).norm() > 1e-14 * mesh.face(f).diameter)
      throw FvError("MPFA requires face centroids as face points (face " + std::to_string(f) + ")");

  const std::size_t nc = mesh.num_cells();
  FluxFamily out;
  out.kind = FluxKind::cell_centred;
  out.label = strategy_name(strategy);
  out.num_cells = nc;
  out.boundary_slot = boundary_slots(mesh);

  std::vector<std::size_t> first(nc + 1, 0);
  for (std::size_t c = 0; c < nc; ++c) first[c + 1] = first[c] + mesh.cell(c).num_faces();
  out.groups.resize(first[nc]);
#pragma omp parallel for schedule(static) if (exec == Exec::parallel)
  for (std::ptrdiff_t cc = 0; cc < std::ptrdiff_t(nc); ++cc) {
    const auto c = std::size_t(cc);
    for (std::size_t v = 0; v < mesh.cell(c).num_faces(); ++v)
      out.groups[first[c] + v] = mpfa_group_gradient(mesh, field, c, v);
  }

  std::vector<std::vector<std::size_t>> candidates(mesh.num_faces());
  for (std::size_t gi = 0; gi < out.groups.size(); ++gi)
    if (out.groups[gi].invertible)
      for (std::size_t f : out.groups[gi].faces) candidates[f].push_back(gi);

  out.weights.resize(mesh.num_faces());
  out.face_rows.resize(mesh.num_faces());
  for (std::size_t f = 0; f < mesh.num_faces(); ++f) {
    const auto& cand = candidates[f];
    if (cand.empty()) throw FvError("no invertible MPFA group contains face " + std::to_string(f));
    auto& w = out.weights[f];
    switch (strategy) {
      case MpfaStrategy::uniform:
        for (std::size_t gi : cand) w.emplace_back(gi, 1.0 / double(cand.size()));
        break;
      case MpfaStrategy::l_proxy: {
        std::size_t best = cand.front();
        for (std::size_t gi : cand)
          if (out.groups[gi].condition < out.groups[best].condition) best = gi;
        w.emplace_back(best, 1.0);
        break;
      }
      case MpfaStrategy::g_proxy: {
        double total = 0.0;
        for (std::size_t gi : cand) total += 1.0 / out.groups[gi].condition;
        for (std::size_t gi : cand) w.emplace_back(gi, (1.0 / out.groups[gi].condition) / total);
        break;
      }
    }
    // Flux out of cells[0]: -|F| K_G grad_G . n_F whichever side T_G lies on,
    // since flux continuity holds across F inside the group.
    const Face& F = mesh.face(f);
    std::map<std::size_t, double> row;
    for (const auto& [gi, theta] : w) {
      const MpfaGroup& g = out.groups[gi];
      const Eigen::RowVector3d coeff =
          -F.measure * theta * (field.tensor(mesh.cell(g.cell).subdomain) * F.normal).transpose() * g.gradient;
      for (int j = 0; j < 3; ++j) row[g.stencil[std::size_t(j)]] += coeff[j];
    }
    out.face_rows[f].assign(row.begin(), row.end());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Assembly

DiscreteScheme assemble_hybrid_fv(std::shared_ptr<const Mesh> mesh_ptr, const FluxFamily& fluxes,
                                  const ManufacturedCase& c) {
  if (fluxes.kind != FluxKind::hybrid) throw std::invalid_argument("assemble_hybrid_fv: hybrid fluxes required");
  const Mesh& mesh = *mesh_ptr;
  const std::size_t nc = mesh.num_cells(), nf = mesh.num_faces(), N = nc + nf;
  std::vector<Triplet> ta, tn;
  VectorXd b = VectorXd::Zero(Eigen::Index(N));
  for (std::size_t t = 0; t < nc; ++t) {
    const Cell& T = mesh.cell(t);
    const std::size_t n = T.num_faces();
    const MatrixXd D = difference_operator(n);
    const MatrixXd AT = D.transpose() * fluxes.local[t];
    VectorXd w(static_cast<Eigen::Index>(n));
    const double lam = c.field.info(T.subdomain).lambda_min;
    for (std::size_t i = 0; i < n; ++i) w[Eigen::Index(i)] = lam * mesh.face(T.faces[i]).measure / T.distances[i];
    const MatrixXd NT = D.transpose() * w.asDiagonal() * D;
    std::vector<std::size_t> idx = {t};
    for (std::size_t f : T.faces) idx.push_back(nc + f);
    for (std::size_t i = 0; i <= n; ++i)
      for (std::size_t j = 0; j <= n; ++j) {
        ta.push_back({idx[i], idx[j], AT(Eigen::Index(i), Eigen::Index(j))});
        tn.push_back({idx[i], idx[j], NT(Eigen::Index(i), Eigen::Index(j))});
      }
    b[Eigen::Index(t)] = cell_integral(mesh, t, c.f);
  }
  std::vector<bool> pinned(N, false);
  for (std::size_t f : mesh.boundary_faces()) pinned[nc + f] = true;
  const DofMap dofs = DofMap::make(N, pinned);

  auto interp = [mesh_ptr, nc, nf](const ManufacturedCase& cs) {
    const Mesh& m = *mesh_ptr;
    VectorXd v(Eigen::Index(nc + nf));
    for (std::size_t t = 0; t < nc; ++t) v[Eigen::Index(t)] = cs.u(m.cell(t).point, m.cell(t).subdomain);
    for (std::size_t f = 0; f < nf; ++f)
      v[Eigen::Index(nc + f)] = cs.u(m.face(f).point, m.cell(std::size_t(m.face(f).cells[0])).subdomain);
    return v;
  };

  DiscreteScheme s;
  s.label = fluxes.label;
  s.mesh = mesh_ptr;
  s.source = &c;
  reduce_system(SparseMatrix::from_triplets(N, N, std::move(ta)), b, SparseMatrix::from_triplets(N, N, std::move(tn)),
                dofs, dofs.restrict_pinned(interp(c)), s);
  s.interpolate_full = interp;
  s.reconstruct = [mesh_ptr, nc](const VectorXd& full) { return piecewise_constant(*mesh_ptr, full.head(Eigen::Index(nc))); };
  s.gamma_theory = fluxes.gamma_theory;
  return s;
}

DiscreteScheme assemble_cellcentred_fv(std::shared_ptr<const Mesh> mesh_ptr, const FluxFamily& fluxes,
                                       const ManufacturedCase& c) {
  if (fluxes.kind != FluxKind::cell_centred)
    throw std::invalid_argument("assemble_cellcentred_fv: cell-centred fluxes required");
  const Mesh& mesh = *mesh_ptr;
  const std::size_t nc = mesh.num_cells(), N = nc + mesh.boundary_faces().size();
  std::vector<Triplet> ta, tn;
  VectorXd b = VectorXd::Zero(Eigen::Index(N));
  for (std::size_t f = 0; f < mesh.num_faces(); ++f) {
    const Face& F = mesh.face(f);
    const auto t1 = std::size_t(F.cells[0]);
    const Cell& T1 = mesh.cell(t1);
    double lam = c.field.info(T1.subdomain).lambda_min, d = T1.distances[T1.local_index(f)];
    std::size_t other;
    if (F.is_boundary()) {
      other = nc + fluxes.boundary_slot[f];
    } else {
      other = std::size_t(F.cells[1]);
      const Cell& T2 = mesh.cell(other);
      lam = std::min(lam, c.field.info(T2.subdomain).lambda_min);
      d += T2.distances[T2.local_index(f)];
      for (const auto& [j, a] : fluxes.face_rows[f]) ta.push_back({other, j, -a});
    }
    for (const auto& [j, a] : fluxes.face_rows[f]) ta.push_back({t1, j, a});
    const double w = lam * F.measure / d;
    tn.push_back({t1, t1, w});
    tn.push_back({other, other, w});
    tn.push_back({t1, other, -w});
    tn.push_back({other, t1, -w});
  }
  for (std::size_t t = 0; t < nc; ++t) b[Eigen::Index(t)] = cell_integral(mesh, t, c.f);
  std::vector<bool> pinned(N, false);
  for (std::size_t i = nc; i < N; ++i) pinned[i] = true;
  const DofMap dofs = DofMap::make(N, pinned);
  auto interp = [mesh_ptr](const ManufacturedCase& cs) { return extended_interpolant(*mesh_ptr, cs.u); };

  DiscreteScheme s;
  s.label = fluxes.label;
  s.mesh = mesh_ptr;
  s.source = &c;
  reduce_system(SparseMatrix::from_triplets(N, N, std::move(ta)), b, SparseMatrix::from_triplets(N, N, std::move(tn)),
                dofs, dofs.restrict_pinned(interp(c)), s);
  s.interpolate_full = interp;
  s.reconstruct = [mesh_ptr, nc](const VectorXd& full) { return piecewise_constant(*mesh_ptr, full.head(Eigen::Index(nc))); };
  s.gamma_theory = fluxes.gamma_theory;
  return s;
}

// ---------------------------------------------------------------------------
// Checks

FluxResiduals flux_consistency_residuals(const Mesh& mesh, const FluxFamily& fluxes, const ManufacturedCase& c,
                                         int quadrature_degree) {
  FluxResiduals out;
  double agg = 0.0;
  if (fluxes.kind == FluxKind::hybrid) {
    out.cell_face.resize(mesh.num_cells());
    for (std::size_t t = 0; t < mesh.num_cells(); ++t) {
      const Cell& T = mesh.cell(t);
      const VectorXd flux = fluxes.local[t] * local_interpolant(mesh, t, c.u);
      const double lam = c.field.info(T.subdomain).lambda_min;
      for (std::size_t i = 0; i < T.num_faces(); ++i) {
        const double r = exact_flux(mesh, t, i, c, quadrature_degree) + flux[Eigen::Index(i)];
        out.cell_face[t].push_back(r);
        out.max_abs = std::max(out.max_abs, std::abs(r));
        agg += T.distances[i] / (lam * mesh.face(T.faces[i]).measure) * r * r;
      }
    }
  } else {
    const VectorXd Iu = extended_interpolant(mesh, c.u);
    out.face.resize(mesh.num_faces());
    for (std::size_t f = 0; f < mesh.num_faces(); ++f) {
      const Face& F = mesh.face(f);
      const auto t1 = std::size_t(F.cells[0]);
      const Cell& T1 = mesh.cell(t1);
      const std::size_t li = T1.local_index(f);
      double lam = c.field.info(T1.subdomain).lambda_min, d = T1.distances[li];
      if (!F.is_boundary()) {
        const Cell& T2 = mesh.cell(std::size_t(F.cells[1]));
        lam = std::min(lam, c.field.info(T2.subdomain).lambda_min);
        d += T2.distances[T2.local_index(f)];
      }
      const double r = exact_flux(mesh, t1, li, c, quadrature_degree) + apply(fluxes.face_rows[f], Iu);
      out.face[f] = r;
      out.max_abs = std::max(out.max_abs, std::abs(r));
      agg += d / (lam * F.measure) * r * r;
    }
  }
  out.aggregate = std::sqrt(agg);
  return out;
}

FluxQuality flux_quality_checks(std::shared_ptr<const Mesh> mesh_ptr, const DiffusionField& field,
                                const FluxFamily& fluxes, std::uint64_t seed) {
  const Mesh& mesh = *mesh_ptr;
  FluxQuality q;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int probe = 0; probe < 20; ++probe) {
    const double a = u(rng);
    const Point g(u(rng), u(rng));
    const auto L = [a, g](const Point& x, int) { return a + g.dot(x); };
    if (fluxes.kind == FluxKind::hybrid) {
      for (std::size_t t = 0; t < mesh.num_cells(); ++t) {
        const Cell& T = mesh.cell(t);
        const TensorInfo& info = field.info(T.subdomain);
        const VectorXd flux = fluxes.local[t] * local_interpolant(mesh, t, L);
        for (std::size_t i = 0; i < T.num_faces(); ++i) {
          const double area = mesh.face(T.faces[i]).measure;
          const double exact = -area * (info.K * g).dot(T.normals[i]);
          q.linear_exactness = std::max(q.linear_exactness, std::abs(flux[Eigen::Index(i)] - exact) /
                                                                (area * info.lambda_max * g.norm()));
        }
      }
    } else {
      // Global affine probes: meaningful where K is constant across each stencil.
      const VectorXd IL = extended_interpolant(mesh, L);
      for (std::size_t f = 0; f < mesh.num_faces(); ++f) {
        const Face& F = mesh.face(f);
        const TensorInfo& info = field.info(mesh.cell(std::size_t(F.cells[0])).subdomain);
        const double exact = -F.measure * (info.K * g).dot(F.normal);
        q.linear_exactness = std::max(q.linear_exactness, std::abs(apply(fluxes.face_rows[f], IL) - exact) /
                                                              (F.measure * info.lambda_max * g.norm()));
      }
    }
  }

  if (fluxes.kind == FluxKind::hybrid) {
    double cb = 0.0;
    for (std::size_t t = 0; t < mesh.num_cells(); ++t) {
      const Cell& T = mesh.cell(t);
      const auto n = Eigen::Index(T.num_faces());
      const double lmax = field.info(T.subdomain).lambda_max;
      // Fluxes act on the differences v_T - v_F through the columns of the face unknowns.
      const MatrixXd P = -fluxes.local[t].rightCols(n);
      VectorXd wn(n), wd(n);
      for (Eigen::Index i = 0; i < n; ++i) {
        const double area = mesh.face(T.faces[std::size_t(i)]).measure, d = T.distances[std::size_t(i)];
        wn[i] = d / area;
        wd[i] = lmax * lmax * area / d;
      }
      const VectorXd s = wd.cwiseSqrt().cwiseInverse();
      const MatrixXd S = s.asDiagonal() * (P.transpose() * wn.asDiagonal() * P) * s.asDiagonal();
      const Eigen::SelfAdjointEigenSolver<MatrixXd> eig(0.5 * (S + S.transpose()), Eigen::EigenvaluesOnly);
      cb = std::max(cb, eig.eigenvalues().maxCoeff());
    }
    q.bound_constant = cb;
  }

  const ManufacturedCase zero = zero_case(field);
  const DiscreteScheme s = fluxes.kind == FluxKind::hybrid ? assemble_hybrid_fv(mesh_ptr, fluxes, zero)
                                                            : assemble_cellcentred_fv(mesh_ptr, fluxes, zero);
  q.gamma = stability_constant(s, seed).gamma;
  return q;
}

BalanceCheck hybrid_balance(const DiscreteScheme& s, const FluxFamily& fluxes, const ManufacturedCase& c,
                            const VectorXd& u_h) {
  const Mesh& mesh = *s.mesh;
  const std::size_t nc = mesh.num_cells();
  const VectorXd full = s.expand(u_h, true);
  std::vector<double> face_sum(mesh.num_faces(), 0.0), face_max(mesh.num_faces(), 0.0);
  BalanceCheck out;
  for (std::size_t t = 0; t < nc; ++t) {
    const Cell& T = mesh.cell(t);
    VectorXd v(Eigen::Index(T.num_faces() + 1));
    v[0] = full[Eigen::Index(t)];
    for (std::size_t i = 0; i < T.num_faces(); ++i) v[Eigen::Index(i + 1)] = full[Eigen::Index(nc + T.faces[i])];
    const VectorXd flux = fluxes.local[t] * v;
    const double source = cell_integral(mesh, t, c.f);
    const double scale = std::max({std::abs(source), flux.cwiseAbs().sum(), 1e-300});
    out.cell = std::max(out.cell, std::abs(flux.sum() - source) / scale);
    for (std::size_t i = 0; i < T.num_faces(); ++i) {
      face_sum[T.faces[i]] += flux[Eigen::Index(i)];
      face_max[T.faces[i]] = std::max(face_max[T.faces[i]], std::abs(flux[Eigen::Index(i)]));
    }
  }
  const double global = *std::max_element(face_max.begin(), face_max.end());
  for (std::size_t f : mesh.internal_faces())
    out.face = std::max(out.face, std::abs(face_sum[f]) / std::max(global, 1e-300));
  return out;
}

double cellcentred_conservativity_defect(const Mesh& mesh, const FluxFamily& fluxes) {
  double worst = 0.0, scale = 0.0;
  for (const auto& row : fluxes.face_rows)
    for (const auto& e : row) scale = std::max(scale, std::abs(e.second));
  for (std::size_t f : mesh.internal_faces()) {
    const Face& F = mesh.face(f);
    std::map<std::size_t, double> sum;
    for (int side = 0; side < 2; ++side) {
      const auto t = std::size_t(F.cells[std::size_t(side)]);
      for (const auto& [j, a] : fluxes.cell_face_row(mesh, t, mesh.cell(t).local_index(f))) sum[j] += a;
    }
    for (const auto& e : sum) worst = std::max(worst, std::abs(e.second));
  }
  return scale > 0.0 ? worst / scale : 0.0;
}

}  // namespace strang
