#include "strang/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

namespace strang {

// ---------------------------------------------------------------------------
// SparseMatrix

SparseMatrix SparseMatrix::from_triplets(std::size_t rows, std::size_t cols, std::vector<Triplet> entries) {
  for (const auto& t : entries)
    if (t.row >= rows || t.col >= cols) throw LinalgError("from_triplets: index out of range");
  std::stable_sort(entries.begin(), entries.end(),
                   [](const Triplet& a, const Triplet& b) { return a.row != b.row ? a.row < b.row : a.col < b.col; });
  SparseMatrix m;
  m.rows_ = rows;
  m.cols_ = cols;
  m.offsets_.assign(rows + 1, 0);
  for (std::size_t i = 0; i < entries.size();) {
    const std::size_t r = entries[i].row, c = entries[i].col;
    double v = 0.0;
    for (; i < entries.size() && entries[i].row == r && entries[i].col == c; ++i) v += entries[i].value;
    m.columns_.push_back(c);
    m.values_.push_back(v);
    ++m.offsets_[r + 1];
  }
  for (std::size_t r = 0; r < rows; ++r) m.offsets_[r + 1] += m.offsets_[r];
  return m;
}

SparseMatrix SparseMatrix::from_eigen(const Eigen::SparseMatrix<double, Eigen::RowMajor>& e) {
  std::vector<Triplet> t;
  for (Eigen::Index r = 0; r < e.outerSize(); ++r)
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(e, r); it; ++it)
      t.push_back({static_cast<std::size_t>(it.row()), static_cast<std::size_t>(it.col()), it.value()});
  return from_triplets(static_cast<std::size_t>(e.rows()), static_cast<std::size_t>(e.cols()), std::move(t));
}

SparseMatrix SparseMatrix::identity(std::size_t n) {
  std::vector<Triplet> t;
  for (std::size_t i = 0; i < n; ++i) t.push_back({i, i, 1.0});
  return from_triplets(n, n, std::move(t));
}

double SparseMatrix::coeff(std::size_t i, std::size_t j) const {
  const auto first = columns_.begin() + static_cast<std::ptrdiff_t>(offsets_[i]);
  const auto last = columns_.begin() + static_cast<std::ptrdiff_t>(offsets_[i + 1]);
  const auto it = std::lower_bound(first, last, j);
  return it != last && *it == j ? values_[static_cast<std::size_t>(it - columns_.begin())] : 0.0;
}

VectorXd SparseMatrix::diagonal() const {
  VectorXd d(static_cast<Eigen::Index>(std::min(rows_, cols_)));
  for (Eigen::Index i = 0; i < d.size(); ++i) d[i] = coeff(static_cast<std::size_t>(i), static_cast<std::size_t>(i));
  return d;
}

double SparseMatrix::max_abs() const {
  double m = 0.0;
  for (double v : values_) m = std::max(m, std::abs(v));
  return m;
}

double SparseMatrix::asymmetry() const {
  const double scale = max_abs();
  if (scale == 0.0) return 0.0;
  if (rows_ != cols_) return std::numeric_limits<double>::infinity();
  double d = 0.0;
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t k = offsets_[r]; k < offsets_[r + 1]; ++k)
      d = std::max(d, std::abs(values_[k] - coeff(columns_[k], r)));
  return d / scale;
}

SparseMatrix SparseMatrix::transpose() const {
  std::vector<Triplet> t;
  t.reserve(nnz());
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t k = offsets_[r]; k < offsets_[r + 1]; ++k) t.push_back({columns_[k], r, values_[k]});
  return from_triplets(cols_, rows_, std::move(t));
}

SparseMatrix SparseMatrix::scaled(double s) const {
  SparseMatrix m = *this;
  for (double& v : m.values_) v *= s;
  return m;
}

SparseMatrix SparseMatrix::submatrix(std::span<const std::size_t> rows, std::span<const std::size_t> cols) const {
  std::vector<long> col_map(cols_, -1);
  for (std::size_t j = 0; j < cols.size(); ++j) col_map[cols[j]] = static_cast<long>(j);
  std::vector<Triplet> t;
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t k = offsets_[rows[i]]; k < offsets_[rows[i] + 1]; ++k)
      if (col_map[columns_[k]] >= 0) t.push_back({i, static_cast<std::size_t>(col_map[columns_[k]]), values_[k]});
  return from_triplets(rows.size(), cols.size(), std::move(t));
}

VectorXd SparseMatrix::operator*(const VectorXd& x) const {
  VectorXd y(static_cast<Eigen::Index>(rows_));
  kernels::spmv(*this, x, y);
  return y;
}

Eigen::SparseMatrix<double> SparseMatrix::to_eigen() const {
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(nnz());
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t k = offsets_[r]; k < offsets_[r + 1]; ++k)
      t.emplace_back(static_cast<int>(r), static_cast<int>(columns_[k]), values_[k]);
  Eigen::SparseMatrix<double> m(static_cast<Eigen::Index>(rows_), static_cast<Eigen::Index>(cols_));
  m.setFromTriplets(t.begin(), t.end());
  return m;
}

MatrixXd SparseMatrix::to_dense() const {
  MatrixXd m = MatrixXd::Zero(static_cast<Eigen::Index>(rows_), static_cast<Eigen::Index>(cols_));
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t k = offsets_[r]; k < offsets_[r + 1]; ++k)
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(columns_[k])) = values_[k];
  return m;
}

// ---------------------------------------------------------------------------
// Kernels

namespace kernels {

namespace {
constexpr Eigen::Index kParallelThreshold = 4096;
constexpr Eigen::Index kDotBlock = 1024;
}  // namespace

void spmv(const SparseMatrix& A, const VectorXd& x, VectorXd& y, Exec exec) {
  if (static_cast<std::size_t>(x.size()) != A.cols()) throw LinalgError("spmv: dimension mismatch");
  y.resize(static_cast<Eigen::Index>(A.rows()));
  const auto& off = A.offsets();
  const auto& col = A.columns();
  const auto& val = A.values();
  const auto n = static_cast<Eigen::Index>(A.rows());
  if (exec == Exec::serial) {
    for (Eigen::Index r = 0; r < n; ++r) {
      double s = 0.0;
      for (std::size_t k = off[static_cast<std::size_t>(r)]; k < off[static_cast<std::size_t>(r) + 1]; ++k)
        s += val[k] * x[static_cast<Eigen::Index>(col[k])];
      y[r] = s;
    }
    return;
  }
#pragma omp parallel for schedule(static) if (n > kParallelThreshold)
  for (Eigen::Index r = 0; r < n; ++r) {
    double s = 0.0;
    for (std::size_t k = off[static_cast<std::size_t>(r)]; k < off[static_cast<std::size_t>(r) + 1]; ++k)
      s += val[k] * x[static_cast<Eigen::Index>(col[k])];
    y[r] = s;
  }
}

double dot(const VectorXd& a, const VectorXd& b, Exec exec) {
  if (a.size() != b.size()) throw LinalgError("dot: dimension mismatch");
  const Eigen::Index n = a.size();
  if (exec == Exec::serial) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
  }
  const Eigen::Index blocks = (n + kDotBlock - 1) / kDotBlock;
  std::vector<double> partial(static_cast<std::size_t>(blocks), 0.0);
#pragma omp parallel for schedule(static) if (n > kParallelThreshold)
  for (Eigen::Index blk = 0; blk < blocks; ++blk) {
    double s = 0.0;
    const Eigen::Index end = std::min(n, (blk + 1) * kDotBlock);
    for (Eigen::Index i = blk * kDotBlock; i < end; ++i) s += a[i] * b[i];
    partial[static_cast<std::size_t>(blk)] = s;
  }
  double s = 0.0;
  for (double p : partial) s += p;
  return s;
}

void axpy(double alpha, const VectorXd& x, VectorXd& y, Exec exec) {
  if (x.size() != y.size()) throw LinalgError("axpy: dimension mismatch");
  const Eigen::Index n = x.size();
  if (exec == Exec::serial) {
    for (Eigen::Index i = 0; i < n; ++i) y[i] += alpha * x[i];
    return;
  }
#pragma omp parallel for schedule(static) if (n > kParallelThreshold)
  for (Eigen::Index i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void xpby(const VectorXd& x, double beta, VectorXd& y, Exec exec) {
  if (x.size() != y.size()) throw LinalgError("xpby: dimension mismatch");
  const Eigen::Index n = x.size();
  if (exec == Exec::serial) {
    for (Eigen::Index i = 0; i < n; ++i) y[i] = x[i] + beta * y[i];
    return;
  }
#pragma omp parallel for schedule(static) if (n > kParallelThreshold)
  for (Eigen::Index i = 0; i < n; ++i) y[i] = x[i] + beta * y[i];
}

}  // namespace kernels

// ---------------------------------------------------------------------------
// Solvers

VectorXd solve_spd(const SparseMatrix& A, const VectorXd& b, const CgOptions& opts, CgStats* stats) {
  using namespace kernels;
  const Exec ex = opts.exec;
  if (A.rows() != A.cols() || static_cast<std::size_t>(b.size()) != A.rows())
    throw LinalgError("solve_spd: dimension mismatch");
  const Eigen::Index n = b.size();
  VectorXd x = VectorXd::Zero(n);
  const double bnorm = std::sqrt(dot(b, b, ex));
  if (stats) *stats = {};
  if (bnorm == 0.0) return x;

  const VectorXd d = A.diagonal();
  VectorXd dinv(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(d[i] > 0.0)) throw LinalgError("not SPD: nonpositive diagonal entry");
    dinv[i] = 1.0 / d[i];
  }
  auto energy_error = [&](const VectorXd& xk) {
    const VectorXd e = xk - *opts.trace_against;
    return std::sqrt(std::max(0.0, dot(e, A * e, ex)));
  };

  VectorXd r = b, z = dinv.cwiseProduct(r), p = z, q(n);
  double rz = dot(r, z, ex);
  const std::size_t cap = 20 * static_cast<std::size_t>(n);
  std::size_t it = 0;
  double rel = 1.0, last_restart = std::numeric_limits<double>::infinity();
  if (opts.trace_against && stats) stats->energy_errors.push_back(energy_error(x));
  while (it < cap) {
    spmv(A, p, q, ex);
    const double pq = dot(p, q, ex);
    if (!(pq > 0.0)) throw LinalgError("not SPD: nonpositive curvature p^T A p encountered");
    const double alpha = rz / pq;
    axpy(alpha, p, x, ex);
    axpy(-alpha, q, r, ex);
    ++it;
    if (opts.trace_against && stats) stats->energy_errors.push_back(energy_error(x));
    rel = std::sqrt(dot(r, r, ex)) / bnorm;
    if (rel <= opts.rel_tol) {
      // Confirm with the true residual; restart from it if the recursion drifted.
      spmv(A, x, q, ex);
      r = b - q;
      rel = std::sqrt(dot(r, r, ex)) / bnorm;
      if (rel <= opts.rel_tol) break;
      // The true residual sits at the round-off floor: further restarts cannot help.
      if (rel > 0.5 * last_restart) break;
      last_restart = rel;
      z = dinv.cwiseProduct(r);
      p = z;
      rz = dot(r, z, ex);
      continue;
    }
    z = dinv.cwiseProduct(r);
    const double rz_new = dot(r, z, ex);
    xpby(z, rz_new / rz, p, ex);
    rz = rz_new;
  }
  if (stats) {
    stats->iterations = it;
    stats->residual = rel;
  }
  if (rel > opts.rel_tol)
    throw NotConvergedError("solve_spd: no convergence after " + std::to_string(it) +
                                " iterations, relative residual " + std::to_string(rel),
                            rel);
  return x;
}

VectorXd solve_general(const SparseMatrix& A, const VectorXd& b) {
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  Eigen::SparseMatrix<double> m = A.to_eigen();
  m.makeCompressed();
  lu.compute(m);
  if (lu.info() != Eigen::Success) throw LinalgError("solve_general: singular matrix");
  VectorXd x = lu.solve(b);
  if (lu.info() != Eigen::Success) throw LinalgError("solve_general: solve failed");
  return x;
}

double condition_number(const MatrixXd& A) {
  if (A.size() == 0) return 1.0;
  const Eigen::JacobiSVD<MatrixXd> svd(A);
  const auto& s = svd.singularValues();
  const double smin = s[s.size() - 1];
  return smin > 0.0 ? s[0] / smin : std::numeric_limits<double>::infinity();
}

DenseSolution solve_dense(const MatrixXd& A, const VectorXd& b) {
  if (A.rows() != A.cols() || A.rows() != b.size()) throw LinalgError("solve_dense: dimension mismatch");
  if (A.rows() > 64) throw LinalgError("solve_dense: dimension exceeds 64");
  DenseSolution out;
  out.condition = condition_number(A);
  if (!(out.condition < 1e14)) throw LinalgError("singular");
  out.x = A.partialPivLu().solve(b);
  return out;
}

double dual_norm(const VectorXd& e, const SparseMatrix& N) {
  if (static_cast<std::size_t>(e.size()) != N.rows()) throw LinalgError("dual_norm: dimension mismatch");
  if (e.isZero(0.0)) return 0.0;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(N.to_eigen());
  if (ldlt.info() != Eigen::Success) throw LinalgError("dual_norm: factorization failed");
  VectorXd x = ldlt.solve(e);
  x += ldlt.solve(VectorXd(e - N * x));
  return std::sqrt(std::max(0.0, e.dot(x)));
}

// ---------------------------------------------------------------------------
// Eigenvalue estimates

namespace {

MatrixXd random_block(Eigen::Index n, Eigen::Index p, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  MatrixXd X(n, p);
  for (Eigen::Index j = 0; j < p; ++j)
    for (Eigen::Index i = 0; i < n; ++i) X(i, j) = dist(rng);
  return X;
}

struct Ritz {
  Eigen::VectorXd values;  // ascending
  MatrixXd vectors;        // N-orthonormal columns
};

// Rayleigh-Ritz for (A, N) on span(Y), dropping numerically dependent directions.
Ritz rayleigh_ritz(const Eigen::SparseMatrix<double>& A, const Eigen::SparseMatrix<double>& N, const MatrixXd& Y) {
  const MatrixXd NY = N * Y;
  const MatrixXd G = Y.transpose() * NY;
  const Eigen::SelfAdjointEigenSolver<MatrixXd> ge(0.5 * (G + G.transpose()));
  const double gmax = ge.eigenvalues().maxCoeff();
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < G.rows(); ++i)
    if (ge.eigenvalues()[i] > 1e-13 * gmax) keep.push_back(i);
  MatrixXd Q(Y.rows(), static_cast<Eigen::Index>(keep.size()));
  for (std::size_t j = 0; j < keep.size(); ++j)
    Q.col(static_cast<Eigen::Index>(j)) = Y * ge.eigenvectors().col(keep[j]) / std::sqrt(ge.eigenvalues()[keep[j]]);
  const MatrixXd H = Q.transpose() * (A * Q);
  const Eigen::SelfAdjointEigenSolver<MatrixXd> he(0.5 * (H + H.transpose()));
  return {he.eigenvalues(), Q * he.eigenvectors()};
}

struct LanczosResult {
  double value = 0.0;
  VectorXd vector;
  std::size_t iterations = 0;
};

// Largest eigenvalue of an operator self-adjoint and positive semi-definite in
// the M inner product: Lanczos with full reorthogonalisation. The Ritz value
// is a lower bound at every step.
template <class Op>
LanczosResult lanczos_max(const Op& op, const Eigen::SparseMatrix<double>& M, VectorXd q, double tol) {
  const Eigen::Index n = q.size(), m = std::min<Eigen::Index>(n, 300);
  MatrixXd Q(n, m), MQ(n, m);
  q /= std::sqrt(q.dot(M * q));
  std::vector<double> alpha, beta;
  VectorXd s_last;
  LanczosResult out;
  double prev = std::numeric_limits<double>::quiet_NaN();
  for (Eigen::Index j = 0; j < m; ++j) {
    Q.col(j) = q;
    MQ.col(j) = M * q;
    VectorXd w = op(q);
    alpha.push_back(MQ.col(j).dot(w));
    for (int pass = 0; pass < 2; ++pass) w -= Q.leftCols(j + 1) * (MQ.leftCols(j + 1).transpose() * w);
    const double b = std::sqrt(std::max(0.0, w.dot(M * w)));
    MatrixXd T = MatrixXd::Zero(j + 1, j + 1);
    for (Eigen::Index i = 0; i <= j; ++i) {
      T(i, i) = alpha[std::size_t(i)];
      if (i > 0) T(i, i - 1) = T(i - 1, i) = beta[std::size_t(i - 1)];
    }
    const Eigen::SelfAdjointEigenSolver<MatrixXd> te(T);
    out.value = te.eigenvalues()[j];
    s_last = te.eigenvectors().col(j);
    out.iterations = std::size_t(j + 1);
    const double theta = std::abs(out.value);
    const bool settled = j > 2 && std::abs(out.value - prev) <= tol * 1e-2 * theta;
    if (b * std::abs(s_last[j]) <= tol * theta || settled || !(b > 1e-14 * theta) || j + 1 == m) break;
    prev = out.value;
    beta.push_back(b);
    q = w / b;
  }
  out.vector = Q.leftCols(s_last.size()) * s_last;
  return out;
}

}  // namespace

EigenEstimate min_generalized_eig(const SparseMatrix& A, const SparseMatrix& N, double tol, std::uint64_t seed) {
  if (A.rows() != A.cols() || N.rows() != A.rows() || N.cols() != A.cols())
    throw LinalgError("min_generalized_eig: dimension mismatch");
  const auto n = static_cast<Eigen::Index>(A.rows());
  if (n == 0) throw LinalgError("min_generalized_eig: empty matrix");
  Eigen::SparseMatrix<double> As = A.to_eigen(), Ns = N.to_eigen();
  As = 0.5 * (As + Eigen::SparseMatrix<double>(As.transpose()));
  const Eigen::Index p = std::min<Eigen::Index>(n, 4);
  MatrixXd X = random_block(n, p, seed);

  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(As);
  bool definite = ldlt.info() == Eigen::Success;
  Eigen::Index worst = -1;
  if (definite) {
    const VectorXd D = ldlt.vectorD();
    worst = 0;
    for (Eigen::Index i = 0; i < D.size(); ++i)
      if (D[i] < D[worst]) worst = i;
    definite = D[worst] > 0.0;
  }

  EigenEstimate out;
  double prev = std::numeric_limits<double>::quiet_NaN();
  if (definite) {
    // Largest eigenvalue of A^{-1} N is 1 / lambda_min. Clustered bottom
    // spectra (many nearly equal local modes) do not slow it down.
    const LanczosResult lr = lanczos_max(
        [&](const VectorXd& x) { return VectorXd(ldlt.solve(VectorXd(Ns * x))); }, Ns,
        random_block(n, 1, seed).col(0), tol);
    out.value = 1.0 / lr.value;
    out.vector = lr.vector;
    out.iterations = lr.iterations;
    return out;
  }

  // Indefinite (or factorization failed): shifted block power iteration on
  // sigma I - N^{-1} A, started from an LDL^T witness of negative curvature.
  Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> nllt(Ns);
  if (nllt.info() != Eigen::Success) throw LinalgError("min_generalized_eig: norm matrix is not positive definite");
  if (worst >= 0) {
    VectorXd unit = VectorXd::Zero(n);
    unit[worst] = 1.0;
    const VectorXd y = ldlt.matrixU().solve(unit);
    X.col(0) = ldlt.permutationPinv() * y;
  }
  double sigma = 0.0;
  {
    MatrixXd Z = random_block(n, p, seed + 1);
    for (int it = 0; it < 30; ++it) {
      Z = nllt.solve(As * Z);
      for (Eigen::Index j = 0; j < Z.cols(); ++j) Z.col(j).normalize();
    }
    const Ritz rr = rayleigh_ritz(As, Ns, Z);
    sigma = 1.1 * rr.values.cwiseAbs().maxCoeff() + 1e-300;
  }
  out.value = std::numeric_limits<double>::infinity();
  for (std::size_t it = 1; it <= 2000; ++it) {
    const Ritz rr = rayleigh_ritz(As, Ns, X);
    if (rr.values[0] < out.value) {
      out.value = rr.values[0];
      out.vector = rr.vectors.col(0);
    }
    out.iterations = it;
    if (it > 2 && std::abs(rr.values[0] - prev) <= tol * 1e-2 * std::abs(rr.values[0])) break;
    prev = rr.values[0];
    X = sigma * rr.vectors - MatrixXd(nllt.solve(As * rr.vectors));
  }
  return out;
}

double form_norm_estimate(const SparseMatrix& A, const SparseMatrix& NX, const SparseMatrix& NY, std::uint64_t seed,
                          int samples) {
  const auto m = static_cast<Eigen::Index>(A.rows()), n = static_cast<Eigen::Index>(A.cols());
  if (m == 0 || n == 0) return 0.0;
  const Eigen::SparseMatrix<double> As = A.to_eigen(), Xs = NX.to_eigen(), Ys = NY.to_eigen();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  double best = 0.0;
  for (int s = 0; s < samples; ++s) {
    VectorXd w(n), v(m);
    for (Eigen::Index i = 0; i < n; ++i) w[i] = dist(rng);
    for (Eigen::Index i = 0; i < m; ++i) v[i] = dist(rng);
    const double num = std::abs(v.dot(As * w));
    const double den = std::sqrt(w.dot(Xs * w) * v.dot(Ys * v));
    if (den > 0.0) best = std::max(best, num / den);
  }
  // Lanczos on N_X^{-1} A^T N_Y^{-1} A in the N_X inner product; its Ritz
  // values are lower bounds of ||a||^2.
  const bool same = NX.offsets() == NY.offsets() && NX.columns() == NY.columns() && NX.values() == NY.values();
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> fx(Xs), fy;
  if (!same) fy.compute(Ys);
  const auto& fyr = same ? fx : fy;
  if (fx.info() != Eigen::Success || fyr.info() != Eigen::Success) return best;
  VectorXd w(n);
  for (Eigen::Index i = 0; i < n; ++i) w[i] = dist(rng);
  const Eigen::SparseMatrix<double> At = As.transpose();
  const auto op = [&](const VectorXd& x) { return VectorXd(fx.solve(VectorXd(At * fyr.solve(VectorXd(As * x))))); };
  best = std::max(best, std::sqrt(std::max(0.0, lanczos_max(op, Xs, w, 1e-4).value)));
  return best;
}

}  // namespace strang
