// Compressed sparse rows, conjugate gradients, small dense solves, dual norms
// and generalized eigenvalue estimates.

#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace strang {

using Eigen::MatrixXd;
using Eigen::VectorXd;

class LinalgError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Thrown when CG hits its iteration cap or stagnates; carries the last relative residual.
class NotConvergedError : public LinalgError {
 public:
  NotConvergedError(const std::string& what, double residual) : LinalgError(what), residual(residual) {}
  double residual;
};

/// Execution policy for the data-parallel kernels. Both paths produce the same
/// result; `parallel` uses OpenMP when available.
enum class Exec { serial, parallel };

struct Triplet {
  std::size_t row, col;
  double value;
};

class SparseMatrix {
 public:
  SparseMatrix() = default;
  /// Sorts by (row, col) and sums duplicates in input order.
  static SparseMatrix from_triplets(std::size_t rows, std::size_t cols, std::vector<Triplet> entries);
  static SparseMatrix from_eigen(const Eigen::SparseMatrix<double, Eigen::RowMajor>& m);
  static SparseMatrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t nnz() const { return values_.size(); }
  const std::vector<std::size_t>& offsets() const { return offsets_; }
  const std::vector<std::size_t>& columns() const { return columns_; }
  const std::vector<double>& values() const { return values_; }

  double coeff(std::size_t i, std::size_t j) const;
  VectorXd diagonal() const;
  double max_abs() const;
  /// max |A - A^T| / max |A| (0 for the zero matrix).
  double asymmetry() const;
  SparseMatrix transpose() const;
  SparseMatrix scaled(double s) const;
  /// Principal submatrix on the given (sorted) index set.
  SparseMatrix submatrix(std::span<const std::size_t> rows, std::span<const std::size_t> cols) const;

  VectorXd operator*(const VectorXd& x) const;
  Eigen::SparseMatrix<double> to_eigen() const;
  MatrixXd to_dense() const;

 private:
  std::size_t rows_ = 0, cols_ = 0;
  std::vector<std::size_t> offsets_{0};
  std::vector<std::size_t> columns_;
  std::vector<double> values_;
};

namespace kernels {

void spmv(const SparseMatrix& A, const VectorXd& x, VectorXd& y, Exec exec = Exec::parallel);
/// Blocked summation with a fixed block layout so the parallel result does not
/// depend on the thread count.
double dot(const VectorXd& a, const VectorXd& b, Exec exec = Exec::parallel);
/// y += a x
void axpy(double a, const VectorXd& x, VectorXd& y, Exec exec = Exec::parallel);
/// y = x + b y
void xpby(const VectorXd& x, double b, VectorXd& y, Exec exec = Exec::parallel);

}  // namespace kernels

struct CgStats {
  std::size_t iterations = 0;
  double residual = 0.0;  // ||b - A x|| / ||b||
  std::vector<double> energy_errors;  // optional trace, see CgOptions::trace_against
};

struct CgOptions {
  double rel_tol = 1e-10;
  Exec exec = Exec::parallel;
  const VectorXd* trace_against = nullptr;  // exact solution for monotonicity tests
};

/// Jacobi-preconditioned CG, iteration cap 20 n. Stops early when restarting
/// from the true residual no longer halves it. Throws NotConvergedError and
/// LinalgError("not SPD") when p^T A p <= 0 is encountered.
VectorXd solve_spd(const SparseMatrix& A, const VectorXd& b, const CgOptions& opts = {}, CgStats* stats = nullptr);
inline VectorXd solve_spd(const SparseMatrix& A, const VectorXd& b, double rel_tol) {
  return solve_spd(A, b, CgOptions{rel_tol});
}

/// Sparse LU for the nonsymmetric global systems.
VectorXd solve_general(const SparseMatrix& A, const VectorXd& b);

struct DenseSolution {
  VectorXd x;
  double condition = 0.0;  // 2-norm condition number
};

/// Partial-pivoted LU for small square systems (n <= 64). Throws
/// LinalgError("singular") when the matrix is singular to working precision.
DenseSolution solve_dense(const MatrixXd& A, const VectorXd& b);
double condition_number(const MatrixXd& A);

/// sqrt(e^T N^{-1} e) with N SPD, by sparse LDL^T and one refinement step.
double dual_norm(const VectorXd& e, const SparseMatrix& N);

struct EigenEstimate {
  double value = 0.0;
  VectorXd vector;
  std::size_t iterations = 0;
};

/// Smallest eigenvalue of the symmetric pencil (A, N). For positive definite A
/// this is Lanczos on A^{-1} N with full reorthogonalisation (the estimate is
/// an upper bound converging from above); for indefinite
/// A a negative estimate is returned (seeded with the LDL^T witness).
EigenEstimate min_generalized_eig(const SparseMatrix& A, const SparseMatrix& N, double tol = 1e-6,
                                  std::uint64_t seed = 0);

/// Lower estimate of sup a(w, v) / (|w|_X |v|_Y) with a(w, v) = v^T A w:
/// max over `samples` random pairs and a power iteration.
double form_norm_estimate(const SparseMatrix& A, const SparseMatrix& NX, const SparseMatrix& NY,
                          std::uint64_t seed = 0, int samples = 200);

}  // namespace strang
