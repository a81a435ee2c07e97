#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace emi {

using Vector = Eigen::VectorXd;
using DenseMatrix = Eigen::MatrixXd;
/// Symmetric matrices are stored with both triangles.
using SparseMatrix = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

/// out = Op(in). `out` is resized by the callee.
using LinearOperator = std::function<void(const Vector& in, Vector& out)>;

class NotPositiveDefinite : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class SolverBreakdown : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Sparse Cholesky factor (AMD fill-reducing ordering) of an SPD matrix.
/// Immutable after construction; solve() may be called concurrently.
class Factorization {
public:
  Factorization() = default;
  explicit Factorization(const SparseMatrix& a);

  Eigen::Index size() const { return n_; }
  Vector solve(const Vector& b) const;
  void solve_in_place(Vector& b) const;

private:
  using Llt = Eigen::SimplicialLLT<SparseMatrix, Eigen::Lower, Eigen::AMDOrdering<int>>;
  std::shared_ptr<const Llt> llt_;
  Eigen::Index n_ = 0;
};

/// max |A - A^T| over stored entries.
double asymmetry(const SparseMatrix& a);

/// Principal submatrix A(idx, idx); idx must be ascending.
SparseMatrix principal_submatrix(const SparseMatrix& a, const std::vector<int>& idx);

/// Writes A in Matrix Market coordinate format (symmetric, lower triangle, 1-based).
void write_matrix_market(const SparseMatrix& a, const std::string& path);

struct PcgOptions {
  double tol = 1e-6;
  int max_iterations = 10000;
  /// Iterate in the orthogonal complement of this vector (singular consistent systems).
  const Vector* deflate = nullptr;
  bool keep_history = true;
};

struct SolveStats {
  int iterations = 0;
  bool converged = false;
  std::vector<double> residual_history;  ///< ||z_k|| / ||z_0||, k = 0..iterations
  std::vector<double> alpha;             ///< CG step lengths
  std::vector<double> beta;              ///< CG direction-update coefficients
  double k2 = 1.0;
};

/// Preconditioned CG from the initial guess in `x`. Stops when
/// ||z_k||_2 <= tol * ||z_0||_2 with z = precond(r). Returns stats with the
/// Lanczos coefficients and k2 filled in. Throws SolverBreakdown if p^T A p <= 0.
SolveStats pcg(const LinearOperator& a, const Vector& b, const LinearOperator& precond, Vector& x,
               const PcgOptions& options = {});

/// Extreme-eigenvalue ratio of the Lanczos tridiagonal harvested by pcg().
/// Returns 1 for fewer than two iterations.
double lanczos_condition(const SolveStats& stats);
std::pair<double, double> lanczos_extremes(const SolveStats& stats);

/// Extreme eigenvalues of A, or of the pencil (A, B) when B is given.
std::pair<double, double> dense_spectrum(const DenseMatrix& a, const DenseMatrix* b = nullptr);

LinearOperator matrix_operator(const SparseMatrix& a);
LinearOperator identity_operator();

/// Dense n x n matrix of a linear operator (test and oracle use).
DenseMatrix to_dense(const LinearOperator& op, Eigen::Index n);

}  // namespace emi
