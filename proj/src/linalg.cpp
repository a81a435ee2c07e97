#include "emigdsw/linalg.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>

namespace emi {

Factorization::Factorization(const SparseMatrix& a) : n_(a.rows())
{
  if (a.rows() != a.cols()) throw std::invalid_argument("factorize: matrix is not square");
  auto llt = std::make_shared<Llt>();
  llt->compute(a);
  if (llt->info() != Eigen::Success)
    throw NotPositiveDefinite("factorize: non-positive pivot in a " + std::to_string(a.rows()) + "x" +
                              std::to_string(a.cols()) + " matrix");
  llt_ = std::move(llt);
}

Vector Factorization::solve(const Vector& b) const
{
  Vector x = b;
  solve_in_place(x);
  return x;
}

void Factorization::solve_in_place(Vector& b) const
{
  if (n_ == 0) return;
  b = llt_->solve(b);
}

double asymmetry(const SparseMatrix& a)
{
  const SparseMatrix t = a.transpose();
  const SparseMatrix d = a - t;
  double m = 0.0;
  for (int k = 0; k < d.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(d, k); it; ++it) m = std::max(m, std::abs(it.value()));
  return m;
}

SparseMatrix principal_submatrix(const SparseMatrix& a, const std::vector<int>& idx)
{
  std::vector<int> map(static_cast<std::size_t>(a.rows()), -1);
  for (std::size_t i = 0; i < idx.size(); ++i) map[static_cast<std::size_t>(idx[i])] = static_cast<int>(i);
  std::vector<Triplet> trips;
  for (std::size_t j = 0; j < idx.size(); ++j)
    for (SparseMatrix::InnerIterator it(a, idx[j]); it; ++it) {
      const int i = map[static_cast<std::size_t>(it.row())];
      if (i >= 0) trips.emplace_back(i, static_cast<int>(j), it.value());
    }
  SparseMatrix s(static_cast<Eigen::Index>(idx.size()), static_cast<Eigen::Index>(idx.size()));
  s.setFromTriplets(trips.begin(), trips.end());
  return s;
}

void write_matrix_market(const SparseMatrix& a, const std::string& path)
{
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  std::size_t nnz = 0;
  for (int k = 0; k < a.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(a, k); it; ++it)
      if (it.row() >= it.col()) ++nnz;
  out << "%%MatrixMarket matrix coordinate real symmetric\n";
  out << a.rows() << ' ' << a.cols() << ' ' << nnz << '\n';
  out << std::setprecision(17);
  for (int k = 0; k < a.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(a, k); it; ++it)
      if (it.row() >= it.col()) out << it.row() + 1 << ' ' << it.col() + 1 << ' ' << it.value() << '\n';
}

namespace {

void project_out(Vector& v, const Vector* q)
{
  if (q != nullptr) v -= (q->dot(v) / q->squaredNorm()) * *q;
}

}  // namespace

SolveStats pcg(const LinearOperator& a, const Vector& b, const LinearOperator& precond, Vector& x,
               const PcgOptions& options)
{
  const Eigen::Index n = b.size();
  if (x.size() != n) x = Vector::Zero(n);
  SolveStats stats;

  Vector r(n), z(n), p(n), ap(n);
  project_out(x, options.deflate);
  a(x, ap);
  r = b - ap;
  project_out(r, options.deflate);

  // A residual at rounding level of the right-hand side means x already solves the system.
  const double bnorm = b.norm();
  if (r.norm() <= 64.0 * std::numeric_limits<double>::epsilon() * bnorm || r.norm() == 0.0) {
    stats.converged = true;
    if (options.keep_history) stats.residual_history.push_back(0.0);
    return stats;
  }

  precond(r, z);
  project_out(z, options.deflate);
  const double z0 = z.norm();
  double rz = r.dot(z);
  if (options.keep_history) stats.residual_history.push_back(1.0);
  p = z;

  for (int k = 0; k < options.max_iterations; ++k) {
    a(p, ap);
    const double pap = p.dot(ap);
    if (!(pap > 0.0)) throw SolverBreakdown("pcg: p^T A p = " + std::to_string(pap) + " at iteration " + std::to_string(k));
    const double alpha = rz / pap;
    x += alpha * p;
    r -= alpha * ap;
    project_out(r, options.deflate);
    precond(r, z);
    project_out(z, options.deflate);
    stats.alpha.push_back(alpha);
    stats.iterations = k + 1;
    const double rel = z.norm() / z0;
    if (options.keep_history) stats.residual_history.push_back(rel);
    if (rel <= options.tol) {
      stats.converged = true;
      break;
    }
    const double rz_new = r.dot(z);
    const double beta = rz_new / rz;
    stats.beta.push_back(beta);
    rz = rz_new;
    p = z + beta * p;
  }
  stats.k2 = lanczos_condition(stats);
  return stats;
}

std::pair<double, double> lanczos_extremes(const SolveStats& stats)
{
  const std::size_t m = stats.alpha.size();
  if (m == 0) return {1.0, 1.0};
  Vector diag(static_cast<Eigen::Index>(m));
  Vector sub(static_cast<Eigen::Index>(m > 1 ? m - 1 : 0));
  for (std::size_t k = 0; k < m; ++k) {
    double d = 1.0 / stats.alpha[k];
    if (k > 0) d += stats.beta[k - 1] / stats.alpha[k - 1];
    diag(static_cast<Eigen::Index>(k)) = d;
    if (k + 1 < m) sub(static_cast<Eigen::Index>(k)) = std::sqrt(stats.beta[k]) / stats.alpha[k];
  }
  if (m == 1) return {diag(0), diag(0)};
  Eigen::SelfAdjointEigenSolver<DenseMatrix> es;
  es.computeFromTridiagonal(diag, sub, Eigen::EigenvaluesOnly);
  return {es.eigenvalues().minCoeff(), es.eigenvalues().maxCoeff()};
}

double lanczos_condition(const SolveStats& stats)
{
  if (stats.alpha.size() < 2) return 1.0;
  const auto [lo, hi] = lanczos_extremes(stats);
  return hi / lo;
}

std::pair<double, double> dense_spectrum(const DenseMatrix& a, const DenseMatrix* b)
{
  if (b == nullptr) {
    Eigen::SelfAdjointEigenSolver<DenseMatrix> es(a, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw std::runtime_error("dense_spectrum: eigensolver failed");
    return {es.eigenvalues().minCoeff(), es.eigenvalues().maxCoeff()};
  }
  Eigen::LLT<DenseMatrix> check(*b);
  if (check.info() != Eigen::Success) throw NotPositiveDefinite("dense_spectrum: metric B is not SPD");
  Eigen::GeneralizedSelfAdjointEigenSolver<DenseMatrix> es(a, *b, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw std::runtime_error("dense_spectrum: eigensolver failed");
  return {es.eigenvalues().minCoeff(), es.eigenvalues().maxCoeff()};
}

LinearOperator matrix_operator(const SparseMatrix& a)
{
  return [&a](const Vector& in, Vector& out) { out.noalias() = a * in; };
}

LinearOperator identity_operator()
{
  return [](const Vector& in, Vector& out) { out = in; };
}

DenseMatrix to_dense(const LinearOperator& op, Eigen::Index n)
{
  DenseMatrix m(n, n);
  Vector e = Vector::Zero(n), col;
  for (Eigen::Index j = 0; j < n; ++j) {
    e(j) = 1.0;
    op(e, col);
    m.col(j) = col;
    e(j) = 0.0;
  }
  return m;
}

}  // namespace emi
