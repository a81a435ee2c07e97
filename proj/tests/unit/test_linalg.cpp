#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "emigdsw/assembly.hpp"
#include "emigdsw/linalg.hpp"
#include "emigdsw/schwarz.hpp"

#include <Eigen/Eigenvalues>

#include <random>

using namespace emi;

namespace {

SparseMatrix sparse_diag(const std::vector<double>& d)
{
  SparseMatrix a(static_cast<Eigen::Index>(d.size()), static_cast<Eigen::Index>(d.size()));
  std::vector<Triplet> t;
  for (std::size_t i = 0; i < d.size(); ++i) t.emplace_back(static_cast<int>(i), static_cast<int>(i), d[i]);
  a.setFromTriplets(t.begin(), t.end());
  return a;
}

CompositeOperator small_system(int n, int es, bool zero_mean = false)
{
  GeometryConfig c;
  c.n_cells_x = c.n_cells_y = n;
  c.elems_short = es;
  const auto m = build_geometry(c);
  return assemble_system(0.05, assemble_stiffness(m), assemble_interface_mass(m, 1.0),
                         classify_dofs(m, zero_mean ? DirichletSpec::none() : DirichletSpec{}), zero_mean);
}

Vector random_vector(Eigen::Index n, std::uint64_t seed)
{
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> nd;
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = nd(gen);
  return v;
}

}  // namespace

TEST_CASE("factorization solves")
{
  const SparseMatrix id = sparse_diag({1, 1, 1, 1});
  const Vector b = Vector::LinSpaced(4, 1, 4);
  CHECK((Factorization(id).solve(b) - b).norm() == 0.0);
  const Vector x = Factorization(sparse_diag({1, 2, 3})).solve(Vector::LinSpaced(3, 1, 3));
  CHECK((x - Vector::Ones(3)).cwiseAbs().maxCoeff() <= 1e-15);

  const DenseMatrix g = DenseMatrix::Random(50, 50);
  const DenseMatrix spd = g.transpose() * g + DenseMatrix::Identity(50, 50);
  const SparseMatrix a = spd.sparseView();
  const Vector rhs = random_vector(50, 3);
  const Vector sol = Factorization(a).solve(rhs);
  CHECK((a * sol - rhs).norm() <= 1e-12 * rhs.norm());

  CHECK_THROWS_AS(Factorization(sparse_diag({1, -1, 2})), NotPositiveDefinite);
}

TEST_CASE("PCG trivial cases")
{
  const SparseMatrix id = sparse_diag(std::vector<double>(10, 1.0));
  Vector x = Vector::Zero(10);
  auto st = pcg(matrix_operator(id), Vector::LinSpaced(10, -1, 3), identity_operator(), x);
  CHECK(st.converged);
  CHECK(st.iterations == 1);
  CHECK(lanczos_condition(st) == 1.0);

  const auto op = small_system(1, 2);
  const Factorization f(op.matrix());
  const LinearOperator exact = [&f](const Vector& r, Vector& z) { z = f.solve(r); };
  const Vector b = random_vector(op.num_free(), 5);
  x = Vector::Zero(op.num_free());
  st = pcg(matrix_operator(op.matrix()), b, exact, x);
  CHECK(st.converged);
  CHECK(st.iterations == 1);
  CHECK((op.matrix() * x - b).norm() <= 1e-10 * b.norm());

  // A zero right-hand side needs no iterations.
  x = Vector::Zero(op.num_free());
  st = pcg(matrix_operator(op.matrix()), Vector::Zero(op.num_free()), identity_operator(), x);
  CHECK(st.converged);
  CHECK(st.iterations == 0);
}

TEST_CASE("PCG on diag(1, 1e4) finishes in two steps")
{
  const SparseMatrix a = sparse_diag({1.0, 1e4});
  Vector x = Vector::Zero(2);
  const Vector b = Vector::Ones(2);
  const auto st = pcg(matrix_operator(a), b, identity_operator(), x);
  CHECK(st.converged);
  CHECK(st.iterations == 2);
  CHECK(x(0) == doctest::Approx(1.0));
  CHECK(x(1) == doctest::Approx(1e-4));
  CHECK(st.k2 == doctest::Approx(1e4).epsilon(1e-8));
}

TEST_CASE("Lanczos condition of diag(1..100)")
{
  std::vector<double> d;
  for (int i = 1; i <= 100; ++i) d.push_back(i);
  const SparseMatrix a = sparse_diag(d);
  Vector x = Vector::Zero(100);
  PcgOptions o;
  o.tol = 1e-12;
  const auto st = pcg(matrix_operator(a), Vector::Ones(100), identity_operator(), x, o);
  CHECK(st.converged);
  CHECK(st.k2 == doctest::Approx(100.0).epsilon(0.01));
  const auto [lo, hi] = lanczos_extremes(st);
  CHECK(lo == doctest::Approx(1.0).epsilon(0.01));
  CHECK(hi == doctest::Approx(100.0).epsilon(0.01));
  // Residual history decreases to the tolerance.
  CHECK(st.residual_history.front() == 1.0);
  CHECK(st.residual_history.back() <= o.tol);
  CHECK(st.alpha.size() == static_cast<std::size_t>(st.iterations));
}

TEST_CASE("PCG limits and breakdown")
{
  std::vector<double> d;
  for (int i = 1; i <= 50; ++i) d.push_back(i * i);
  Vector x = Vector::Zero(50);
  PcgOptions o;
  o.max_iterations = 3;
  const auto st = pcg(matrix_operator(sparse_diag(d)), Vector::Ones(50), identity_operator(), x, o);
  CHECK_FALSE(st.converged);
  CHECK(st.iterations == 3);

  const SparseMatrix indefinite = sparse_diag({1.0, -1.0});
  Vector y = Vector::Zero(2);
  CHECK_THROWS_AS(pcg(matrix_operator(indefinite), Vector::Ones(2), identity_operator(), y), SolverBreakdown);
}

TEST_CASE("dense spectrum")
{
  DenseMatrix a(2, 2);
  a << 2, 0, 0, 5;
  auto [lo, hi] = dense_spectrum(a);
  CHECK(lo == doctest::Approx(2.0));
  CHECK(hi == doctest::Approx(5.0));
  std::tie(lo, hi) = dense_spectrum(a, &a);
  CHECK(lo == doctest::Approx(1.0));
  CHECK(hi == doctest::Approx(1.0));
  a << 2, 1, 1, 2;
  std::tie(lo, hi) = dense_spectrum(a);
  CHECK(lo == doctest::Approx(1.0));
  CHECK(hi == doctest::Approx(3.0));
  DenseMatrix b(2, 2);
  b << 1, 0, 0, -1;
  CHECK_THROWS_AS(dense_spectrum(a, &b), NotPositiveDefinite);
}

TEST_CASE("Lanczos estimate agrees with the dense preconditioned spectrum")
{
  for (const auto kind : {PreconditionerKind::none, PreconditionerKind::additive_schwarz, PreconditionerKind::gdsw}) {
    CAPTURE(to_string(kind));
    GeometryConfig c;
    c.n_cells_x = c.n_cells_y = 1;
    c.elems_short = 4;
    const auto m = build_geometry(c);
    const auto op = assemble_system(0.05, assemble_stiffness(m), assemble_interface_mass(m, 1.0), classify_dofs(m));
    const Preconditioner pc(op, m, {kind, CoarseMode::vertex_edge, 1});
    const Eigen::Index n = op.num_free();
    const DenseMatrix k = op.matrix();
    const DenseMatrix p = to_dense(pc.as_operator(), n);
    // Eigenvalues of P K equal those of K x = lambda P^{-1} x.
    const DenseMatrix p_inv = p.llt().solve(DenseMatrix::Identity(n, n));
    const auto [lo, hi] = dense_spectrum(k, &p_inv);
    Vector x = Vector::Zero(n);
    PcgOptions o;
    o.tol = 1e-10;
    const auto st = pcg(matrix_operator(op.matrix()), random_vector(n, 11), pc.as_operator(), x, o);
    CHECK(st.converged);
    CHECK(std::abs(st.k2 - hi / lo) <= 0.05 * hi / lo);
  }
}

TEST_CASE("A-norm error is monotone")
{
  GeometryConfig c;
  c.n_cells_x = c.n_cells_y = 1;
  c.elems_short = 4;
  const auto m = build_geometry(c);
  const auto op = assemble_system(0.05, assemble_stiffness(m), assemble_interface_mass(m, 1.0), classify_dofs(m));
  const Preconditioner pc(op, m, {});
  const Vector b = random_vector(op.num_free(), 21);
  const Vector exact = Factorization(op.matrix()).solve(b);
  double prev = std::numeric_limits<double>::infinity();
  for (int k = 1; k <= 25; ++k) {
    Vector x = Vector::Zero(op.num_free());
    PcgOptions o;
    o.max_iterations = k;
    o.tol = 1e-300;
    pcg(matrix_operator(op.matrix()), b, pc.as_operator(), x, o);
    const Vector e = x - exact;
    const double energy = std::sqrt(e.dot(op.matrix() * e));
    CHECK(energy <= prev * (1.0 + 1e-12));
    prev = energy;
  }
}

TEST_CASE("deflated PCG keeps residuals orthogonal to the constant")
{
  const auto op = small_system(2, 2, true);
  const Eigen::Index n = op.num_free();
  const Vector ones = Vector::Ones(n);
  Vector b = random_vector(n, 8);
  b.array() -= b.mean();
  Vector x = Vector::Zero(n);
  PcgOptions o;
  o.deflate = &ones;
  o.tol = 1e-10;
  // Jacobi keeps the preconditioned residual off the kernel only after projection.
  const Vector diag = op.matrix().diagonal();
  const LinearOperator jacobi = [&diag](const Vector& r, Vector& z) { z = r.cwiseQuotient(diag); };
  const auto st = pcg(matrix_operator(op.matrix()), b, jacobi, x, o);
  CHECK(st.converged);
  CHECK(std::abs(x.dot(ones)) <= 1e-10 * x.norm() * std::sqrt(static_cast<double>(n)));
  const Vector r = b - op.matrix() * x;
  CHECK(r.norm() <= 1e-6 * b.norm());
}

TEST_CASE("helpers")
{
  DenseMatrix d(3, 3);
  d << 4, 1, 0, 1, 3, 2, 0, 2, 5;
  const SparseMatrix a = d.sparseView();
  CHECK(asymmetry(a) == 0.0);
  const SparseMatrix sub = principal_submatrix(a, {0, 2});
  CHECK(DenseMatrix(sub)(0, 0) == 4);
  CHECK(DenseMatrix(sub)(1, 1) == 5);
  CHECK(DenseMatrix(sub)(0, 1) == 0);
  CHECK((to_dense(matrix_operator(a), 3) - d).norm() == 0.0);
  DenseMatrix e = d;
  e(0, 1) = 1.5;
  CHECK(asymmetry(SparseMatrix(e.sparseView())) == doctest::Approx(0.5));
}
