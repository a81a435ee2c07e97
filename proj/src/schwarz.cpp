#include "emigdsw/schwarz.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>

namespace emi {

std::string to_string(CoarseMode mode)
{
  switch (mode) {
  case CoarseMode::vertex: return "vertex";
  case CoarseMode::vertex_edge: return "vertex-edge";
  case CoarseMode::vertex_linear: return "vertex-linear";
  }
  return "?";
}

std::string to_string(PreconditionerKind kind)
{
  switch (kind) {
  case PreconditionerKind::none: return "none";
  case PreconditionerKind::additive_schwarz: return "as";
  case PreconditionerKind::gdsw: return "gdsw";
  }
  return "?";
}

CoarseMode parse_coarse_mode(const std::string& text)
{
  if (text == "vertex") return CoarseMode::vertex;
  if (text == "vertex-edge" || text == "vertex_edge") return CoarseMode::vertex_edge;
  if (text == "vertex-linear" || text == "vertex_linear") return CoarseMode::vertex_linear;
  throw SchwarzError("unknown coarse mode '" + text + "'");
}

PreconditionerKind parse_preconditioner(const std::string& text)
{
  if (text == "none" || text == "cg") return PreconditionerKind::none;
  if (text == "as" || text == "additive_schwarz") return PreconditionerKind::additive_schwarz;
  if (text == "gdsw") return PreconditionerKind::gdsw;
  throw SchwarzError("unknown preconditioner '" + text + "'");
}

namespace {

SparseMatrix rectangular_block(const SparseMatrix& a, const std::vector<int>& rows, const std::vector<int>& cols)
{
  std::vector<int> map(static_cast<std::size_t>(a.rows()), -1);
  for (std::size_t i = 0; i < rows.size(); ++i) map[static_cast<std::size_t>(rows[i])] = static_cast<int>(i);
  std::vector<Triplet> trips;
  for (std::size_t j = 0; j < cols.size(); ++j)
    for (SparseMatrix::InnerIterator it(a, cols[j]); it; ++it) {
      const int i = map[static_cast<std::size_t>(it.row())];
      if (i >= 0) trips.emplace_back(i, static_cast<int>(j), it.value());
    }
  SparseMatrix s(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
  s.setFromTriplets(trips.begin(), trips.end());
  return s;
}

}  // namespace

HarmonicExtension::HarmonicExtension(const CompositeOperator& op, const MeshTopology& mesh) : num_free_(op.num_free())
{
  const auto& part = op.partition();
  blocks_.resize(mesh.subdomains().size());
  for (const auto& d : part.gamma) {
    const int f = op.free_index(d);
    if (f >= 0) blocks_[static_cast<std::size_t>(mesh.dof_subdomain(d))].gamma.push_back(f);
  }
  for (std::size_t s = 0; s < blocks_.size(); ++s) {
    auto& b = blocks_[s];
    for (const int d : part.interior[s]) b.interior.push_back(op.free_index(d));
    if (b.interior.empty()) continue;
    b.k_ii = Factorization(principal_submatrix(op.matrix(), b.interior));
    b.k_ig = rectangular_block(op.matrix(), b.interior, b.gamma);
  }
}

void HarmonicExtension::extend_local(int sub, const Vector& gamma_local, Vector& interior_out) const
{
  const auto& b = blocks_[static_cast<std::size_t>(sub)];
  if (b.interior.empty()) {
    interior_out.resize(0);
    return;
  }
  interior_out = -(b.k_ig * gamma_local);
  b.k_ii.solve_in_place(interior_out);
}

Vector HarmonicExtension::extend(const Vector& gamma_values) const
{
  Vector out = Vector::Zero(num_free_);
  Vector g, xi;
  for (std::size_t s = 0; s < blocks_.size(); ++s) {
    const auto& b = blocks_[s];
    g.resize(static_cast<Eigen::Index>(b.gamma.size()));
    for (std::size_t k = 0; k < b.gamma.size(); ++k) {
      g(static_cast<Eigen::Index>(k)) = gamma_values(b.gamma[k]);
      out(b.gamma[k]) = gamma_values(b.gamma[k]);
    }
    if (g.size() == 0 || g.isZero(0.0)) continue;
    extend_local(static_cast<int>(s), g, xi);
    for (std::size_t k = 0; k < b.interior.size(); ++k) out(b.interior[k]) = xi(static_cast<Eigen::Index>(k));
  }
  return out;
}

SparseMatrix coarse_interface_values(const CompositeOperator& op, const MeshTopology& mesh, CoarseMode mode,
                                     std::vector<CoarseSpace::Column>* labels)
{
  std::vector<Triplet> trips;
  std::vector<CoarseSpace::Column> cols;
  auto add = [&](int dof, double value) {
    const int f = op.free_index(dof);
    if (f >= 0 && value != 0.0) trips.emplace_back(f, static_cast<int>(cols.size()) - 1, value);
  };

  std::map<LatticePoint, int> vertex_at;
  for (std::size_t l = 0; l < mesh.vertices().size(); ++l) vertex_at[mesh.vertices()[l].at] = static_cast<int>(l);

  for (std::size_t l = 0; l < mesh.vertices().size(); ++l) {
    const auto& v = mesh.vertices()[l];
    for (std::size_t k = 0; k < v.sharers.size(); ++k) {
      if (op.free_index(v.dofs[k]) < 0) continue;
      cols.push_back({CoarseSpace::Column::Kind::vertex, static_cast<int>(l), v.sharers[k]});
      add(v.dofs[k], 1.0);
      if (mode != CoarseMode::vertex_linear) continue;
      // Linear decay along every edge of this sharer that ends at the vertex.
      for (const auto& e : mesh.edges()) {
        const bool on_a = e.side_a == v.sharers[k];
        if (!on_a && e.side_b != v.sharers[k]) continue;
        const auto side = [&](std::size_t s) { return on_a ? e.pairs[s].first : e.pairs[s].second; };
        const std::size_t m = e.pairs.size() - 1;
        const bool at_start = side(0) == v.dofs[k];
        const bool at_end = side(m) == v.dofs[k];
        if (!at_start && !at_end) continue;
        for (std::size_t s = 1; s < m; ++s) {
          const double t = static_cast<double>(s) / static_cast<double>(m);
          add(side(s), at_start ? 1.0 - t : t);
        }
      }
    }
  }
  if (mode == CoarseMode::vertex_edge) {
    for (const auto& e : mesh.edges()) {
      if (e.pairs.size() < 3) continue;  // no nodes between the end vertices
      cols.push_back({CoarseSpace::Column::Kind::edge, e.id, -1});
      for (std::size_t s = 1; s + 1 < e.pairs.size(); ++s) {
        add(e.pairs[s].first, 1.0);
        add(e.pairs[s].second, 1.0);
      }
    }
  }
  SparseMatrix values(op.num_free(), static_cast<Eigen::Index>(cols.size()));
  values.setFromTriplets(trips.begin(), trips.end());
  if (labels != nullptr) *labels = std::move(cols);
  return values;
}

CoarseSpace::CoarseSpace(const CompositeOperator& op, const MeshTopology& mesh, CoarseMode mode) : mode_(mode)
{
  const SparseMatrix gamma_values = coarse_interface_values(op, mesh, mode, &columns_);
  const HarmonicExtension ext(op, mesh);

  std::vector<Triplet> trips;
  std::vector<int> touched;
  Vector g, xi;
  for (int c = 0; c < gamma_values.outerSize(); ++c) {
    // Group the column's interface values by compartment and extend each part.
    std::map<int, std::vector<std::pair<int, double>>> by_sub;
    for (SparseMatrix::InnerIterator it(gamma_values, c); it; ++it) {
      trips.emplace_back(static_cast<int>(it.row()), c, it.value());
      by_sub[mesh.dof_subdomain(op.free_dofs()[static_cast<std::size_t>(it.row())])].emplace_back(
          static_cast<int>(it.row()), it.value());
    }
    for (const auto& [sub, entries] : by_sub) {
      const auto& gd = ext.gamma_dofs(sub);
      g = Vector::Zero(static_cast<Eigen::Index>(gd.size()));
      for (const auto& [row, value] : entries) {
        const auto pos = std::lower_bound(gd.begin(), gd.end(), row) - gd.begin();
        g(pos) = value;
      }
      ext.extend_local(sub, g, xi);
      const auto& id = ext.interior_dofs(sub);
      for (std::size_t k = 0; k < id.size(); ++k)
        if (xi(static_cast<Eigen::Index>(k)) != 0.0) trips.emplace_back(id[k], c, xi(static_cast<Eigen::Index>(k)));
    }
  }
  basis_.resize(op.num_free(), gamma_values.cols());
  basis_.setFromTriplets(trips.begin(), trips.end());
  basis_.prune(0.0);

  const SparseMatrix kphi = op.matrix() * basis_;
  k0_ = SparseMatrix(basis_.transpose() * kphi);
  // Exact symmetry of the Galerkin product.
  k0_ = SparseMatrix(0.5 * (k0_ + SparseMatrix(k0_.transpose())));

  if (op.singular()) {
    // Zero-mean mode: the span may contain the global constant; use a pseudo-inverse.
    const DenseMatrix dense(k0_);
    Eigen::SelfAdjointEigenSolver<DenseMatrix> es(dense);
    const double cutoff = 1e-10 * es.eigenvalues().cwiseAbs().maxCoeff();
    Vector inv = es.eigenvalues();
    for (Eigen::Index i = 0; i < inv.size(); ++i) inv(i) = std::abs(inv(i)) > cutoff ? 1.0 / inv(i) : 0.0;
    k0_pinv_ = es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
    use_pinv_ = true;
    return;
  }
  try {
    k0_factor_ = Factorization(k0_);
  } catch (const NotPositiveDefinite&) {
    // Locate the first column that is (numerically) dependent on the previous ones.
    const DenseMatrix dense(k0_);
    const double scale = dense.diagonal().cwiseAbs().maxCoeff();
    for (Eigen::Index j = 1; j <= dense.rows(); ++j) {
      Eigen::LLT<DenseMatrix> llt(dense.topLeftCorner(j, j));
      if (llt.info() != Eigen::Success || llt.matrixL()(j - 1, j - 1) <= 1e-12 * std::sqrt(scale)) {
        const auto& col = columns_[static_cast<std::size_t>(j - 1)];
        throw SchwarzError("build_coarse: coarse operator is rank deficient at column " + std::to_string(j - 1) + " (" +
                           (col.kind == Column::Kind::vertex ? "vertex " : "edge ") + std::to_string(col.entity) +
                           (col.sharer >= 0 ? ", subdomain " + std::to_string(col.sharer) : std::string()) + ")");
      }
    }
    throw SchwarzError("build_coarse: coarse operator is not positive definite");
  }
}

void CoarseSpace::apply_add(const Vector& r, Vector& z) const
{
  Vector rc = basis_.transpose() * r;
  if (use_pinv_)
    rc = k0_pinv_ * rc;
  else
    k0_factor_.solve_in_place(rc);
  z.noalias() += basis_ * rc;
}

void CoarseSpace::write_csv(const std::string& path, const CompositeOperator& op) const
{
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "dof,column,value\n" << std::setprecision(17);
  for (int c = 0; c < basis_.outerSize(); ++c)
    for (SparseMatrix::InnerIterator it(basis_, c); it; ++it)
      out << op.free_dofs()[static_cast<std::size_t>(it.row())] << ',' << c << ',' << it.value() << '\n';
}

CoarseSpace build_coarse(const CompositeOperator& op, const MeshTopology& mesh, CoarseMode mode)
{
  return CoarseSpace(op, mesh, mode);
}

double harmonic_residual(const CompositeOperator& op, const SparseMatrix& basis)
{
  const SparseMatrix kphi = op.matrix() * basis;
  const auto& part = op.partition();
  std::vector<char> interior(static_cast<std::size_t>(op.num_free()), 0);
  for (int f = 0; f < op.num_free(); ++f)
    interior[static_cast<std::size_t>(f)] = part.role[static_cast<std::size_t>(op.free_dofs()[static_cast<std::size_t>(f)])] ==
                                            DofRole::interior;
  double worst = 0.0;
  for (int c = 0; c < basis.outerSize(); ++c) {
    double gmax = 0.0;
    for (SparseMatrix::InnerIterator it(basis, c); it; ++it)
      if (!interior[static_cast<std::size_t>(it.row())]) gmax = std::max(gmax, std::abs(it.value()));
    double rmax = 0.0;
    for (SparseMatrix::InnerIterator it(kphi, c); it; ++it)
      if (interior[static_cast<std::size_t>(it.row())]) rmax = std::max(rmax, std::abs(it.value()));
    if (gmax > 0.0) worst = std::max(worst, rmax / gmax);
  }
  const double kmax = op.matrix().coeffs().cwiseAbs().maxCoeff();
  return kmax > 0.0 ? worst / kmax : worst;
}

namespace {

// Chebyshev distance (lattice units) from a point to the closure of a compartment.
int distance_to(const MeshTopology& mesh, const Subdomain& s, LatticePoint p)
{
  if (s.kind == SubdomainKind::cell) {
    const int dx = std::max({0, s.x0 - p.x, p.x - (s.x0 + s.nx)});
    const int dy = std::max({0, s.y0 - p.y, p.y - (s.y0 + s.ny)});
    return std::max(dx, dy);
  }
  const auto [bx0, by0, bx1, by1] = mesh.block_box();
  if (p.x <= bx0 || p.x >= bx1 || p.y <= by0 || p.y >= by1) return 0;
  return std::min({p.x - bx0, bx1 - p.x, p.y - by0, by1 - p.y});
}

// Lower bound on the distance between two compartments, from their boxes.
int box_gap(const MeshTopology& mesh, const Subdomain& a, const Subdomain& b)
{
  if (a.kind == SubdomainKind::extracellular) return box_gap(mesh, b, a);
  if (b.kind == SubdomainKind::extracellular) {
    const auto [bx0, by0, bx1, by1] = mesh.block_box();
    return std::min({a.x0 - bx0, bx1 - (a.x0 + a.nx), a.y0 - by0, by1 - (a.y0 + a.ny)});
  }
  const int dx = std::max({0, a.x0 - (b.x0 + b.nx), b.x0 - (a.x0 + a.nx)});
  const int dy = std::max({0, a.y0 - (b.y0 + b.ny), b.y0 - (a.y0 + a.ny)});
  return std::max(dx, dy);
}

}  // namespace

std::vector<std::vector<int>> overlapping_dof_sets(const CompositeOperator& op, const MeshTopology& mesh,
                                                   int overlap_layers)
{
  if (overlap_layers < 1) throw SchwarzError("overlap must be at least one element layer");
  const auto& subs = mesh.subdomains();
  std::vector<std::vector<int>> sets(subs.size());
  for (std::size_t i = 0; i < subs.size(); ++i) {
    auto& set = sets[i];
    for (const auto& j : subs) {
      const bool own = j.id == subs[i].id;
      if (!own && box_gap(mesh, subs[i], j) >= overlap_layers) continue;
      for (int l = 0; l < j.dof_count; ++l) {
        const int f = op.free_index(j.dof_offset + l);
        if (f < 0) continue;
        // Nodes at distance exactly delta lie on the boundary of the extended compartment (zero there).
        if (own || distance_to(mesh, subs[i], j.nodes[static_cast<std::size_t>(l)]) < overlap_layers) set.push_back(f);
      }
    }
    std::sort(set.begin(), set.end());
  }
  return sets;
}

std::vector<LocalSpace> build_local(const CompositeOperator& op, const MeshTopology& mesh, int overlap_layers)
{
  auto sets = overlapping_dof_sets(op, mesh, overlap_layers);
  std::vector<LocalSpace> locals(sets.size());
  for (std::size_t i = 0; i < sets.size(); ++i) {
    locals[i].subdomain = static_cast<int>(i);
    locals[i].dofs = std::move(sets[i]);
    locals[i].factor = Factorization(principal_submatrix(op.matrix(), locals[i].dofs));
  }
  return locals;
}

Preconditioner::Preconditioner(const CompositeOperator& op, const MeshTopology& mesh,
                               const PreconditionerOptions& options)
    : options_(options)
{
  if (options.kind == PreconditionerKind::none) return;
  locals_ = build_local(op, mesh, options.overlap_layers);
  if (options.kind == PreconditionerKind::gdsw) coarse_.emplace(op, mesh, options.coarse);
}

void Preconditioner::apply(const Vector& r, Vector& z) const
{
  if (options_.kind == PreconditionerKind::none) {
    z = r;
    return;
  }
  z = Vector::Zero(r.size());
  if (coarse_) coarse_->apply_add(r, z);
  Vector local;
  for (const auto& ls : locals_) {
    local.resize(static_cast<Eigen::Index>(ls.dofs.size()));
    for (std::size_t k = 0; k < ls.dofs.size(); ++k) local(static_cast<Eigen::Index>(k)) = r(ls.dofs[k]);
    ls.factor.solve_in_place(local);
    for (std::size_t k = 0; k < ls.dofs.size(); ++k) z(ls.dofs[k]) += local(static_cast<Eigen::Index>(k));
  }
}

LinearOperator Preconditioner::as_operator() const
{
  return [this](const Vector& in, Vector& out) { apply(in, out); };
}

}  // namespace emi
