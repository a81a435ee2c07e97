#include "emigdsw/assembly.hpp"

#include <cmath>

namespace emi {

Eigen::Matrix4d element_stiffness_q1(double hx, double hy, double sigma)
{
  if (!(hx > 0.0) || !(hy > 0.0) || !(sigma >= 0.0))
    throw AssemblyError("element_stiffness_q1: sizes must be positive and sigma non-negative");
  // Tensor-product form: (1/hx) S_x (x) hy M_y + hx M_x (x) (1/hy) S_y, with
  // S = [[1,-1],[-1,1]] and M = [[1/3,1/6],[1/6,1/3]] on the reference segment.
  Eigen::Matrix2d s1;
  s1 << 1.0, -1.0, -1.0, 1.0;
  Eigen::Matrix2d m1;
  m1 << 1.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0, 1.0 / 3.0;
  Eigen::Matrix4d k;
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b) {
      const int ax = a % 2, ay = a / 2, bx = b % 2, by = b / 2;
      k(a, b) = sigma * (hy / hx * s1(ax, bx) * m1(ay, by) + hx / hy * m1(ax, bx) * s1(ay, by));
    }
  return k;
}

Eigen::Matrix2d edge_mass_1d(double len, double c_m)
{
  if (!(len > 0.0) || !(c_m >= 0.0)) throw AssemblyError("edge_mass_1d: length must be positive, c_m non-negative");
  Eigen::Matrix2d m;
  m << 2.0, 1.0, 1.0, 2.0;
  return (c_m * len / 6.0) * m;
}

namespace {

Eigen::Matrix2d segment_mass(double len, double c_m, EdgeMass kind)
{
  if (kind == EdgeMass::consistent) return edge_mass_1d(len, c_m);
  return (c_m * len / 2.0) * Eigen::Matrix2d::Identity();
}

void add_subdomain_stiffness(const MeshTopology& mesh, const Subdomain& sub, std::vector<Triplet>& trips)
{
  const double h = mesh.h();
  const Eigen::Matrix4d ke = element_stiffness_q1(h, h, sub.sigma);
  for (const auto& el : sub.elements)
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b)
        trips.emplace_back(sub.dof_offset + el[static_cast<std::size_t>(a)], sub.dof_offset + el[static_cast<std::size_t>(b)],
                           ke(a, b));
}

}  // namespace

SparseMatrix assemble_subdomain_stiffness(const MeshTopology& mesh, const Subdomain& sub)
{
  std::vector<Triplet> trips;
  trips.reserve(sub.elements.size() * 16);
  add_subdomain_stiffness(mesh, sub, trips);
  SparseMatrix a(mesh.num_dofs(), mesh.num_dofs());
  a.setFromTriplets(trips.begin(), trips.end());
  return a;
}

SparseMatrix assemble_stiffness(const MeshTopology& mesh)
{
  std::vector<Triplet> trips;
  for (const auto& sub : mesh.subdomains()) add_subdomain_stiffness(mesh, sub, trips);
  SparseMatrix a(mesh.num_dofs(), mesh.num_dofs());
  a.setFromTriplets(trips.begin(), trips.end());
  return a;
}

SparseMatrix assemble_interface_mass(const MeshTopology& mesh, double c_m, EdgeMass kind)
{
  std::vector<Triplet> trips;
  for (const auto& e : mesh.edges()) {
    const Eigen::Matrix2d me = segment_mass(e.segment_length, c_m, kind);
    for (std::size_t s = 0; s + 1 < e.pairs.size(); ++s) {
      const std::array<int, 2> a{e.pairs[s].first, e.pairs[s + 1].first};
      const std::array<int, 2> b{e.pairs[s].second, e.pairs[s + 1].second};
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) {
          const double v = me(i, j);
          trips.emplace_back(a[i], a[j], v);
          trips.emplace_back(b[i], b[j], v);
          trips.emplace_back(a[i], b[j], -v);
          trips.emplace_back(b[i], a[j], -v);
        }
    }
  }
  SparseMatrix m(mesh.num_dofs(), mesh.num_dofs());
  m.setFromTriplets(trips.begin(), trips.end());
  return m;
}

SparseMatrix assemble_reaction_load(const MeshTopology& mesh, EdgeMass kind)
{
  std::vector<Triplet> trips;
  for (const auto& e : mesh.edges()) {
    const Eigen::Matrix2d me = segment_mass(e.segment_length, 1.0, kind);
    for (std::size_t s = 0; s + 1 < e.pairs.size(); ++s) {
      const std::array<int, 2> a{e.pairs[s].first, e.pairs[s + 1].first};
      const std::array<int, 2> b{e.pairs[s].second, e.pairs[s + 1].second};
      const std::array<int, 2> node{e.nodes[s], e.nodes[s + 1]};
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) {
          trips.emplace_back(a[i], node[j], me(i, j));
          trips.emplace_back(b[i], node[j], -me(i, j));
        }
    }
  }
  SparseMatrix load(mesh.num_dofs(), static_cast<Eigen::Index>(mesh.interface_nodes().size()));
  load.setFromTriplets(trips.begin(), trips.end());
  return load;
}

CompositeOperator::CompositeOperator(SparseMatrix stiffness, SparseMatrix mass, const DofPartition& partition, double tau,
                                     bool allow_singular)
    : stiffness_(std::move(stiffness)), mass_(std::move(mass)), partition_(partition), tau_(tau),
      allow_singular_(allow_singular)
{
  if (!(tau > 0.0) || !std::isfinite(tau)) throw AssemblyError("assemble_system: tau must be positive");
  if (partition_.dirichlet.empty() && !allow_singular)
    throw AssemblyError("assemble_system: no Dirichlet DOFs and zero-mean handling disabled; the system is singular");
  const auto n = static_cast<std::size_t>(stiffness_.rows());
  if (partition_.role.size() != n || mass_.rows() != stiffness_.rows())
    throw AssemblyError("assemble_system: block sizes do not match the DOF partition");

  full_to_free_.assign(n, -1);
  for (std::size_t d = 0; d < n; ++d)
    if (partition_.role[d] != DofRole::dirichlet) {
      full_to_free_[d] = static_cast<int>(free_to_full_.size());
      free_to_full_.push_back(static_cast<int>(d));
    }

  const SparseMatrix full = tau_ * stiffness_ + mass_;
  k_ = principal_submatrix(full, free_to_full_);
}

Vector CompositeOperator::restrict_to_free(const Vector& full) const
{
  Vector v(num_free());
  for (int i = 0; i < num_free(); ++i) v(i) = full(free_to_full_[static_cast<std::size_t>(i)]);
  return v;
}

Vector CompositeOperator::prolong(const Vector& free) const
{
  Vector v = Vector::Zero(num_dofs());
  for (int i = 0; i < num_free(); ++i) v(free_to_full_[static_cast<std::size_t>(i)]) = free(i);
  return v;
}

CompositeOperator CompositeOperator::rescaled(double tau) const
{
  return CompositeOperator(stiffness_, mass_, partition_, tau, allow_singular_);
}

CompositeOperator assemble_system(double tau, SparseMatrix stiffness, SparseMatrix mass, const DofPartition& partition,
                                  bool allow_singular)
{
  return CompositeOperator(std::move(stiffness), std::move(mass), partition, tau, allow_singular);
}

RhsAssembler::RhsAssembler(const MeshTopology& mesh, const CompositeOperator& op, EdgeMass kind)
    : op_(&op), load_(assemble_reaction_load(mesh, kind)), num_nodes_(mesh.interface_nodes().size())
{
}

Vector RhsAssembler::assemble(const Vector& u_prev, std::span<const double> reaction, double tau) const
{
  if (u_prev.size() != op_->num_dofs() || reaction.size() != num_nodes_)
    throw AssemblyError("assemble_rhs: state length mismatch");
  const Eigen::Map<const Vector> f_nodal(reaction.data(), static_cast<Eigen::Index>(reaction.size()));
  const Vector full = op_->mass() * u_prev - tau * (load_ * f_nodal);
  return op_->restrict_to_free(full);
}

}  // namespace emi
