#pragma once

/** @file assembly.hpp
    @brief Q1 stiffness blocks, interface jump-mass and the composite time-step
    operator K = tau * sum_i A_i + M over the free (non-Dirichlet) DOFs.
*/

#include "emigdsw/linalg.hpp"
#include "emigdsw/mesh.hpp"

#include <Eigen/Dense>

#include <span>

namespace emi {

class AssemblyError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Exact bilinear stiffness on an hx x hy rectangle; local order (x0y0, x1y0, x0y1, x1y1).
Eigen::Matrix4d element_stiffness_q1(double hx, double hy, double sigma);

/// Consistent 1D mass of a linear segment, scaled by c_m.
Eigen::Matrix2d edge_mass_1d(double len, double c_m);

enum class EdgeMass { consistent, lumped };

/// Stiffness A_i of one subdomain in the global (all-DOF) numbering.
SparseMatrix assemble_subdomain_stiffness(const MeshTopology& mesh, const Subdomain& sub);
/// sum_i A_i.
SparseMatrix assemble_stiffness(const MeshTopology& mesh);

/// Jump mass: for each interface segment, +Me on the a-a and b-b blocks, -Me on the cross blocks.
SparseMatrix assemble_interface_mass(const MeshTopology& mesh, double c_m, EdgeMass kind = EdgeMass::consistent);

/// Maps interface-node reaction samples F to DOF loads: (B F) on the a side, -(B F) on the b side,
/// B being the same segment mass used for the jump mass.
SparseMatrix assemble_reaction_load(const MeshTopology& mesh, EdgeMass kind = EdgeMass::consistent);

/// K = tau * stiffness + mass, restricted to free DOFs. Stiffness and mass are kept
/// in the all-DOF numbering so the operator can be rebuilt for another tau.
class CompositeOperator {
public:
  CompositeOperator(SparseMatrix stiffness, SparseMatrix mass, const DofPartition& partition, double tau,
                    bool allow_singular = false);

  double tau() const { return tau_; }
  const SparseMatrix& matrix() const { return k_; }
  const SparseMatrix& stiffness() const { return stiffness_; }
  const SparseMatrix& mass() const { return mass_; }
  const DofPartition& partition() const { return partition_; }
  /// True when no Dirichlet DOFs exist and the kernel (global constants) is handled by the caller.
  bool singular() const { return allow_singular_ && partition_.dirichlet.empty(); }

  int num_dofs() const { return static_cast<int>(full_to_free_.size()); }
  int num_free() const { return static_cast<int>(free_to_full_.size()); }
  /// Free index of a global DOF, -1 for Dirichlet DOFs.
  int free_index(int dof) const { return full_to_free_[static_cast<std::size_t>(dof)]; }
  const std::vector<int>& free_dofs() const { return free_to_full_; }

  Vector restrict_to_free(const Vector& full) const;
  /// Dirichlet entries are set to zero.
  Vector prolong(const Vector& free) const;

  /// Same blocks, different time step.
  CompositeOperator rescaled(double tau) const;

private:
  SparseMatrix stiffness_;
  SparseMatrix mass_;
  DofPartition partition_;
  double tau_ = 0.0;
  bool allow_singular_ = false;
  SparseMatrix k_;
  std::vector<int> full_to_free_;
  std::vector<int> free_to_full_;
};

/// K = tau * sum A_i + M; throws AssemblyError for tau <= 0, or when D is empty and
/// `allow_singular` (zero-mean handling) is false.
CompositeOperator assemble_system(double tau, SparseMatrix stiffness, SparseMatrix mass,
                                  const DofPartition& partition, bool allow_singular = false);

/// Builds f = M u_prev - tau * B F on the free DOFs.
class RhsAssembler {
public:
  RhsAssembler(const MeshTopology& mesh, const CompositeOperator& op, EdgeMass kind = EdgeMass::consistent);

  /// `u_prev` over all DOFs, `reaction` one sample per interface node.
  Vector assemble(const Vector& u_prev, std::span<const double> reaction, double tau) const;

  const SparseMatrix& load() const { return load_; }

private:
  const CompositeOperator* op_;
  SparseMatrix load_;
  std::size_t num_nodes_;
};

}  // namespace emi
