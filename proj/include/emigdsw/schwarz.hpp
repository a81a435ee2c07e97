#pragma once

/** @file schwarz.hpp
    @brief Two-level overlapping Schwarz preconditioning for the composite operator.

    The coarse space follows the GDSW construction: interface functions defined on
    the duplicated interface DOFs and extended into each compartment as discrete
    harmonic functions of K. Local spaces are the compartments grown by a number of
    element layers (one layer for minimal overlap), solved exactly.
*/

#include "emigdsw/assembly.hpp"
#include "emigdsw/linalg.hpp"
#include "emigdsw/mesh.hpp"

#include <optional>
#include <string>
#include <vector>

namespace emi {

class SchwarzError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

enum class CoarseMode {
  vertex,       ///< one spike per (vertex, sharer)
  vertex_edge,  ///< spikes plus one both-sided function per interface edge (partition of unity on Gamma)
  vertex_linear ///< per-sharer vertex functions interpolated linearly along the sharer's incident edges
};

enum class PreconditionerKind { none, additive_schwarz, gdsw };

std::string to_string(CoarseMode mode);
std::string to_string(PreconditionerKind kind);
CoarseMode parse_coarse_mode(const std::string& text);
PreconditionerKind parse_preconditioner(const std::string& text);

/// Discrete harmonic extension from Gamma into the interior DOFs, one
/// compartment at a time (the interior block of K is block diagonal).
class HarmonicExtension {
public:
  HarmonicExtension(const CompositeOperator& op, const MeshTopology& mesh);

  /// `gamma_values` is a free-DOF vector; only its Gamma entries are read.
  /// Returns the free vector with Gamma entries copied and interior entries
  /// solving K_II x_I = -K_IG x_G.
  Vector extend(const Vector& gamma_values) const;

  /// Extension of values given on the Gamma DOFs of one compartment.
  /// Writes interior values into `interior_out` (ordered as interior_dofs(sub)).
  void extend_local(int sub, const Vector& gamma_local, Vector& interior_out) const;

  const std::vector<int>& interior_dofs(int sub) const { return blocks_[static_cast<std::size_t>(sub)].interior; }
  const std::vector<int>& gamma_dofs(int sub) const { return blocks_[static_cast<std::size_t>(sub)].gamma; }

private:
  struct Block {
    std::vector<int> interior;  ///< free indices
    std::vector<int> gamma;     ///< free indices of this compartment's Gamma DOFs
    SparseMatrix k_ig;
    Factorization k_ii;
  };
  std::vector<Block> blocks_;
  Eigen::Index num_free_ = 0;
};

/// Coarse basis columns over the free DOFs with the factorized Galerkin operator.
class CoarseSpace {
public:
  struct Column {
    enum class Kind { vertex, edge } kind = Kind::vertex;
    int entity = 0;   ///< vertex or edge id
    int sharer = -1;  ///< owning subdomain for vertex columns
  };

  CoarseSpace(const CompositeOperator& op, const MeshTopology& mesh, CoarseMode mode);

  CoarseMode mode() const { return mode_; }
  const SparseMatrix& basis() const { return basis_; }
  const SparseMatrix& coarse_matrix() const { return k0_; }
  const std::vector<Column>& columns() const { return columns_; }
  Eigen::Index dimension() const { return basis_.cols(); }

  /// z += Phi K0^{-1} Phi^T r.
  void apply_add(const Vector& r, Vector& z) const;

  /// Writes (dof, column, value) rows.
  void write_csv(const std::string& path, const CompositeOperator& op) const;

private:
  CoarseMode mode_;
  std::vector<Column> columns_;
  SparseMatrix basis_;
  SparseMatrix k0_;
  Factorization k0_factor_;
  DenseMatrix k0_pinv_;  ///< used instead of the factor when K is singular (zero-mean mode)
  bool use_pinv_ = false;
};

CoarseSpace build_coarse(const CompositeOperator& op, const MeshTopology& mesh, CoarseMode mode);

/// Gamma-supported interface values of every coarse column (before extension), as a
/// free-DOF x columns matrix. Exposed for the partition-of-unity check.
SparseMatrix coarse_interface_values(const CompositeOperator& op, const MeshTopology& mesh, CoarseMode mode,
                                     std::vector<CoarseSpace::Column>* labels = nullptr);

/// max over columns of ||(K Phi)_I||_inf / (||Phi_Gamma||_inf max|K_ij|), i.e. the
/// residual of the interior equations relative to the size of K, evaluated directly from K.
double harmonic_residual(const CompositeOperator& op, const SparseMatrix& basis);

struct LocalSpace {
  int subdomain = 0;
  std::vector<int> dofs;  ///< ascending free indices of the overlapping compartment
  Factorization factor;
};

/// One overlapping local space per compartment, grown by a strip of `overlap_layers`
/// elements (delta = overlap_layers * h). Foreign nodes at distance < delta are included;
/// with delta = h these are exactly the neighbours' copies of the compartment's boundary nodes.
std::vector<LocalSpace> build_local(const CompositeOperator& op, const MeshTopology& mesh, int overlap_layers = 1);

/// Free-index sets only (no factorization).
std::vector<std::vector<int>> overlapping_dof_sets(const CompositeOperator& op, const MeshTopology& mesh,
                                                   int overlap_layers = 1);

struct PreconditionerOptions {
  PreconditionerKind kind = PreconditionerKind::gdsw;
  CoarseMode coarse = CoarseMode::vertex_edge;
  int overlap_layers = 1;
};

class Preconditioner {
public:
  Preconditioner(const CompositeOperator& op, const MeshTopology& mesh, const PreconditionerOptions& options);

  PreconditionerKind kind() const { return options_.kind; }
  const PreconditionerOptions& options() const { return options_; }
  const std::optional<CoarseSpace>& coarse() const { return coarse_; }
  const std::vector<LocalSpace>& locals() const { return locals_; }

  /// none: z = r; additive_schwarz: sum of local solves; gdsw: coarse + local solves.
  void apply(const Vector& r, Vector& z) const;
  LinearOperator as_operator() const;

private:
  PreconditionerOptions options_;
  std::optional<CoarseSpace> coarse_;
  std::vector<LocalSpace> locals_;
};

}  // namespace emi
