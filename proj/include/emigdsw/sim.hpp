#pragma once

/** @file sim.hpp
    @brief Splitting time loop: explicit membrane update from the previous jumps,
    right-hand side assembly, preconditioned solve, jump recovery.
*/

#include "emigdsw/assembly.hpp"
#include "emigdsw/ionic.hpp"
#include "emigdsw/linalg.hpp"
#include "emigdsw/mesh.hpp"
#include "emigdsw/schwarz.hpp"

#include <limits>
#include <memory>
#include <string>
#include <vector>

namespace emi {

class SimulationError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct StimulusConfig {
  double amplitude = 50.0;  ///< mA/cm^2
  double start = 0.0;       ///< ms
  double duration = 1.0;    ///< ms
  /// Cells (counted from the bottom-left corner along each axis) whose frame-facing
  /// membrane nodes are stimulated.
  int cells_x = 1;
  int cells_y = 1;
};

enum class InitialGuess { previous, zero };

struct SimConfig {
  GeometryConfig geometry;
  Conductivities sigma;
  DirichletSpec dirichlet;
  bool zero_mean = false;  ///< no Dirichlet DOFs; iterate orthogonally to constants, u_0 mean fixed to 0
  IonicParams ionic;
  StimulusConfig stimulus;
  EdgeMass edge_mass = EdgeMass::consistent;

  double tau = 0.05;   ///< ms
  double t_end = 5.0;  ///< ms
  double tol = 1e-6;
  int max_iterations = 20000;
  InitialGuess initial_guess = InitialGuess::previous;
  double w0 = 0.0;
  /// Initial intracellular potential; the extracellular compartment starts at 0.
  double u_intracellular0 = -85.0;

  PreconditionerOptions preconditioner;

  std::vector<double> snapshot_times;

  int num_steps() const;
  void validate() const;
};

struct StepRecord {
  int step = 0;
  double time = 0.0;  ///< time at the end of the step
  int iterations = 0;
  double k2 = 1.0;
  bool converged = false;
};

struct Snapshot {
  double time = 0.0;
  Vector u;  ///< all DOFs
};

struct RunResult {
  std::vector<StepRecord> steps;
  SolveStats final_stats;
  std::vector<Snapshot> snapshots;
  /// First time the mean jump of each membrane edge exceeds the activation threshold (inf if never).
  std::vector<double> activation_time;
  double setup_seconds = 0.0;
  double solve_seconds = 0.0;
  double max_w = 0.0;
  double min_w = 0.0;

  int iterations() const { return steps.empty() ? 0 : steps.back().iterations; }
  double k2() const { return final_stats.k2; }
};

/// Per interface node: u[dof_a] - u[dof_b].
std::vector<double> compute_jumps(const Vector& u, const MeshTopology& mesh);

/// Stimulus mask per interface node (1 inside the stimulated region, 0 elsewhere).
std::vector<double> stimulus_mask(const MeshTopology& mesh, const StimulusConfig& stim);

/// Earliest activation of each cell (indexed by cell id - 1) over its membrane edges; inf if none.
std::vector<double> cell_activation_times(const MeshTopology& mesh, const std::vector<double>& edge_activation);

class Simulation {
public:
  explicit Simulation(SimConfig config);

  const SimConfig& config() const { return config_; }
  const MeshTopology& mesh() const { return *mesh_; }
  const CompositeOperator& system() const { return *op_; }
  const Preconditioner& preconditioner() const { return *precond_; }
  const MembraneState& membrane() const { return membrane_; }
  const Vector& potential() const { return u_; }
  double time() const { return step_ * config_.tau; }
  int step_index() const { return step_; }

  /// Advances one step; returns the solve statistics.
  const SolveStats& step();
  RunResult run();

  /// Activation threshold on the mean membrane-edge jump (mV).
  static constexpr double activation_threshold = -20.0;

  void write_snapshot_csv(const Snapshot& snap, const std::string& path) const;
  void write_state_csv(const std::string& path) const;

private:
  SimConfig config_;
  std::unique_ptr<MeshTopology> mesh_;
  std::unique_ptr<CompositeOperator> op_;
  std::unique_ptr<Preconditioner> precond_;
  std::unique_ptr<RhsAssembler> rhs_;
  MembraneState membrane_;
  std::vector<double> stim_mask_;
  Vector u_;  ///< all DOFs
  Vector u_free_;
  Vector ones_;  ///< deflation vector in zero-mean mode
  int step_ = 0;
  SolveStats last_;
  double setup_seconds_ = 0.0;
};

}  // namespace emi
