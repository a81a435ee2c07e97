#include "emigdsw/sim.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace emi {

int SimConfig::num_steps() const { return static_cast<int>(std::llround(t_end / tau)); }

void SimConfig::validate() const
{
  geometry.validate();
  ionic.validate();
  if (!(tau > 0.0)) throw SimulationError("sim: tau must be positive");
  if (!(t_end >= tau)) throw SimulationError("sim: t_end must be at least one time step");
  if (!(tol > 0.0)) throw SimulationError("sim: tol must be positive");
  if (max_iterations < 1) throw SimulationError("sim: max_iterations must be positive");
  if (dirichlet.empty() && !zero_mean)
    throw SimulationError("sim: empty Dirichlet set requires zero_mean = true");
}

std::vector<double> compute_jumps(const Vector& u, const MeshTopology& mesh)
{
  const auto& nodes = mesh.interface_nodes();
  std::vector<double> v(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) v[i] = u(nodes[i].dof_a) - u(nodes[i].dof_b);
  return v;
}

std::vector<double> stimulus_mask(const MeshTopology& mesh, const StimulusConfig& stim)
{
  std::vector<double> mask(mesh.interface_nodes().size(), 0.0);
  for (const auto& e : mesh.edges()) {
    if (e.kind != InterfaceKind::membrane) continue;
    const auto& cell = mesh.subdomain(e.side_a);
    if (cell.row >= stim.cells_y || cell.col >= stim.cells_x) continue;
    for (const int n : e.nodes) mask[static_cast<std::size_t>(n)] = 1.0;
  }
  return mask;
}

std::vector<double> cell_activation_times(const MeshTopology& mesh, const std::vector<double>& edge_activation)
{
  if (edge_activation.size() != mesh.edges().size()) throw SimulationError("activation times: one entry per edge expected");
  std::vector<double> t(static_cast<std::size_t>(mesh.num_cells()), std::numeric_limits<double>::infinity());
  for (std::size_t e = 0; e < edge_activation.size(); ++e) {
    const auto& edge = mesh.edges()[e];
    if (edge.kind != InterfaceKind::membrane) continue;
    auto& slot = t[static_cast<std::size_t>(edge.side_a - 1)];
    slot = std::min(slot, edge_activation[e]);
  }
  return t;
}

Simulation::Simulation(SimConfig config) : config_(std::move(config))
{
  config_.validate();
  const auto t0 = std::chrono::steady_clock::now();
  config_.ionic.validate();
  mesh_ = std::make_unique<MeshTopology>(build_geometry(config_.geometry, config_.sigma));
  const DirichletSpec dir = config_.zero_mean ? DirichletSpec::none() : config_.dirichlet;
  const DofPartition part = classify_dofs(*mesh_, dir);
  op_ = std::make_unique<CompositeOperator>(assemble_system(
      config_.tau, assemble_stiffness(*mesh_),
      assemble_interface_mass(*mesh_, config_.ionic.c_m, config_.edge_mass), part, config_.zero_mean));
  precond_ = std::make_unique<Preconditioner>(*op_, *mesh_, config_.preconditioner);
  rhs_ = std::make_unique<RhsAssembler>(*mesh_, *op_, config_.edge_mass);

  u_ = Vector::Zero(mesh_->num_dofs());
  for (const auto& s : mesh_->subdomains())
    if (s.kind == SubdomainKind::cell) u_.segment(s.dof_offset, s.dof_count).setConstant(config_.u_intracellular0);
  membrane_ = MembraneState::resting(*mesh_, config_.ionic, config_.w0);
  membrane_.v = compute_jumps(u_, *mesh_);
  stim_mask_ = stimulus_mask(*mesh_, config_.stimulus);
  u_free_ = op_->restrict_to_free(u_);
  if (config_.zero_mean) ones_ = Vector::Ones(op_->num_free());
  setup_seconds_ = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

const SolveStats& Simulation::step()
{
  const double t = time();
  const auto& stim_cfg = config_.stimulus;
  const bool stim_on = t >= stim_cfg.start - 1e-12 && t < stim_cfg.start + stim_cfg.duration - 1e-12;
  std::vector<double> stim(stim_mask_.size());
  for (std::size_t i = 0; i < stim.size(); ++i) stim[i] = stim_on ? stim_cfg.amplitude * stim_mask_[i] : 0.0;

  const std::vector<double> reaction = membrane_step(membrane_, config_.ionic, config_.tau, stim);
  const Vector f = rhs_->assemble(u_, reaction, config_.tau);

  Vector x = config_.initial_guess == InitialGuess::previous ? u_free_ : Vector::Zero(op_->num_free());
  PcgOptions opts;
  opts.tol = config_.tol;
  opts.max_iterations = config_.max_iterations;
  if (config_.zero_mean) opts.deflate = &ones_;
  last_ = pcg(matrix_operator(op_->matrix()), f, precond_->as_operator(), x, opts);
  if (!last_.converged) {
    std::ostringstream msg;
    msg << "time step " << step_ + 1 << ": PCG did not converge in " << last_.iterations << " iterations; last residuals:";
    const auto& h = last_.residual_history;
    for (std::size_t k = h.size() > 5 ? h.size() - 5 : 0; k < h.size(); ++k) msg << ' ' << h[k];
    throw SimulationError(msg.str());
  }

  u_free_ = std::move(x);
  u_ = op_->prolong(u_free_);
  if (config_.zero_mean) {
    const auto& fr = mesh_->frame();
    const double mean = u_.segment(fr.dof_offset, fr.dof_count).mean();
    u_.array() -= mean;
    u_free_.array() -= mean;
  }
  membrane_.v = compute_jumps(u_, *mesh_);
  ++step_;
  return last_;
}

RunResult Simulation::run()
{
  RunResult result;
  result.setup_seconds = setup_seconds_;
  const int n = config_.num_steps();
  std::vector<std::size_t> membrane_edges;
  for (std::size_t e = 0; e < mesh_->edges().size(); ++e)
    if (mesh_->edges()[e].kind == InterfaceKind::membrane) membrane_edges.push_back(e);
  result.activation_time.assign(mesh_->edges().size(), std::numeric_limits<double>::infinity());
  result.min_w = std::numeric_limits<double>::infinity();
  result.max_w = -std::numeric_limits<double>::infinity();

  std::vector<double> pending = config_.snapshot_times;
  std::sort(pending.begin(), pending.end());
  std::size_t next_snap = 0;
  while (next_snap < pending.size() && pending[next_snap] <= 0.5 * config_.tau)
    result.snapshots.push_back({pending[next_snap++], u_});

  const auto t0 = std::chrono::steady_clock::now();
  for (int k = 0; k < n; ++k) {
    const auto& stats = step();
    result.steps.push_back({step_, time(), stats.iterations, stats.k2, stats.converged});
    for (std::size_t i = 0; i < membrane_.size(); ++i)
      if (membrane_.kind[i] == InterfaceKind::membrane) {
        result.min_w = std::min(result.min_w, membrane_.w[i]);
        result.max_w = std::max(result.max_w, membrane_.w[i]);
      }
    for (const auto e : membrane_edges) {
      if (std::isfinite(result.activation_time[e])) continue;
      const auto& nodes = mesh_->edges()[e].nodes;
      double mean = 0.0;
      for (const int nd : nodes) mean += membrane_.v[static_cast<std::size_t>(nd)];
      mean /= static_cast<double>(nodes.size());
      if (mean > activation_threshold) result.activation_time[e] = time();
    }
    while (next_snap < pending.size() && pending[next_snap] <= time() + 0.5 * config_.tau)
      result.snapshots.push_back({pending[next_snap++], u_});
  }
  result.solve_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  result.final_stats = last_;
  return result;
}

void Simulation::write_snapshot_csv(const Snapshot& snap, const std::string& path) const
{
  std::ofstream out(path);
  if (!out) throw SimulationError("cannot open " + path);
  out << "# t = " << snap.time << " ms\n";
  out << "x,y,subdomain,u\n" << std::setprecision(10);
  for (int d = 0; d < mesh_->num_dofs(); ++d) {
    const auto c = mesh_->dof_coords(d);
    out << c[0] << ',' << c[1] << ',' << mesh_->dof_subdomain(d) << ',' << snap.u(d) << '\n';
  }
}

void Simulation::write_state_csv(const std::string& path) const
{
  std::ofstream out(path);
  if (!out) throw SimulationError("cannot open " + path);
  out << "node,kind,x,y,v,w\n" << std::setprecision(12);
  const auto& nodes = mesh_->interface_nodes();
  for (std::size_t i = 0; i < nodes.size(); ++i)
    out << i << ',' << (nodes[i].kind == InterfaceKind::membrane ? "membrane" : "gap_junction") << ','
        << nodes[i].at.x * mesh_->h() << ',' << nodes[i].at.y * mesh_->h() << ',' << membrane_.v[i] << ','
        << membrane_.w[i] << '\n';
}

}  // namespace emi
