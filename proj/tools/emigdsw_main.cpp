// Command-line harness: single runs, the four parameter sweeps and plot scripts.

#include "emigdsw/experiment.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace emi;

namespace {

struct Options {
  std::string config;
  std::string out = "results";
  std::string precond;
  std::string coarse;
  long long seed = -1;
  int max_cells = -1;
  bool no_timing = false;
  bool quiet = false;
  // single only
  bool dump_matrix = false;
  bool dump_coarse = false;
};

ExperimentSpec make_spec(const Options& o, ExperimentKind kind)
{
  IniFile ini = o.config.empty() ? IniFile{} : IniFile::load(o.config);
  if (!o.coarse.empty()) ini.set("solver", "coarse", o.coarse);
  if (o.seed >= 0) ini.set("conductivity", "seed", std::to_string(o.seed));
  if (o.max_cells >= 0) ini.set("experiment", "max_cells", std::to_string(o.max_cells));
  if (o.no_timing) ini.set("experiment", "wall_time", "false");
  if (!o.precond.empty()) {
    if (kind == ExperimentKind::single) ini.set("solver", "preconditioner", o.precond);
    else ini.set("experiment", "preconditioners", o.precond);
  }
  ExperimentSpec spec = spec_from_ini(ini, kind);
  if (kind == ExperimentKind::single) spec.preconditioners = {spec.base.preconditioner.kind};
  spec.out_dir = o.out;
  return spec;
}

int run_single(const Options& o)
{
  const ExperimentSpec spec = make_spec(o, ExperimentKind::single);
  fs::create_directories(spec.out_dir);
  const SweepPoint point = sweep_points(spec).front();
  Simulation sim(point.config);
  if (o.dump_matrix) write_matrix_market(sim.system().matrix(), spec.out_dir + "/system.mtx");
  if (o.dump_coarse && sim.preconditioner().coarse())
    sim.preconditioner().coarse()->write_csv(spec.out_dir + "/coarse_basis.csv", sim.system());
  const RunResult r = sim.run();

  ExperimentTable table;
  table.kind = ExperimentKind::single;
  table.rows.push_back({"", "single", spec.base.preconditioner.kind, r.k2(), r.iterations(),
                        r.setup_seconds + r.solve_seconds, ""});
  std::ofstream csv(spec.out_dir + "/single.csv");
  write_csv(table, spec, csv);

  std::ofstream steps(spec.out_dir + "/steps.csv");
  steps << "step,time,iterations,k2\n";
  for (const auto& s : r.steps) steps << s.step << ',' << s.time << ',' << s.iterations << ',' << s.k2 << '\n';
  for (const auto& snap : r.snapshots) {
    std::ostringstream name;
    name << spec.out_dir << "/snapshot_t" << snap.time << ".csv";
    sim.write_snapshot_csv(snap, name.str());
  }
  sim.write_state_csv(spec.out_dir + "/membrane_state.csv");

  std::cout << "free DOFs " << sim.system().num_free() << ", steps " << r.steps.size() << "\n"
            << "final step: iterations " << r.iterations() << ", k2 " << r.k2() << "\n"
            << "setup " << r.setup_seconds << " s, solve " << r.solve_seconds << " s\n";
  if (r.min_w < 0.0 || r.max_w > 2.0)
    std::cout << "note: gating variable left [0, 2]: min w = " << r.min_w << ", max w = " << r.max_w << "\n";
  return 0;
}

int run_sweep(const Options& o, ExperimentKind kind)
{
  const ExperimentSpec spec = make_spec(o, kind);
  fs::create_directories(spec.out_dir);
  const ExperimentTable table = run_experiment(spec, o.quiet ? nullptr : &std::cerr);
  const std::string path = spec.out_dir + "/" + to_string(kind) + ".csv";
  {
    std::ofstream csv(path);
    write_csv(table, spec, csv);
  }
  emit_plots(table, spec.out_dir, &std::cerr);
  std::cout << "wrote " << path << " (" << table.rows.size() << " rows, " << table.failures() << " failed)\n";
  return table.failures() > 0 ? 2 : 0;
}

int run_plots(const Options& o)
{
  int written = 0;
  for (const char* name : {"scalability", "optimality", "tau-sweep", "robustness"}) {
    const std::string csv = o.out + "/" + name + ".csv";
    if (!fs::exists(csv)) continue;
    std::ifstream in(csv);
    const auto script = emit_plots(read_csv(in), o.out, &std::cerr);
    if (!script.empty()) {
      std::cout << "wrote " << script << "\n";
      ++written;
    }
  }
  if (written == 0) std::cerr << "warning: no experiment tables found in " << o.out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv)
{
  CLI::App app{"Two-level Schwarz preconditioned EMI simulations"};
  app.require_subcommand(1);
  Options o;

  const auto common = [&o](CLI::App* sub) {
    sub->add_option("--config", o.config, "configuration file")->check(CLI::ExistingFile);
    sub->add_option("--out", o.out, "output directory");
    sub->add_option("--precond", o.precond, "preconditioner")->check(CLI::IsMember({"gdsw", "as", "none"}));
    sub->add_option("--coarse", o.coarse, "GDSW coarse space")
        ->check(CLI::IsMember({"vertex", "vertex-edge", "vertex-linear"}));
    sub->add_option("--seed", o.seed, "seed for the random conductivity distribution")->check(CLI::NonNegativeNumber);
    sub->add_option("--max-cells", o.max_cells, "cap on cells per side")->check(CLI::NonNegativeNumber);
    sub->add_flag("--no-timing", o.no_timing, "leave wall_time_s empty");
    sub->add_flag("-q,--quiet", o.quiet, "no per-point progress");
  };

  auto* single = app.add_subcommand("single", "one simulation");
  common(single);
  single->add_flag("--dump-matrix", o.dump_matrix, "write the system matrix (Matrix Market)");
  single->add_flag("--dump-coarse", o.dump_coarse, "write the coarse basis (dof,column,value)");
  auto* scal = app.add_subcommand("scalability", "grow the number of cells");
  common(scal);
  auto* opt = app.add_subcommand("optimality", "refine the mesh inside a fixed cell grid");
  common(opt);
  auto* tau = app.add_subcommand("tau-sweep", "vary the time step");
  common(tau);
  auto* rob = app.add_subcommand("robustness", "conductivity jumps between cells");
  common(rob);
  auto* plots = app.add_subcommand("plots", "gnuplot scripts from existing tables in --out");
  plots->add_option("--out", o.out, "directory holding the CSV tables");

  CLI11_PARSE(app, argc, argv);

  try {
    if (single->parsed()) return run_single(o);
    if (scal->parsed()) return run_sweep(o, ExperimentKind::scalability);
    if (opt->parsed()) return run_sweep(o, ExperimentKind::optimality);
    if (tau->parsed()) return run_sweep(o, ExperimentKind::tau_sweep);
    if (rob->parsed()) return run_sweep(o, ExperimentKind::robustness);
    if (plots->parsed()) return run_plots(o);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
