#pragma once

/** @file experiment.hpp
    @brief Configuration files, conductivity distributions, parameter sweeps, CSV tables
    and gnuplot scripts for the command-line harness.

    Config grammar (INI-like): `[section]` headers, `key = value` lines, `#` or `;`
    comments, lists separated by commas. Unknown sections or keys are rejected.
*/

#include "emigdsw/sim.hpp"

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace emi {

class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class IniFile {
public:
  static IniFile parse(std::istream& in, const std::string& origin = "<config>");
  static IniFile load(const std::string& path);

  bool has(const std::string& section, const std::string& key) const;
  std::optional<std::string> get(const std::string& section, const std::string& key) const;
  void set(const std::string& section, const std::string& key, const std::string& value);

  const std::map<std::string, std::map<std::string, std::string>>& sections() const { return sections_; }

private:
  std::map<std::string, std::map<std::string, std::string>> sections_;
};

enum class SigmaKind { normal, checkboard, capsule, random };

std::string to_string(SigmaKind kind);
SigmaKind parse_sigma_kind(const std::string& text);

struct SigmaDistribution {
  SigmaKind kind = SigmaKind::normal;
  double base = 3e-3;
  double alpha = 1.0;
  std::uint64_t seed = 1;
};

/// One conductivity per cell, indexed by cell id - 1 (row-major from the bottom row).
/// checkboard: alpha*base where (row+col) is odd. capsule: alpha*base on the centred 4x4 block.
/// random: alpha*(base + U[0, 1e-3]) from a generator seeded with `seed`.
std::vector<double> sigma_map(const SigmaDistribution& dist, int n_cells_x, int n_cells_y);

enum class ExperimentKind { single, scalability, optimality, tau_sweep, robustness };

std::string to_string(ExperimentKind kind);
ExperimentKind parse_experiment_kind(const std::string& text);

struct ExperimentSpec {
  ExperimentKind kind = ExperimentKind::single;
  SimConfig base;                      ///< settings shared by every sweep point
  SigmaDistribution sigma;             ///< cell conductivities for single/scalability/optimality/tau runs
  /// Physical short side of every cell in the sweeps (cm); h = cell_short / elems_short,
  /// so refining a cell keeps its size. Single runs use geometry.h instead.
  double cell_short = 4e-4;
  std::vector<PreconditionerKind> preconditioners{PreconditionerKind::gdsw, PreconditionerKind::additive_schwarz,
                                                  PreconditionerKind::none};

  std::vector<int> cells{2, 4, 8, 12, 16};  ///< scalability: cells per side
  int scalability_elems_short = 4;

  int optimality_cells = 4;
  std::vector<int> lcy{2, 3, 4, 5, 6, 7, 8, 9, 10};

  int tau_cells = 12;
  int tau_elems_short = 4;
  std::vector<double> taus{0.005, 0.01, 0.02, 0.05, 0.1};

  int robustness_cells = 8;
  int robustness_elems_short = 8;
  std::vector<SigmaKind> distributions{SigmaKind::checkboard, SigmaKind::capsule, SigmaKind::random};
  std::vector<double> alphas{1.0, 1e-1, 1e-2, 1e-3, 1e-4};

  int max_cells = 0;        ///< desk-scale cap on cells per side (0: none)
  bool wall_time = true;    ///< false leaves wall_time_s empty so repeated runs give identical bytes
  std::string out_dir = ".";

  void validate() const;
};

/// Builds a spec from a parsed config; missing keys keep their defaults.
ExperimentSpec spec_from_ini(const IniFile& ini, ExperimentKind kind);

/// Resolved configuration as `key = value` lines (same grammar as the input files).
std::string describe(const ExperimentSpec& spec);

struct ResultRow {
  std::string distribution;  ///< robustness only
  std::string key;           ///< sweep value (cells per side, Lcy, tau, alpha)
  PreconditionerKind preconditioner = PreconditionerKind::gdsw;
  double k2 = 0.0;
  int iterations = 0;
  double wall_time_s = 0.0;
  std::string error;  ///< empty on success
};

struct ExperimentTable {
  ExperimentKind kind = ExperimentKind::single;
  std::vector<ResultRow> rows;

  std::string key_name() const;
  int failures() const;
  const ResultRow* find(const std::string& key, PreconditionerKind p, const std::string& distribution = "") const;
};

/// One sweep point as a full simulation config.
struct SweepPoint {
  std::string distribution;
  std::string key;
  SimConfig config;
};

std::vector<SweepPoint> sweep_points(const ExperimentSpec& spec);

/// Runs every sweep point for every preconditioner in deterministic order. Per-point
/// failures are stored in the row's error column and the sweep continues.
ExperimentTable run_experiment(const ExperimentSpec& spec, std::ostream* log = nullptr);

void write_csv(const ExperimentTable& table, const ExperimentSpec& spec, std::ostream& out);
ExperimentTable read_csv(std::istream& in);

/// Writes `<kind>.gp` into `out_dir` with the data embedded. Returns the script path,
/// or an empty string (after a warning on `log`) when the table has no successful rows.
std::string emit_plots(const ExperimentTable& table, const std::string& out_dir, std::ostream* log = nullptr);

}  // namespace emi
