#include "emigdsw/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <random>
#include <set>
#include <sstream>

namespace emi {

namespace {

std::string trim(const std::string& s)
{
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep)
{
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) out.push_back(trim(item));
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

std::string fmt(double v)
{
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

template <class T>
std::string join(const std::vector<T>& items, const auto& to_text)
{
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i > 0) out += ", ";
    out += to_text(items[i]);
  }
  return out;
}

double parse_double(const std::string& text, const std::string& where)
{
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != text.size()) throw ConfigError(where + ": expected a number, got '" + text + "'");
  return v;
}

long long parse_integer(const std::string& text, const std::string& where)
{
  std::size_t used = 0;
  long long v = 0;
  try {
    v = std::stoll(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != text.size()) throw ConfigError(where + ": expected an integer, got '" + text + "'");
  return v;
}

int parse_int(const std::string& text, const std::string& where)
{
  const long long v = parse_integer(text, where);
  if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max())
    throw ConfigError(where + ": value out of range");
  return static_cast<int>(v);
}

bool parse_bool(const std::string& text, const std::string& where)
{
  if (text == "true" || text == "yes" || text == "1" || text == "on") return true;
  if (text == "false" || text == "no" || text == "0" || text == "off") return false;
  throw ConfigError(where + ": expected true or false, got '" + text + "'");
}

std::string sanitize(std::string s)
{
  for (char& c : s)
    if (c == ',' || c == '\n' || c == '\r') c = ';';
  return s;
}

}  // namespace

IniFile IniFile::parse(std::istream& in, const std::string& origin)
{
  IniFile ini;
  std::string line;
  std::string section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find_first_of("#;");
    const std::string body = trim(hash == std::string::npos ? line : line.substr(0, hash));
    if (body.empty()) continue;
    const std::string where = origin + ":" + std::to_string(lineno);
    if (body.front() == '[') {
      if (body.back() != ']') throw ConfigError(where + ": malformed section header");
      section = trim(body.substr(1, body.size() - 2));
      if (section.empty()) throw ConfigError(where + ": empty section name");
      ini.sections_[section];
      continue;
    }
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected 'key = value'");
    if (section.empty()) throw ConfigError(where + ": key outside of a section");
    const std::string key = trim(body.substr(0, eq));
    if (key.empty()) throw ConfigError(where + ": empty key");
    ini.sections_[section][key] = trim(body.substr(eq + 1));
  }
  return ini;
}

IniFile IniFile::load(const std::string& path)
{
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  return parse(in, path);
}

bool IniFile::has(const std::string& section, const std::string& key) const { return get(section, key).has_value(); }

std::optional<std::string> IniFile::get(const std::string& section, const std::string& key) const
{
  const auto s = sections_.find(section);
  if (s == sections_.end()) return std::nullopt;
  const auto k = s->second.find(key);
  if (k == s->second.end()) return std::nullopt;
  return k->second;
}

void IniFile::set(const std::string& section, const std::string& key, const std::string& value)
{
  sections_[section][key] = value;
}

std::string to_string(SigmaKind kind)
{
  switch (kind) {
  case SigmaKind::normal: return "normal";
  case SigmaKind::checkboard: return "checkboard";
  case SigmaKind::capsule: return "capsule";
  case SigmaKind::random: return "random";
  }
  return "?";
}

SigmaKind parse_sigma_kind(const std::string& text)
{
  if (text == "normal") return SigmaKind::normal;
  if (text == "checkboard" || text == "checkerboard") return SigmaKind::checkboard;
  if (text == "capsule") return SigmaKind::capsule;
  if (text == "random") return SigmaKind::random;
  throw ConfigError("unknown conductivity distribution '" + text + "'");
}

std::vector<double> sigma_map(const SigmaDistribution& dist, int nx, int ny)
{
  if (nx < 1 || ny < 1) throw ConfigError("sigma_map: need at least one cell");
  if (!(dist.base > 0.0) || !(dist.alpha > 0.0)) throw ConfigError("sigma_map: base and alpha must be positive");
  std::vector<double> s(static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny), dist.base);
  const auto at = [&](int row, int col) -> double& { return s[static_cast<std::size_t>(row * nx + col)]; };
  switch (dist.kind) {
  case SigmaKind::normal: break;
  case SigmaKind::checkboard:
    for (int r = 0; r < ny; ++r)
      for (int c = 0; c < nx; ++c)
        if ((r + c) % 2 == 1) at(r, c) = dist.alpha * dist.base;
    break;
  case SigmaKind::capsule: {
    if (nx < 4 || ny < 4) throw ConfigError("capsule distribution needs at least 4x4 cells");
    const int r0 = (ny - 4) / 2, c0 = (nx - 4) / 2;
    for (int r = r0; r < r0 + 4; ++r)
      for (int c = c0; c < c0 + 4; ++c) at(r, c) = dist.alpha * dist.base;
    break;
  }
  case SigmaKind::random: {
    std::mt19937_64 gen(dist.seed);
    // 53 random bits mapped to [0, 1); independent of the standard library's distributions.
    for (auto& v : s) v = dist.alpha * (dist.base + 1e-3 * static_cast<double>(gen() >> 11) * 0x1.0p-53);
    break;
  }
  }
  return s;
}

std::string to_string(ExperimentKind kind)
{
  switch (kind) {
  case ExperimentKind::single: return "single";
  case ExperimentKind::scalability: return "scalability";
  case ExperimentKind::optimality: return "optimality";
  case ExperimentKind::tau_sweep: return "tau-sweep";
  case ExperimentKind::robustness: return "robustness";
  }
  return "?";
}

ExperimentKind parse_experiment_kind(const std::string& text)
{
  if (text == "single") return ExperimentKind::single;
  if (text == "scalability") return ExperimentKind::scalability;
  if (text == "optimality") return ExperimentKind::optimality;
  if (text == "tau-sweep" || text == "tau_sweep") return ExperimentKind::tau_sweep;
  if (text == "robustness") return ExperimentKind::robustness;
  throw ConfigError("unknown experiment '" + text + "'");
}

void ExperimentSpec::validate() const
{
  if (preconditioners.empty()) throw ConfigError("experiment: preconditioner list is empty");
  if (max_cells < 0) throw ConfigError("experiment: max_cells must be non-negative");
  if (!(cell_short > 0.0)) throw ConfigError("experiment: cell_short must be positive");
  const auto positive = [](const auto& list, const char* name) {
    if (list.empty()) throw ConfigError(std::string("experiment: ") + name + " list is empty");
    for (const auto v : list)
      if (!(v > 0)) throw ConfigError(std::string("experiment: ") + name + " entries must be positive");
  };
  switch (kind) {
  case ExperimentKind::single: break;
  case ExperimentKind::scalability: positive(cells, "cells"); break;
  case ExperimentKind::optimality:
    positive(lcy, "lcy");
    break;
  case ExperimentKind::tau_sweep: positive(taus, "taus"); break;
  case ExperimentKind::robustness:
    positive(alphas, "alphas");
    if (distributions.empty()) throw ConfigError("experiment: distributions list is empty");
    break;
  }
}

ExperimentSpec spec_from_ini(const IniFile& ini, ExperimentKind kind)
{
  ExperimentSpec spec;
  spec.kind = kind;
  SimConfig& c = spec.base;

  using Setter = std::function<void(const std::string&, const std::string&)>;
  const auto num = [](double& dst) -> Setter {
    return [&dst](const std::string& v, const std::string& w) { dst = parse_double(v, w); };
  };
  const auto integer = [](int& dst) -> Setter {
    return [&dst](const std::string& v, const std::string& w) { dst = parse_int(v, w); };
  };
  const auto flag = [](bool& dst) -> Setter {
    return [&dst](const std::string& v, const std::string& w) { dst = parse_bool(v, w); };
  };
  const auto ints = [](std::vector<int>& dst) -> Setter {
    return [&dst](const std::string& v, const std::string& w) {
      dst.clear();
      for (const auto& item : split(v, ',')) dst.push_back(parse_int(item, w));
    };
  };
  const auto nums = [](std::vector<double>& dst) -> Setter {
    return [&dst](const std::string& v, const std::string& w) {
      dst.clear();
      for (const auto& item : split(v, ',')) dst.push_back(parse_double(item, w));
    };
  };
  const auto guarded = [](const Setter& inner) -> Setter {
    return [inner](const std::string& v, const std::string& w) {
      try {
        inner(v, w);
      } catch (const ConfigError&) {
        throw;
      } catch (const std::exception& e) {
        throw ConfigError(w + ": " + e.what());
      }
    };
  };

  std::map<std::string, std::map<std::string, Setter>> keys;
  auto& g = keys["geometry"];
  g["cells_x"] = integer(c.geometry.n_cells_x);
  g["cells_y"] = integer(c.geometry.n_cells_y);
  g["cells"] = [&c](const std::string& v, const std::string& w) {
    c.geometry.n_cells_x = c.geometry.n_cells_y = parse_int(v, w);
  };
  g["elems_short"] = integer(c.geometry.elems_short);
  g["elems_long"] = integer(c.geometry.elems_long);
  g["frame_elems"] = integer(c.geometry.frame_elems);
  g["h"] = num(c.geometry.h);

  auto& s = keys["conductivity"];
  s["extracellular"] = num(c.sigma.extracellular);
  s["cell"] = num(spec.sigma.base);
  s["distribution"] = guarded([&spec](const std::string& v, const std::string&) { spec.sigma.kind = parse_sigma_kind(v); });
  s["alpha"] = num(spec.sigma.alpha);
  s["seed"] = [&spec](const std::string& v, const std::string& w) {
    const long long x = parse_integer(v, w);
    if (x < 0) throw ConfigError(w + ": seed must be non-negative");
    spec.sigma.seed = static_cast<std::uint64_t>(x);
  };

  auto& io = keys["ionic"];
  io["k"] = num(c.ionic.k);
  io["a"] = num(c.ionic.a);
  io["eps0"] = num(c.ionic.eps0);
  io["mu1"] = num(c.ionic.mu1);
  io["mu2"] = num(c.ionic.mu2);
  io["v_rest"] = num(c.ionic.v_rest);
  io["v_amp"] = num(c.ionic.v_amp);
  io["c_m"] = num(c.ionic.c_m);
  io["i_scale"] = num(c.ionic.i_scale);
  io["time_scale"] = num(c.ionic.time_scale);
  io["kappa_g"] = num(c.ionic.kappa_g);

  auto& sm = keys["sim"];
  sm["tau"] = num(c.tau);
  sm["t_end"] = num(c.t_end);
  sm["tol"] = num(c.tol);
  sm["max_iterations"] = integer(c.max_iterations);
  sm["initial_guess"] = [&c](const std::string& v, const std::string& w) {
    if (v == "previous") c.initial_guess = InitialGuess::previous;
    else if (v == "zero") c.initial_guess = InitialGuess::zero;
    else throw ConfigError(w + ": initial_guess is 'previous' or 'zero'");
  };
  sm["w0"] = num(c.w0);
  sm["u_intracellular0"] = num(c.u_intracellular0);
  sm["dirichlet"] = guarded([&c](const std::string& v, const std::string&) { c.dirichlet = DirichletSpec::parse(v); });
  sm["zero_mean"] = flag(c.zero_mean);
  sm["edge_mass"] = [&c](const std::string& v, const std::string& w) {
    if (v == "consistent") c.edge_mass = EdgeMass::consistent;
    else if (v == "lumped") c.edge_mass = EdgeMass::lumped;
    else throw ConfigError(w + ": edge_mass is 'consistent' or 'lumped'");
  };
  sm["snapshots"] = nums(c.snapshot_times);

  auto& so = keys["solver"];
  so["preconditioner"] = guarded(
      [&c](const std::string& v, const std::string&) { c.preconditioner.kind = parse_preconditioner(v); });
  so["coarse"] = guarded([&c](const std::string& v, const std::string&) { c.preconditioner.coarse = parse_coarse_mode(v); });
  so["overlap"] = integer(c.preconditioner.overlap_layers);

  auto& st = keys["stimulus"];
  st["amplitude"] = num(c.stimulus.amplitude);
  st["start"] = num(c.stimulus.start);
  st["duration"] = num(c.stimulus.duration);
  st["cells_x"] = integer(c.stimulus.cells_x);
  st["cells_y"] = integer(c.stimulus.cells_y);

  auto& ex = keys["experiment"];
  ex["preconditioners"] = guarded([&spec](const std::string& v, const std::string&) {
    spec.preconditioners.clear();
    for (const auto& item : split(v, ',')) spec.preconditioners.push_back(parse_preconditioner(item));
  });
  ex["cells"] = ints(spec.cells);
  ex["scalability_elems_short"] = integer(spec.scalability_elems_short);
  ex["optimality_cells"] = integer(spec.optimality_cells);
  ex["lcy"] = ints(spec.lcy);
  ex["cell_short"] = num(spec.cell_short);
  ex["tau_cells"] = integer(spec.tau_cells);
  ex["tau_elems_short"] = integer(spec.tau_elems_short);
  ex["taus"] = nums(spec.taus);
  ex["robustness_cells"] = integer(spec.robustness_cells);
  ex["robustness_elems_short"] = integer(spec.robustness_elems_short);
  ex["distributions"] = guarded([&spec](const std::string& v, const std::string&) {
    spec.distributions.clear();
    for (const auto& item : split(v, ',')) spec.distributions.push_back(parse_sigma_kind(item));
  });
  ex["alphas"] = nums(spec.alphas);
  ex["max_cells"] = integer(spec.max_cells);
  ex["wall_time"] = flag(spec.wall_time);
  ex["out"] = [&spec](const std::string& v, const std::string&) { spec.out_dir = v; };

  for (const auto& [section, entries] : ini.sections()) {
    const auto sec = keys.find(section);
    if (sec == keys.end()) throw ConfigError("unknown config section [" + section + "]");
    for (const auto& [key, value] : entries) {
      const auto k = sec->second.find(key);
      if (k == sec->second.end()) throw ConfigError("unknown key '" + key + "' in [" + section + "]");
      k->second(value, "[" + section + "] " + key);
    }
  }
  spec.validate();
  return spec;
}

std::string describe(const ExperimentSpec& spec)
{
  const SimConfig& c = spec.base;
  std::ostringstream o;
  const auto ifmt = [](int v) { return std::to_string(v); };
  o << "[geometry]\n"
    << "cells_x = " << c.geometry.n_cells_x << "\ncells_y = " << c.geometry.n_cells_y
    << "\nelems_short = " << c.geometry.elems_short << "\nelems_long = " << c.geometry.resolved_elems_long()
    << "\nframe_elems = " << c.geometry.resolved_frame_elems() << "\nh = " << fmt(c.geometry.h) << "\n";
  o << "[conductivity]\n"
    << "extracellular = " << fmt(c.sigma.extracellular) << "\ncell = " << fmt(spec.sigma.base)
    << "\ndistribution = " << to_string(spec.sigma.kind) << "\nalpha = " << fmt(spec.sigma.alpha)
    << "\nseed = " << spec.sigma.seed << "\n";
  const auto& p = c.ionic;
  o << "[ionic]\n"
    << "k = " << fmt(p.k) << "\na = " << fmt(p.a) << "\neps0 = " << fmt(p.eps0) << "\nmu1 = " << fmt(p.mu1)
    << "\nmu2 = " << fmt(p.mu2) << "\nv_rest = " << fmt(p.v_rest) << "\nv_amp = " << fmt(p.v_amp)
    << "\nc_m = " << fmt(p.c_m) << "\ni_scale = " << fmt(p.resolved_i_scale()) << "\ntime_scale = " << fmt(p.time_scale)
    << "\nkappa_g = " << fmt(p.kappa_g) << "\n";
  o << "[sim]\n"
    << "tau = " << fmt(c.tau) << "\nt_end = " << fmt(c.t_end) << "\ntol = " << fmt(c.tol)
    << "\nmax_iterations = " << c.max_iterations
    << "\ninitial_guess = " << (c.initial_guess == InitialGuess::previous ? "previous" : "zero")
    << "\nw0 = " << fmt(c.w0) << "\nu_intracellular0 = " << fmt(c.u_intracellular0)
    << "\ndirichlet = " << c.dirichlet.to_string() << "\nzero_mean = " << (c.zero_mean ? "true" : "false")
    << "\nedge_mass = " << (c.edge_mass == EdgeMass::consistent ? "consistent" : "lumped") << "\n";
  if (!c.snapshot_times.empty()) o << "snapshots = " << join(c.snapshot_times, fmt) << "\n";
  o << "[solver]\n"
    << "preconditioner = " << to_string(c.preconditioner.kind) << "\ncoarse = " << to_string(c.preconditioner.coarse)
    << "\noverlap = " << c.preconditioner.overlap_layers << "\n";
  o << "[stimulus]\n"
    << "amplitude = " << fmt(c.stimulus.amplitude) << "\nstart = " << fmt(c.stimulus.start)
    << "\nduration = " << fmt(c.stimulus.duration) << "\ncells_x = " << c.stimulus.cells_x
    << "\ncells_y = " << c.stimulus.cells_y << "\n";
  o << "[experiment]\n"
    << "preconditioners = " << join(spec.preconditioners, [](PreconditionerKind k) { return to_string(k); }) << "\n";
  switch (spec.kind) {
  case ExperimentKind::single: break;
  case ExperimentKind::scalability:
    o << "cells = " << join(spec.cells, ifmt) << "\nscalability_elems_short = " << spec.scalability_elems_short << "\n";
    break;
  case ExperimentKind::optimality:
    o << "optimality_cells = " << spec.optimality_cells << "\nlcy = " << join(spec.lcy, ifmt)
      << "\n";
    break;
  case ExperimentKind::tau_sweep:
    o << "tau_cells = " << spec.tau_cells << "\ntau_elems_short = " << spec.tau_elems_short
      << "\ntaus = " << join(spec.taus, fmt) << "\n";
    break;
  case ExperimentKind::robustness:
    o << "robustness_cells = " << spec.robustness_cells << "\nrobustness_elems_short = " << spec.robustness_elems_short
      << "\ndistributions = " << join(spec.distributions, [](SigmaKind k) { return to_string(k); })
      << "\nalphas = " << join(spec.alphas, fmt) << "\n";
    break;
  }
  o << "cell_short = " << fmt(spec.cell_short) << "\nmax_cells = " << spec.max_cells << "\nwall_time = " << (spec.wall_time ? "true" : "false") << "\n";
  return o.str();
}

std::string ExperimentTable::key_name() const
{
  switch (kind) {
  case ExperimentKind::single: return "run";
  case ExperimentKind::scalability: return "cells";
  case ExperimentKind::optimality: return "Lcy";
  case ExperimentKind::tau_sweep: return "tau";
  case ExperimentKind::robustness: return "alpha";
  }
  return "key";
}

int ExperimentTable::failures() const
{
  return static_cast<int>(std::count_if(rows.begin(), rows.end(), [](const ResultRow& r) { return !r.error.empty(); }));
}

const ResultRow* ExperimentTable::find(const std::string& key, PreconditionerKind p, const std::string& distribution) const
{
  for (const auto& r : rows)
    if (r.key == key && r.preconditioner == p && r.distribution == distribution) return &r;
  return nullptr;
}

std::vector<SweepPoint> sweep_points(const ExperimentSpec& spec)
{
  spec.validate();
  const auto capped = [&](int n) { return spec.max_cells > 0 ? std::min(n, spec.max_cells) : n; };
  const auto with_cells = [&](SimConfig c, int n, int elems_short, const SigmaDistribution& dist) {
    c.geometry.n_cells_x = c.geometry.n_cells_y = n;
    c.geometry.elems_short = elems_short;
    c.geometry.h = spec.cell_short / elems_short;
    c.geometry.elems_long = 0;
    c.geometry.frame_elems = 0;
    c.sigma.cells = sigma_map(dist, n, n);
    return c;
  };

  std::vector<SweepPoint> points;
  switch (spec.kind) {
  case ExperimentKind::single: {
    SimConfig c = spec.base;
    c.sigma.cells = sigma_map(spec.sigma, c.geometry.n_cells_x, c.geometry.n_cells_y);
    points.push_back({"", "single", c});
    break;
  }
  case ExperimentKind::scalability:
    for (const int n : spec.cells) {
      if (spec.max_cells > 0 && n > spec.max_cells) continue;
      points.push_back({"", std::to_string(n), with_cells(spec.base, n, spec.scalability_elems_short, spec.sigma)});
    }
    break;
  case ExperimentKind::optimality:
    for (const int l : spec.lcy) {
      points.push_back({"", std::to_string(l), with_cells(spec.base, capped(spec.optimality_cells), l, spec.sigma)});
    }
    break;
  case ExperimentKind::tau_sweep:
    for (const double t : spec.taus) {
      SimConfig c = with_cells(spec.base, capped(spec.tau_cells), spec.tau_elems_short, spec.sigma);
      c.tau = t;
      points.push_back({"", fmt(t), c});
    }
    break;
  case ExperimentKind::robustness:
    for (const SigmaKind k : spec.distributions)
      for (const double a : spec.alphas) {
        if (k == SigmaKind::random && a == 1.0) continue;
        SigmaDistribution d = spec.sigma;
        d.kind = k;
        d.alpha = a;
        points.push_back({to_string(k), fmt(a), with_cells(spec.base, capped(spec.robustness_cells),
                                                           spec.robustness_elems_short, d)});
      }
    break;
  }
  return points;
}

ExperimentTable run_experiment(const ExperimentSpec& spec, std::ostream* log)
{
  ExperimentTable table;
  table.kind = spec.kind;
  for (const auto& point : sweep_points(spec)) {
    for (const auto pk : spec.preconditioners) {
      ResultRow row;
      row.distribution = point.distribution;
      row.key = point.key;
      row.preconditioner = pk;
      SimConfig c = point.config;
      c.preconditioner.kind = pk;
      const auto t0 = std::chrono::steady_clock::now();
      double min_w = 0.0, max_w = 0.0;
      try {
        Simulation sim(c);
        const RunResult r = sim.run();
        row.k2 = r.k2();
        row.iterations = r.iterations();
        min_w = r.min_w;
        max_w = r.max_w;
      } catch (const std::exception& e) {
        row.error = sanitize(e.what());
      }
      row.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      if (log != nullptr) {
        *log << '[' << to_string(spec.kind) << "] ";
        if (!row.distribution.empty()) *log << row.distribution << ' ';
        *log << table.key_name() << '=' << row.key << ' ' << to_string(pk) << ": ";
        if (row.error.empty())
          *log << "it=" << row.iterations << " k2=" << row.k2 << " (" << std::fixed << std::setprecision(1)
               << row.wall_time_s << std::defaultfloat << std::setprecision(6) << " s)";
        else
          *log << "FAILED: " << row.error;
        *log << '\n';
        if (row.error.empty() && (min_w < 0.0 || max_w > 2.0))
          *log << "  note: gating variable left [0, 2]: min w = " << min_w << ", max w = " << max_w << '\n';
      }
      table.rows.push_back(std::move(row));
    }
  }
  return table;
}

void write_csv(const ExperimentTable& table, const ExperimentSpec& spec, std::ostream& out)
{
  out << "# emigdsw " << to_string(table.kind) << "\n";
  std::istringstream cfg(describe(spec));
  for (std::string line; std::getline(cfg, line);) out << "# " << line << '\n';
  if (table.kind == ExperimentKind::robustness) out << "distribution,";
  out << table.key_name() << ",preconditioner,k2,iterations,wall_time_s,error\n";
  for (const auto& r : table.rows) {
    if (table.kind == ExperimentKind::robustness) out << r.distribution << ',';
    out << r.key << ',' << to_string(r.preconditioner) << ',';
    if (r.error.empty()) out << std::setprecision(10) << r.k2 << ',' << r.iterations;
    else out << ',';
    out << ',';
    if (spec.wall_time) out << std::fixed << std::setprecision(3) << r.wall_time_s << std::defaultfloat;
    out << ',' << r.error << '\n';
  }
}

ExperimentTable read_csv(std::istream& in)
{
  ExperimentTable table;
  std::vector<std::string> header;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    if (header.empty()) {
      header = split(line, ',');
      continue;
    }
    const auto cols = split(line, ',');
    if (cols.size() != header.size()) throw ConfigError("csv: row has " + std::to_string(cols.size()) + " fields, header has " + std::to_string(header.size()));
    std::map<std::string, std::string> f;
    for (std::size_t i = 0; i < cols.size(); ++i) f[header[i]] = cols[i];
    ResultRow r;
    r.distribution = f.count("distribution") ? f["distribution"] : "";
    r.key = cols[header.front() == "distribution" && header.size() > 1 ? 1 : 0];
    r.preconditioner = parse_preconditioner(f["preconditioner"]);
    r.error = f["error"];
    if (r.error.empty()) {
      r.k2 = parse_double(f["k2"], "csv k2");
      r.iterations = parse_int(f["iterations"], "csv iterations");
    }
    if (!f["wall_time_s"].empty()) r.wall_time_s = parse_double(f["wall_time_s"], "csv wall_time_s");
    table.rows.push_back(std::move(r));
  }
  if (header.empty()) return table;
  const std::set<std::string> have(header.begin(), header.end());
  for (const char* need : {"preconditioner", "k2", "iterations", "wall_time_s", "error"})
    if (!have.count(need)) throw ConfigError(std::string("csv: missing column '") + need + "'");
  const std::string key = header.front() == "distribution" ? (header.size() > 1 ? header[1] : "") : header.front();
  if (key == "run") table.kind = ExperimentKind::single;
  else if (key == "cells") table.kind = ExperimentKind::scalability;
  else if (key == "Lcy") table.kind = ExperimentKind::optimality;
  else if (key == "tau") table.kind = ExperimentKind::tau_sweep;
  else if (key == "alpha" && header.front() == "distribution") table.kind = ExperimentKind::robustness;
  else throw ConfigError("csv: unrecognised key column '" + key + "'");
  return table;
}

namespace {

std::string cell(const ResultRow* r, bool k2)
{
  if (r == nullptr || !r->error.empty()) return "NaN";
  return k2 ? fmt(r->k2) : std::to_string(r->iterations);
}

std::vector<std::string> ordered_keys(const ExperimentTable& t, const std::string& distribution = "")
{
  std::vector<std::string> keys;
  for (const auto& r : t.rows)
    if (r.distribution == distribution && std::find(keys.begin(), keys.end(), r.key) == keys.end()) keys.push_back(r.key);
  return keys;
}

}  // namespace

std::string emit_plots(const ExperimentTable& table, const std::string& out_dir, std::ostream* log)
{
  if (table.rows.size() == static_cast<std::size_t>(table.failures())) {
    if (log != nullptr) *log << "warning: " << to_string(table.kind) << " table is empty, no plot written\n";
    return {};
  }
  const std::string name = to_string(table.kind);
  const std::string path = out_dir + "/" + name + ".gp";
  std::ofstream o(path);
  if (!o) throw ConfigError("cannot write " + path);
  o << "# gnuplot script generated by emigdsw; run with: gnuplot " << name << ".gp\n";
  o << "set terminal svg size 1200,900 dynamic\nset output '" << name << ".svg'\n";
  o << "set grid\nset key top left\n";

  if (table.kind == ExperimentKind::robustness) {
    std::vector<std::string> dists;
    for (const auto& r : table.rows)
      if (std::find(dists.begin(), dists.end(), r.distribution) == dists.end()) dists.push_back(r.distribution);
    std::vector<std::string> alphas;
    for (const auto& d : dists)
      for (const auto& k : ordered_keys(table, d))
        if (std::find(alphas.begin(), alphas.end(), k) == alphas.end()) alphas.push_back(k);
    PreconditionerKind shown = table.rows.front().preconditioner;
    for (const auto& r : table.rows)
      if (r.preconditioner == PreconditionerKind::gdsw) shown = r.preconditioner;
    o << "# " << to_string(shown) << ": alpha then one (k2, it) pair per distribution\n$data << EOD\nalpha";
    for (const auto& d : dists) o << ' ' << d << "_k2 " << d << "_it";
    o << '\n';
    for (const auto& a : alphas) {
      o << a;
      for (const auto& d : dists) {
        const ResultRow* r = table.find(a, shown, d);
        o << ' ' << cell(r, true) << ' ' << cell(r, false);
      }
      o << '\n';
    }
    o << "EOD\n";
    o << "set style data histograms\nset style histogram clustered gap 1\nset style fill solid 0.8 border -1\n";
    o << "set key autotitle columnhead\nset multiplot layout 2,1 title '" << to_string(shown)
      << ": conductivity robustness'\n";
    o << "set ylabel 'k_2'\nplot ";
    for (std::size_t i = 0; i < dists.size(); ++i)
      o << (i ? ", " : "") << "$data using " << 2 + 2 * i << ":xtic(1) title '" << dists[i] << "'";
    o << "\nset ylabel 'iterations'\nset xlabel 'alpha'\nplot ";
    for (std::size_t i = 0; i < dists.size(); ++i)
      o << (i ? ", " : "") << "$data using " << 3 + 2 * i << ":xtic(1) title '" << dists[i] << "'";
    o << "\nunset multiplot\n";
    return path;
  }

  const auto keys = ordered_keys(table);
  const PreconditionerKind order[] = {PreconditionerKind::gdsw, PreconditionerKind::additive_schwarz,
                                      PreconditionerKind::none};
  o << "# columns: " << table.key_name() << " gdsw_it as_it cg_it gdsw_k2 as_k2 cg_k2\n$data << EOD\n";
  for (const auto& k : keys) {
    o << k;
    for (const auto p : order) o << ' ' << cell(table.find(k, p), false);
    for (const auto p : order) o << ' ' << cell(table.find(k, p), true);
    o << '\n';
  }
  o << "EOD\n";
  const std::string xlabel = table.kind == ExperimentKind::scalability ? "cells per side"
                             : table.kind == ExperimentKind::optimality ? "Lcy (H/h = 6 Lcy)"
                             : table.kind == ExperimentKind::tau_sweep  ? "tau (ms)"
                                                                        : "run";
  o << "set xlabel '" << xlabel << "'\nset style data linespoints\n";
  if (table.kind == ExperimentKind::scalability) {
    o << "set multiplot layout 2,2 title 'scalability'\n"
      << "set ylabel 'iterations'\nplot $data using 0:2:xtic(1) title 'GDSW'\n"
      << "plot $data using 0:3:xtic(1) title 'AS', '' using 0:4:xtic(1) title 'CG'\n"
      << "set ylabel 'k_2'\nplot $data using 0:5:xtic(1) title 'GDSW'\n"
      << "set logscale y\nplot $data using 0:6:xtic(1) title 'AS', '' using 0:7:xtic(1) title 'CG'\n"
      << "unset logscale y\nunset multiplot\n";
  } else {
    o << "set multiplot layout 1,2 title '" << name << "'\n"
      << "set ylabel 'iterations'\nplot $data using 0:2:xtic(1) title 'GDSW', '' using 0:3:xtic(1) title 'AS', "
         "'' using 0:4:xtic(1) title 'CG'\n"
      << "set ylabel 'k_2'\nset logscale y\nplot $data using 0:5:xtic(1) title 'GDSW', '' using 0:6:xtic(1) title "
         "'AS', '' using 0:7:xtic(1) title 'CG'\n"
      << "unset logscale y\nunset multiplot\n";
  }
  return path;
}

}  // namespace emi
