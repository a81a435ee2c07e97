// Acceptance run: one PASS/FAIL line per criterion. Pass criterion numbers as
// arguments to run a subset, e.g. `acceptance 1 6 7`.

#include "emigdsw/experiment.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <sstream>

using namespace emi;

namespace {

struct Verdict {
  bool pass = true;
  std::vector<std::string> notes;

  void check(bool ok, const std::string& what)
  {
    if (!ok) pass = false;
    notes.push_back(std::string(ok ? "ok   " : "FAIL ") + what);
  }
};

std::string num(double v, int digits = 4)
{
  std::ostringstream s;
  s << std::setprecision(digits) << v;
  return s.str();
}

Vector random_vector(Eigen::Index n, std::uint64_t seed)
{
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> nd;
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = nd(gen);
  return v;
}

struct System {
  MeshTopology mesh;
  CompositeOperator op;
};

System make_system(int n, int es, double h, const std::vector<double>& cell_sigma = {})
{
  GeometryConfig c;
  c.n_cells_x = c.n_cells_y = n;
  c.elems_short = es;
  c.h = h;
  Conductivities s;
  s.cells = cell_sigma;
  auto m = build_geometry(c, s);
  auto op = assemble_system(0.05, assemble_stiffness(m), assemble_interface_mass(m, 1.0), classify_dofs(m));
  return {std::move(m), std::move(op)};
}

std::filesystem::path results_dir()
{
  const std::filesystem::path dir = "acceptance_results";
  std::filesystem::create_directories(dir);
  return dir;
}

ExperimentTable run_and_save(const ExperimentSpec& spec)
{
  const auto t = run_experiment(spec, &std::cout);
  std::ofstream csv(results_dir() / (to_string(spec.kind) + ".csv"));
  write_csv(t, spec, csv);
  return t;
}

const ResultRow& row(const ExperimentTable& t, const std::string& key, PreconditionerKind p, const std::string& dist = "")
{
  static const ResultRow missing{"", "", PreconditionerKind::none, std::numeric_limits<double>::quiet_NaN(), -1, 0.0,
                                 "missing"};
  const ResultRow* r = t.find(key, p, dist);
  return r != nullptr ? *r : missing;
}

// Robustness rows are keyed by the formatted alpha; match on the value.
const ResultRow& alpha_row(const ExperimentTable& t, double alpha, const std::string& dist)
{
  for (const auto& r : t.rows)
    if (r.distribution == dist && r.preconditioner == PreconditionerKind::gdsw && std::stod(r.key) == alpha) return r;
  return row(t, "", PreconditionerKind::gdsw, "missing");
}

bool ok(const ResultRow& r) { return r.error.empty() && r.iterations >= 0; }

// Bilinear shape gradients on [0,hx]x[0,hy], node order (0,0),(1,0),(0,1),(1,1).
std::array<std::array<double, 2>, 4> shape_grad(double x, double y, double hx, double hy)
{
  const double s = x / hx, t = y / hy;
  return {{{-(1 - t) / hx, -(1 - s) / hy}, {(1 - t) / hx, -s / hy}, {-t / hx, (1 - s) / hy}, {t / hx, s / hy}}};
}

const double gauss2[2] = {0.5 - 0.5 / std::sqrt(3.0), 0.5 + 0.5 / std::sqrt(3.0)};

// ---------------------------------------------------------------------------

Verdict correctness_oracles()
{
  Verdict v;

  // Harmonic residual and partition of unity on every experiment mesh.
  struct MeshCase {
    std::string name;
    int n, es;
    double h;
    std::vector<double> sigma;
  };
  std::vector<MeshCase> meshes;
  const ExperimentSpec defaults;
  for (const int n : defaults.cells)
    meshes.push_back({"scalability " + std::to_string(n) + "x" + std::to_string(n), n, defaults.scalability_elems_short,
                      defaults.cell_short / defaults.scalability_elems_short, {}});
  for (const int l : {2, 3, 4, 5, 6})
    meshes.push_back({"optimality Lcy=" + std::to_string(l), defaults.optimality_cells, l, defaults.cell_short / l, {}});
  for (const auto kind : {SigmaKind::checkboard, SigmaKind::capsule}) {
    SigmaDistribution d;
    d.kind = kind;
    d.alpha = 1e-4;
    meshes.push_back({"robustness " + to_string(kind), defaults.robustness_cells, defaults.robustness_elems_short,
                      defaults.cell_short / defaults.robustness_elems_short,
                      sigma_map(d, defaults.robustness_cells, defaults.robustness_cells)});
  }
  double worst_harmonic = 0.0, worst_pou = 0.0;
  std::string worst_harmonic_mesh;
  for (const auto& mc : meshes) {
    const auto sys = make_system(mc.n, mc.es, mc.h, mc.sigma);
    const auto cs = build_coarse(sys.op, sys.mesh, CoarseMode::vertex_edge);
    const double res = harmonic_residual(sys.op, cs.basis());
    if (res >= worst_harmonic) {
      worst_harmonic = res;
      worst_harmonic_mesh = mc.name;
    }
    const SparseMatrix vals = coarse_interface_values(sys.op, sys.mesh, CoarseMode::vertex_edge);
    const Vector sum = vals * Vector::Ones(vals.cols());
    for (Eigen::Index f = 0; f < sum.size(); ++f) {
      const int dof = sys.op.free_dofs()[static_cast<std::size_t>(f)];
      if (sys.op.partition().role[static_cast<std::size_t>(dof)] == DofRole::interface)
        worst_pou = std::max(worst_pou, std::abs(sum(f) - 1.0));
    }
  }
  v.check(worst_harmonic <= 1e-10, "harmonic-extension residual " + num(worst_harmonic, 3) + " <= 1e-10 over " +
                                       std::to_string(meshes.size()) + " meshes (worst: " + worst_harmonic_mesh + ")");
  v.check(worst_pou <= 1e-12, "partition of unity on Gamma, max error " + num(worst_pou, 3) + " <= 1e-12");

  // Symmetry and positivity.
  {
    const auto sys = make_system(4, 4, 1e-4);
    const Eigen::Index n = sys.op.num_free();
    for (const auto kind : {PreconditionerKind::additive_schwarz, PreconditionerKind::gdsw}) {
      const Preconditioner pc(sys.op, sys.mesh, {kind, CoarseMode::vertex_edge, 1});
      double worst = 0.0;
      bool positive = true;
      for (int t = 0; t < 100; ++t) {
        const Vector x = random_vector(n, 1000 + t), y = random_vector(n, 5000 + t);
        Vector px, py;
        pc.apply(x, px);
        pc.apply(y, py);
        const double scale = std::max(x.norm() * py.norm(), y.norm() * px.norm());
        worst = std::max(worst, std::abs(y.dot(px) - x.dot(py)) / scale);
        positive = positive && x.dot(px) > 0.0;
      }
      v.check(worst <= 1e-12 && positive, to_string(kind) + " symmetric (rel. defect " + num(worst, 3) +
                                              " <= 1e-12) and positive over 100 random vectors");
    }
  }

  // Lanczos estimate against the dense pencil on small meshes.
  {
    double worst = 0.0;
    int cases = 0;
    for (const auto& [n, es] : {std::pair{1, 4}, {2, 2}, {2, 4}, {1, 8}}) {
      const auto sys = make_system(n, es, 1e-4);
      const Eigen::Index nf = sys.op.num_free();
      if (nf > 3000) continue;
      const DenseMatrix k = sys.op.matrix();
      for (const auto kind : {PreconditionerKind::none, PreconditionerKind::additive_schwarz, PreconditionerKind::gdsw}) {
        const Preconditioner pc(sys.op, sys.mesh, {kind, CoarseMode::vertex_edge, 1});
        const DenseMatrix p = to_dense(pc.as_operator(), nf);
        const DenseMatrix p_inv = p.llt().solve(DenseMatrix::Identity(nf, nf));
        const auto [lo, hi] = dense_spectrum(k, &p_inv);
        Vector x = Vector::Zero(nf);
        const auto st = pcg(matrix_operator(sys.op.matrix()), random_vector(nf, 77), pc.as_operator(), x);
        worst = std::max(worst, std::abs(st.k2 - hi / lo) / (hi / lo));
        ++cases;
      }
    }
    v.check(worst <= 0.05, "Lanczos k2 vs dense spectrum, worst relative gap " + num(100 * worst, 3) + "% <= 5% (" +
                               std::to_string(cases) + " mesh/preconditioner pairs, tol 1e-6)");
  }

  // One-iteration cases.
  {
    const auto sys = make_system(2, 4, 1e-4);
    const Factorization f(sys.op.matrix());
    const LinearOperator exact = [&f](const Vector& r, Vector& z) { z = f.solve(r); };
    Vector x = Vector::Zero(sys.op.num_free());
    const auto st = pcg(matrix_operator(sys.op.matrix()), random_vector(sys.op.num_free(), 3), exact, x);
    SparseMatrix id(500, 500);
    id.setIdentity();
    Vector y = Vector::Zero(500);
    const auto si = pcg(matrix_operator(id), random_vector(500, 4), identity_operator(), y);
    v.check(st.converged && st.iterations == 1 && si.converged && si.iterations == 1,
            "PCG with exact preconditioner: " + std::to_string(st.iterations) + " iteration, A = I: " +
                std::to_string(si.iterations) + " iteration");
  }

  // Resting fixed point.
  {
    SimConfig c;
    c.geometry.n_cells_x = c.geometry.n_cells_y = 2;
    c.stimulus.amplitude = 0.0;
    c.t_end = 100 * c.tau;
    Simulation sim(c);
    const Vector u0 = sim.potential();
    const auto r = sim.run();
    const double drift = (sim.potential() - u0).cwiseAbs().maxCoeff();
    v.check(r.steps.size() == 100u && drift <= 1e-6, "resting state, 100 steps, drift " + num(drift, 3) + " mV <= 1e-6");
  }
  return v;
}

Verdict scalability()
{
  Verdict v;
  ExperimentSpec spec;
  spec.kind = ExperimentKind::scalability;
  const auto t = run_and_save(spec);
  const auto G = PreconditionerKind::gdsw, A = PreconditionerKind::additive_schwarz, C = PreconditionerKind::none;
  const auto ratio = [&](PreconditionerKind p) { return row(t, "16", p).k2 / row(t, "4", p).k2; };
  v.check(t.failures() == 0, std::to_string(t.failures()) + " failed runs");
  v.check(ratio(G) <= 1.5, "GDSW k2(16x16)/k2(4x4) = " + num(ratio(G)) + " <= 1.5");
  v.check(ratio(A) >= 5.0, "AS k2 ratio = " + num(ratio(A)) + " >= 5");
  v.check(ratio(C) >= 8.0, "CG k2 ratio = " + num(ratio(C)) + " >= 8");
  const std::map<std::string, int> reference{{"2", 32}, {"4", 43}, {"8", 51}, {"12", 54}, {"16", 55}};
  for (const auto& [key, ref] : reference) {
    const auto &g = row(t, key, G), &a = row(t, key, A), &c = row(t, key, C);
    v.check(ok(g) && ok(a) && ok(c) && g.iterations <= a.iterations && a.iterations <= c.iterations,
            key + "x" + key + " ordering it: GDSW " + std::to_string(g.iterations) + " <= AS " +
                std::to_string(a.iterations) + " <= CG " + std::to_string(c.iterations));
    v.check(ok(g) && std::abs(g.iterations - ref) <= 0.5 * ref,
            key + "x" + key + " GDSW iterations " + std::to_string(g.iterations) + " within 50% of " + std::to_string(ref));
  }
  return v;
}

Verdict optimality()
{
  Verdict v;
  ExperimentSpec spec;
  spec.kind = ExperimentKind::optimality;
  spec.lcy = {2, 3, 4, 5, 6};
  const auto t = run_and_save(spec);
  v.check(t.failures() == 0, std::to_string(t.failures()) + " failed runs");
  const auto ratio = [&](PreconditionerKind p) { return row(t, "6", p).k2 / row(t, "2", p).k2; };
  v.check(ratio(PreconditionerKind::gdsw) <= 2.8, "GDSW k2(H/h=36)/k2(H/h=12) = " + num(ratio(PreconditionerKind::gdsw)) + " <= 2.8");
  v.check(ratio(PreconditionerKind::additive_schwarz) >= 3.0,
          "AS k2 ratio = " + num(ratio(PreconditionerKind::additive_schwarz)) + " >= 3 (H/h ratio)");
  v.check(ratio(PreconditionerKind::none) >= 3.0, "CG k2 ratio = " + num(ratio(PreconditionerKind::none)) + " >= 3 (H/h ratio)");
  return v;
}

Verdict tau_robustness()
{
  Verdict v;
  ExperimentSpec spec;
  spec.kind = ExperimentKind::tau_sweep;
  spec.preconditioners = {PreconditionerKind::gdsw, PreconditionerKind::none};
  const auto t = run_and_save(spec);
  v.check(t.failures() == 0, std::to_string(t.failures()) + " failed runs");
  int lo = std::numeric_limits<int>::max(), hi = 0;
  for (const auto& r : t.rows)
    if (r.preconditioner == PreconditionerKind::gdsw && ok(r)) {
      lo = std::min(lo, r.iterations);
      hi = std::max(hi, r.iterations);
    }
  const double spread = static_cast<double>(hi - lo) / lo;
  v.check(spread <= 0.15, "12x12 GDSW iterations " + std::to_string(lo) + ".." + std::to_string(hi) + ", spread " +
                              num(100 * spread, 3) + "% <= 15%");
  const auto& c_small = row(t, "0.005", PreconditionerKind::none);
  const auto& c_large = row(t, "0.1", PreconditionerKind::none);
  v.check(ok(c_small) && ok(c_large) && c_small.iterations >= 1.2 * c_large.iterations,
          "CG it(tau=0.005) = " + std::to_string(c_small.iterations) + " >= 1.2 x it(tau=0.1) = " +
              std::to_string(c_large.iterations));
  return v;
}

Verdict coefficient_robustness()
{
  Verdict v;
  ExperimentSpec spec;
  spec.kind = ExperimentKind::robustness;
  spec.preconditioners = {PreconditionerKind::gdsw};
  spec.distributions = {SigmaKind::checkboard, SigmaKind::capsule};
  const auto t = run_and_save(spec);
  v.check(t.failures() == 0, std::to_string(t.failures()) + " failed runs");
  for (const char* dist : {"checkboard", "capsule"}) {
    const auto& base = alpha_row(t, 1.0, dist);
    const auto& tiny = alpha_row(t, 1e-4, dist);
    const double ratio = tiny.k2 / base.k2;
    v.check(ok(base) && ok(tiny) && ratio >= 0.5 && ratio <= 2.0,
            std::string(dist) + " k2(1e-4)/k2(1) = " + num(tiny.k2) + "/" + num(base.k2) + " = " + num(ratio) +
                " within factor 2");
    int lo = std::numeric_limits<int>::max(), hi = 0;
    for (const auto& r : t.rows)
      if (r.distribution == dist && ok(r)) {
        lo = std::min(lo, r.iterations);
        hi = std::max(hi, r.iterations);
      }
    const double dev = std::max(std::abs(hi - base.iterations), std::abs(lo - base.iterations)) /
                       static_cast<double>(base.iterations);
    v.check(ok(base) && dev <= 0.25, std::string(dist) + " iterations " + std::to_string(lo) + ".." + std::to_string(hi) +
                                         " within 25% of alpha=1 (" + std::to_string(base.iterations) + "), max deviation " +
                                         num(100 * dev, 3) + "%");
  }
  return v;
}

Verdict assembly_oracles()
{
  Verdict v;
  // Exact Q1 integrals of grad(phi_a) . grad(phi_b) on an hx x hy rectangle.
  double worst_elem = 0.0;
  for (const auto& [hx, hy] : {std::pair{1.0, 1.0}, {2.0, 0.5}, {1e-4, 3e-4}}) {
    const double rx = hy / hx, ry = hx / hy;
    Eigen::Matrix4d exact;
    exact << (rx + ry) / 3, -rx / 3 + ry / 6, rx / 6 - ry / 3, -(rx + ry) / 6,  //
        -rx / 3 + ry / 6, (rx + ry) / 3, -(rx + ry) / 6, rx / 6 - ry / 3,        //
        rx / 6 - ry / 3, -(rx + ry) / 6, (rx + ry) / 3, -rx / 3 + ry / 6,        //
        -(rx + ry) / 6, rx / 6 - ry / 3, -rx / 3 + ry / 6, (rx + ry) / 3;
    worst_elem = std::max(worst_elem, (element_stiffness_q1(hx, hy, 1.0) - exact).cwiseAbs().maxCoeff() /
                                          exact.cwiseAbs().maxCoeff());
  }
  v.check(worst_elem <= 1e-14, "element stiffness vs exact integrals, rel. error " + num(worst_elem, 3));

  for (const int n : {1, 2}) {
    const double h = 1e-4, tau = 0.05, c_m = 1.0;
    GeometryConfig gc;
    gc.n_cells_x = gc.n_cells_y = n;
    gc.elems_short = 4;
    gc.h = h;
    Conductivities sc;
    sc.extracellular = 2.5e-3;
    for (int i = 0; i < n * n; ++i) sc.cells.push_back(3e-3 * (1.0 + 0.1 * i));
    const auto m = build_geometry(gc, sc);
    const SparseMatrix k = tau * assemble_stiffness(m) + assemble_interface_mass(m, c_m);

    std::vector<std::array<double, 3>> plane;
    for (std::size_t s = 0; s < m.subdomains().size(); ++s)
      plane.push_back({1.0 + 0.3 * s, -2.0 + 0.7 * s, 5.0 * std::sin(1.0 + s)});
    const auto eval = [&](int s, double x, double y) {
      const auto& p = plane[static_cast<std::size_t>(s)];
      return p[0] * x / h + p[1] * y / h + p[2];
    };
    Vector u(m.num_dofs());
    for (int d = 0; d < m.num_dofs(); ++d) {
      const auto c = m.dof_coords(d);
      u(d) = eval(m.dof_subdomain(d), c[0], c[1]);
    }
    double volume = 0.0;
    for (const auto& sub : m.subdomains())
      for (const auto& el : sub.elements)
        for (const double gx : gauss2)
          for (const double gy : gauss2) {
            const auto g = shape_grad(gx * h, gy * h, h, h);
            double ux = 0.0, uy = 0.0;
            for (int p = 0; p < 4; ++p) {
              ux += g[p][0] * u(sub.dof_offset + el[p]);
              uy += g[p][1] * u(sub.dof_offset + el[p]);
            }
            volume += 0.25 * h * h * sub.sigma * (ux * ux + uy * uy);
          }
    double jump = 0.0;
    for (const auto& e : m.edges())
      for (std::size_t s = 0; s + 1 < e.pairs.size(); ++s) {
        const auto p0 = m.dof_coords(e.pairs[s].first);
        const auto p1 = m.dof_coords(e.pairs[s + 1].first);
        for (const double g : gauss2) {
          const double j = eval(e.side_a, p0[0] + g * (p1[0] - p0[0]), p0[1] + g * (p1[1] - p0[1])) -
                           eval(e.side_b, p0[0] + g * (p1[0] - p0[0]), p0[1] + g * (p1[1] - p0[1]));
          jump += 0.5 * e.segment_length * c_m * j * j;
        }
      }
    const double expected = tau * volume + jump;
    const double rel = std::abs(u.dot(k * u) - expected) / expected;
    v.check(rel <= 1e-10, std::to_string(n) + "x" + std::to_string(n) + " energy identity, rel. error " + num(rel, 3) +
                              " <= 1e-10");
  }
  return v;
}

Verdict wavefront()
{
  Verdict v;
  SimConfig c;
  c.geometry.n_cells_x = c.geometry.n_cells_y = 4;
  Simulation sim(c);
  const auto r = sim.run();
  const auto cells = cell_activation_times(sim.mesh(), r.activation_time);
  const int n = 4;
  const auto at = [&](int row, int col) { return cells[static_cast<std::size_t>(row * n + col)]; };

  // Earliest activation per graph distance (row + col) from the stimulated corner cell.
  std::vector<double> level(2 * n - 1, std::numeric_limits<double>::infinity());
  for (int row = 0; row < n; ++row)
    for (int col = 0; col < n; ++col) level[static_cast<std::size_t>(row + col)] = std::min(level[static_cast<std::size_t>(row + col)], at(row, col));
  std::string levels;
  bool monotone = true;
  for (std::size_t d = 0; d < level.size(); ++d) {
    levels += (d ? " " : "") + (std::isfinite(level[d]) ? num(level[d], 3) : std::string("-"));
    if (d > 0 && level[d] < level[d - 1]) monotone = false;
  }
  v.check(monotone, "earliest activation per distance level non-decreasing: " + levels + " ms");

  // Each activated cell away from the corner has a closer neighbour that fired no later.
  bool causal = true;
  int activated = 0;
  for (int row = 0; row < n; ++row)
    for (int col = 0; col < n; ++col) {
      if (!std::isfinite(at(row, col))) continue;
      ++activated;
      if (row + col == 0) continue;
      const double left = col > 0 ? at(row, col - 1) : std::numeric_limits<double>::infinity();
      const double below = row > 0 ? at(row - 1, col) : std::numeric_limits<double>::infinity();
      if (std::min(left, below) > at(row, col)) causal = false;
    }
  v.check(causal, "every activated cell has a closer neighbour activated no later");
  v.check(std::isfinite(at(0, 0)) && activated > 1,
          "wave leaves the stimulated cell (" + std::to_string(activated) + " of 16 cells activated by " + num(c.t_end) + " ms)");
  return v;
}

}  // namespace

int main(int argc, char** argv)
{
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));
  const std::vector<std::pair<std::string, Verdict (*)()>> criteria{
      {"correctness oracles", correctness_oracles},       {"scalability trend", scalability},
      {"quasi-optimality trend", optimality},             {"time-step robustness", tau_robustness},
      {"coefficient robustness", coefficient_robustness}, {"assembly oracles", assembly_oracles},
      {"wavefront", wavefront},
  };
  std::vector<std::string> summary;
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!wanted.empty() && !wanted.count(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v.check(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::ostringstream line;
    line << (v.pass ? "PASS" : "FAIL") << " [" << id << "] " << criteria[i].first << " (" << std::fixed
         << std::setprecision(1) << secs << " s)";
    std::cout << line.str() << '\n';
    for (const auto& n : v.notes) std::cout << "       " << n << '\n';
    std::cout.flush();
    summary.push_back(line.str());
    failed += v.pass ? 0 : 1;
  }
  std::cout << "\nsummary\n";
  for (const auto& s : summary) std::cout << s << '\n';
  return failed == 0 ? 0 : 1;
}
