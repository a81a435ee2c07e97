#include "emigdsw/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

namespace emi {

void GeometryConfig::validate() const
{
  if (n_cells_x < 1 || n_cells_y < 1) throw MeshError("geometry: at least one cell per direction is required");
  if (elems_short < 1) throw MeshError("geometry: elems_short must be >= 1");
  if (elems_long < 0 || frame_elems < 0) throw MeshError("geometry: negative element count");
  if (!(h > 0.0) || !std::isfinite(h)) throw MeshError("geometry: element size h must be positive");
}

int Subdomain::local_node(LatticePoint p) const
{
  const int lx = p.x - x0;
  const int ly = p.y - y0;
  if (lx < 0 || ly < 0 || lx > nx || ly > ny) return -1;
  return grid_to_local[static_cast<std::size_t>(ly * (nx + 1) + lx)];
}

LatticePoint MeshTopology::dof_point(int dof) const
{
  const auto& s = subdomain(dof_subdomain(dof));
  return s.nodes[static_cast<std::size_t>(dof - s.dof_offset)];
}

std::array<double, 2> MeshTopology::dof_coords(int dof) const
{
  const auto p = dof_point(dof);
  return {p.x * config_.h, p.y * config_.h};
}

namespace {

// Adds every lattice node and element of the box accepted by the predicates.
template <class NodePred, class ElemPred>
void fill_box(Subdomain& s, NodePred keep_node, ElemPred keep_elem)
{
  s.grid_to_local.assign(static_cast<std::size_t>((s.nx + 1) * (s.ny + 1)), -1);
  for (int y = 0; y <= s.ny; ++y)
    for (int x = 0; x <= s.nx; ++x) {
      const LatticePoint p{s.x0 + x, s.y0 + y};
      if (!keep_node(p)) continue;
      s.grid_to_local[static_cast<std::size_t>(y * (s.nx + 1) + x)] = static_cast<int>(s.nodes.size());
      s.nodes.push_back(p);
    }
  for (int y = 0; y < s.ny; ++y)
    for (int x = 0; x < s.nx; ++x) {
      const LatticePoint p{s.x0 + x, s.y0 + y};
      if (!keep_elem(p)) continue;
      s.elements.push_back({s.local_node(p), s.local_node({p.x + 1, p.y}), s.local_node({p.x, p.y + 1}),
                            s.local_node({p.x + 1, p.y + 1})});
    }
  s.dof_count = static_cast<int>(s.nodes.size());
}

}  // namespace

MeshTopology build_geometry(const GeometryConfig& config, const Conductivities& sigma)
{
  config.validate();
  const int L = config.resolved_elems_long();
  const int S = config.elems_short;
  const int f = config.resolved_frame_elems();
  const int ncx = config.n_cells_x;
  const int ncy = config.n_cells_y;
  const int ncells = ncx * ncy;
  if (!sigma.cells.empty() && static_cast<int>(sigma.cells.size()) != ncells)
    throw MeshError("geometry: conductivity map has " + std::to_string(sigma.cells.size()) + " entries for " +
                    std::to_string(ncells) + " cells");

  MeshTopology mesh;
  mesh.config_ = config;
  mesh.frame_width_ = ncx * L + 2 * f;
  mesh.frame_height_ = ncy * S + 2 * f;
  mesh.block_ = {f, f, f + ncx * L, f + ncy * S};
  const auto [bx0, by0, bx1, by1] = mesh.block_;

  Subdomain frame;
  frame.id = 0;
  frame.kind = SubdomainKind::extracellular;
  frame.sigma = sigma.extracellular;
  frame.nx = mesh.frame_width_;
  frame.ny = mesh.frame_height_;
  fill_box(
      frame, [&](LatticePoint p) { return !(p.x > bx0 && p.x < bx1 && p.y > by0 && p.y < by1); },
      [&](LatticePoint p) { return !(p.x >= bx0 && p.x < bx1 && p.y >= by0 && p.y < by1); });
  mesh.subdomains_.push_back(std::move(frame));

  for (int row = 0; row < ncy; ++row)
    for (int col = 0; col < ncx; ++col) {
      Subdomain cell;
      cell.id = 1 + row * ncx + col;
      cell.kind = SubdomainKind::cell;
      cell.sigma = sigma.cells.empty() ? sigma.cell_default : sigma.cells[static_cast<std::size_t>(cell.id - 1)];
      cell.row = row;
      cell.col = col;
      cell.x0 = bx0 + col * L;
      cell.y0 = by0 + row * S;
      cell.nx = L;
      cell.ny = S;
      fill_box(cell, [](LatticePoint) { return true; }, [](LatticePoint) { return true; });
      mesh.subdomains_.push_back(std::move(cell));
    }

  for (auto& s : mesh.subdomains_) {
    if (!(s.sigma > 0.0)) throw MeshError("geometry: conductivity of subdomain " + std::to_string(s.id) + " must be > 0");
    s.dof_offset = mesh.num_dofs_;
    mesh.num_dofs_ += s.dof_count;
    mesh.dof_owner_.insert(mesh.dof_owner_.end(), static_cast<std::size_t>(s.dof_count), s.id);
  }

  mesh.edges_ = enumerate_interfaces(mesh);

  // Unique matched pairs; a corner of a cell facing the frame on two sides is shared by two edges.
  std::map<std::pair<int, int>, int> node_index;
  for (auto& e : mesh.edges_) {
    e.nodes.clear();
    for (const auto& pr : e.pairs) {
      auto [it, inserted] = node_index.try_emplace(pr, static_cast<int>(mesh.nodes_.size()));
      if (inserted) mesh.nodes_.push_back({pr.first, pr.second, e.kind, mesh.dof_point(pr.first)});
      e.nodes.push_back(it->second);
    }
  }

  std::map<LatticePoint, std::map<int, int>> sharers;
  for (const auto& e : mesh.edges_)
    for (const auto& pr : {e.pairs.front(), e.pairs.back()}) {
      const auto p = mesh.dof_point(pr.first);
      sharers[p][e.side_a] = pr.first;
      sharers[p][e.side_b] = pr.second;
    }
  for (const auto& [p, owners] : sharers) {
    InterfaceVertex v;
    v.at = p;
    for (const auto& [sub, dof] : owners) {
      v.sharers.push_back(sub);
      v.dofs.push_back(dof);
    }
    mesh.vertices_.push_back(std::move(v));
  }
  return mesh;
}

std::vector<InterfaceEdge> enumerate_interfaces(const MeshTopology& mesh)
{
  const auto& cfg = mesh.config();
  const int ncx = cfg.n_cells_x;
  const int ncy = cfg.n_cells_y;
  const double tol = 1e-12 * cfg.h;
  std::vector<InterfaceEdge> edges;

  auto emit = [&](int a, int b, InterfaceKind kind, LatticePoint from, LatticePoint to) {
    const auto& sa = mesh.subdomain(a);
    const auto& sb = mesh.subdomain(b);
    InterfaceEdge e;
    e.id = static_cast<int>(edges.size());
    e.side_a = a;
    e.side_b = b;
    e.kind = kind;
    e.segment_length = cfg.h;
    const int dx = (to.x > from.x) - (to.x < from.x);
    const int dy = (to.y > from.y) - (to.y < from.y);
    for (LatticePoint p = from;; p = {p.x + dx, p.y + dy}) {
      const int da = sa.dof_at(p);
      const int db = sb.dof_at(p);
      if (da < 0 || db < 0)
        throw MeshError("interface " + std::to_string(a) + "-" + std::to_string(b) + ": unmatched node at (" +
                        std::to_string(p.x) + ", " + std::to_string(p.y) + ")");
      const auto ca = mesh.dof_coords(da);
      const auto cb = mesh.dof_coords(db);
      if (std::abs(ca[0] - cb[0]) > tol || std::abs(ca[1] - cb[1]) > tol)
        throw MeshError("interface " + std::to_string(a) + "-" + std::to_string(b) + ": coordinate mismatch");
      e.pairs.emplace_back(da, db);
      if (p == to) break;
    }
    edges.push_back(std::move(e));
  };

  for (int row = 0; row < ncy; ++row)
    for (int col = 0; col < ncx; ++col) {
      const int id = mesh.cell_id(row, col);
      const auto& c = mesh.subdomain(id);
      const LatticePoint ll{c.x0, c.y0}, lr{c.x0 + c.nx, c.y0}, ul{c.x0, c.y0 + c.ny}, ur{c.x0 + c.nx, c.y0 + c.ny};
      if (row == 0) emit(id, 0, InterfaceKind::membrane, ll, lr);
      if (col == 0) emit(id, 0, InterfaceKind::membrane, ll, ul);
      if (col == ncx - 1)
        emit(id, 0, InterfaceKind::membrane, lr, ur);
      else
        emit(id, mesh.cell_id(row, col + 1), InterfaceKind::gap_junction, lr, ur);
      if (row == ncy - 1)
        emit(id, 0, InterfaceKind::membrane, ul, ur);
      else
        emit(id, mesh.cell_id(row + 1, col), InterfaceKind::gap_junction, ul, ur);
    }
  return edges;
}

DirichletSpec DirichletSpec::parse(const std::string& text)
{
  DirichletSpec spec = none();
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (item == "left")
      spec.sides |= static_cast<std::uint8_t>(OuterSide::left);
    else if (item == "right")
      spec.sides |= static_cast<std::uint8_t>(OuterSide::right);
    else if (item == "bottom")
      spec.sides |= static_cast<std::uint8_t>(OuterSide::bottom);
    else if (item == "top")
      spec.sides |= static_cast<std::uint8_t>(OuterSide::top);
    else if (item != "none" && !item.empty())
      throw MeshError("dirichlet: unknown side '" + item + "'");
  }
  return spec;
}

std::string DirichletSpec::to_string() const
{
  if (empty()) return "none";
  std::string out;
  auto add = [&](OuterSide s, const char* name) {
    if (!has(s)) return;
    if (!out.empty()) out += ",";
    out += name;
  };
  add(OuterSide::left, "left");
  add(OuterSide::right, "right");
  add(OuterSide::bottom, "bottom");
  add(OuterSide::top, "top");
  return out;
}

std::size_t DofPartition::num_interior() const
{
  std::size_t n = 0;
  for (const auto& v : interior) n += v.size();
  return n;
}

DofPartition classify_dofs(const MeshTopology& mesh, const DirichletSpec& dirichlet)
{
  DofPartition part;
  part.role.assign(static_cast<std::size_t>(mesh.num_dofs()), DofRole::interior);
  for (const auto& e : mesh.edges())
    for (const auto& [a, b] : e.pairs) {
      part.role[static_cast<std::size_t>(a)] = DofRole::interface;
      part.role[static_cast<std::size_t>(b)] = DofRole::interface;
    }

  const auto& frame = mesh.frame();
  for (int l = 0; l < frame.dof_count; ++l) {
    const auto p = frame.nodes[static_cast<std::size_t>(l)];
    const bool on = (dirichlet.has(OuterSide::left) && p.x == 0) ||
                    (dirichlet.has(OuterSide::right) && p.x == mesh.frame_width()) ||
                    (dirichlet.has(OuterSide::bottom) && p.y == 0) ||
                    (dirichlet.has(OuterSide::top) && p.y == mesh.frame_height());
    if (!on) continue;
    auto& role = part.role[static_cast<std::size_t>(frame.dof_offset + l)];
    if (role == DofRole::interface) throw MeshError("dirichlet boundary touches the cell block");
    role = DofRole::dirichlet;
  }

  part.interior.resize(mesh.subdomains().size());
  for (int d = 0; d < mesh.num_dofs(); ++d) {
    switch (part.role[static_cast<std::size_t>(d)]) {
    case DofRole::interior: part.interior[static_cast<std::size_t>(mesh.dof_subdomain(d))].push_back(d); break;
    case DofRole::interface: part.gamma.push_back(d); break;
    case DofRole::dirichlet: part.dirichlet.push_back(d); break;
    }
  }
  return part;
}

}  // namespace emi
