#pragma once

/** @file mesh.hpp
    @brief Structured multicompartment geometry: an extracellular frame surrounding
    a block of elongated cells, each compartment carrying its own copy of the nodes
    on its boundary.

    Lattice coordinates are integer multiples of the element size h. The frame
    occupies [0, W + 2f] x [0, B + 2f] minus the open cell block
    (f, f + W) x (f, f + B), where W = n_cells_x * elems_long, B = n_cells_y * elems_short
    and f = frame_elems. Cell (row, col) has its lower-left corner at
    (f + col * elems_long, f + row * elems_short); row 0 is the bottom row.
*/

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace emi {

class MeshError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct GeometryConfig {
  int n_cells_x = 2;
  int n_cells_y = 2;
  int elems_short = 4;
  int elems_long = 0;   ///< 0 selects 6 * elems_short
  int frame_elems = 0;  ///< 0 selects elems_short
  double h = 1e-4;

  int resolved_elems_long() const { return elems_long > 0 ? elems_long : 6 * elems_short; }
  int resolved_frame_elems() const { return frame_elems > 0 ? frame_elems : elems_short; }

  /// Throws MeshError when a field is out of range.
  void validate() const;
};

/// Per-compartment conductivities. An empty `cells` vector applies `cell_default` everywhere.
struct Conductivities {
  double extracellular = 3e-3;
  double cell_default = 3e-3;
  std::vector<double> cells;  ///< row-major, one entry per cell when non-empty
};

enum class SubdomainKind { extracellular, cell };
enum class InterfaceKind { gap_junction, membrane };

struct LatticePoint {
  int x = 0;
  int y = 0;
  friend bool operator==(const LatticePoint&, const LatticePoint&) = default;
  friend auto operator<=>(const LatticePoint&, const LatticePoint&) = default;
};

struct Subdomain {
  int id = 0;
  SubdomainKind kind = SubdomainKind::cell;
  double sigma = 0.0;
  int row = -1;  ///< cell row, -1 for the frame
  int col = -1;
  // Bounding box of the element grid in lattice units.
  int x0 = 0, y0 = 0, nx = 0, ny = 0;
  int dof_offset = 0;
  int dof_count = 0;
  std::vector<LatticePoint> nodes;              ///< local node -> lattice point
  std::vector<std::array<int, 4>> elements;     ///< local nodes (x0y0, x1y0, x0y1, x1y1)
  std::vector<int> grid_to_local;               ///< (nx+1)*(ny+1) box, -1 where absent

  /// Local node index at a lattice point, or -1.
  int local_node(LatticePoint p) const;
  /// Global DOF at a lattice point, or -1.
  int dof_at(LatticePoint p) const
  {
    const int l = local_node(p);
    return l < 0 ? -1 : dof_offset + l;
  }
};

/// A matched pair of duplicated DOFs sitting at one geometric point of an interface.
/// `dof_a` is the cell side (membrane) or the lower subdomain id (gap junction).
struct InterfaceNode {
  int dof_a = -1;
  int dof_b = -1;
  InterfaceKind kind = InterfaceKind::membrane;
  LatticePoint at;
};

struct InterfaceEdge {
  int id = 0;
  int side_a = 0;  ///< cell (membrane) or lower id (gap junction)
  int side_b = 0;
  InterfaceKind kind = InterfaceKind::membrane;
  std::vector<std::pair<int, int>> pairs;  ///< (dof_a, dof_b) in geometric order
  std::vector<int> nodes;                  ///< InterfaceNode index per pair
  double segment_length = 0.0;

  std::size_t num_segments() const { return pairs.empty() ? 0 : pairs.size() - 1; }
};

struct InterfaceVertex {
  LatticePoint at;
  std::vector<int> sharers;  ///< ascending subdomain ids
  std::vector<int> dofs;     ///< one DOF per sharer, same order
};

class MeshTopology {
public:
  const GeometryConfig& config() const { return config_; }
  double h() const { return config_.h; }
  int num_dofs() const { return num_dofs_; }
  int num_cells() const { return static_cast<int>(subdomains_.size()) - 1; }

  const std::vector<Subdomain>& subdomains() const { return subdomains_; }
  const Subdomain& subdomain(int id) const { return subdomains_.at(static_cast<std::size_t>(id)); }
  const Subdomain& frame() const { return subdomains_.front(); }
  /// Subdomain id of the cell at (row, col).
  int cell_id(int row, int col) const { return 1 + row * config_.n_cells_x + col; }

  const std::vector<InterfaceEdge>& edges() const { return edges_; }
  const std::vector<InterfaceNode>& interface_nodes() const { return nodes_; }
  const std::vector<InterfaceVertex>& vertices() const { return vertices_; }

  int dof_subdomain(int dof) const { return dof_owner_[static_cast<std::size_t>(dof)]; }
  LatticePoint dof_point(int dof) const;
  std::array<double, 2> dof_coords(int dof) const;

  /// Frame outer extents in lattice units.
  int frame_width() const { return frame_width_; }
  int frame_height() const { return frame_height_; }
  /// Cell block [x0, x1] x [y0, y1] in lattice units.
  std::array<int, 4> block_box() const { return block_; }

private:
  friend MeshTopology build_geometry(const GeometryConfig&, const Conductivities&);
  friend std::vector<InterfaceEdge> enumerate_interfaces(const MeshTopology&);

  GeometryConfig config_;
  std::vector<Subdomain> subdomains_;
  std::vector<InterfaceEdge> edges_;
  std::vector<InterfaceNode> nodes_;
  std::vector<InterfaceVertex> vertices_;
  std::vector<int> dof_owner_;
  int num_dofs_ = 0;
  int frame_width_ = 0;
  int frame_height_ = 0;
  std::array<int, 4> block_{};
};

MeshTopology build_geometry(const GeometryConfig& config, const Conductivities& sigma = {});

/// Recomputes the interface edges of a built topology. Used by build_geometry;
/// exposed for verification. Throws MeshError on an unmatched node.
std::vector<InterfaceEdge> enumerate_interfaces(const MeshTopology& topology);

enum class OuterSide : std::uint8_t { left = 1, right = 2, bottom = 4, top = 8 };

/// Subset of the frame's outer boundary carrying u_0 = 0.
struct DirichletSpec {
  std::uint8_t sides = static_cast<std::uint8_t>(OuterSide::left);

  bool empty() const { return sides == 0; }
  bool has(OuterSide s) const { return (sides & static_cast<std::uint8_t>(s)) != 0; }
  static DirichletSpec none() { return DirichletSpec{0}; }
  /// Parses "left", "left,bottom", "none".
  static DirichletSpec parse(const std::string& text);
  std::string to_string() const;
};

enum class DofRole : std::uint8_t { interior, interface, dirichlet };

struct DofPartition {
  std::vector<DofRole> role;                  ///< per global DOF
  std::vector<std::vector<int>> interior;     ///< per subdomain
  std::vector<int> gamma;                     ///< ascending
  std::vector<int> dirichlet;                 ///< ascending

  std::size_t num_interior() const;
};

DofPartition classify_dofs(const MeshTopology& topology, const DirichletSpec& dirichlet = {});

}  // namespace emi
