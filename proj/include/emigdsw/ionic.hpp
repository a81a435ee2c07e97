#pragma once

#include "emigdsw/mesh.hpp"

#include <span>
#include <stdexcept>
#include <vector>

namespace emi {

class IonicError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Aliev-Panfilov kinetics in the dimensionless potential phi = (v - v_rest) / v_amp.
struct IonicParams {
  double k = 8.0;
  double a = 0.15;
  double eps0 = 0.002;
  double mu1 = 0.2;
  double mu2 = 0.3;
  double v_rest = -85.0;  ///< mV
  double v_amp = 100.0;   ///< mV
  double c_m = 1.0;       ///< uF/cm^2
  /// Current per unit dimensionless rate; 0 selects c_m * v_amp.
  double i_scale = 0.0;
  /// Model time units per ms.
  double time_scale = 1.0;
  double kappa_g = 1.0;

  double resolved_i_scale() const { return i_scale > 0.0 ? i_scale : c_m * v_amp; }
  void validate() const;
};

struct IonicRates {
  double i_ion = 0.0;  ///< outward-positive, mA/cm^2
  double dw_dt = 0.0;  ///< 1/ms
};

IonicRates aliev_panfilov_rhs(const IonicParams& p, double v_phys, double w);

inline double gap_junction_current(double jump, double kappa_g) { return kappa_g * jump; }

/// Per interface node: the jump v and, on membrane nodes, the gating variable w.
struct MembraneState {
  std::vector<double> v;
  std::vector<double> w;  ///< 0 and unused on gap-junction nodes
  std::vector<InterfaceKind> kind;

  std::size_t size() const { return v.size(); }
  /// Membrane nodes at (v_rest, w0), gap-junction nodes at zero jump.
  static MembraneState resting(const MeshTopology& mesh, const IonicParams& p, double w0 = 0.0);
};

/// Forward-Euler gating update and reaction samples F for the next linear solve.
/// Membrane nodes: F = i_ion(v, w_new) - stim with the updated gate; gap-junction nodes: F = kappa_g * v.
/// state.v is left untouched. Throws IonicError on a non-finite state.
std::vector<double> membrane_step(MembraneState& state, const IonicParams& p, double tau, std::span<const double> stim);

}  // namespace emi
