#include "emigdsw/ionic.hpp"

#include <cmath>
#include <string>

namespace emi {

void IonicParams::validate() const
{
  if (!(v_amp > 0.0)) throw IonicError("ionic: v_amp must be positive");
  if (!(kappa_g >= 0.0)) throw IonicError("ionic: kappa_g must be non-negative");
  if (!(time_scale > 0.0)) throw IonicError("ionic: time_scale must be positive");
  if (!(c_m > 0.0)) throw IonicError("ionic: c_m must be positive");
}

IonicRates aliev_panfilov_rhs(const IonicParams& p, double v_phys, double w)
{
  const double phi = (v_phys - p.v_rest) / p.v_amp;
  const double rate = -p.k * phi * (phi - p.a) * (phi - 1.0) - phi * w;
  const double denom = phi + p.mu2;
  if (denom == 0.0) throw IonicError("aliev_panfilov_rhs: phi + mu2 vanishes");
  const double eps = p.eps0 + p.mu1 * w / denom;
  const double dw = eps * (-w - p.k * phi * (phi - p.a - 1.0));
  return {-p.resolved_i_scale() * p.time_scale * rate, p.time_scale * dw};
}

MembraneState MembraneState::resting(const MeshTopology& mesh, const IonicParams& p, double w0)
{
  MembraneState s;
  const auto& nodes = mesh.interface_nodes();
  s.v.resize(nodes.size());
  s.w.resize(nodes.size());
  s.kind.resize(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    s.kind[i] = nodes[i].kind;
    const bool membrane = nodes[i].kind == InterfaceKind::membrane;
    s.v[i] = membrane ? p.v_rest : 0.0;
    s.w[i] = membrane ? w0 : 0.0;
  }
  return s;
}

std::vector<double> membrane_step(MembraneState& state, const IonicParams& p, double tau, std::span<const double> stim)
{
  const std::size_t n = state.size();
  if (stim.size() != n || state.w.size() != n || state.kind.size() != n)
    throw IonicError("membrane_step: state length mismatch");
  std::vector<double> f(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double v = state.v[i];
    if (!std::isfinite(v) || !std::isfinite(state.w[i]))
      throw IonicError("membrane_step: non-finite state at interface node " + std::to_string(i));
    if (state.kind[i] == InterfaceKind::gap_junction) {
      f[i] = gap_junction_current(v, p.kappa_g);
      continue;
    }
    // The current is evaluated with the freshly updated gate.
    state.w[i] += tau * aliev_panfilov_rhs(p, v, state.w[i]).dw_dt;
    f[i] = aliev_panfilov_rhs(p, v, state.w[i]).i_ion - stim[i];
  }
  return f;
}

}  // namespace emi
