#pragma once

#include <algorithm>
#include <cmath>

#include "fibrehom/core.hpp"
#include "fibrehom/profile.hpp"

namespace fibrehom {

/// Periodic partition of [0,1).  Node i is connected to node (i+1) mod n; the
/// last element wraps through 1 == 0.
struct PeriodicMesh1D {
  std::vector<Real> nodes;  // ascending, in [0,1), nodes[0] == 0

  Index n_nodes() const { return static_cast<Index>(nodes.size()); }

  Real element_length(Index e) const {
    const Index n = n_nodes();
    if (e + 1 < n) return nodes[e + 1] - nodes[e];
    return 1.0 - nodes[n - 1] + nodes[0];
  }

  Real element_midpoint(Index e) const {
    const Index n = n_nodes();
    if (e + 1 < n) return 0.5 * (nodes[e] + nodes[e + 1]);
    Real m = nodes[n - 1] + 0.5 * element_length(e);
    return m - std::floor(m);
  }

  Real max_spacing() const {
    Real h = 0.0;
    for (Index e = 0; e < n_nodes(); ++e) h = std::max(h, element_length(e));
    return h;
  }
};

/// Uniform n-point partition of [0,1) with every breakpoint of `profile`
/// inserted, so the coefficient is constant on each element.
inline PeriodicMesh1D build_interval_mesh(Index n, const CoefficientProfile& profile) {
  if (n < 2) throw ParameterError("build_interval_mesh: need at least 2 nodes");
  std::vector<Real> nodes;
  nodes.reserve(static_cast<std::size_t>(n) + profile.breakpoints().size());
  for (Index i = 0; i < n; ++i) nodes.push_back(static_cast<Real>(i) / static_cast<Real>(n));
  for (Real b : profile.breakpoints()) nodes.push_back(b);
  std::sort(nodes.begin(), nodes.end());
  nodes.erase(std::unique(nodes.begin(), nodes.end(),
                          [](Real a, Real b) { return std::abs(a - b) < 1e-14; }),
              nodes.end());
  return PeriodicMesh1D{std::move(nodes)};
}

}  // namespace fibrehom
