#pragma once

#include <cstdio>
#include <ostream>

#include <Eigen/SparseLU>

#include "fibrehom/assemble.hpp"
#include "fibrehom/profile.hpp"

namespace fibrehom {

/// Effective tensor of the perforated cross-section plus the axial harmonic
/// mean, with the mesh provenance they were computed on.  ah33 carries the
/// polygonal complement area so internal identities close to machine
/// precision; the analytic value 1 - pi r^2 is reported alongside.
struct HomogenizedCoefficients {
  Eigen::Matrix3d Ah = Eigen::Matrix3d::Zero();
  Real ah = 0.0;
  Real r = 0.0;
  Real h = 0.0;
  Real disk_area = 0.0;          // polygonal
  Real disk_area_analytic = 0.0;  // pi r^2

  void write(std::ostream& os) const {
    char buf[256];
    os << "coefficients v1\n";
    for (int i = 0; i < 3; ++i) {
      std::snprintf(buf, sizeof buf, "Ah %.17g %.17g %.17g\n", Ah(i, 0), Ah(i, 1), Ah(i, 2));
      os << buf;
    }
    std::snprintf(buf, sizeof buf, "ah %.17g\n", ah);
    os << buf;
  }
};

namespace detail {

/// DOFs touched by at least one matrix triangle, in ascending global order.
inline std::vector<Index> matrix_region_dofs(const PeriodicMesh2D& m) {
  std::vector<bool> used(static_cast<std::size_t>(m.n_dofs), false);
  for (const auto& t : m.triangles)
    if (t.tag == Region::Matrix)
      for (int i = 0; i < 3; ++i)
        used[static_cast<std::size_t>(m.dof_of_node[static_cast<std::size_t>(t.v[static_cast<std::size_t>(i)])])] = true;
  std::vector<Index> dofs;
  for (Index d = 0; d < m.n_dofs; ++d)
    if (used[static_cast<std::size_t>(d)]) dofs.push_back(d);
  return dofs;
}

}  // namespace detail

/// Solve the perforated-cell problem for N_alpha, alpha in {1,2}: periodic on
/// the matrix region, natural boundary condition on the interface, mean zero.
/// Returns the nodal field on the full periodic DOF set (zero off the matrix
/// region closure).
inline VecX solve_cell_problem(const PeriodicMesh2D& m, int alpha) {
  if (alpha != 1 && alpha != 2) throw ParameterError("solve_cell_problem: alpha must be 1 or 2");
  const auto dofs = detail::matrix_region_dofs(m);
  const Index nm = static_cast<Index>(dofs.size());
  std::vector<Index> compact(static_cast<std::size_t>(m.n_dofs), -1);
  for (Index i = 0; i < nm; ++i) compact[static_cast<std::size_t>(dofs[static_cast<std::size_t>(i)])] = i;

  std::vector<Eigen::Triplet<Real>> trip;
  VecX rhs = VecX::Zero(nm + 1);
  for (const auto& t : m.triangles) {
    if (t.tag != Region::Matrix) continue;
    const auto g = detail::tri_geometry(m, t);
    std::array<Index, 3> ld{};
    for (int i = 0; i < 3; ++i)
      ld[static_cast<std::size_t>(i)] =
          compact[static_cast<std::size_t>(m.dof_of_node[static_cast<std::size_t>(t.v[static_cast<std::size_t>(i)])])];
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j)
        trip.emplace_back(ld[static_cast<std::size_t>(i)], ld[static_cast<std::size_t>(j)],
                          g.area * g.grad[static_cast<std::size_t>(i)].dot(g.grad[static_cast<std::size_t>(j)]));
      // forcing -int e_alpha . grad phi_i and the mean-zero multiplier row
      rhs[ld[static_cast<std::size_t>(i)]] -= g.area * g.grad[static_cast<std::size_t>(i)][alpha - 1];
      trip.emplace_back(ld[static_cast<std::size_t>(i)], nm, g.area / 3.0);
      trip.emplace_back(nm, ld[static_cast<std::size_t>(i)], g.area / 3.0);
    }
  }
  SparseR sys(nm + 1, nm + 1);
  sys.setFromTriplets(trip.begin(), trip.end());
  Eigen::SparseLU<SparseR> lu;
  lu.compute(sys);
  if (lu.info() != Eigen::Success)
    throw SolveError("solve_cell_problem: factorisation failed", {});
  const VecX sol = lu.solve(rhs);
  const Real resid = (sys * sol - rhs).norm() / std::max(1.0, rhs.norm());
  if (!(resid <= 1e-10))
    throw SolveError("solve_cell_problem: residual above 1e-10", {resid});

  VecX out = VecX::Zero(m.n_dofs);
  for (Index i = 0; i < nm; ++i) out[dofs[static_cast<std::size_t>(i)]] = sol[i];
  return out;
}

/// Homogenised coefficients on the given cross-section mesh and axial profile.
inline HomogenizedCoefficients homogenize(const PeriodicMesh2D& m, const CoefficientProfile& profile) {
  HomogenizedCoefficients hc;
  hc.r = m.r;
  hc.h = m.h;
  hc.disk_area = m.fibre_area();
  hc.disk_area_analytic = kPi * m.r * m.r;
  hc.ah = harmonic_mean(profile);

  std::array<VecX, 2> n_field{solve_cell_problem(m, 1), solve_cell_problem(m, 2)};
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) {
      Real acc = 0.0;
      for (const auto& t : m.triangles) {
        if (t.tag != Region::Matrix) continue;
        const auto g = detail::tri_geometry(m, t);
        Real dn = 0.0;  // d_beta N_alpha on the element
        for (int i = 0; i < 3; ++i)
          dn += n_field[static_cast<std::size_t>(a)]
                       [m.dof_of_node[static_cast<std::size_t>(t.v[static_cast<std::size_t>(i)])]] *
                g.grad[static_cast<std::size_t>(i)][b];
        acc += g.area * (dn + (a == b ? 1.0 : 0.0));
      }
      hc.Ah(a, b) = acc;
    }
  hc.Ah(2, 2) = 1.0 - hc.disk_area;
  return hc;
}

}  // namespace fibrehom
