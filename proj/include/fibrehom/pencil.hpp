#pragma once

#include "fibrehom/assemble.hpp"
#include "fibrehom/kron.hpp"

namespace fibrehom {

inline bool in_dual_cell(const Vec3& theta) {
  for (int i = 0; i < 3; ++i)
    if (theta[i] < -kPi || theta[i] >= kPi) return false;
  return true;
}

/// Theta-independent factor forms of one discretised cell, shared by every
/// pencil assembled on the same meshes.
struct CellForms {
  const PeriodicMesh2D* mesh2 = nullptr;
  const PeriodicMesh1D* mesh1 = nullptr;
  const CoefficientProfile* profile = nullptr;
  FormPtr m2_all, m2_mat, m2_fib, m1;

  CellForms(const PeriodicMesh2D& m2, const PeriodicMesh1D& m1_, const CoefficientProfile& prof)
      : mesh2(&m2), mesh1(&m1_), profile(&prof) {
    m2_all = std::make_shared<HermitianForm>(mass_2d(m2, Region::All));
    m2_mat = std::make_shared<HermitianForm>(mass_2d(m2, Region::Matrix));
    m2_fib = std::make_shared<HermitianForm>(mass_2d(m2, Region::Fibre));
    m1 = std::make_shared<HermitianForm>(mass_1d(m1_));
  }

  Index n2() const { return mesh2->n_dofs; }
  Index n1() const { return mesh1->n_nodes(); }
  Index n() const { return n2() * n1(); }

  /// a_theta as a Kronecker form: in-plane matrix stiffness, axial matrix
  /// stiffness, weighted axial fibre stiffness.
  KronForm a_theta(const Vec3& theta) const {
    if (!in_dual_cell(theta)) throw ParameterError("a_theta: theta outside the dual cell");
    const Vec2 theta_p(theta[0], theta[1]);
    KronForm a(n2(), n1());
    a.add_term(1.0, std::make_shared<HermitianForm>(bloch_stiffness_2d(*mesh2, theta_p, Region::Matrix)), m1);
    a.add_term(1.0, m2_mat, std::make_shared<HermitianForm>(bloch_stiffness_1d(*mesh1, theta[2], nullptr)));
    a.add_term(1.0, m2_fib, std::make_shared<HermitianForm>(bloch_stiffness_1d(*mesh1, theta[2], profile)));
    return a;
  }

  /// b_theta minus the mass: the fibre in-plane shifted stiffness.
  KronForm fibre_inplane(const Vec3& theta) const {
    if (!in_dual_cell(theta)) throw ParameterError("fibre_inplane: theta outside the dual cell");
    const Vec2 theta_p(theta[0], theta[1]);
    KronForm b(n2(), n1());
    b.add_term(1.0, std::make_shared<HermitianForm>(bloch_stiffness_2d(*mesh2, theta_p, Region::Fibre)), m1);
    return b;
  }

  /// c as a Kronecker form (full tensor mass).
  KronForm mass() const {
    KronForm c(n2(), n1());
    c.add_term(1.0, m2_all, m1);
    return c;
  }

  /// Directional mass |theta3|^2 c[chi0 u] + |theta|^2 c[chi1 u].
  KronForm directional_mass(const Vec3& theta) const {
    KronForm d(n2(), n1());
    d.add_term(theta[2] * theta[2], m2_fib, m1);
    d.add_term(theta.squaredNorm(), m2_mat, m1);
    return d;
  }
};

/// Stiffness/mass pair of the quasimomentum fibre problem: K carries
/// eps^-2 a_theta plus the fibre in-plane part of b_theta, M is the tensor
/// mass.  Eigenvalues of (K, M) are the band functions; K + M is the
/// resolvent operator.
inline std::pair<KronForm, KronForm> compose_pencil(Real eps, const Vec3& theta,
                                                    const CellForms& cell) {
  if (!(eps > 0.0 && eps < 1.0)) throw ParameterError("compose_pencil: eps must lie in (0,1)");
  if (!in_dual_cell(theta)) throw ParameterError("compose_pencil: theta outside the dual cell");
  const Real w = 1.0 / (eps * eps);
  const KronForm a = cell.a_theta(theta);
  const KronForm fib = cell.fibre_inplane(theta);
  KronForm k(cell.n2(), cell.n1());
  for (const auto& t : a.terms()) k.add_term(w * t.w, t.a2, t.a1);
  for (const auto& t : fib.terms()) k.add_term(t.w, t.a2, t.a1);
  return {std::move(k), cell.mass()};
}

}  // namespace fibrehom
