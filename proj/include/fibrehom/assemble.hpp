#pragma once

#include "fibrehom/core.hpp"
#include "fibrehom/forms.hpp"
#include "fibrehom/mesh1d.hpp"
#include "fibrehom/mesh2d.hpp"
#include "fibrehom/profile.hpp"

namespace fibrehom {

namespace detail {

// P1 gradients on a triangle: grad phi_i = (y_{i+1}-y_{i+2}, x_{i+2}-x_{i+1}) / (2A)
struct TriGeometry {
  std::array<Vec2, 3> grad;
  Real area;
};

inline TriGeometry tri_geometry(const PeriodicMesh2D& m, const PeriodicMesh2D::Tri& t) {
  const Vec2& p0 = m.vertices[static_cast<std::size_t>(t.v[0])];
  const Vec2& p1 = m.vertices[static_cast<std::size_t>(t.v[1])];
  const Vec2& p2 = m.vertices[static_cast<std::size_t>(t.v[2])];
  TriGeometry g;
  g.area = 0.5 * ((p1.x() - p0.x()) * (p2.y() - p0.y()) - (p2.x() - p0.x()) * (p1.y() - p0.y()));
  const std::array<Vec2, 3> p{p0, p1, p2};
  for (int i = 0; i < 3; ++i) {
    const Vec2& pa = p[static_cast<std::size_t>((i + 1) % 3)];
    const Vec2& pb = p[static_cast<std::size_t>((i + 2) % 3)];
    g.grad[static_cast<std::size_t>(i)] =
        Vec2(pa.y() - pb.y(), pb.x() - pa.x()) / (2.0 * g.area);
  }
  return g;
}

// scatter an exactly-Hermitian 3x3 (or 2x2) element matrix
template <std::size_t N>
inline void scatter_hermitian(const std::array<Index, N>& dofs,
                              const std::array<std::array<Complex, N>, N>& local,
                              std::vector<TripletC>& out) {
  for (std::size_t i = 0; i < N; ++i)
    for (std::size_t j = 0; j < N; ++j)
      out.emplace_back(dofs[i], dofs[j], local[i][j]);
}

}  // namespace detail

/// L2 mass form over the selected region of the cross-section.
inline HermitianForm mass_2d(const PeriodicMesh2D& m, Region region) {
  std::vector<TripletC> trip;
  trip.reserve(static_cast<std::size_t>(9 * m.n_triangles()));
  for (const auto& t : m.triangles) {
    if (region != Region::All && t.tag != region) continue;
    const Real area = std::abs(detail::tri_geometry(m, t).area);
    std::array<Index, 3> dofs{};
    for (int i = 0; i < 3; ++i) dofs[static_cast<std::size_t>(i)] = m.dof_of_node[static_cast<std::size_t>(t.v[static_cast<std::size_t>(i)])];
    std::array<std::array<Complex, 3>, 3> local{};
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 3; ++j)
        local[i][j] = Complex(area / 12.0 * (i == j ? 2.0 : 1.0), 0.0);
    detail::scatter_hermitian(dofs, local, trip);
  }
  return HermitianForm::from_triplets(m.n_dofs, trip);
}

/// Shifted-gradient stiffness int_R |(grad + i theta') u|^2 over region R.
inline HermitianForm bloch_stiffness_2d(const PeriodicMesh2D& m, const Vec2& theta_p, Region region) {
  std::vector<TripletC> trip;
  trip.reserve(static_cast<std::size_t>(9 * m.n_triangles()));
  const Real theta_sq = theta_p.squaredNorm();
  for (const auto& t : m.triangles) {
    if (region != Region::All && t.tag != region) continue;
    const auto g = detail::tri_geometry(m, t);
    const Real area = g.area;
    std::array<Index, 3> dofs{};
    for (int i = 0; i < 3; ++i) dofs[static_cast<std::size_t>(i)] = m.dof_of_node[static_cast<std::size_t>(t.v[static_cast<std::size_t>(i)])];
    std::array<std::array<Complex, 3>, 3> local{};
    for (std::size_t i = 0; i < 3; ++i) {
      local[i][i] = Complex(area * g.grad[i].squaredNorm() + theta_sq * area / 6.0, 0.0);
      for (std::size_t j = i + 1; j < 3; ++j) {
        const Real re = area * g.grad[i].dot(g.grad[j]) + theta_sq * area / 12.0;
        const Real im = area / 3.0 * theta_p.dot(g.grad[i] - g.grad[j]);
        local[i][j] = Complex(re, im);
        local[j][i] = Complex(re, -im);
      }
    }
    detail::scatter_hermitian(dofs, local, trip);
  }
  return HermitianForm::from_triplets(m.n_dofs, trip);
}

/// 1D mass form over [0,1) (unit coefficient).
inline HermitianForm mass_1d(const PeriodicMesh1D& m) {
  const Index n = m.n_nodes();
  std::vector<TripletC> trip;
  trip.reserve(static_cast<std::size_t>(4 * n));
  for (Index e = 0; e < n; ++e) {
    const Real l = m.element_length(e);
    const std::array<Index, 2> dofs{e, (e + 1) % n};
    std::array<std::array<Complex, 2>, 2> local{};
    local[0][0] = local[1][1] = Complex(l / 3.0, 0.0);
    local[0][1] = local[1][0] = Complex(l / 6.0, 0.0);
    detail::scatter_hermitian(dofs, local, trip);
  }
  return HermitianForm::from_triplets(n, trip);
}

/// Weighted axial Bloch stiffness int_0^1 a(s) |(d/ds + i theta3) u|^2 ds.
/// Pass profile = nullptr for the unit coefficient.
inline HermitianForm bloch_stiffness_1d(const PeriodicMesh1D& m, Real theta3,
                                        const CoefficientProfile* profile) {
  const Index n = m.n_nodes();
  std::vector<TripletC> trip;
  trip.reserve(static_cast<std::size_t>(4 * n));
  for (Index e = 0; e < n; ++e) {
    const Real l = m.element_length(e);
    const Real c = profile ? profile->value_at(m.element_midpoint(e)) : 1.0;
    const std::array<Index, 2> dofs{e, (e + 1) % n};
    std::array<std::array<Complex, 2>, 2> local{};
    const Real diag = c / l + theta3 * theta3 * c * l / 3.0;
    local[0][0] = local[1][1] = Complex(diag, 0.0);
    const Real re = -c / l + theta3 * theta3 * c * l / 6.0;
    const Real im = -theta3 * c;  // i*theta3*(D_ab - D_ba), D_ab - D_ba = -1
    local[0][1] = Complex(re, im);
    local[1][0] = Complex(re, -im);
    detail::scatter_hermitian(dofs, local, trip);
  }
  return HermitianForm::from_triplets(n, trip);
}

}  // namespace fibrehom
