#pragma once

#include "fibrehom/core.hpp"
#include "fibrehom/mesh1d.hpp"
#include "fibrehom/mesh2d.hpp"
#include "fibrehom/profile.hpp"

namespace fibrehom {

/// Dense assembly of the fibre-problem pencil by quadrature over tensor-product
/// prism elements, written without Kronecker shortcuts.  Test oracle only;
/// refuses problems above 5000 unknowns.
inline std::pair<MatXc, MatXc> dense_oracle_form(Real eps, const Vec3& theta,
                                                 const PeriodicMesh2D& m2,
                                                 const PeriodicMesh1D& m1,
                                                 const CoefficientProfile& profile) {
  if (!(eps > 0.0 && eps < 1.0)) throw ParameterError("dense_oracle_form: eps must lie in (0,1)");
  for (int i = 0; i < 3; ++i)
    if (theta[i] < -kPi || theta[i] >= kPi)
      throw ParameterError("dense_oracle_form: theta outside the dual cell");
  const Index n2 = m2.n_dofs;
  const Index n1 = m1.n_nodes();
  const Index n = n2 * n1;
  if (n > 5000) throw ParameterError("dense_oracle_form: dimension cap 5000 exceeded");

  MatXc k = MatXc::Zero(n, n);
  MatXc m = MatXc::Zero(n, n);
  const Complex iu(0.0, 1.0);
  const Vec2 theta_p(theta[0], theta[1]);
  const Real inv_eps2 = 1.0 / (eps * eps);
  const Real gauss = 1.0 / std::sqrt(3.0);

  for (const auto& tri : m2.triangles) {
    const Vec2 p0 = m2.vertices[static_cast<std::size_t>(tri.v[0])];
    const Vec2 p1 = m2.vertices[static_cast<std::size_t>(tri.v[1])];
    const Vec2 p2 = m2.vertices[static_cast<std::size_t>(tri.v[2])];
    const Real area =
        0.5 * std::abs((p1.x() - p0.x()) * (p2.y() - p0.y()) - (p2.x() - p0.x()) * (p1.y() - p0.y()));
    // P1 gradients from the affine map
    Eigen::Matrix2d jac;
    jac << p1.x() - p0.x(), p2.x() - p0.x(), p1.y() - p0.y(), p2.y() - p0.y();
    Eigen::Matrix2d jinv = jac.inverse();
    std::array<Vec2, 3> grad;
    grad[1] = jinv.transpose() * Vec2(1, 0);
    grad[2] = jinv.transpose() * Vec2(0, 1);
    grad[0] = -grad[1] - grad[2];
    // midpoints of edges: degree-2 exact rule with equal weights
    const std::array<std::array<Real, 3>, 3> bary{{{0.5, 0.5, 0.0}, {0.0, 0.5, 0.5}, {0.5, 0.0, 0.5}}};

    for (Index e1 = 0; e1 < n1; ++e1) {
      const Real len = m1.element_length(e1);
      const Real mid = m1.element_midpoint(e1);
      const Real coeff = profile.value_at(mid);
      const std::array<Index, 2> nodes1{e1, (e1 + 1) % n1};
      const std::array<Real, 2> dpsi{-1.0 / len, 1.0 / len};

      std::array<Index, 6> gdof{};
      for (int i = 0; i < 3; ++i)
        for (int p = 0; p < 2; ++p)
          gdof[static_cast<std::size_t>(2 * i + p)] =
              m2.dof_of_node[static_cast<std::size_t>(tri.v[static_cast<std::size_t>(i)])] * n1 +
              nodes1[static_cast<std::size_t>(p)];

      for (int q2 = 0; q2 < 3; ++q2) {
        const Real w2 = area / 3.0;
        for (int q1 = 0; q1 < 2; ++q1) {
          const Real w1 = len / 2.0;
          const Real sref = 0.5 + 0.5 * (q1 == 0 ? -gauss : gauss);  // on [0,1]
          const std::array<Real, 2> psi{1.0 - sref, sref};
          const Real w = w2 * w1;

          // shifted-gradient values of the 6 local basis functions
          std::array<Eigen::Vector2cd, 6> gp;  // in-plane part
          std::array<Complex, 6> ga;           // axial part
          std::array<Real, 6> val;
          for (int i = 0; i < 3; ++i) {
            const Real phi = bary[static_cast<std::size_t>(q2)][static_cast<std::size_t>(i)];
            for (int p = 0; p < 2; ++p) {
              const std::size_t l = static_cast<std::size_t>(2 * i + p);
              val[l] = phi * psi[static_cast<std::size_t>(p)];
              gp[l] = psi[static_cast<std::size_t>(p)] *
                          grad[static_cast<std::size_t>(i)].cast<Complex>() +
                      iu * theta_p.cast<Complex>() * val[l];
              ga[l] = phi * dpsi[static_cast<std::size_t>(p)] + iu * theta[2] * val[l];
            }
          }
          for (std::size_t a = 0; a < 6; ++a)
            for (std::size_t b = 0; b < 6; ++b) {
              Complex kv;
              if (tri.tag == Region::Matrix)
                kv = inv_eps2 * (gp[a].dot(gp[b]) + std::conj(ga[a]) * ga[b]);
              else
                kv = inv_eps2 * coeff * std::conj(ga[a]) * ga[b] + gp[a].dot(gp[b]);
              k(static_cast<Index>(gdof[a]), static_cast<Index>(gdof[b])) += w * kv;
              m(static_cast<Index>(gdof[a]), static_cast<Index>(gdof[b])) += w * val[a] * val[b];
            }
        }
      }
    }
  }
  return {std::move(k), std::move(m)};
}

}  // namespace fibrehom
