#pragma once

#include "fibrehom/cell.hpp"
#include "fibrehom/eigensolve.hpp"

namespace fibrehom {

/// Independent check of the radially symmetric limit branch for xi = (0,0,xi3):
/// 1D finite elements in the radius with exact rho-weighted integrals, the
/// boundary value of the disk field identified with the scalar unknown, and
/// analytic areas (pi r^2) instead of mesh quantities.  Returns the k smallest
/// branch eigenvalues.
inline VecX radial_oracle(Real xi3, Real r, const HomogenizedCoefficients& hc, Index k,
                          Index n_points = 10001) {
  if (!(r > 0.0 && r < 0.5)) throw ParameterError("radial_oracle: need 0 < r < 1/2");
  if (n_points < 3) throw ParameterError("radial_oracle: too few points");
  const Index n = n_points;  // nodes 0..n-1, node n-1 at rho = r carries z0
  const Real dr = r / static_cast<Real>(n - 1);

  std::vector<Eigen::Triplet<Real>> kt, mt;
  const Real two_pi = 2.0 * kPi;
  for (Index e = 0; e + 1 < n; ++e) {
    const Real a = dr * static_cast<Real>(e);
    const Real l = dr;
    // exact rho-weighted element integrals for P1 on [a, a+l]
    const Real s_diag = (a + a + l) / (2.0 * l);
    const Real m00 = a * l / 3.0 + l * l / 12.0;
    const Real m11 = a * l / 3.0 + l * l / 4.0;
    const Real m01 = a * l / 6.0 + l * l / 12.0;
    const std::array<Index, 2> d{e, e + 1};
    const std::array<std::array<Real, 2>, 2> ks{{{s_diag, -s_diag}, {-s_diag, s_diag}}};
    const std::array<std::array<Real, 2>, 2> ms{{{m00, m01}, {m01, m11}}};
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) {
        kt.emplace_back(d[static_cast<std::size_t>(i)], d[static_cast<std::size_t>(j)],
                        two_pi * ks[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]);
        mt.emplace_back(d[static_cast<std::size_t>(i)], d[static_cast<std::size_t>(j)],
                        two_pi * ms[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]);
      }
  }
  SparseR k_rho(n, n), m_rho(n, n);
  k_rho.setFromTriplets(kt.begin(), kt.end());
  m_rho.setFromTriplets(mt.begin(), mt.end());

  const Real area = kPi * r * r;
  const Real a33 = 1.0 - area;
  const Real w = hc.ah * xi3 * xi3;
  SparseR ks_mat = SparseR(k_rho + w * m_rho);
  ks_mat.coeffRef(n - 1, n - 1) += a33 * xi3 * xi3;
  SparseR mv = m_rho;
  mv.coeffRef(n - 1, n - 1) += a33;

  // the rho-weight vanishes at the axis; rescale symmetrically so residual
  // tolerances are meaningful uniformly in n
  VecX scale(n);
  for (Index i = 0; i < n; ++i)
    scale[i] = 1.0 / std::sqrt(ks_mat.coeff(i, i) + mv.coeff(i, i));
  SparseR ks_scaled = scale.asDiagonal() * ks_mat * scale.asDiagonal();
  SparseR mv_scaled = scale.asDiagonal() * mv * scale.asDiagonal();

  EigOptions opts;
  opts.k = k;
  opts.tol = 1e-9;
  auto res = shift_invert_eigs(ks_scaled.cast<Complex>(), mv_scaled.cast<Complex>(), opts, 1.0);
  return res.eigenvalues.head(std::min<Index>(k, res.eigenvalues.size()));
}

}  // namespace fibrehom
