#pragma once

#include <Eigen/SparseCholesky>

#include "fibrehom/cell.hpp"
#include "fibrehom/eigensolve.hpp"
#include "fibrehom/mesh2d.hpp"

namespace fibrehom {

/// Rescaled quasimomentum xi = theta / eps.
struct Xi {
  Vec3 value = Vec3::Zero();
  Xi() = default;
  explicit Xi(const Vec3& v) : value(v) {
    if (!v.allFinite()) throw ParameterError("Xi: components must be finite");
  }
  Real operator[](int i) const { return value[i]; }
};

/// Element of the limit space: a scalar plus a Dirichlet field on the disk.
struct LimitElement {
  Complex z0{0.0, 0.0};
  VecXc z1;  // interior disk nodes, vanishing on the interface
};

/// Discrete carrier of the limit forms on Z0 + Z1: unknown 0 is the scalar
/// z0, unknowns 1..n_int are the interior nodes of the disk submesh.  The
/// bordered row couples z0 to the disk mass of z1.
class LimitOperator {
public:
  explicit LimitOperator(const DiskMesh& dm) : dm_(&dm) {
    const Index nv = dm.n_vertices();
    const Index ni = dm.n_interior();
    interior_index_.assign(static_cast<std::size_t>(nv), -1);
    for (Index i = 0; i < ni; ++i)
      interior_index_[static_cast<std::size_t>(dm.interior_nodes[static_cast<std::size_t>(i)])] = i;

    area_ = dm.area();
    std::vector<Eigen::Triplet<Real>> kt, mt;
    VecX mvec = VecX::Zero(ni);
    for (Index ti = 0; ti < dm.n_triangles(); ++ti) {
      const auto& tv = dm.triangles[static_cast<std::size_t>(ti)];
      const Vec2& p0 = dm.vertices[static_cast<std::size_t>(tv[0])];
      const Vec2& p1 = dm.vertices[static_cast<std::size_t>(tv[1])];
      const Vec2& p2 = dm.vertices[static_cast<std::size_t>(tv[2])];
      const Real area =
          0.5 * ((p1.x() - p0.x()) * (p2.y() - p0.y()) - (p2.x() - p0.x()) * (p1.y() - p0.y()));
      std::array<Vec2, 3> grad;
      const std::array<Vec2, 3> p{p0, p1, p2};
      for (int i = 0; i < 3; ++i) {
        const Vec2& pa = p[static_cast<std::size_t>((i + 1) % 3)];
        const Vec2& pb = p[static_cast<std::size_t>((i + 2) % 3)];
        grad[static_cast<std::size_t>(i)] = Vec2(pa.y() - pb.y(), pb.x() - pa.x()) / (2.0 * area);
      }
      for (int i = 0; i < 3; ++i) {
        const Index gi = interior_index_[static_cast<std::size_t>(tv[static_cast<std::size_t>(i)])];
        if (gi < 0) continue;
        mvec[gi] += area / 3.0;
        for (int j = 0; j < 3; ++j) {
          const Index gj = interior_index_[static_cast<std::size_t>(tv[static_cast<std::size_t>(j)])];
          if (gj < 0) continue;
          kt.emplace_back(gi, gj,
                          area * grad[static_cast<std::size_t>(i)].dot(grad[static_cast<std::size_t>(j)]));
          mt.emplace_back(gi, gj, area / 12.0 * (i == j ? 2.0 : 1.0));
        }
      }
    }
    k_int_.resize(ni, ni);
    k_int_.setFromTriplets(kt.begin(), kt.end());
    m_int_.resize(ni, ni);
    m_int_.setFromTriplets(mt.begin(), mt.end());
    m_border_ = mvec;
  }

  const DiskMesh& mesh() const { return *dm_; }
  Index dim() const { return 1 + m_border_.size(); }
  Real disk_area() const { return area_; }

  /// Bordered disk mass (z0 + z1, zt0 + zt1)_{L2(B)}.
  SparseR disk_mass() const {
    std::vector<Eigen::Triplet<Real>> t;
    t.emplace_back(0, 0, area_);
    for (Index j = 0; j < m_border_.size(); ++j) {
      t.emplace_back(0, j + 1, m_border_[j]);
      t.emplace_back(j + 1, 0, m_border_[j]);
    }
    append_block(t, m_int_, 1, 1);
    SparseR out(dim(), dim());
    out.setFromTriplets(t.begin(), t.end());
    return out;
  }

  /// MV: the L2(square') norm of z0 + chi_B z1 (the limit-space inner product).
  SparseR mv_form() const {
    SparseR out = disk_mass();
    out.coeffRef(0, 0) += 1.0 - area_;
    return out;
  }

  /// S_xi minus MV: the form generating the limit operator itself, so that
  /// bands solve (S - MV) z = Lambda MV z.
  SparseR stiffness(const Xi& xi, const HomogenizedCoefficients& hc) const {
    const Real axx = xi.value.dot(hc.Ah * xi.value);
    const Real w = hc.ah * xi[2] * xi[2];
    std::vector<Eigen::Triplet<Real>> t;
    t.emplace_back(0, 0, axx + w * area_);
    for (Index j = 0; j < m_border_.size(); ++j) {
      t.emplace_back(0, j + 1, w * m_border_[j]);
      t.emplace_back(j + 1, 0, w * m_border_[j]);
    }
    append_block(t, SparseR(k_int_ + w * m_int_), 1, 1);
    SparseR out(dim(), dim());
    out.setFromTriplets(t.begin(), t.end());
    return out;
  }

  /// Full S_xi (the (L_xi + I) form).
  SparseR s_form(const Xi& xi, const HomogenizedCoefficients& hc) const {
    return SparseR(stiffness(xi, hc) + mv_form());
  }

  /// Restrict a per-2D-DOF load vector to the limit space test functions:
  /// entry 0 tests against the constant over the whole cross-section, entries
  /// j against the interior disk hats.
  VecXc restrict_load(const VecXc& s2) const {
    VecXc rhs(dim());
    rhs[0] = s2.sum();
    const auto& dm = *dm_;
    for (Index i = 0; i < dm.n_interior(); ++i)
      rhs[i + 1] = s2[dm.parent_dof[static_cast<std::size_t>(dm.interior_nodes[static_cast<std::size_t>(i)])]];
    return rhs;
  }

private:
  static void append_block(std::vector<Eigen::Triplet<Real>>& t, const SparseR& block, Index r0,
                           Index c0) {
    for (Index k = 0; k < block.outerSize(); ++k)
      for (SparseR::InnerIterator it(block, k); it; ++it)
        t.emplace_back(it.row() + r0, it.col() + c0, it.value());
  }

  const DiskMesh* dm_;
  std::vector<Index> interior_index_;
  SparseR k_int_, m_int_;
  VecX m_border_;
  Real area_ = 0.0;
};

/// Ascending band functions Lambda^(k)(xi) of the limit operator.
inline SpectralResult limit_bands(const Xi& xi, Index k, const HomogenizedCoefficients& hc,
                                  const LimitOperator& op, const EigOptions& base_opts = {}) {
  EigOptions opts = base_opts;
  opts.k = k;
  const SparseR ks = op.stiffness(xi, hc);
  const SparseR mv = op.mv_form();
  return shift_invert_eigs(ks.cast<Complex>(), mv.cast<Complex>(), opts, 1.0);
}

/// Solve the V-problem (S_xi) z = rhs for a given limit-space load.
inline LimitElement solve_limit_resolvent(const Xi& xi, const VecXc& rhs,
                                          const HomogenizedCoefficients& hc,
                                          const LimitOperator& op) {
  if (rhs.size() != op.dim()) throw ParameterError("solve_limit_resolvent: rhs dimension mismatch");
  Eigen::SimplicialLDLT<SparseR> ldlt;
  SparseR s = op.s_form(xi, hc);
  ldlt.compute(s);
  if (ldlt.info() != Eigen::Success)
    throw SolveError("solve_limit_resolvent: factorisation failed", {});
  VecX re = ldlt.solve(rhs.real());
  VecX im = ldlt.solve(rhs.imag());
  VecXc z = re + Complex(0.0, 1.0) * im;
  const Real resid = (s * z - rhs).norm() / std::max(1.0, rhs.norm());
  if (!(resid <= 1e-10)) throw SolveError("solve_limit_resolvent: residual above 1e-10", {resid});
  LimitElement out;
  out.z0 = z[0];
  out.z1 = z.tail(op.dim() - 1);
  return out;
}

}  // namespace fibrehom
