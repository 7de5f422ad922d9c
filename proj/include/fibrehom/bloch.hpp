#pragma once

#include "fibrehom/cell.hpp"
#include "fibrehom/limit.hpp"
#include "fibrehom/tensor_precond.hpp"

namespace fibrehom {

enum class ModulateDir { Forward, Adjoint };

/// Multiplication by exp(+- i theta' . y') at the canonical DOF coordinates.
/// Accepts a cross-section field (length n2) or a tensor field (length n2*n1,
/// axial index fastest).
inline VecXc modulate(const PeriodicMesh2D& m2, const Vec2& theta_p, const VecXc& field,
                      ModulateDir dir) {
  const Index n2 = m2.n_dofs;
  if (field.size() % n2 != 0) throw ParameterError("modulate: field length not a multiple of n2");
  const Index n1 = field.size() / n2;
  const auto coords = m2.dof_coordinates();
  VecXc out(field.size());
  for (Index d = 0; d < n2; ++d) {
    const Real phase = theta_p.dot(coords[static_cast<std::size_t>(d)]);
    const Complex z = std::polar(1.0, dir == ModulateDir::Forward ? phase : -phase);
    out.segment(d * n1, n1) = z * field.segment(d * n1, n1);
  }
  return out;
}

/// Discrete basis of V: the constant vector plus, for each interior node of
/// the disk, the 2D hat extended constantly in the axial direction.  Holds the
/// (a0 + b0)-Gram of that basis and applies the orthogonal projector onto
/// W = V-perp in the same inner product.
class SubspaceBasis {
public:
  explicit SubspaceBasis(const CellForms& cell) : cell_(&cell), g_form_(cell.n2(), cell.n1()) {
    const DiskMesh dm = fibre_submesh(*cell.mesh2);
    for (Index i = 0; i < dm.n_interior(); ++i)
      disk_dofs_.push_back(dm.parent_dof[static_cast<std::size_t>(dm.interior_nodes[static_cast<std::size_t>(i)])]);

    // a0 + b0: the theta = 0 energy plus the tensor mass
    {
      const KronForm a = cell.a_theta(Vec3::Zero());
      const KronForm fib = cell.fibre_inplane(Vec3::Zero());
      const KronForm mass = cell.mass();
      for (const auto& t : a.terms()) g_form_.add_term(t.w, t.a2, t.a1);
      for (const auto& t : fib.terms()) g_form_.add_term(t.w, t.a2, t.a1);
      for (const auto& t : mass.terms()) g_form_.add_term(t.w, t.a2, t.a1);
    }

    // Gram of {1} u {hat_j (x) axial-constant} in (a0 + b0); a0 vanishes on V,
    // the axial mass factor integrates to one, so everything reduces to 2D forms
    const Index nv = dim_v();
    const SparseC k2f = bloch_stiffness_2d(*cell.mesh2, Vec2::Zero(), Region::Fibre).matrix();
    const SparseC& m2 = cell.m2_all->matrix();
    MatX gram = MatX::Zero(nv, nv);
    const VecX m2_row = (m2 * VecXc::Ones(cell.n2())).real();
    gram(0, 0) = 1.0;
    for (Index a = 0; a < static_cast<Index>(disk_dofs_.size()); ++a) {
      gram(0, a + 1) = gram(a + 1, 0) = m2_row[disk_dofs_[static_cast<std::size_t>(a)]];
      for (Index b = 0; b < static_cast<Index>(disk_dofs_.size()); ++b)
        gram(a + 1, b + 1) = k2f.coeff(disk_dofs_[static_cast<std::size_t>(a)],
                                       disk_dofs_[static_cast<std::size_t>(b)]).real() +
                             m2.coeff(disk_dofs_[static_cast<std::size_t>(a)],
                                      disk_dofs_[static_cast<std::size_t>(b)]).real();
    }
    gram_llt_.compute(gram);
    if (gram_llt_.info() != Eigen::Success)
      throw SolveError("SubspaceBasis: V-Gram not positive definite", {});
  }

  Index dim_v() const { return 1 + static_cast<Index>(disk_dofs_.size()); }
  const std::vector<Index>& disk_interior_dofs() const { return disk_dofs_; }

  /// Coefficients <v_j, (a0+b0) x> for all basis vectors at once.
  VecXc v_pairings(const VecXc& gx) const {
    const Index n1 = cell_->n1();
    const Index n2 = cell_->n2();
    VecXc s2(n2);
    for (Index d = 0; d < n2; ++d) s2[d] = gx.segment(d * n1, n1).sum();
    VecXc w(dim_v());
    w[0] = s2.sum();
    for (Index j = 0; j < static_cast<Index>(disk_dofs_.size()); ++j)
      w[j + 1] = s2[disk_dofs_[static_cast<std::size_t>(j)]];
    return w;
  }

  /// In-place application of P_W = I - Pi_V to every column.
  void project_out_v(MatXc& x) const {
    const Index n1 = cell_->n1();
    for (Index col = 0; col < x.cols(); ++col) {
      VecXc gx = g_form_.apply(VecXc(x.col(col)));
      VecXc w = v_pairings(gx);
      VecXc alpha = gram_llt_.solve(w);
      x.col(col).array() -= alpha[0];
      for (Index j = 0; j < static_cast<Index>(disk_dofs_.size()); ++j)
        x.col(col).segment(disk_dofs_[static_cast<std::size_t>(j)] * n1, n1).array() -= alpha[j + 1];
    }
  }

  /// Adjoint projector P_W^H = I - G V Gram^-1 V^H: annihilates exactly the
  /// components of a residual that are invisible to test functions in W.
  void project_residual(MatXc& r) const {
    const Index n1 = cell_->n1();
    for (Index col = 0; col < r.cols(); ++col) {
      VecXc w = v_pairings(VecXc(r.col(col)));
      VecXc alpha = gram_llt_.solve(w);
      VecXc vb = VecXc::Constant(r.rows(), alpha[0]);
      for (Index j = 0; j < static_cast<Index>(disk_dofs_.size()); ++j)
        vb.segment(disk_dofs_[static_cast<std::size_t>(j)] * n1, n1).array() += alpha[j + 1];
      r.col(col) -= g_form_.apply(vb);
    }
  }

  VecXc project_out_v(const VecXc& x) const {
    MatXc m = x;
    project_out_v(m);
    return m.col(0);
  }

private:
  const CellForms* cell_;
  std::vector<Index> disk_dofs_;
  KronForm g_form_;
  Eigen::LLT<MatXc> gram_llt_;
};

/// Band functions of the quasimomentum fibre problem, ascending.  At theta = 0
/// the constant kernel is deflated from the iteration and the exact zero pair
/// is reinserted.
inline SpectralResult epsilon_bands(const CellForms& cell, Real eps, const Vec3& theta, Index k,
                                    const EigOptions& base_opts = {}) {
  auto [kf, mf] = compose_pencil(eps, theta, cell);
  const auto tp = TensorPreconditioner::for_pencil(cell, eps, theta);
  const LinOp precond = tp.as_linop();
  EigOptions opts = base_opts;

  const bool at_origin = theta.isZero(0.0);
  if (at_origin) {
    VecXc ones = VecXc::Ones(cell.n());
    const Real res0 = kf.apply(ones).norm();
    if (k == 1) {
      SpectralResult out;
      out.eigenvalues = VecX::Zero(1);
      out.residuals = VecX::Constant(1, res0);
      out.vectors = ones;
      out.iterations = 0;
      out.requested_k = 1;
      return out;
    }
    opts.k = k - 1;
    opts.constraints = ones;
    auto r = smallest_eigs(LinOp::from(kf), LinOp::from(mf), opts, &precond);
    SpectralResult out;
    const Index ke = r.eigenvalues.size();
    out.eigenvalues.resize(ke + 1);
    out.eigenvalues[0] = 0.0;
    out.eigenvalues.tail(ke) = r.eigenvalues;
    out.residuals.resize(ke + 1);
    out.residuals[0] = res0;
    out.residuals.tail(ke) = r.residuals;
    out.vectors.resize(cell.n(), ke + 1);
    out.vectors.col(0) = ones;
    out.vectors.rightCols(ke) = r.vectors;
    out.iterations = r.iterations;
    out.requested_k = k;
    return out;
  }
  opts.k = k;
  return smallest_eigs(LinOp::from(kf), LinOp::from(mf), opts, &precond);
}

/// Solve (K + M) u = M f: the discrete resolvent of the fibre problem.
inline VecXc solve_epsilon_resolvent(const CellForms& cell, Real eps, const Vec3& theta,
                                     const VecXc& f, Real rel_tol = 1e-11, int max_iter = 2000) {
  if (f.size() != cell.n())
    throw ParameterError("solve_epsilon_resolvent: load length does not match the tensor mesh");
  auto [kf, mf] = compose_pencil(eps, theta, cell);
  KronForm km(cell.n2(), cell.n1());
  for (const auto& t : kf.terms()) km.add_term(t.w, t.a2, t.a1);
  for (const auto& t : mf.terms()) km.add_term(t.w, t.a2, t.a1);
  const VecXc rhs = mf.apply(f);
  const auto tp = TensorPreconditioner::for_pencil(cell, eps, theta);
  const LinOp precond = tp.as_linop();
  return pcg(LinOp::from(km), rhs, rel_tol, max_iter, &precond);
}

/// gamma(theta): smallest eigenvalue of (a_theta, c) restricted to W, realised
/// matrix-free through the subspace projector.  Eigenvalues below 1e-10 are
/// treated as deflation artifacts.
inline Real coercivity_gap(const CellForms& cell, const SubspaceBasis& basis, const Vec3& theta,
                           const EigOptions& base_opts = {}) {
  const KronForm a = cell.a_theta(theta);
  const KronForm c = cell.mass();
  const auto tp = TensorPreconditioner::for_gap(cell, theta);
  const LinOp tp_op = tp.as_linop();
  // sandwich the preconditioner between the adjoint and forward projectors so
  // preconditioned directions stay descent directions within W
  const LinOp precond{cell.n(), [&](const Eigen::Ref<const MatXc>& x, Eigen::Ref<MatXc> y) {
                        MatXc tmp = x;
                        basis.project_residual(tmp);
                        tp_op.apply(tmp, y);
                        tmp = y;
                        basis.project_out_v(tmp);
                        y = tmp;
                      }};
  EigOptions opts = base_opts;
  opts.k = 2;
  opts.subspace_projector = [&basis](MatXc& x) { basis.project_out_v(x); };
  opts.residual_projector = [&basis](MatXc& r) { basis.project_residual(r); };
  auto r = smallest_eigs(LinOp::from(a), LinOp::from(c), opts, &precond);
  for (Index i = 0; i < r.eigenvalues.size(); ++i)
    if (r.eigenvalues[i] >= 1e-10) return r.eigenvalues[i];
  throw SolveError("coercivity_gap: only deflation artifacts found", {});
}

namespace detail {

inline HermitianForm restrict_form(const SparseC& a, const std::vector<Index>& keep) {
  std::vector<Index> where(static_cast<std::size_t>(a.rows()), -1);
  for (std::size_t i = 0; i < keep.size(); ++i) where[static_cast<std::size_t>(keep[i])] = static_cast<Index>(i);
  std::vector<TripletC> trip;
  for (Index k = 0; k < a.outerSize(); ++k)
    for (SparseC::InnerIterator it(a, k); it; ++it) {
      const Index r = where[static_cast<std::size_t>(it.row())];
      const Index c = where[static_cast<std::size_t>(it.col())];
      if (r >= 0 && c >= 0) trip.emplace_back(r, c, it.value());
    }
  return HermitianForm::from_triplets(static_cast<Index>(keep.size()), trip);
}

/// Schur complement of the fibre cross-section mass onto the interface nodes:
/// the exact result of minimising the axial fibre energy over the values at
/// fibre-interior nodes.
inline SparseR fibre_mass_interface_schur(const PeriodicMesh2D& m2, const SparseC& m2_fib,
                                          const std::vector<Index>& o_dofs) {
  const Index n2 = m2.n_dofs;
  std::vector<bool> in_o(static_cast<std::size_t>(n2), false);
  for (Index d : o_dofs) in_o[static_cast<std::size_t>(d)] = true;
  std::vector<Index> k_dofs;  // fibre-interior DOFs
  for (Index d = 0; d < n2; ++d)
    if (!in_o[static_cast<std::size_t>(d)]) k_dofs.push_back(d);
  std::vector<Index> ifc_dofs;  // interface DOFs carry the fibre mass inside o
  {
    std::vector<bool> seen(static_cast<std::size_t>(n2), false);
    for (Index v : m2.interface_nodes) {
      Index d = m2.dof_of_node[static_cast<std::size_t>(v)];
      if (!seen[static_cast<std::size_t>(d)]) {
        seen[static_cast<std::size_t>(d)] = true;
        ifc_dofs.push_back(d);
      }
    }
  }
  SparseR fib = m2_fib.real();
  auto sub = [&](const std::vector<Index>& rows, const std::vector<Index>& cols) {
    std::vector<Index> where(static_cast<std::size_t>(n2), -1);
    for (std::size_t i = 0; i < cols.size(); ++i) where[static_cast<std::size_t>(cols[i])] = static_cast<Index>(i);
    std::vector<Eigen::Triplet<Real>> t;
    std::vector<Index> rwhere(static_cast<std::size_t>(n2), -1);
    for (std::size_t i = 0; i < rows.size(); ++i) rwhere[static_cast<std::size_t>(rows[i])] = static_cast<Index>(i);
    for (Index k = 0; k < fib.outerSize(); ++k)
      for (SparseR::InnerIterator it(fib, k); it; ++it) {
        const Index r = rwhere[static_cast<std::size_t>(it.row())];
        const Index c = where[static_cast<std::size_t>(it.col())];
        if (r >= 0 && c >= 0) t.emplace_back(r, c, it.value());
      }
    SparseR out(static_cast<Index>(rows.size()), static_cast<Index>(cols.size()));
    out.setFromTriplets(t.begin(), t.end());
    return out;
  };
  const SparseR m_ii = sub(ifc_dofs, ifc_dofs);
  const SparseR m_ik = sub(ifc_dofs, k_dofs);
  const SparseR m_kk = sub(k_dofs, k_dofs);
  Eigen::SimplicialLDLT<SparseR> ldlt(m_kk);
  if (ldlt.info() != Eigen::Success)
    throw SolveError("fibre_mass_interface_schur: interior mass factorisation failed", {});
  MatX rhs = MatX(m_ik.transpose());
  MatX z = ldlt.solve(rhs);
  MatX schur = MatX(m_ii) - MatX(m_ik) * z;

  // embed on the o-index set
  std::vector<Index> o_where(static_cast<std::size_t>(n2), -1);
  for (std::size_t i = 0; i < o_dofs.size(); ++i) o_where[static_cast<std::size_t>(o_dofs[i])] = static_cast<Index>(i);
  std::vector<Eigen::Triplet<Real>> t;
  for (Index a = 0; a < schur.rows(); ++a)
    for (Index b = 0; b < schur.cols(); ++b)
      if (schur(a, b) != 0.0)
        t.emplace_back(o_where[static_cast<std::size_t>(ifc_dofs[static_cast<std::size_t>(a)])],
                       o_where[static_cast<std::size_t>(ifc_dofs[static_cast<std::size_t>(b)])],
                       schur(a, b));
  SparseR out(static_cast<Index>(o_dofs.size()), static_cast<Index>(o_dofs.size()));
  out.setFromTriplets(t.begin(), t.end());
  return out;
}

}  // namespace detail

/// gamma*(theta): smallest eigenvalue of (a_theta, d_theta) with
/// d_theta = |theta3|^2 c[chi0 u] + |theta|^2 c[chi1 u].  For theta3 = 0 the
/// directional mass vanishes on fibre-interior values, which are minimised
/// out of a_theta exactly (a mass-Schur complement onto the interface trace),
/// leaving a positive definite pencil on the matrix-closure unknowns.
inline Real directional_gap(const CellForms& cell, const Vec3& theta,
                            const EigOptions& base_opts = {}) {
  if (theta.isZero(0.0)) throw ParameterError("directional_gap: theta = 0 degenerates the pencil");
  EigOptions opts = base_opts;
  opts.k = 1;

  if (theta[2] != 0.0) {
    const KronForm a = cell.a_theta(theta);
    const KronForm d = cell.directional_mass(theta);
    const auto tp = TensorPreconditioner::for_gap(cell, theta);
    const LinOp precond = tp.as_linop();
    auto r = smallest_eigs(LinOp::from(a), LinOp::from(d), opts, &precond);
    return r.eigenvalues[0];
  }

  // theta3 = 0: reduce to the matrix-closure unknowns
  const Vec2 theta_p(theta[0], theta[1]);
  const auto o_dofs = detail::matrix_region_dofs(*cell.mesh2);
  auto k2_mat_o = std::make_shared<HermitianForm>(
      detail::restrict_form(bloch_stiffness_2d(*cell.mesh2, theta_p, Region::Matrix).matrix(), o_dofs));
  auto m2_mat_o = std::make_shared<HermitianForm>(detail::restrict_form(cell.m2_mat->matrix(), o_dofs));
  const SparseR schur = detail::fibre_mass_interface_schur(*cell.mesh2, cell.m2_fib->matrix(), o_dofs);
  auto schur_form = std::make_shared<HermitianForm>(SparseC(schur.cast<Complex>()));

  auto k1u = std::make_shared<HermitianForm>(bloch_stiffness_1d(*cell.mesh1, 0.0, nullptr));
  auto k1a = std::make_shared<HermitianForm>(bloch_stiffness_1d(*cell.mesh1, 0.0, cell.profile));
  auto m1 = std::make_shared<HermitianForm>(mass_1d(*cell.mesh1));

  const Index no = static_cast<Index>(o_dofs.size());
  KronForm a(no, cell.n1());
  a.add_term(1.0, k2_mat_o, m1);
  a.add_term(1.0, m2_mat_o, k1u);
  a.add_term(1.0, schur_form, k1a);
  KronForm d(no, cell.n1());
  d.add_term(theta.squaredNorm(), m2_mat_o, m1);

  const Real abar = harmonic_mean(*cell.profile);
  auto builder = [&](Real dj) {
    return Eigen::SparseMatrix<Complex>(
        (k2_mat_o->matrix() + dj * (m2_mat_o->matrix() + abar * schur_form->matrix()) +
         theta.squaredNorm() * m2_mat_o->matrix())
            .pruned());
  };
  const TensorPreconditioner tp(*k1u, *m1, no, builder);
  const LinOp precond = tp.as_linop();
  auto r = smallest_eigs(LinOp::from(a), LinOp::from(d), opts, &precond);
  return r.eigenvalues[0];
}

}  // namespace fibrehom
