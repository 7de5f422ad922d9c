#pragma once

#include <Eigen/SparseCholesky>

#include "fibrehom/eigensolve.hpp"
#include "fibrehom/pencil.hpp"

namespace fibrehom {

/// Preconditioner for pencils of the form
///   w_a * a_theta + w_fib * fibre_inplane + w_mass * c
/// built by diagonalising the axial direction: the weighted axial fibre
/// stiffness is approximated by abar * K1(theta3), after which the operator
/// block-diagonalises over the 1D eigenmodes into n1 sparse 2D problems that
/// are factorised once.  Spectrally equivalent with constants governed by
/// max a / abar and min a / abar, so iteration counts stay bounded as eps -> 0.
class TensorPreconditioner {
public:
  /// Generic form: diagonalise the 1D pencil (k1, m1) and factorise 2D
  /// operators supplied by `mode_builder(d)`.  Axial modes are bucketed by
  /// the ratio of their eigenvalues and share one factorisation per bucket
  /// (spectral equivalence within a factor 2), which bounds both the memory
  /// and the factorisation work independently of n1.
  TensorPreconditioner(const HermitianForm& k1, const HermitianForm& m1, Index n2,
                       const std::function<Eigen::SparseMatrix<Complex>(Real)>& mode_builder)
      : n2_(n2), n1_(k1.n()) {
    Eigen::GeneralizedSelfAdjointEigenSolver<MatXc> ges(k1.dense(), m1.dense(),
                                                        Eigen::ComputeEigenvectors | Eigen::Ax_lBx);
    u_ = ges.eigenvectors();  // M1-orthonormal columns
    const VecX d = ges.eigenvalues();

    Real shift = 0.0;
    for (Index j = 0; j < n1_; ++j)
      if (d[j] > 1e-10 && shift == 0.0) shift = d[j];
    if (shift == 0.0) shift = 1.0;

    mode_factor_.resize(static_cast<std::size_t>(n1_));
    Real anchor = -1.0;
    for (Index j = 0; j < n1_; ++j) {  // d ascending
      if (anchor < 0.0 || d[j] + shift > 2.0 * (anchor + shift)) {
        anchor = d[j];
        factors_.push_back(std::make_unique<Eigen::SimplicialLDLT<Eigen::SparseMatrix<Complex>>>());
        factors_.back()->compute(mode_builder(anchor));
        if (factors_.back()->info() != Eigen::Success)
          throw SolveError("TensorPreconditioner: mode factorisation failed", {});
      }
      mode_factor_[static_cast<std::size_t>(j)] = static_cast<Index>(factors_.size()) - 1;
    }
  }

  static TensorPreconditioner make_weighted(const CellForms& cell, const Vec3& theta, Real w_a,
                                            Real w_fib, Real w_mass) {
    const Real abar = harmonic_mean(*cell.profile);
    const Vec2 theta_p(theta[0], theta[1]);
    const SparseC k2_mat = bloch_stiffness_2d(*cell.mesh2, theta_p, Region::Matrix).matrix();
    const SparseC k2_fib = bloch_stiffness_2d(*cell.mesh2, theta_p, Region::Fibre).matrix();
    auto builder = [&](Real d) {
      return Eigen::SparseMatrix<Complex>(
          (w_a * k2_mat + w_fib * k2_fib + w_mass * cell.m2_all->matrix() +
           (w_a * d) * (cell.m2_mat->matrix() + abar * cell.m2_fib->matrix()))
              .pruned());
    };
    return TensorPreconditioner(bloch_stiffness_1d(*cell.mesh1, theta[2], nullptr),
                                mass_1d(*cell.mesh1), cell.n2(), builder);
  }

  Index n() const { return n2_ * n1_; }

  void apply(const Eigen::Ref<const MatXc>& x, Eigen::Ref<MatXc> y) const {
    using RowMat = Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    for (Index col = 0; col < x.cols(); ++col) {
      Eigen::Map<const RowMat> xm(x.col(col).data(), n2_, n1_);
      Eigen::Map<RowMat> ym(y.col(col).data(), n2_, n1_);
      MatXc w = xm * u_.conjugate();
      MatXc v(n2_, n1_);
      for (Index j = 0; j < n1_; ++j)
        v.col(j) = factors_[static_cast<std::size_t>(mode_factor_[static_cast<std::size_t>(j)])]->solve(w.col(j));
      ym = v * u_.transpose();
    }
  }

  LinOp as_linop() const {
    return LinOp{n(), [this](const Eigen::Ref<const MatXc>& x, Eigen::Ref<MatXc> y) {
                   apply(x, y);
                 }};
  }

  /// Preconditioner matched to the resolvent/band pencil eps^-2 a + (b - c) + c.
  static TensorPreconditioner for_pencil(const CellForms& cell, Real eps, const Vec3& theta) {
    return make_weighted(cell, theta, 1.0 / (eps * eps), 1.0, 1.0);
  }

  /// Preconditioner matched to the gap pencils built on a_theta alone.
  static TensorPreconditioner for_gap(const CellForms& cell, const Vec3& theta) {
    return make_weighted(cell, theta, 1.0, 0.0, 1.0);
  }

private:
  Index n2_ = 0, n1_ = 0;
  MatXc u_;
  std::vector<Index> mode_factor_;
  std::vector<std::unique_ptr<Eigen::SimplicialLDLT<Eigen::SparseMatrix<Complex>>>> factors_;
};

}  // namespace fibrehom
