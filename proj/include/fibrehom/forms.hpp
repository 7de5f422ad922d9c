#pragma once

#include <cstdio>
#include <ostream>

#include <Eigen/SparseCore>

#include "fibrehom/core.hpp"

namespace fibrehom {

using SparseC = Eigen::SparseMatrix<Complex, Eigen::RowMajor>;
using SparseR = Eigen::SparseMatrix<Real>;
using TripletC = Eigen::Triplet<Complex>;

/// Sparse Hermitian sesquilinear form in compressed-row storage.
class HermitianForm {
public:
  HermitianForm() = default;
  explicit HermitianForm(SparseC matrix) : a_(std::move(matrix)) {
    a_.makeCompressed();
    a_.prune([](Index, Index, const Complex& v) {
      return std::abs(v.real()) + std::abs(v.imag()) > 0.0;
    });
  }

  static HermitianForm from_triplets(Index n, const std::vector<TripletC>& triplets) {
    SparseC a(n, n);
    a.setFromTriplets(triplets.begin(), triplets.end());
    return HermitianForm(std::move(a));
  }

  Index n() const { return a_.rows(); }
  const SparseC& matrix() const { return a_; }

  VecXc apply(const VecXc& x) const { return a_ * x; }

  /// Max-norm of A - A^H.
  Real hermiticity_defect() const {
    Real defect = 0.0;
    SparseC diff = SparseC(a_ - SparseC(a_.adjoint()));
    for (Index k = 0; k < diff.outerSize(); ++k)
      for (SparseC::InnerIterator it(diff, k); it; ++it)
        defect = std::max(defect, std::abs(it.value()));
    return defect;
  }

  VecX diagonal() const {
    VecX d = VecX::Zero(n());
    for (Index i = 0; i < n(); ++i) d[i] = a_.coeff(i, i).real();
    return d;
  }

  MatXc dense() const { return MatXc(a_); }

  /// Coordinate text export, one `i j re im` line per stored entry.
  void export_coo(std::ostream& os) const {
    char buf[160];
    for (Index k = 0; k < a_.outerSize(); ++k)
      for (SparseC::InnerIterator it(a_, k); it; ++it) {
        std::snprintf(buf, sizeof buf, "%lld %lld %.17g %.17g\n", static_cast<long long>(it.row()),
                      static_cast<long long>(it.col()), it.value().real(), it.value().imag());
        os << buf;
      }
  }

private:
  SparseC a_;
};

}  // namespace fibrehom
