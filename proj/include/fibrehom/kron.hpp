#pragma once

#include <memory>

#include "fibrehom/core.hpp"
#include "fibrehom/forms.hpp"

namespace fibrehom {

using FormPtr = std::shared_ptr<const HermitianForm>;

/// Sum of tensor-product terms w * (A2 x A1) acting on vectors indexed by
/// (i2, i1) with the 1D index fastest.  The sum is never materialised outside
/// dense(); matvecs go term by term through the factor matrices.
class KronForm {
public:
  struct Term {
    Real w;
    FormPtr a2;
    FormPtr a1;
  };

  KronForm() = default;
  KronForm(Index n2, Index n1) : n2_(n2), n1_(n1) {}

  void add_term(Real w, FormPtr a2, FormPtr a1) {
    if (a2->n() != n2_ || a1->n() != n1_) throw ParameterError("KronForm: factor dimension mismatch");
    terms_.push_back({w, std::move(a2), std::move(a1)});
  }

  Index n() const { return n2_ * n1_; }
  Index n2() const { return n2_; }
  Index n1() const { return n1_; }
  const std::vector<Term>& terms() const { return terms_; }

  void apply(const Eigen::Ref<const MatXc>& x, Eigen::Ref<MatXc> y) const {
    y.setZero();
    using RowMat = Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    for (Index col = 0; col < x.cols(); ++col) {
      Eigen::Map<const RowMat> xm(x.col(col).data(), n2_, n1_);
      Eigen::Map<RowMat> ym(y.col(col).data(), n2_, n1_);
      for (const auto& t : terms_) {
        RowMat tmp = xm * t.a1->matrix().transpose();
        ym.noalias() += t.w * (t.a2->matrix() * tmp);
      }
    }
  }

  VecXc apply(const VecXc& x) const {
    MatXc y(x.size(), 1);
    apply(x, y);
    return y.col(0);
  }

  VecX diagonal() const {
    VecX d = VecX::Zero(n());
    for (const auto& t : terms_) {
      VecX d2 = t.a2->diagonal();
      VecX d1 = t.a1->diagonal();
      for (Index i2 = 0; i2 < n2_; ++i2)
        d.segment(i2 * n1_, n1_) += (t.w * d2[i2]) * d1;
    }
    return d;
  }

  /// Full matrix, for tests on small problems only.
  MatXc dense() const {
    MatXc out = MatXc::Zero(n(), n());
    for (const auto& t : terms_) {
      MatXc a2 = t.a2->dense();
      MatXc a1 = t.a1->dense();
      for (Index i2 = 0; i2 < n2_; ++i2)
        for (Index j2 = 0; j2 < n2_; ++j2)
          if (a2(i2, j2) != Complex(0, 0))
            out.block(i2 * n1_, j2 * n1_, n1_, n1_) += (t.w * a2(i2, j2)) * a1;
    }
    return out;
  }

private:
  Index n2_ = 0, n1_ = 0;
  std::vector<Term> terms_;
};

}  // namespace fibrehom
