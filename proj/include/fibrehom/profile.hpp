#pragma once

#include <algorithm>
#include <cmath>

#include "fibrehom/core.hpp"

namespace fibrehom {

/// 1-periodic axial coefficient a(y3): constant or piecewise constant on [0,1).
/// Breakpoints are strictly ascending and start at 0; value i applies on
/// [breakpoint_i, breakpoint_{i+1}).  All values lie in (nu, 1/nu) for the
/// stored ellipticity constant nu.
class CoefficientProfile {
public:
  enum class Kind { Constant, PiecewiseConstant };

  static CoefficientProfile constant(Real value) {
    return CoefficientProfile(Kind::Constant, {value}, {0.0});
  }

  static CoefficientProfile piecewise(std::vector<Real> values, std::vector<Real> breakpoints) {
    return CoefficientProfile(Kind::PiecewiseConstant, std::move(values), std::move(breakpoints));
  }

  Kind kind() const { return kind_; }
  const std::vector<Real>& values() const { return values_; }
  const std::vector<Real>& breakpoints() const { return breakpoints_; }
  Real nu() const { return nu_; }

  Real value_at(Real s) const {
    s -= std::floor(s);  // 1-periodic
    // last breakpoint <= s
    auto it = std::upper_bound(breakpoints_.begin(), breakpoints_.end(), s);
    Index i = static_cast<Index>(it - breakpoints_.begin()) - 1;
    return values_[static_cast<std::size_t>(i)];
  }

  /// Exact piecewise integral of a over one period.
  Real integral() const { return integrate([](Real v) { return v; }); }

  /// Exact piecewise integral of 1/a over one period.
  Real integral_of_inverse() const {
    return integrate([](Real v) { return 1.0 / v; });
  }

  /// Profile with the cell origin shifted by t: result(s) = a(s + t).
  CoefficientProfile shifted(Real t) const {
    if (kind_ == Kind::Constant) return *this;
    std::vector<Real> brks{0.0};
    for (Real b : breakpoints_) {
      Real nb = b - t;
      nb -= std::floor(nb);
      if (nb > 1e-14 && nb < 1.0 - 1e-14) brks.push_back(nb);
    }
    std::sort(brks.begin(), brks.end());
    brks.erase(std::unique(brks.begin(), brks.end(),
                           [](Real a, Real b) { return std::abs(a - b) < 1e-14; }),
               brks.end());
    std::vector<Real> vals;
    for (std::size_t i = 0; i < brks.size(); ++i) {
      const Real next = (i + 1 < brks.size()) ? brks[i + 1] : 1.0;
      vals.push_back(value_at(0.5 * (brks[i] + next) + t));
    }
    return piecewise(std::move(vals), std::move(brks));
  }

private:
  CoefficientProfile(Kind kind, std::vector<Real> values, std::vector<Real> breakpoints)
      : kind_(kind), values_(std::move(values)), breakpoints_(std::move(breakpoints)) {
    if (values_.empty() || values_.size() != breakpoints_.size())
      throw ParameterError("coefficient profile: values/breakpoints size mismatch");
    if (breakpoints_.front() != 0.0)
      throw ParameterError("coefficient profile: first breakpoint must be 0");
    for (std::size_t i = 1; i < breakpoints_.size(); ++i)
      if (!(breakpoints_[i] > breakpoints_[i - 1]) || !(breakpoints_[i] < 1.0))
        throw ParameterError("coefficient profile: breakpoints must be strictly ascending in [0,1)");
    Real vmin = *std::min_element(values_.begin(), values_.end());
    Real vmax = *std::max_element(values_.begin(), values_.end());
    if (!(vmin > 0.0)) throw ParameterError("coefficient profile: values must be positive");
    nu_ = 0.999 * std::min(vmin, 1.0 / vmax);
    nu_ = std::min(nu_, 0.999);
  }

  template <class F>
  Real integrate(F&& f) const {
    Real total = 0.0;
    for (std::size_t i = 0; i < values_.size(); ++i) {
      Real b0 = breakpoints_[i];
      Real b1 = (i + 1 < breakpoints_.size()) ? breakpoints_[i + 1] : 1.0;
      total += (b1 - b0) * f(values_[i]);
    }
    return total;
  }

  Kind kind_;
  std::vector<Real> values_;
  std::vector<Real> breakpoints_;
  Real nu_ = 0.0;
};

/// Harmonic mean (integral of a^-1)^-1, the 1D effective coefficient.
inline Real harmonic_mean(const CoefficientProfile& profile) {
  return 1.0 / profile.integral_of_inverse();
}

}  // namespace fibrehom
