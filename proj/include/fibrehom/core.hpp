#pragma once

#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Dense>

namespace fibrehom {

using Real = double;
using Complex = std::complex<double>;
using Index = Eigen::Index;

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using VecX = Eigen::VectorXd;
using VecXc = Eigen::VectorXcd;
using MatX = Eigen::MatrixXd;
using MatXc = Eigen::MatrixXcd;

/// Invalid argument to an operation (radius out of range, bad quasimomentum, ...).
class ParameterError : public std::invalid_argument {
public:
  explicit ParameterError(const std::string& what) : std::invalid_argument(what) {}
};

/// Iterative solver failed to reach the requested residual; carries the best residuals seen.
class SolveError : public std::runtime_error {
public:
  SolveError(const std::string& what, std::vector<Real> residuals)
      : std::runtime_error(what), best_residuals(std::move(residuals)) {}
  std::vector<Real> best_residuals;
};

class IoError : public std::runtime_error {
public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

inline constexpr Real kPi = 3.14159265358979323846;

}  // namespace fibrehom
