#pragma once

#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace snsce {

using cplx = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RMatrix = Eigen::MatrixXd;
using RVector = Eigen::VectorXd;

// 0-based element index ranges are used internally; breakpoint sets follow the
// 1-based convention {1, ..., N+1} so that they serialize the way they are
// usually written down.
using IndexList = std::vector<int>;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kSpeedOfLight = 299792458.0;

/// Invalid or inconsistent configuration (maps to CLI exit code 2).
class ConfigError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

/// Obstacle not between the element and the UE for some element.
class GeometryError : public std::domain_error {
  public:
    using std::domain_error::domain_error;
};

/// Every subarray was switched off by the power prune.
class EmptySceneError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Pilot budget too small for the requested sampling schedule.
class PilotError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Numerical failure inside an iterative solver.
class NumericalError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

}  // namespace snsce
