#pragma once

#include <Eigen/Dense>
#include <complex>
#include <stdexcept>
#include <string>

namespace artifact {

using cplx = std::complex<double>;
using Vec = Eigen::VectorXcd;
using Mat = Eigen::MatrixXcd;
using RVec = Eigen::VectorXd;
using RMat = Eigen::MatrixXd;

inline constexpr cplx I1{0.0, 1.0};
inline constexpr double kPi = 3.14159265358979323846;

// Error taxonomy. The CLI maps ConfigError to exit code 1.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
// Inputs from different backends, spaces or parameter counts were mixed.
struct MismatchError : Error {
  using Error::Error;
};
// A requested order, radius or resolution is outside what the object supports.
struct RangeError : Error {
  using Error::Error;
};
// A numerical precondition failed (non-positive metric, singular Gram, obstruction).
struct NumericalError : Error {
  using Error::Error;
};
struct ConfigError : Error {
  using Error::Error;
};

}  // namespace artifact
