#ifndef DDSC_TYPES_HPP
#define DDSC_TYPES_HPP

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace ddsc {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Inconsistent matrix or signal dimensions.
class DimensionError : public Error {
public:
  explicit DimensionError(const std::string& msg) : Error(msg) {}
};

/// det(lambda*E - A) vanishes identically; no quasi-Weierstrass form exists.
class IrregularPencil : public Error {
public:
  explicit IrregularPencil(const std::string& msg) : Error(msg) {}
};

/// Descriptor simulation was asked for states beyond the recorded input window.
class InsufficientFutureInputs : public Error {
public:
  explicit InsufficientFutureInputs(const std::string& msg) : Error(msg) {}
};

/// Two PCE objects refer to different joint bases.
class BasisMismatch : public Error {
public:
  explicit BasisMismatch(const std::string& msg) : Error(msg) {}
};

// Default numerical tolerances used across the library.
inline constexpr double kRankRelTol = 1e-10;  // SVD rank decisions
inline constexpr double kZeroAbsTol = 1e-12;  // zero tests on stored matrices

}  // namespace ddsc

#endif
