#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace graphmerge {

/// Index into the shared vocabulary; also the row/column index of every
/// |V|-sized matrix in the toolkit.
using Index = std::uint32_t;

/// Dense row-major matrix used for embedding tables and model weights.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;

/// Base of every error thrown by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad input: malformed files, violated preconditions, inconsistent sizes.
/// The CLI maps it to exit code 1.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Failure while doing otherwise valid work (I/O, divergence, integrity).
/// The CLI maps it to exit code 2.
class RuntimeError : public Error {
 public:
  using Error::Error;
};

inline constexpr const char* kVersion = "0.3.0";

}  // namespace graphmerge
