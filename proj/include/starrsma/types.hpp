// SPDX-License-Identifier: Apache-2.0
//
// Core aliases and error types shared by all starrsma modules.

#pragma once

#include <Eigen/Dense>
#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

namespace starrsma {

using Complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;
using RealMatrix = Eigen::MatrixXd;
using RealVector = Eigen::VectorXd;
using Vec3 = Eigen::Vector3d;

// Invalid caller-supplied data (bad dimensions, out-of-range parameters).
class InvalidInputError : public std::invalid_argument {
 public:
  explicit InvalidInputError(const std::string& msg) : std::invalid_argument(msg) {}
};

// Arithmetic left the representable domain (lost positive definiteness,
// non-finite intermediate values).
class NumericDomainError : public std::runtime_error {
 public:
  explicit NumericDomainError(const std::string& msg) : std::runtime_error(msg) {}
};

// A variable assignment violates a problem constraint beyond tolerance.
class ConstraintViolationError : public std::runtime_error {
 public:
  explicit ConstraintViolationError(const std::string& msg) : std::runtime_error(msg) {}
};

inline bool all_finite(const ComplexMatrix& m) {
  return m.allFinite();
}

}  // namespace starrsma
