// SPDX-License-Identifier: Apache-2.0
//
// Hermitian-positive-definite linear algebra, the inverse Gaussian
// Q-function, feasibility projections and a finite-difference gradient
// checker. Everything here is a pure function of its inputs.

#pragma once

#include <functional>
#include <vector>

#include "starrsma/types.hpp"

namespace starrsma {

/// Hermitian positive definite matrix with a cached Cholesky factorization.
///
/// Construction validates the invariants (finite entries, Hermitian within
/// 1e-10 relative, successful LLT). All solves go through the factorization;
/// the matrix is never inverted explicitly.
class HpdMatrix {
 public:
  static HpdMatrix from(const ComplexMatrix& m);

  const ComplexMatrix& matrix() const { return m_; }
  Eigen::Index size() const { return m_.rows(); }

  double logdet() const;
  ComplexMatrix solve(const ComplexMatrix& rhs) const;
  /// real(trace(this^{-1} * rhs)) without forming the full solution when
  /// rhs is small anyway; kept simple.
  double trace_solve(const ComplexMatrix& rhs) const;
  double trace_inverse() const;

 private:
  HpdMatrix(ComplexMatrix m, Eigen::LLT<ComplexMatrix> llt);
  ComplexMatrix m_;
  Eigen::LLT<ComplexMatrix> llt_;
};

/// Natural-log determinant of an HPD matrix.
double logdet_hpd(const HpdMatrix& m);

/// X with m*X = rhs, residual below 1e-10 * |rhs|.
ComplexMatrix solve_hpd(const HpdMatrix& m, const ComplexMatrix& rhs);

/// Gaussian tail probability Q(x) = P(N(0,1) > x).
double q_function(double x);

/// Inverse of the Gaussian Q-function, absolute accuracy better than 1e-10.
/// Acklam's inverse-normal initializer refined by Halley steps on erfc.
double inv_q(double eps);

struct BeamformerSet;  // defined in rates.hpp

/// Radial projection onto the total-power ball of radius P (trace power).
BeamformerSet project_power(const BeamformerSet& ws, double power_budget);

enum class RisMode : uint8_t { Transmit = 0, Reflect = 1 };
using ModeMask = std::vector<RisMode>;

/// Per-element projection of STAR-RIS coefficients: entries whose element is
/// not operating in `mode` are zeroed exactly; remaining entries with modulus
/// above one are rescaled onto the unit circle, phase preserved.
ComplexVector project_unit_disk(const ComplexVector& theta, const ModeMask& mask,
                                RisMode mode);

/// Central-difference check of a claimed gradient; returns the maximum over
/// coordinates of |fd - g| / max(1, |fd|, |g|). Step 1e-6*(1+|x_i|).
double fd_gradient_check(const std::function<double(const RealVector&)>& f,
                         const RealVector& x, const RealVector& grad);

}  // namespace starrsma
