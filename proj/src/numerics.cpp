// SPDX-License-Identifier: Apache-2.0

#include "starrsma/numerics.hpp"

#include <cmath>

#include "starrsma/rates.hpp"

namespace starrsma {

HpdMatrix::HpdMatrix(ComplexMatrix m, Eigen::LLT<ComplexMatrix> llt)
    : m_(std::move(m)), llt_(std::move(llt)) {}

HpdMatrix HpdMatrix::from(const ComplexMatrix& m) {
  if (m.rows() != m.cols()) {
    throw InvalidInputError("HpdMatrix: matrix is not square");
  }
  if (!all_finite(m)) {
    throw InvalidInputError("HpdMatrix: non-finite entries");
  }
  const double scale = m.norm();
  const double herm_err = (m - m.adjoint()).norm();
  if (herm_err > 1e-10 * std::max(scale, 1e-300)) {
    throw InvalidInputError("HpdMatrix: not Hermitian within tolerance");
  }
  // Work on the exactly-Hermitian part so the factorization sees a clean input.
  ComplexMatrix h = 0.5 * (m + m.adjoint());
  Eigen::LLT<ComplexMatrix> llt(h);
  if (llt.info() != Eigen::Success) {
    throw NumericDomainError("HpdMatrix: Cholesky failed (not positive definite)");
  }
  return HpdMatrix(std::move(h), std::move(llt));
}

double HpdMatrix::logdet() const {
  // log|A| = 2 * sum log(diag(L)) for A = L L^H.
  const auto& L = llt_.matrixLLT();
  double acc = 0.0;
  for (Eigen::Index i = 0; i < L.rows(); ++i) {
    const double d = std::real(L(i, i));
    if (!(d > 0.0) || !std::isfinite(d)) {
      throw NumericDomainError("logdet: nonpositive Cholesky pivot");
    }
    acc += std::log(d);
  }
  return 2.0 * acc;
}

ComplexMatrix HpdMatrix::solve(const ComplexMatrix& rhs) const {
  if (rhs.rows() != m_.rows()) {
    throw InvalidInputError("HpdMatrix::solve: dimension mismatch");
  }
  if (!all_finite(rhs)) {
    throw InvalidInputError("HpdMatrix::solve: non-finite rhs");
  }
  ComplexMatrix x = llt_.solve(rhs);
  if (!all_finite(x)) {
    throw NumericDomainError("HpdMatrix::solve: non-finite solution");
  }
  return x;
}

double HpdMatrix::trace_solve(const ComplexMatrix& rhs) const {
  return std::real(solve(rhs).trace());
}

double HpdMatrix::trace_inverse() const {
  return trace_solve(ComplexMatrix::Identity(m_.rows(), m_.cols()));
}

double logdet_hpd(const HpdMatrix& m) { return m.logdet(); }

ComplexMatrix solve_hpd(const HpdMatrix& m, const ComplexMatrix& rhs) {
  return m.solve(rhs);
}

double q_function(double x) {
  // Q(x) = erfc(x / sqrt(2)) / 2, accurate in both tails.
  return 0.5 * std::erfc(x / std::sqrt(2.0));
}

namespace {

// Acklam's rational approximation of the inverse normal CDF (relative error
// below 1.2e-9 everywhere), used only as the initializer.
double inverse_normal_cdf_approx(double p) {
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425;
  if (p < plow) {
    const double q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  if (p > 1.0 - plow) {
    const double q = std::sqrt(-2.0 * std::log(1.0 - p));
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double q = p - 0.5;
  const double r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

}  // namespace

double inv_q(double eps) {
  if (!(eps > 0.0 && eps < 1.0)) {
    throw InvalidInputError("inv_q: eps must be in (0, 1)");
  }
  // Q(x) = eps  <=>  Phi(x) = 1 - eps; Acklam on the smaller tail for accuracy.
  double x = -inverse_normal_cdf_approx(eps);
  const double inv_sqrt_2pi = 0.3989422804014326779;
  for (int it = 0; it < 3; ++it) {
    const double f = q_function(x) - eps;
    const double pdf = inv_sqrt_2pi * std::exp(-0.5 * x * x);
    if (pdf <= 0.0) break;
    // Halley step; Q'(x) = -pdf, Q''(x) = x * pdf.
    const double u = f / pdf;
    x += u / (1.0 - 0.5 * x * u);
  }
  return x;
}

BeamformerSet project_power(const BeamformerSet& ws, double power_budget) {
  if (!(power_budget > 0.0)) {
    throw InvalidInputError("project_power: budget must be positive");
  }
  const double total = ws.total_power();
  if (!std::isfinite(total)) {
    throw InvalidInputError("project_power: non-finite beamformers");
  }
  if (total <= power_budget) {
    return ws;
  }
  const double s = std::sqrt(power_budget / total);
  BeamformerSet out = ws;
  out.Wc *= s;
  for (auto& w : out.Wk) w *= s;
  return out;
}

ComplexVector project_unit_disk(const ComplexVector& theta, const ModeMask& mask,
                                RisMode mode) {
  if (static_cast<Eigen::Index>(mask.size()) != theta.size()) {
    throw InvalidInputError("project_unit_disk: mask length mismatch");
  }
  ComplexVector out = theta;
  for (Eigen::Index m = 0; m < out.size(); ++m) {
    if (mask[static_cast<size_t>(m)] != mode) {
      out(m) = Complex(0.0, 0.0);
    } else {
      const double mag = std::abs(out(m));
      if (mag > 1.0) out(m) /= mag;
    }
  }
  return out;
}

double fd_gradient_check(const std::function<double(const RealVector&)>& f,
                         const RealVector& x, const RealVector& grad) {
  if (x.size() != grad.size()) {
    throw InvalidInputError("fd_gradient_check: gradient length mismatch");
  }
  RealVector xp = x;
  double worst = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double h = 1e-6 * (1.0 + std::abs(x(i)));
    xp(i) = x(i) + h;
    const double fp = f(xp);
    xp(i) = x(i) - h;
    const double fm = f(xp);
    xp(i) = x(i);
    if (!std::isfinite(fp) || !std::isfinite(fm)) {
      throw NumericDomainError("fd_gradient_check: non-finite evaluation");
    }
    const double fd = (fp - fm) / (2.0 * h);
    const double denom = std::max({1.0, std::abs(fd), std::abs(grad(i))});
    worst = std::max(worst, std::abs(fd - grad(i)) / denom);
  }
  return worst;
}

}  // namespace starrsma
