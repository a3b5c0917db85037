// Shared scalar/matrix aliases, the tolerance bundle, and the error taxonomy.
#pragma once

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace symmspectra {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using RealMatrix = Eigen::MatrixXd;
using RealVector = Eigen::VectorXd;

inline constexpr Complex kImag{0.0, 1.0};

// A structural problem with the input: wrong shapes, broken Hermiticity,
// rank deficiency, an inadmissible frame or parameter. The computation was
// never meaningful.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The computation ran but could not reach the requested accuracy: spectral
// parameter too close to an eigenvalue, no subspace gap at the truncation,
// non-convergent extrapolation, integrator step underflow.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad command-line invocation (CLI layer only).
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Tolerances {
  double tol_ode = 1e-10;    // integrator abs/rel tolerance
  double tau_herm = 1e-12;   // relative Hermiticity slack on coefficient samples
  double tau_def = 1e-8;     // relative definiteness threshold
  double tau_quad = 1e-10;   // absolute quadrature target
  double tau_frame = 1e-10;  // J-unitarity / frame-relation residual
  double tau_sub = 1e-8;     // subspace comparisons (principal angles)
  double tau_form = 1e-6;    // boundary-form limit convergence
  double tau_id = 1e-8;      // analytic-identity residual allowance
  double tau_psd = 1e-10;    // PSD slack for masses and densities
  double kappa_max = 1e10;   // conditioning ceiling before "near spectrum"
  double cauchy_tol = 1e-7;  // L2 membership Cauchy increments
  double conv_tol = 1e-8;    // beta-schedule extrapolation convergence
  double gap_min = 1e3;      // eigenvalue ratio splitting the L2 subspace
  double tail_frac = 1e-3;   // spectral tail accounting fraction
};

inline Matrix hermitian_part(const Matrix& a) { return 0.5 * (a + a.adjoint()); }

// (A - A*)/(2i); Hermitian, and the "imaginary part" in the Herglotz sense.
inline Matrix skew_part(const Matrix& a) {
  return (a - a.adjoint()) / Complex(0.0, 2.0);
}

inline double hermiticity_defect(const Matrix& a) {
  return (a - a.adjoint()).cwiseAbs().maxCoeff();
}

inline double max_abs(const Matrix& a) {
  return a.size() == 0 ? 0.0 : a.cwiseAbs().maxCoeff();
}

inline double min_herm_eigenvalue(const Matrix& a) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(hermitian_part(a));
  return es.eigenvalues().minCoeff();
}

}  // namespace symmspectra
