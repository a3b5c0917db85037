// Adaptive integration of the matrix ODE Y' = -J (B(t) + lambda Delta(t)) Y
// with dense output, plus the distinguished solutions and boundary-form
// machinery built on top of it.
#pragma once

#include <functional>
#include <vector>

#include "symmspectra/sysdef.hpp"
#include "symmspectra/types.hpp"

namespace symmspectra {

struct BoundaryFrameA;  // boundary.hpp

struct IntegratorStats {
  long accepted = 0;
  long rejected = 0;
  long rhs_evals = 0;
};

// One propagated matrix solution: values and derivatives at the accepted
// steps, cubic Hermite interpolation in between. Immutable once built except
// through extend(), which continues the integration to a larger time.
class OperatorSolution {
 public:
  Complex lambda() const { return lambda_; }
  int rows() const { return t_.empty() ? 0 : static_cast<int>(y_.front().rows()); }
  int cols() const { return t_.empty() ? 0 : static_cast<int>(y_.front().cols()); }
  double t_front() const { return t_.front(); }
  double t_back() const { return t_.back(); }
  const std::vector<double>& grid() const { return t_; }
  const Matrix& value_at_node(int i) const { return y_[i]; }
  const Matrix& deriv_at_node(int i) const { return yp_[i]; }

  Matrix eval(double t) const;
  Matrix deriv(double t) const;
  Matrix front() const { return y_.front(); }
  Matrix back() const { return y_.back(); }

 private:
  friend OperatorSolution propagate(const SymmetricSystem&, const Matrix&,
                                    Complex, double, double, const Tolerances&,
                                    IntegratorStats*);
  friend void extend(OperatorSolution&, const SymmetricSystem&, double,
                     const Tolerances&, IntegratorStats*);

  int locate(double t) const;

  Complex lambda_{0.0, 0.0};
  std::vector<double> t_;
  std::vector<Matrix> y_;
  std::vector<Matrix> yp_;
};

// Integrates from t0 to t1 (t0 < t1) with initial value `init`. Breakpoints
// of the system inside (t0, t1) are mandatory step boundaries. Throws
// NumericalError on step-size underflow (reports lambda and t).
OperatorSolution propagate(const SymmetricSystem& sys, const Matrix& init,
                           Complex lambda, double t0, double t1,
                           const Tolerances& tol = {},
                           IntegratorStats* stats = nullptr);

// Continues an existing solution to t1 > t_back() in place.
void extend(OperatorSolution& sol, const SymmetricSystem& sys, double t1,
            const Tolerances& tol = {}, IntegratorStats* stats = nullptr);

// Fundamental solution with Y(a) = Utilde^{-1}, i.e. Utilde Y(a) = I.
OperatorSolution fundamental_solution(const SymmetricSystem& sys,
                                      const BoundaryFrameA& frame, Complex lambda,
                                      double beta, const Tolerances& tol = {});

// The n x (p+q) solution with Utilde phi(a) = (I_{p+q}; 0); its initial
// value is assembled blockwise from the frame rows (and cross-checked
// against Utilde^{-1} (I; 0) by the frame validator).
OperatorSolution phi_solution(const SymmetricSystem& sys,
                              const BoundaryFrameA& frame, Complex lambda,
                              double beta, const Tolerances& tol = {});

// The n x (p+q) companion with Utilde psi(a) = (-(i/2) P_Hhat; -P_H).
OperatorSolution psi_solution(const SymmetricSystem& sys,
                              const BoundaryFrameA& frame, Complex lambda,
                              double beta, const Tolerances& tol = {});

// Max over the union grid of || Z(x)^H J Y(x) - J || for Y propagated at
// lambda and Z at conj(lambda), both from the J-unitary initial value
// Utilde^{-1}. Identically J in exact arithmetic; the defect measures
// integrator drift.
double wronskian_residual(const Matrix& J, const OperatorSolution& y_lambda,
                          const OperatorSolution& y_conj);

// Pairing [y, z](t) = z(t)^H J y(t), columnwise between two matrix solutions.
Matrix boundary_pairing(const Matrix& J, const OperatorSolution& y,
                        const OperatorSolution& z, double t);

// Same pairing against an explicitly given vector function theta(t).
Matrix boundary_pairing(const Matrix& J, const OperatorSolution& y,
                        const std::function<Vector(double)>& theta, double t);

struct LimitResult {
  Matrix value;
  double convergence_estimate = 0.0;  // magnitude of the last correction
  std::vector<double> betas;
};

// [y, z]_b = lim_{t->b} z(t)^H J y(t). Regular endpoint: exact evaluation at
// b. Singular endpoint: evaluate along the beta schedule and extrapolate by
// Aitken's Delta^2 (the ratio-based form reproduces the 1/beta Richardson
// limit for algebraic tails and is contractive for exponential ones).
// Throws NumericalError if the sequence oscillates above tau_form.
LimitResult b_form(const SymmetricSystem& sys, const OperatorSolution& y,
                   const OperatorSolution& z,
                   const std::vector<double>& beta_schedule,
                   const Tolerances& tol = {});

LimitResult b_form(const SymmetricSystem& sys, const OperatorSolution& y,
                   const std::function<Vector(double)>& theta,
                   const std::vector<double>& beta_schedule,
                   const Tolerances& tol = {});

// Geometric truncation schedule beta_k = a + (beta0 - a) * 2^k, capped at cap.
std::vector<double> geometric_beta_schedule(double a, double beta0, double cap,
                                            int count);

// integral over [t0, t1] of z(t)^H Delta(t) y(t) dt, composite Gauss-Legendre
// on the union of the accepted integrator steps of y and z (5 nodes per
// panel, panels split so none exceeds the finer solution's local step).
Matrix solution_gram(const SymmetricSystem& sys, const OperatorSolution& y,
                     const OperatorSolution& z, double t0, double t1);

// ODE residual || J y'(t) - B(t) y(t) - lambda Delta(t) y(t) || at the given
// checkpoints, normalized by (1 + ||y(t)||). Diagnostic for tests.
double ode_residual(const SymmetricSystem& sys, const OperatorSolution& y,
                    const std::vector<double>& checkpoints);

}  // namespace symmspectra
