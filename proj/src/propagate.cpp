#include "symmspectra/propagate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include "symmspectra/boundary.hpp"

namespace symmspectra {
namespace {

// Dormand-Prince 5(4) coefficients. The seventh stage equals the accepted
// fifth-order result, so its derivative is reused as the first stage of the
// next step (FSAL).
constexpr double c2 = 1.0 / 5.0;
constexpr double c3 = 3.0 / 10.0;
constexpr double c4 = 4.0 / 5.0;
constexpr double c5 = 8.0 / 9.0;

constexpr double a21 = 1.0 / 5.0;
constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0;
constexpr double a53 = 64448.0 / 6561.0, a54 = -212.0 / 729.0;
constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0;
constexpr double a63 = 46732.0 / 5247.0, a64 = 49.0 / 176.0;
constexpr double a65 = -5103.0 / 18656.0;

constexpr double b1 = 35.0 / 384.0, b3 = 500.0 / 1113.0, b4 = 125.0 / 192.0;
constexpr double b5 = -2187.0 / 6784.0, b6 = 11.0 / 84.0;

// Difference between the 5th- and 4th-order weights (error estimator).
constexpr double e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0;
constexpr double e4 = 71.0 / 1920.0, e5 = -17253.0 / 339200.0;
constexpr double e6 = 22.0 / 525.0, e7 = -1.0 / 40.0;

constexpr double kSafety = 0.9;
constexpr double kFacMin = 0.2;
constexpr double kFacMax = 5.0;
constexpr long kMaxNodes = 4000000;

struct Rhs {
  const SymmetricSystem& sys;
  Complex lambda;
  IntegratorStats* stats;

  Matrix operator()(double t, const Matrix& y) const {
    if (stats) ++stats->rhs_evals;
    // J^{-1} = -J for the canonical signature matrix.
    return -sys.J * ((sys.B(t) + lambda * sys.Delta(t)) * y);
  }
};

double error_norm(const Matrix& err, const Matrix& y0, const Matrix& y1,
                  double atol, double rtol) {
  double acc = 0.0;
  for (Eigen::Index j = 0; j < err.cols(); ++j)
    for (Eigen::Index i = 0; i < err.rows(); ++i) {
      const double sc =
          atol + rtol * std::max(std::abs(y0(i, j)), std::abs(y1(i, j)));
      const double r = std::abs(err(i, j)) / sc;
      acc += r * r;
    }
  return std::sqrt(acc / static_cast<double>(err.size()));
}

double initial_step(const Rhs& f, double t0, const Matrix& y0, const Matrix& f0,
                    double span, double atol, double rtol) {
  const double d0 = error_norm(y0, y0, y0, atol, rtol);
  const double d1 = error_norm(f0, y0, y0, atol, rtol);
  double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
  h0 = std::min(h0, span);
  const Matrix y1 = y0 + h0 * f0;
  const Matrix f1 = f(t0 + h0, y1);
  const double d2 = error_norm(f1 - f0, y0, y0, atol, rtol) / h0;
  double h1;
  if (std::max(d1, d2) <= 1e-15)
    h1 = std::max(1e-6, h0 * 1e-3);
  else
    h1 = std::pow(0.01 / std::max(d1, d2), 0.2);
  return std::min({100.0 * h0, h1, span});
}

// Integrates one smooth segment [t0, t1], appending accepted nodes (t, y, y')
// to the solution arrays. f0 is f(t0, y0); returns f(t1, y1) for FSAL reuse.
Matrix integrate_segment(const Rhs& f, double t0, double t1, Matrix& y,
                         Matrix f0, std::vector<double>& ts,
                         std::vector<Matrix>& ys, std::vector<Matrix>& yps,
                         const Tolerances& tol, IntegratorStats* stats) {
  const double atol = tol.tol_ode, rtol = tol.tol_ode;
  double t = t0;
  double h = initial_step(f, t0, y, f0, t1 - t0, atol, rtol);
  Matrix k1 = f0, k2, k3, k4, k5, k6, k7;

  while (t < t1) {
    h = std::min(h, t1 - t);
    // negated form so a non-finite h also lands here instead of spinning
    if (!(h >= 16.0 * std::numeric_limits<double>::epsilon() *
                  std::max(1.0, std::abs(t)))) {
      std::ostringstream os;
      os << "integrator step underflow at t = " << t << ", lambda = ("
         << f.lambda.real() << ", " << f.lambda.imag()
         << "); the problem appears stiff at this scale";
      throw NumericalError(os.str());
    }
    k2 = f(t + c2 * h, y + h * (a21 * k1));
    k3 = f(t + c3 * h, y + h * (a31 * k1 + a32 * k2));
    k4 = f(t + c4 * h, y + h * (a41 * k1 + a42 * k2 + a43 * k3));
    k5 = f(t + c5 * h, y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
    k6 = f(t + h, y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
    const Matrix ynew =
        y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    k7 = f(t + h, ynew);
    const Matrix errm =
        h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
    const double err = error_norm(errm, y, ynew, atol, rtol);

    if (err <= 1.0) {
      t += h;
      y = ynew;
      k1 = k7;
      ts.push_back(t);
      ys.push_back(y);
      yps.push_back(k7);
      if (stats) ++stats->accepted;
      if (static_cast<long>(ts.size()) > kMaxNodes)
        throw NumericalError("integrator exceeded the node budget");
      const double fac =
          err == 0.0 ? kFacMax
                     : std::clamp(kSafety * std::pow(err, -0.2), kFacMin, kFacMax);
      h *= fac;
    } else {
      if (stats) ++stats->rejected;
      // a non-finite estimate (state blew up to inf/NaN) gets the hardest
      // backoff; the underflow guard above then bounds the retries
      const double fac = std::isfinite(err)
                             ? std::clamp(kSafety * std::pow(err, -0.2),
                                          kFacMin, 1.0)
                             : kFacMin;
      h *= fac;
    }
  }
  return k1;
}

void run_integration(const SymmetricSystem& sys, Complex lambda, double t0,
                     double t1, Matrix y, std::vector<double>& ts,
                     std::vector<Matrix>& ys, std::vector<Matrix>& yps,
                     const Tolerances& tol, IntegratorStats* stats) {
  Rhs f{sys, lambda, stats};
  // breakpoints are mandatory step boundaries: coefficients may jump there
  std::vector<double> cuts{t0};
  for (double bp : sys.breakpoints)
    if (bp > t0 && bp < t1) cuts.push_back(bp);
  cuts.push_back(t1);

  Matrix fcur = f(t0, y);
  if (ts.empty()) {
    ts.push_back(t0);
    ys.push_back(y);
    yps.push_back(fcur);
  } else {
    // extension: refresh the stored derivative in case t0 was a breakpoint
    yps.back() = fcur;
  }
  for (size_t s = 0; s + 1 < cuts.size(); ++s) {
    fcur = integrate_segment(f, cuts[s], cuts[s + 1], y, fcur, ts, ys, yps, tol,
                             stats);
    if (s + 2 < cuts.size()) fcur = f(cuts[s + 1], y);  // re-evaluate past the jump
  }
}

}  // namespace

int OperatorSolution::locate(double t) const {
  const auto it = std::upper_bound(t_.begin(), t_.end(), t);
  int i = static_cast<int>(it - t_.begin()) - 1;
  return std::clamp(i, 0, static_cast<int>(t_.size()) - 2);
}

Matrix OperatorSolution::eval(double t) const {
  if (t_.size() == 1) return y_.front();
  if (t <= t_.front()) return y_.front();
  if (t >= t_.back()) return y_.back();
  const int i = locate(t);
  const double h = t_[i + 1] - t_[i];
  const double th = (t - t_[i]) / h;
  const double h00 = (1.0 + 2.0 * th) * (1.0 - th) * (1.0 - th);
  const double h10 = th * (1.0 - th) * (1.0 - th);
  const double h01 = th * th * (3.0 - 2.0 * th);
  const double h11 = th * th * (th - 1.0);
  return h00 * y_[i] + (h10 * h) * yp_[i] + h01 * y_[i + 1] + (h11 * h) * yp_[i + 1];
}

Matrix OperatorSolution::deriv(double t) const {
  if (t_.size() == 1) return yp_.front();
  if (t <= t_.front()) return yp_.front();
  if (t >= t_.back()) return yp_.back();
  const int i = locate(t);
  const double h = t_[i + 1] - t_[i];
  const double th = (t - t_[i]) / h;
  const double d00 = 6.0 * th * (th - 1.0) / h;
  const double d10 = (3.0 * th - 1.0) * (th - 1.0);
  const double d01 = -d00;
  const double d11 = th * (3.0 * th - 2.0);
  return d00 * y_[i] + d10 * yp_[i] + d01 * y_[i + 1] + d11 * yp_[i + 1];
}

OperatorSolution propagate(const SymmetricSystem& sys, const Matrix& init,
                           Complex lambda, double t0, double t1,
                           const Tolerances& tol, IntegratorStats* stats) {
  if (!(t0 < t1)) throw ValidationError("propagate: need t0 < t1");
  if (init.rows() != sys.n())
    throw ValidationError("propagate: initial value has wrong row count");
  OperatorSolution sol;
  sol.lambda_ = lambda;
  run_integration(sys, lambda, t0, t1, init, sol.t_, sol.y_, sol.yp_, tol, stats);
  return sol;
}

void extend(OperatorSolution& sol, const SymmetricSystem& sys, double t1,
            const Tolerances& tol, IntegratorStats* stats) {
  if (sol.t_.empty()) throw ValidationError("extend: empty solution");
  if (t1 <= sol.t_.back()) return;
  run_integration(sys, sol.lambda_, sol.t_.back(), t1, sol.y_.back(), sol.t_,
                  sol.y_, sol.yp_, tol, stats);
}

OperatorSolution fundamental_solution(const SymmetricSystem& sys,
                                      const BoundaryFrameA& frame, Complex lambda,
                                      double beta, const Tolerances& tol) {
  return propagate(sys, frame.utilde_inverse(), lambda, sys.a, beta, tol);
}

OperatorSolution phi_solution(const SymmetricSystem& sys,
                              const BoundaryFrameA& frame, Complex lambda,
                              double beta, const Tolerances& tol) {
  const int p = sys.dims.p, q = sys.dims.q, n = sys.n();
  Matrix top = Matrix::Zero(n, p + q);
  top.topRows(p + q) = Matrix::Identity(p + q, p + q);
  return propagate(sys, frame.utilde_inverse() * top, lambda, sys.a, beta, tol);
}

OperatorSolution psi_solution(const SymmetricSystem& sys,
                              const BoundaryFrameA& frame, Complex lambda,
                              double beta, const Tolerances& tol) {
  const int p = sys.dims.p, q = sys.dims.q, n = sys.n();
  // Utilde psi(a) = ( -(i/2) P_Hhat ; -P_H ): the top p+q rows project onto
  // the neutral block scaled by -i/2, the bottom p rows are -(I_p 0).
  Matrix rhs = Matrix::Zero(n, p + q);
  rhs.block(p, p, q, q) = Complex(0.0, -0.5) * Matrix::Identity(q, q);
  rhs.block(p + q, 0, p, p) = -Matrix::Identity(p, p);
  return propagate(sys, frame.utilde_inverse() * rhs, lambda, sys.a, beta, tol);
}

double wronskian_residual(const Matrix& J, const OperatorSolution& y_lambda,
                          const OperatorSolution& y_conj) {
  std::set<double> nodes(y_lambda.grid().begin(), y_lambda.grid().end());
  nodes.insert(y_conj.grid().begin(), y_conj.grid().end());
  const double hi = std::min(y_lambda.t_back(), y_conj.t_back());
  double worst = 0.0;
  for (double t : nodes) {
    if (t > hi) break;
    const Matrix d = y_conj.eval(t).adjoint() * J * y_lambda.eval(t) - J;
    worst = std::max(worst, max_abs(d));
  }
  return worst;
}

Matrix boundary_pairing(const Matrix& J, const OperatorSolution& y,
                        const OperatorSolution& z, double t) {
  return z.eval(t).adjoint() * J * y.eval(t);
}

Matrix boundary_pairing(const Matrix& J, const OperatorSolution& y,
                        const std::function<Vector(double)>& theta, double t) {
  return theta(t).adjoint() * J * y.eval(t);
}

namespace {

LimitResult extrapolate_form(std::vector<Matrix> vals, std::vector<double> betas,
                             const Tolerances& tol) {
  LimitResult res;
  res.betas = std::move(betas);
  const size_t m = vals.size();
  if (m == 1) {
    res.value = vals[0];
    res.convergence_estimate = std::numeric_limits<double>::quiet_NaN();
    return res;
  }
  if (m == 2) {
    res.value = vals[1];
    res.convergence_estimate = max_abs(vals[1] - vals[0]);
    return res;
  }
  const Matrix d1 = vals[m - 2] - vals[m - 3];
  const Matrix d2 = vals[m - 1] - vals[m - 2];
  const double n1 = max_abs(d1), n2 = max_abs(d2);
  const double scale = 1.0 + max_abs(vals[m - 1]);
  if (n2 <= tol.conv_tol * scale) {
    // already converged; Aitken would only amplify rounding noise
    res.value = vals[m - 1];
    res.convergence_estimate = n2;
    return res;
  }
  if (n1 <= 0.0 || n2 >= 0.99 * n1) {
    if (n2 > tol.tau_form * scale)
      throw NumericalError(
          "b_form limit undetermined: increments are not contracting");
    res.value = vals[m - 1];
    res.convergence_estimate = n2;
    return res;
  }
  // Aitken Delta^2 with the scalar contraction ratio rho = |d2|/|d1|; for a
  // c/beta tail under beta-doubling rho -> 1/2 and this is the Richardson
  // limit, for an exponential tail rho -> 0 and the correction vanishes.
  const double rho = n2 / n1;
  res.value = vals[m - 1] + (rho / (1.0 - rho)) * d2;
  res.convergence_estimate = max_abs(res.value - vals[m - 1]) + n2 * rho;
  return res;
}

template <class PairingAt>
LimitResult b_form_impl(const SymmetricSystem& sys, double t_max,
                        const PairingAt& pairing,
                        const std::vector<double>& beta_schedule,
                        const Tolerances& tol) {
  if (sys.regular_b) {
    LimitResult res;
    res.value = pairing(sys.b);
    res.convergence_estimate = 0.0;
    res.betas = {sys.b};
    return res;
  }
  std::vector<double> betas;
  for (double beta : beta_schedule)
    if (beta > sys.a && beta <= t_max + 1e-12) betas.push_back(beta);
  if (betas.empty())
    throw ValidationError("b_form: no usable truncation points in the schedule");
  std::vector<Matrix> vals;
  vals.reserve(betas.size());
  for (double beta : betas) vals.push_back(pairing(std::min(beta, t_max)));
  return extrapolate_form(std::move(vals), std::move(betas), tol);
}

}  // namespace

LimitResult b_form(const SymmetricSystem& sys, const OperatorSolution& y,
                   const OperatorSolution& z,
                   const std::vector<double>& beta_schedule,
                   const Tolerances& tol) {
  const double t_max = std::min(y.t_back(), z.t_back());
  return b_form_impl(
      sys, t_max,
      [&](double t) { return boundary_pairing(sys.J, y, z, t); },
      beta_schedule, tol);
}

LimitResult b_form(const SymmetricSystem& sys, const OperatorSolution& y,
                   const std::function<Vector(double)>& theta,
                   const std::vector<double>& beta_schedule,
                   const Tolerances& tol) {
  return b_form_impl(
      sys, y.t_back(),
      [&](double t) { return boundary_pairing(sys.J, y, theta, t); },
      beta_schedule, tol);
}

std::vector<double> geometric_beta_schedule(double a, double beta0, double cap,
                                            int count) {
  std::vector<double> out;
  double beta = beta0;
  for (int k = 0; k < count; ++k) {
    out.push_back(std::min(beta, cap));
    if (beta >= cap) break;
    beta = a + (beta - a) * 2.0;
  }
  return out;
}

Matrix solution_gram(const SymmetricSystem& sys, const OperatorSolution& y,
                     const OperatorSolution& z, double t0, double t1) {
  // 5-point Gauss-Legendre per panel; panels are the union of both solutions'
  // accepted steps, halved once more for margin. The dense output is a cubic
  // Hermite whose error tracks the integrator tolerance on these panels.
  static const double gx[5] = {-0.9061798459386640, -0.5384693101056831, 0.0,
                               0.5384693101056831, 0.9061798459386640};
  static const double gw[5] = {0.2369268850561891, 0.4786286704993665,
                               0.5688888888888889, 0.4786286704993665,
                               0.2369268850561891};
  std::set<double> nodes{t0, t1};
  for (double t : y.grid())
    if (t > t0 && t < t1) nodes.insert(t);
  for (double t : z.grid())
    if (t > t0 && t < t1) nodes.insert(t);

  Matrix acc = Matrix::Zero(z.cols(), y.cols());
  auto panel = [&](double u, double v) {
    const double mid = 0.5 * (u + v), half = 0.5 * (v - u);
    for (int i = 0; i < 5; ++i) {
      const double x = mid + half * gx[i];
      acc += (gw[i] * half) * (z.eval(x).adjoint() * (sys.Delta(x) * y.eval(x)));
    }
  };
  double prev = *nodes.begin();
  for (auto it = std::next(nodes.begin()); it != nodes.end(); ++it) {
    const double midp = 0.5 * (prev + *it);
    panel(prev, midp);
    panel(midp, *it);
    prev = *it;
  }
  return acc;
}

double ode_residual(const SymmetricSystem& sys, const OperatorSolution& y,
                    const std::vector<double>& checkpoints) {
  // Residuals are measured at the accepted steps (the scheme's collocation
  // points), where the stored derivative is the exact RHS evaluation; between
  // nodes the cubic interpolant's derivative is one order less accurate and
  // would measure interpolation error instead. Checkpoints snap to the
  // nearest node.
  const auto& grid = y.grid();
  double worst = 0.0;
  for (double c : checkpoints) {
    const auto it = std::lower_bound(grid.begin(), grid.end(), c);
    size_t i = static_cast<size_t>(it - grid.begin());
    if (i == grid.size()) i = grid.size() - 1;
    if (i > 0 && std::abs(grid[i - 1] - c) < std::abs(grid[i] - c)) --i;
    const double t = grid[i];
    const Matrix& v = y.value_at_node(static_cast<int>(i));
    const Matrix r = sys.J * y.deriv_at_node(static_cast<int>(i)) -
                     (sys.B(t) + y.lambda() * sys.Delta(t)) * v;
    worst = std::max(worst, max_abs(r) / (1.0 + max_abs(v)));
  }
  return worst;
}

}  // namespace symmspectra
