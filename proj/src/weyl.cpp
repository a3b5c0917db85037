#include "symmspectra/weyl.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <sstream>
#include <utility>

namespace symmspectra {

namespace {

// Largest-to-smallest singular value ratio; infinity for a singular matrix.
double spectral_condition(const Matrix& a) {
  Eigen::JacobiSVD<Matrix> svd(a);
  const auto& sv = svd.singularValues();
  const double smallest = sv(sv.size() - 1);
  if (smallest <= 0.0) return std::numeric_limits<double>::infinity();
  return sv(0) / smallest;
}

Matrix projector_hhat(const SpaceDecomposition& dims) {
  Matrix p = Matrix::Zero(dims.pq(), dims.pq());
  p.block(dims.p, dims.p, dims.q, dims.q) =
      Matrix::Identity(dims.q, dims.q);
  return p;
}

// Truncation point for weighted integrals of the distinguished solution on
// a singular interval. Forward-propagated roundoff seeded into the growing
// directions doubles in the squared integrand, giving a contamination
// integral ~ eps^2 e^{im_sum R}; the cap 46/im_sum keeps that near 1e-12
// while leaving the true weighted tail (decay rate at least min(im_sum, the
// weight's own decay)) below ~1e-9 for unit-scale problems.
double contamination_reach(const Workspace& ws, double im_sum) {
  if (!ws.singular()) return ws.system().b;
  const double a = ws.system().a;
  const double cap = im_sum > 0.0 ? a + 46.0 / im_sum : ws.horizon();
  return std::min(ws.horizon(), cap);
}

// Entrywise Aitken extrapolation of three iterates, applied only when the
// increments contract; otherwise the last iterate is returned unchanged.
Matrix aitken_step(const Matrix& m0, const Matrix& m1, const Matrix& m2) {
  const double inc1 = max_abs(Matrix(m1 - m0));
  const double inc2 = max_abs(Matrix(m2 - m1));
  if (!(inc1 > 0.0) || inc2 >= 0.95 * inc1) return m2;
  Matrix out = m2;
  for (Eigen::Index i = 0; i < m2.rows(); ++i) {
    for (Eigen::Index j = 0; j < m2.cols(); ++j) {
      const Complex d1 = m1(i, j) - m0(i, j);
      const Complex d2 = m2(i, j) - m1(i, j);
      const Complex denom = d2 - d1;
      if (std::abs(denom) > 1e-3 * (std::abs(d1) + std::abs(d2)) &&
          std::abs(denom) > 0.0) {
        out(i, j) = m2(i, j) - d2 * d2 / denom;
      }
    }
  }
  return out;
}

// m for a boundary parameter through the block formula; shared by the
// MFunction factory and the tau overloads below.
Matrix m_from_tau(const Workspace& ws, const BoundaryParameter& tau,
                  Complex lambda) {
  if (ws.singular()) {
    throw ValidationError(
        "a singular minimal endpoint takes no boundary parameter");
  }
  const WeylBlocks blocks = weyl_blocks(ws, lambda);
  auto [C0, C1] = tau.at(lambda);
  const int p = ws.system().dims.p;
  if (C0.rows() != p || C0.cols() != p || C1.rows() != p || C1.cols() != p) {
    throw ValidationError("boundary parameter must act on the endpoint space");
  }
  const Matrix A = C0 - C1 * blocks.M4;
  // Near an eigenvalue A loses rank relative to the scale of its inputs;
  // the plain condition number of A misses this when p is small (a 1x1
  // matrix always has condition one).
  const double scale_in =
      max_abs(C0) + max_abs(C1) * (1.0 + max_abs(blocks.M4));
  Eigen::JacobiSVD<Matrix> svd(A);
  const double smin = svd.singularValues()(svd.singularValues().size() - 1);
  if (!(smin > scale_in / ws.tolerances().kappa_max)) {
    std::ostringstream msg;
    msg << "boundary parameter solve is rank-deficient near spectrum"
        << " (smin " << smin << " at lambda = (" << lambda.real() << ", "
        << lambda.imag() << "))";
    throw NumericalError(msg.str());
  }
  const Matrix X = A.fullPivLu().solve(Matrix(C1 * blocks.M3));
  return blocks.m0 + blocks.M2 * X;
}

// v(., lambda) = phi m + psi realized from its boundary data at a.
OperatorSolution v_from_m(const Workspace& ws, const Matrix& m_val,
                          Complex lambda, double reach,
                          const Tolerances& tol) {
  const SpaceDecomposition& dims = ws.system().dims;
  if (m_val.rows() != dims.pq() || m_val.cols() != dims.pq()) {
    throw ValidationError("m must act on the reduced boundary space");
  }
  Matrix data(dims.n(), dims.pq());
  data.topRows(dims.pq()) = m_val - (kImag / 2.0) * projector_hhat(dims);
  data.bottomRows(dims.p).setZero();
  data.block(dims.pq(), 0, dims.p, dims.p) =
      -Matrix::Identity(dims.p, dims.p);
  const Matrix init = ws.frame_a().utilde_inverse() * data;
  return propagate(ws.system(), init, lambda, ws.system().a, reach, tol);
}

Tolerances tightened(const Tolerances& tol) {
  Tolerances t = tol;
  t.tol_ode = std::min(tol.tol_ode, 1e-11);
  return t;
}

}  // namespace

Workspace::Workspace(SymmetricSystem sys, BoundaryFrameA frame_a,
                     BoundaryFrameB frame_b, double horizon, Tolerances tol)
    : sys_(std::move(sys)),
      frame_a_(std::move(frame_a)),
      frame_b_(std::move(frame_b)),
      tol_(tol) {
  if (frame_a_.dims.p != sys_.dims.p || frame_a_.dims.q != sys_.dims.q ||
      frame_b_.dims().p != sys_.dims.p || frame_b_.dims().q != sys_.dims.q) {
    throw ValidationError("frame dimensions do not match the system");
  }
  if (frame_b_.kind() == BoundaryFrameB::Kind::Regular) {
    if (!sys_.regular_b) {
      throw ValidationError("regular endpoint frame on a singular system");
    }
    horizon_ = sys_.b;
  } else if (std::isnan(horizon)) {
    horizon_ = sys_.unbounded() ? sys_.a + 40.0
                                : sys_.a + 0.9375 * (sys_.b - sys_.a);
  } else {
    if (!(horizon > sys_.a) || horizon > sys_.b) {
      throw ValidationError("horizon must lie inside the interval");
    }
    horizon_ = horizon;
  }
}

std::shared_ptr<const OperatorSolution> Workspace::get(Kind kind,
                                                       Complex lambda) const {
  const Key key{static_cast<int>(kind), lambda.real(), lambda.imag()};
  {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = memo_.find(key);
    if (it != memo_.end()) return it->second;
  }
  // Propagate outside the lock; a racing caller may duplicate the work but
  // never sees a partial result.
  std::shared_ptr<const OperatorSolution> sol;
  switch (kind) {
    case Kind::Fundamental:
      sol = std::make_shared<const OperatorSolution>(propagate(
          sys_, frame_a_.utilde_inverse(), lambda, sys_.a, horizon_, tol_));
      break;
    case Kind::Phi:
      sol = std::make_shared<const OperatorSolution>(
          phi_solution(sys_, frame_a_, lambda, horizon_, tol_));
      break;
    case Kind::Psi:
      sol = std::make_shared<const OperatorSolution>(
          psi_solution(sys_, frame_a_, lambda, horizon_, tol_));
      break;
  }
  std::lock_guard<std::mutex> lock(mu_);
  auto it = memo_.find(key);
  if (it != memo_.end()) return it->second;
  if (memo_.size() < kMemoCap) memo_.emplace(key, sol);
  return sol;
}

std::shared_ptr<const OperatorSolution> Workspace::fundamental(
    Complex lambda) const {
  return get(Kind::Fundamental, lambda);
}
std::shared_ptr<const OperatorSolution> Workspace::phi(Complex lambda) const {
  return get(Kind::Phi, lambda);
}
std::shared_ptr<const OperatorSolution> Workspace::psi(Complex lambda) const {
  return get(Kind::Psi, lambda);
}

std::shared_ptr<Workspace> make_workspace(SymmetricSystem sys,
                                          BoundaryFrameA frame_a,
                                          BoundaryFrameB frame_b,
                                          double horizon, Tolerances tol) {
  return std::make_shared<Workspace>(std::move(sys), std::move(frame_a),
                                     std::move(frame_b), horizon, tol);
}

BaseSolutions base_solutions(const Workspace& ws, Complex lambda) {
  if (ws.singular()) {
    throw ValidationError("base solutions need a regular right endpoint");
  }
  const SymmetricSystem& sys = ws.system();
  const int p = sys.dims.p;
  const int q = sys.dims.q;
  const int n = sys.dims.n();

  std::shared_ptr<const OperatorSolution> Y = ws.fundamental(lambda);
  GammaBlocks gb = gamma_b(sys, ws.frame_b(), *Y, {}, ws.tolerances());

  // With Utilde Y(a) = I the rows at a are identity blocks, so the
  // constraint matrix stacks (0 0 I_p), i((0 I_q 0) - Gammahat_b Y), and
  // Gamma0b Y.
  Matrix A = Matrix::Zero(n, n);
  A.block(0, p + q, p, p) = Matrix::Identity(p, p);
  A.block(p, p, q, q) = kImag * Matrix::Identity(q, q);
  A.block(p, 0, q, n) -= kImag * gb.ghat;
  A.block(p + q, 0, p, n) = gb.g0;

  const double cond = spectral_condition(A);
  if (cond > ws.tolerances().kappa_max) {
    std::ostringstream msg;
    msg << "base solution constraints are ill-conditioned near spectrum"
        << " (cond " << cond << " at lambda = (" << lambda.real() << ", "
        << lambda.imag() << "))";
    throw NumericalError(msg.str());
  }
  auto lu = A.fullPivLu();

  Matrix rhs_v0 = Matrix::Zero(n, p + q);
  rhs_v0.block(0, 0, p, p) = -Matrix::Identity(p, p);
  rhs_v0.block(p, p, q, q) = Matrix::Identity(q, q);
  Matrix rhs_u = Matrix::Zero(n, p);
  rhs_u.block(p + q, 0, p, p) = Matrix::Identity(p, p);

  const Matrix c_v0 = lu.solve(rhs_v0);
  const Matrix c_u = lu.solve(rhs_u);

  BaseSolutions out;
  const Matrix uinv = ws.frame_a().utilde_inverse();
  out.v0 = std::make_shared<const OperatorSolution>(
      propagate(sys, Matrix(uinv * c_v0), lambda, sys.a, ws.horizon(),
                ws.tolerances()));
  out.u = std::make_shared<const OperatorSolution>(
      propagate(sys, Matrix(uinv * c_u), lambda, sys.a, ws.horizon(),
                ws.tolerances()));
  return out;
}

WeylBlocks weyl_blocks(const Workspace& ws, Complex lambda) {
  const SymmetricSystem& sys = ws.system();
  const int p = sys.dims.p;
  const int q = sys.dims.q;

  BaseSolutions base = base_solutions(ws, lambda);
  GammaBlocks gb_v0 = gamma_b(sys, ws.frame_b(), *base.v0, {},
                              ws.tolerances());
  GammaBlocks gb_u = gamma_b(sys, ws.frame_b(), *base.u, {}, ws.tolerances());

  WeylBlocks blocks;
  blocks.lambda = lambda;
  const Matrix ua_v0 = ws.frame_a().Utilde * base.v0->front();
  const Matrix ua_u = ws.frame_a().Utilde * base.u->front();
  blocks.m0 = ua_v0.topRows(p + q) +
              (kImag / 2.0) * projector_hhat(sys.dims);
  blocks.M2 = ua_u.topRows(p + q);
  blocks.M3 = -gb_v0.g1;
  blocks.M4 = -gb_u.g1;
  return blocks;
}

MFunction m_function(std::shared_ptr<const Workspace> ws,
                     BoundaryParameter tau) {
  if (!ws) throw ValidationError("null workspace");
  MFunction m;
  m.provenance = "block formula";
  m.evaluator = [ws, tau = std::move(tau)](Complex lambda) {
    return m_from_tau(*ws, tau, lambda);
  };
  return m;
}

Matrix m_function_direct(const Workspace& ws, const BoundaryParameter& tau,
                         Complex lambda) {
  if (ws.singular()) {
    throw ValidationError(
        "a singular minimal endpoint takes no boundary parameter");
  }
  const SymmetricSystem& sys = ws.system();
  const int p = sys.dims.p;
  const int q = sys.dims.q;
  const int n = sys.dims.n();

  std::shared_ptr<const OperatorSolution> Y = ws.fundamental(lambda);
  GammaBlocks gb = gamma_b(sys, ws.frame_b(), *Y, {}, ws.tolerances());
  auto [C0, C1] = tau.at(lambda);

  Matrix A = Matrix::Zero(n, n);
  A.block(0, p + q, p, p) = Matrix::Identity(p, p);
  A.block(p, p, q, q) = kImag * Matrix::Identity(q, q);
  A.block(p, 0, q, n) -= kImag * gb.ghat;
  A.block(p + q, 0, p, n) = C0 * gb.g0 + C1 * gb.g1;

  const double cond = spectral_condition(A);
  if (cond > ws.tolerances().kappa_max) {
    throw NumericalError(
        "direct constrained solve is ill-conditioned near spectrum");
  }
  Matrix rhs = Matrix::Zero(n, p + q);
  rhs.block(0, 0, p, p) = -Matrix::Identity(p, p);
  rhs.block(p, p, q, q) = Matrix::Identity(q, q);
  const Matrix c = A.fullPivLu().solve(rhs);
  return c.topRows(p + q) + (kImag / 2.0) * projector_hhat(sys.dims);
}

namespace {

// One truncated evaluation of the singular minimal m at beta: split the
// coefficient space by the prefix Gram into p+q weighted-integrable
// directions and p growing ones, pair the integrable block against the
// reference functions, and solve the boundary conditions at a in that block.
struct SingularIterate {
  bool usable = false;
  Matrix m;
};

SingularIterate singular_iterate(const Workspace& ws,
                                 const OperatorSolution& Y, double beta) {
  SingularIterate out;
  const SymmetricSystem& sys = ws.system();
  const int p = sys.dims.p;
  const int q = sys.dims.q;
  const int n = sys.dims.n();
  const Tolerances& tol = ws.tolerances();

  const Matrix G = solution_gram(sys, Y, Y, sys.a, beta);
  Matrix D;
  if (p == 0) {
    D = Matrix::Identity(n, n);
  } else {
    Eigen::SelfAdjointEigenSolver<Matrix> es(G);
    if (es.info() != Eigen::Success) return out;
    const auto& ev = es.eigenvalues();
    // The small eigenvalues saturate at the roundoff floor of the largest;
    // the subspace split only needs the gap above that floor.
    const double floor_val = ev(n - 1) * 1e-15 * n;
    const double denom = std::max(ev(p + q - 1), floor_val);
    if (denom <= 0.0 || ev(p + q) / denom < tol.gap_min) return out;
    D = es.eigenvectors().leftCols(p + q);
  }

  Matrix W(q, p + q);
  if (q > 0) {
    const Matrix Sb = Y.eval(beta) * D;
    const auto& thetas = ws.frame_b().theta_hat();
    for (int j = 0; j < q; ++j) {
      W.row(j) = thetas[j](beta).adjoint() * sys.J * Sb;
    }
  }

  Matrix A(p + q, p + q);
  A.topRows(p) = D.bottomRows(p);
  A.bottomRows(q) = D.middleRows(p, q) - W;
  if (spectral_condition(A) > tol.kappa_max) return out;

  Matrix rhs = Matrix::Zero(p + q, p + q);
  rhs.block(0, 0, p, p) = -Matrix::Identity(p, p);
  rhs.block(p, p, q, q) = -kImag * Matrix::Identity(q, q);
  const Matrix d = A.fullPivLu().solve(rhs);
  out.m = (D * d).topRows(p + q) +
          (kImag / 2.0) * projector_hhat(sys.dims);
  out.usable = true;
  return out;
}

Matrix singular_m_at(const Workspace& ws, const SingularLimitOptions& options,
                     Complex lambda_in) {
  if (lambda_in.imag() == 0.0) {
    throw ValidationError(
        "the singular m-function is defined off the real axis");
  }
  const bool reflect = lambda_in.imag() < 0.0;
  const Complex lambda = reflect ? std::conj(lambda_in) : lambda_in;
  const SymmetricSystem& sys = ws.system();
  const Tolerances& tol = ws.tolerances();
  const double a = sys.a;

  std::vector<double> schedule = options.beta_schedule;
  if (schedule.empty()) {
    // Arithmetic ladder: constant-ratio error decrements for exponential
    // tails, which is what the Aitken step expects. The cap grows as
    // Im lambda shrinks because the decaying/growing gap opens at rate
    // e^{2 Im lambda beta}.
    const double cap =
        std::isnan(options.horizon_cap)
            ? a + std::max(48.0, 24.0 + 8.0 / lambda.imag())
            : options.horizon_cap;
    for (double beta = a + 8.0; beta <= cap + 1e-9; beta += 4.0) {
      schedule.push_back(beta);
    }
  }
  std::sort(schedule.begin(), schedule.end());
  while (!schedule.empty() && schedule.front() <= a) {
    schedule.erase(schedule.begin());
  }
  if (!sys.unbounded()) {
    while (!schedule.empty() && schedule.back() > sys.b) schedule.pop_back();
  }
  if (schedule.empty()) {
    throw ValidationError("empty truncation schedule");
  }

  OperatorSolution Y = propagate(sys, ws.frame_a().utilde_inverse(), lambda,
                                 a, schedule.front(), tol);
  std::vector<Matrix> iterates;
  double prev_inc = std::numeric_limits<double>::infinity();
  bool converged = false;
  for (std::size_t k = 0; k < schedule.size(); ++k) {
    if (k > 0) {
      // Overflow guard: stop the ladder before the growing directions leave
      // the representable range.
      if (max_abs(Y.back()) > 1e60) break;
      extend(Y, sys, schedule[k], tol);
    }
    SingularIterate it = singular_iterate(ws, Y, schedule[k]);
    if (!it.usable) continue;
    if (!iterates.empty()) {
      const double inc = max_abs(Matrix(it.m - iterates.back()));
      const double scale = 1.0 + max_abs(it.m);
      if (inc <= tol.cauchy_tol * scale) {
        iterates.push_back(it.m);
        converged = true;
        break;
      }
      if (inc > prev_inc && prev_inc <= tol.tau_form * scale) {
        // Noise floor: the truncation error stopped contracting at a small
        // level, so later iterates only add roundoff.
        converged = true;
        break;
      }
      prev_inc = inc;
    }
    iterates.push_back(it.m);
  }
  if (iterates.empty()) {
    throw NumericalError(
        "no usable truncation point: the integrable/growing gap never "
        "opened");
  }
  if (!converged && iterates.size() < 3) {
    throw NumericalError("the singular boundary limit did not settle");
  }
  Matrix m = iterates.back();
  if (iterates.size() >= 3) {
    m = aitken_step(iterates[iterates.size() - 3],
                    iterates[iterates.size() - 2], iterates.back());
  }
  return reflect ? Matrix(m.adjoint()) : m;
}

}  // namespace

MFunction m_function_singular_minimal(std::shared_ptr<const Workspace> ws,
                                      SingularLimitOptions options) {
  if (!ws) throw ValidationError("null workspace");
  if (!ws->singular()) {
    throw ValidationError(
        "the singular minimal m-function needs a singular endpoint frame");
  }
  MFunction m;
  m.provenance = "singular truncation limit";
  m.evaluator = [ws, options = std::move(options)](Complex lambda) {
    return singular_m_at(*ws, options, lambda);
  };
  return m;
}

OperatorSolution v_tau(const Workspace& ws, const MFunction& m,
                       Complex lambda) {
  return v_from_m(ws, m(lambda), lambda, ws.horizon(), ws.tolerances());
}

OperatorSolution v_tau(const Workspace& ws, const BoundaryParameter& tau,
                       Complex lambda) {
  return v_from_m(ws, m_from_tau(ws, tau, lambda), lambda, ws.horizon(),
                  ws.tolerances());
}

namespace {

Matrix green_kernel_impl(const Workspace& ws,
                         const std::function<Matrix(Complex)>& m_eval,
                         double x, double t, Complex lambda) {
  const SymmetricSystem& sys = ws.system();
  if (x == t) {
    throw ValidationError("the kernel jumps at coinciding arguments");
  }
  if (x < sys.a || t < sys.a || x > ws.horizon() || t > ws.horizon()) {
    throw ValidationError("kernel arguments outside the working interval");
  }
  const double hi = std::max(x, t);
  const double reach = std::max(hi, sys.a + 1e-6 * (ws.horizon() - sys.a));
  if (x > t) {
    OperatorSolution v =
        v_from_m(ws, m_eval(lambda), lambda, reach, ws.tolerances());
    OperatorSolution phi_conj = phi_solution(sys, ws.frame_a(),
                                             std::conj(lambda), reach,
                                             ws.tolerances());
    return v.eval(x) * phi_conj.eval(t).adjoint();
  }
  OperatorSolution phi = phi_solution(sys, ws.frame_a(), lambda, reach,
                                      ws.tolerances());
  OperatorSolution v_conj = v_from_m(ws, m_eval(std::conj(lambda)),
                                     std::conj(lambda), reach,
                                     ws.tolerances());
  return phi.eval(x) * v_conj.eval(t).adjoint();
}

WeightedFunction apply_resolvent_impl(
    const Workspace& ws, const std::function<Matrix(Complex)>& m_eval,
    const WeightedFunction& f, Complex lambda) {
  const SymmetricSystem& sys = ws.system();
  if (f.empty()) {
    throw ValidationError("resolvent input function is empty");
  }
  const double a = sys.a;
  double reach = ws.singular()
                     ? contamination_reach(ws, 2.0 * std::abs(lambda.imag()))
                     : sys.b;
  // The upper integral only sees f on its support, but the output keeps a
  // short tail beyond it so decay is visible.
  const double s_end = std::min(f.support_end(), reach);
  if (!ws.singular()) {
    reach = sys.b;
  } else {
    reach = std::min(reach, std::max(s_end + 4.0, a + 8.0));
  }

  const double span = reach - a;
  int nodes = 16385;
  if (span > 4.0) {
    nodes = std::min(65537, static_cast<int>(std::ceil(4096.0 * span)) | 1);
  }
  std::vector<double> grid(nodes);
  for (int i = 0; i < nodes; ++i) {
    grid[i] = a + span * static_cast<double>(i) / (nodes - 1);
  }
  // Snap interior breakpoints and the support edge onto the grid so the
  // trapezoid pieces stay smooth.
  auto snap = [&](double xval) {
    if (xval <= a || xval >= reach) return;
    const int idx = static_cast<int>(std::lround((xval - a) / span *
                                                 (nodes - 1)));
    if (idx > 0 && idx < nodes - 1) grid[idx] = xval;
  };
  for (double bp : sys.breakpoints) snap(bp);
  snap(s_end);

  const Tolerances tol = tightened(ws.tolerances());
  const Matrix m_here = m_eval(lambda);
  OperatorSolution v = v_from_m(ws, m_here, lambda, reach, tol);
  OperatorSolution phi = phi_solution(sys, ws.frame_a(), lambda, reach, tol);
  const Complex lc = std::conj(lambda);
  OperatorSolution v_conj = v_from_m(ws, m_eval(lc), lc, reach, tol);
  OperatorSolution phi_conj = phi_solution(sys, ws.frame_a(), lc, reach, tol);

  const int pq = sys.dims.pq();
  // Integrand samples: g1 = phi(t, conj l)^H Delta f for the lower integral,
  // g2 = v(t, conj l)^H Delta f for the upper one.
  std::vector<Vector> g1(nodes), g2(nodes);
  for (int i = 0; i < nodes; ++i) {
    const double tt = grid[i];
    const Vector df = sys.Delta(tt) * f.eval(tt);
    g1[i] = phi_conj.eval(tt).adjoint() * df;
    g2[i] = tt <= s_end ? Vector(v_conj.eval(tt).adjoint() * df)
                        : Vector(Vector::Zero(pq));
  }
  std::vector<Vector> lower(nodes), upper(nodes);
  lower[0] = Vector::Zero(pq);
  for (int i = 1; i < nodes; ++i) {
    const double h = grid[i] - grid[i - 1];
    lower[i] = lower[i - 1] + 0.5 * h * (g1[i - 1] + g1[i]);
  }
  upper[nodes - 1] = Vector::Zero(pq);
  for (int i = nodes - 2; i >= 0; --i) {
    const double h = grid[i + 1] - grid[i];
    upper[i] = upper[i + 1] + 0.5 * h * (g2[i] + g2[i + 1]);
  }

  WeightedFunction out;
  out.t = grid;
  out.values.resize(nodes);
  for (int i = 0; i < nodes; ++i) {
    out.values[i] = v.eval(grid[i]) * lower[i] + phi.eval(grid[i]) * upper[i];
  }
  return out;
}

double herglotz_defect_impl(const Workspace& ws,
                            const std::function<Matrix(Complex)>& m_eval,
                            Complex lambda) {
  if (lambda.imag() == 0.0) {
    throw ValidationError("the Herglotz defect needs a non-real point");
  }
  const SymmetricSystem& sys = ws.system();
  const Matrix m_val = m_eval(lambda);
  const Matrix im_m = skew_part(m_val);

  const double reach =
      contamination_reach(ws, 2.0 * std::abs(lambda.imag()));
  const Tolerances tol = tightened(ws.tolerances());
  OperatorSolution v = v_from_m(ws, m_val, lambda, reach, tol);
  const Matrix gram = solution_gram(sys, v, v, sys.a, reach);
  const Matrix defect = im_m / lambda.imag() - gram;
  return min_herm_eigenvalue(hermitian_part(defect));
}

Matrix nevanlinna_identity_residual_impl(
    const Workspace& ws, const std::function<Matrix(Complex)>& m_eval,
    Complex mu, Complex lambda) {
  if (mu.imag() == 0.0 || lambda.imag() == 0.0) {
    throw ValidationError("the identity needs non-real points");
  }
  const SymmetricSystem& sys = ws.system();
  const double reach = contamination_reach(
      ws, std::abs(mu.imag()) + std::abs(lambda.imag()));
  const Tolerances tol = tightened(ws.tolerances());
  OperatorSolution v_mu = v_from_m(ws, m_eval(mu), mu, reach, tol);
  OperatorSolution v_la = v_from_m(ws, m_eval(lambda), lambda, reach, tol);
  // solution_gram(y, z) integrates z^H Delta y.
  const Matrix gram = solution_gram(sys, v_mu, v_la, sys.a, reach);
  return m_eval(mu) - m_eval(lambda).adjoint() -
         (mu - std::conj(lambda)) * gram;
}

}  // namespace

Matrix green_kernel(const Workspace& ws, const MFunction& m, double x,
                    double t, Complex lambda) {
  return green_kernel_impl(ws, m.evaluator, x, t, lambda);
}
Matrix green_kernel(const Workspace& ws, const BoundaryParameter& tau,
                    double x, double t, Complex lambda) {
  return green_kernel_impl(
      ws, [&](Complex l) { return m_from_tau(ws, tau, l); }, x, t, lambda);
}

WeightedFunction apply_resolvent(const Workspace& ws, const MFunction& m,
                                 const WeightedFunction& f, Complex lambda) {
  return apply_resolvent_impl(ws, m.evaluator, f, lambda);
}
WeightedFunction apply_resolvent(const Workspace& ws,
                                 const BoundaryParameter& tau,
                                 const WeightedFunction& f, Complex lambda) {
  return apply_resolvent_impl(
      ws, [&](Complex l) { return m_from_tau(ws, tau, l); }, f, lambda);
}

double herglotz_defect(const Workspace& ws, const MFunction& m,
                       Complex lambda) {
  return herglotz_defect_impl(ws, m.evaluator, lambda);
}
double herglotz_defect(const Workspace& ws, const BoundaryParameter& tau,
                       Complex lambda) {
  return herglotz_defect_impl(
      ws, [&](Complex l) { return m_from_tau(ws, tau, l); }, lambda);
}

Matrix nevanlinna_identity_residual(const Workspace& ws, const MFunction& m,
                                    Complex mu, Complex lambda) {
  return nevanlinna_identity_residual_impl(ws, m.evaluator, mu, lambda);
}
Matrix nevanlinna_identity_residual(const Workspace& ws,
                                    const BoundaryParameter& tau, Complex mu,
                                    Complex lambda) {
  return nevanlinna_identity_residual_impl(
      ws, [&](Complex l) { return m_from_tau(ws, tau, l); }, mu, lambda);
}

Matrix frame_shift_check(const SymmetricSystem& sys, const Matrix& U,
                         const Matrix& utilde_1, const Matrix& utilde_2,
                         const BoundaryFrameB& frame_b,
                         const BoundaryParameter& tau,
                         std::vector<Complex> probes, const Tolerances& tol) {
  if (probes.empty()) {
    probes = {Complex(0.0, 1.0), Complex(0.5, 0.8), Complex(-1.1, 1.7)};
  }
  const int p = sys.dims.p;
  const int q = sys.dims.q;

  BoundaryFrameA f1 = build_frame_a(sys.dims, U, utilde_1, tol);
  BoundaryFrameA f2 = build_frame_a(sys.dims, U, utilde_2, tol);
  auto ws1 = make_workspace(sys, f1, frame_b,
                            std::numeric_limits<double>::quiet_NaN(), tol);
  auto ws2 = make_workspace(sys, f2, frame_b,
                            std::numeric_limits<double>::quiet_NaN(), tol);

  auto eval = [&](const std::shared_ptr<Workspace>& ws,
                  Complex lambda) -> Matrix {
    if (ws->singular()) {
      return singular_m_at(*ws, SingularLimitOptions{}, lambda);
    }
    return m_from_tau(*ws, tau, lambda);
  };

  std::vector<Matrix> shifts;
  for (Complex lambda : probes) {
    shifts.push_back(Matrix(eval(ws2, lambda) - eval(ws1, lambda)));
  }
  Matrix mean = Matrix::Zero(p + q, p + q);
  for (const Matrix& s : shifts) mean += s;
  mean /= static_cast<double>(shifts.size());

  const double scale = 1.0 + max_abs(mean);
  for (const Matrix& s : shifts) {
    if (max_abs(Matrix(s - mean)) > tol.tau_id * scale * 10.0) {
      throw NumericalError(
          "completion shift varies with lambda beyond tolerance");
    }
  }
  // The shift must be a Hermitian block supported on the first summand.
  Matrix structural = mean;
  structural.block(0, 0, p, p).setZero();
  if (max_abs(structural) > tol.tau_id * scale * 10.0 ||
      hermiticity_defect(Matrix(mean.block(0, 0, p, p))) >
          tol.tau_id * scale * 10.0) {
    throw NumericalError(
        "completion shift is not a Hermitian block on the first summand");
  }
  (void)q;
  return mean;
}

Complex pole_indicator(const Workspace& ws, const BoundaryParameter& tau,
                       double s) {
  if (ws.singular()) {
    throw ValidationError("the pole indicator needs a regular right endpoint");
  }
  const SymmetricSystem& sys = ws.system();
  const int p = sys.dims.p;
  const int q = sys.dims.q;
  const int n = sys.dims.n();
  const Complex lambda(s, 0.0);

  OperatorSolution Y = propagate(sys, ws.frame_a().utilde_inverse(), lambda,
                                 sys.a, sys.b, ws.tolerances());
  GammaBlocks gb = gamma_b(sys, ws.frame_b(), Y, {}, ws.tolerances());
  auto [C0, C1] = tau.at(lambda);

  Matrix A = Matrix::Zero(n, n);
  A.block(0, p + q, p, p) = Matrix::Identity(p, p);
  A.block(p, p, q, q) = kImag * Matrix::Identity(q, q);
  A.block(p, 0, q, n) -= kImag * gb.ghat;
  A.block(p + q, 0, p, n) = C0 * gb.g0 + C1 * gb.g1;
  return A.determinant();
}

}  // namespace symmspectra
