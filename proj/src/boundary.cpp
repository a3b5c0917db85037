#include "symmspectra/boundary.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <sstream>
#include <utility>

#include "symmspectra/propagate.hpp"

namespace symmspectra {

namespace {

// Orthonormal basis of the orthogonal complement of the column space of M,
// returned as rows. Empty when M has full row count worth of columns.
Matrix left_null_basis(const Eigen::JacobiSVD<Matrix>& svd, int rank) {
  const Matrix& full_u = svd.matrixU();
  const int n = static_cast<int>(full_u.rows());
  return full_u.rightCols(n - rank).adjoint();
}

std::string shape_string(const Matrix& m) {
  std::ostringstream os;
  os << m.rows() << "x" << m.cols();
  return os.str();
}

}  // namespace

BoundaryFrameA build_frame_a(SpaceDecomposition dims, const Matrix& U,
                             std::optional<Matrix> utilde_hint,
                             const Tolerances& tol) {
  const int p = dims.p;
  const int q = dims.q;
  const int n = dims.n();
  if (U.rows() != p + q || U.cols() != n) {
    throw ValidationError("boundary frame U must be " +
                          std::to_string(p + q) + "x" + std::to_string(n) +
                          ", got " + shape_string(U));
  }
  const Matrix J = build_canonical_J(p, q);
  const double scale = std::max(1.0, max_abs(U));

  // Frame relations: the q reference rows pair to i I_q, everything else in
  // U J U^* vanishes. These are exactly the conditions that make the Gamma
  // maps built from U compatible with the Lagrange identity.
  Matrix target = Matrix::Zero(p + q, p + q);
  target.topLeftCorner(q, q) = kImag * Matrix::Identity(q, q);
  const double rel_defect = max_abs(Matrix(U * J * U.adjoint() - target));
  if (rel_defect > tol.tau_frame * scale * scale * 10.0) {
    throw ValidationError(
        "boundary frame rows violate U J U^* = diag(i I_q, 0), defect " +
        std::to_string(rel_defect));
  }

  BoundaryFrameA frame;
  frame.dims = dims;
  frame.U = U;
  frame.J = J;

  if (utilde_hint) {
    const Matrix& Ut = *utilde_hint;
    if (Ut.rows() != n || Ut.cols() != n) {
      throw ValidationError("Utilde hint must be " + std::to_string(n) + "x" +
                            std::to_string(n) + ", got " + shape_string(Ut));
    }
    if (max_abs(Matrix(Ut.bottomRows(p + q) - U)) > tol.tau_frame * scale) {
      throw ValidationError("Utilde hint does not end in the rows of U");
    }
    const double jdef = max_abs(Matrix(Ut.adjoint() * J * Ut - J));
    if (jdef > tol.tau_frame * scale * scale * 10.0) {
      throw ValidationError("Utilde hint is not J-unitary, defect " +
                            std::to_string(jdef));
    }
    frame.Utilde = Ut;
    return frame;
  }

  if (p == 0) {
    // Nothing to complete: U is already square and J-unitary up to the
    // checked relation, which in this case says U J U^* = i I_q = J.
    frame.Utilde = U;
    return frame;
  }

  // Completion. The missing p rows R must satisfy R J U^* = (0 | -I_p) and
  // R J R^* = 0. With M = J U^* the first condition is linear, R M = T, and
  // the affine solution set is R0 + K N where R0 = T M^+ is the minimum-norm
  // particular solution and the rows of N span the left null space of M.
  Matrix M = J * U.adjoint();
  Eigen::JacobiSVD<Matrix> svd(M, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  if (sv(sv.size() - 1) <= 1e-13 * sv(0)) {
    throw ValidationError("boundary frame U is rank deficient");
  }
  Matrix pinv = svd.matrixV() * sv.cwiseInverse().asDiagonal() *
                svd.matrixU().leftCols(p + q).adjoint();
  Matrix T = Matrix::Zero(p, p + q);
  T.rightCols(p) = -Matrix::Identity(p, p);
  Matrix R0 = T * pinv;
  Matrix N = left_null_basis(svd, p + q);

  // The left null space of M is J times the kernel of U, and the kernel of a
  // frame satisfying the relations above is J-neutral, so N J N^* = 0 holds
  // identically. Guard it anyway: a violation means the premises failed.
  if (max_abs(Matrix(N * J * N.adjoint())) > 1e-10) {
    throw ValidationError("frame kernel is not J-neutral");
  }

  // The remaining constraint reads E K^* - K E^* = -S with S = R0 J R0^*
  // (skew) and E = R0 J N^*, and E is invertible whenever U satisfies the
  // frame relations. All solutions are K = (S/2 + X) E^{-*} with X Hermitian;
  // minimizing ||K||_F leads to the Lyapunov equation P X + X P = P A - A P
  // with A = S/2 and P = (E E^*)^{-1}, solved in the eigenbasis of P.
  Matrix S = R0 * J * R0.adjoint();
  Matrix E = R0 * J * N.adjoint();
  Eigen::FullPivLU<Matrix> elu(E);
  if (!elu.isInvertible()) {
    throw ValidationError("frame completion pairing matrix is singular");
  }
  Matrix Einv = elu.inverse();
  Matrix P = Einv.adjoint() * Einv;
  Matrix A = 0.5 * S;
  Matrix rhs = P * A - A * P;
  Eigen::SelfAdjointEigenSolver<Matrix> es(P);
  Matrix Q = es.eigenvectors();
  RealVector pi = es.eigenvalues();
  Matrix rhs_t = Q.adjoint() * rhs * Q;
  Matrix X_t(p, p);
  for (int i = 0; i < p; ++i)
    for (int j = 0; j < p; ++j) X_t(i, j) = rhs_t(i, j) / (pi(i) + pi(j));
  Matrix X = hermitian_part(Matrix(Q * X_t * Q.adjoint()));
  Matrix K = (A + X) * Einv.adjoint();

  Matrix R = R0 + K * N;
  Matrix Ut(n, n);
  Ut.topRows(p) = R;
  Ut.bottomRows(p + q) = U;
  const double jdef = max_abs(Matrix(Ut.adjoint() * J * Ut - J));
  if (jdef > tol.tau_frame * scale * scale * 100.0) {
    throw NumericalError("frame completion failed J-unitarity check, defect " +
                         std::to_string(jdef));
  }
  frame.Utilde = Ut;
  return frame;
}

BoundaryFrameA identity_frame_a(SpaceDecomposition dims) {
  const int n = dims.n();
  BoundaryFrameA frame;
  frame.dims = dims;
  frame.J = build_canonical_J(dims.p, dims.q);
  frame.Utilde = Matrix::Identity(n, n);
  frame.U = frame.Utilde.bottomRows(dims.p + dims.q);
  return frame;
}

GammaBlocks gamma_a(const BoundaryFrameA& frame, const Matrix& y_at_a) {
  const int p = frame.dims.p;
  const int q = frame.dims.q;
  if (y_at_a.rows() != frame.dims.n()) {
    throw ValidationError("gamma_a: value has " +
                          std::to_string(y_at_a.rows()) + " rows, expected " +
                          std::to_string(frame.dims.n()));
  }
  Matrix g = frame.Utilde * y_at_a;
  GammaBlocks out;
  out.g0 = g.topRows(p);
  out.ghat = g.middleRows(p, q);
  out.g1 = g.bottomRows(p);
  return out;
}

GammaBlocks gamma_a(const BoundaryFrameA& frame, const OperatorSolution& y) {
  return gamma_a(frame, y.front());
}

BoundaryFrameB BoundaryFrameB::regular(SpaceDecomposition dims,
                                       const Matrix& Xb, const Matrix& J,
                                       const Tolerances& tol) {
  const int n = dims.n();
  if (Xb.rows() != n || Xb.cols() != n) {
    throw ValidationError("endpoint frame X_b must be " + std::to_string(n) +
                          "x" + std::to_string(n));
  }
  const double scale = std::max(1.0, max_abs(Xb));
  const double defect = max_abs(Matrix(Xb.adjoint() * J * Xb - J));
  if (defect > tol.tau_frame * scale * scale * 10.0) {
    throw ValidationError("endpoint frame X_b is not J-unitary, defect " +
                          std::to_string(defect));
  }
  BoundaryFrameB frame;
  frame.kind_ = Kind::Regular;
  frame.dims_ = dims;
  frame.Xb_ = Xb;
  return frame;
}

BoundaryFrameB BoundaryFrameB::singular_minimal(
    SpaceDecomposition dims,
    std::vector<std::function<Vector(double)>> theta_hat) {
  if (static_cast<int>(theta_hat.size()) != dims.q) {
    throw ValidationError(
        "singular minimal frame needs one reference function per middle "
        "dimension, got " +
        std::to_string(theta_hat.size()) + " for q = " +
        std::to_string(dims.q));
  }
  BoundaryFrameB frame;
  frame.kind_ = Kind::SingularMinimal;
  frame.dims_ = dims;
  frame.theta_hat_ = std::move(theta_hat);
  return frame;
}

GammaBlocks gamma_b(const SymmetricSystem& sys, const BoundaryFrameB& frame,
                    const OperatorSolution& y,
                    const std::vector<double>& beta_schedule,
                    const Tolerances& tol) {
  const int p = frame.dims().p;
  const int q = frame.dims().q;
  const int cols = static_cast<int>(y.cols());
  GammaBlocks out;
  if (frame.kind() == BoundaryFrameB::Kind::Regular) {
    const double span = sys.b - sys.a;
    if (y.t_back() < sys.b - 1e-12 * span) {
      throw ValidationError("gamma_b: solution does not reach the endpoint");
    }
    Matrix g = frame.Xb() * y.eval(sys.b);
    out.g0 = g.topRows(p);
    out.ghat = g.middleRows(p, q);
    out.g1 = g.bottomRows(p);
    return out;
  }
  std::vector<double> schedule = beta_schedule;
  if (schedule.empty()) {
    const double reach = y.t_back();
    schedule = geometric_beta_schedule(sys.a, sys.a + 0.125 * (reach - sys.a),
                                       reach, 8);
  }
  out.g0 = Matrix::Zero(0, cols);
  out.g1 = Matrix::Zero(0, cols);
  out.ghat = Matrix::Zero(q, cols);
  for (int j = 0; j < q; ++j) {
    LimitResult lim = b_form(sys, y, frame.theta_hat()[j], schedule, tol);
    out.ghat.row(j) = lim.value;
  }
  return out;
}

double frame_identity_residual(const SymmetricSystem& sys,
                               const BoundaryFrameB& frame,
                               const std::vector<const OperatorSolution*>& test,
                               const std::vector<double>& beta_schedule,
                               const Tolerances& tol) {
  double worst = 0.0;
  std::vector<GammaBlocks> gb;
  gb.reserve(test.size());
  for (const OperatorSolution* y : test) {
    gb.push_back(gamma_b(sys, frame, *y, beta_schedule, tol));
  }
  for (std::size_t i = 0; i < test.size(); ++i) {
    for (std::size_t j = 0; j < test.size(); ++j) {
      LimitResult lhs = b_form(sys, *test[i], *test[j], beta_schedule, tol);
      Matrix rhs = gb[j].g1.adjoint() * gb[i].g0 -
                   gb[j].g0.adjoint() * gb[i].g1 +
                   kImag * gb[j].ghat.adjoint() * gb[i].ghat;
      const double denom = 1.0 + max_abs(lhs.value);
      worst = std::max(worst, max_abs(Matrix(lhs.value - rhs)) / denom);
    }
  }
  return worst;
}

BoundaryParameter BoundaryParameter::constant(Matrix C0, Matrix C1) {
  BoundaryParameter tau;
  tau.kind = Kind::ConstantSelfAdjoint;
  tau.C0 = std::move(C0);
  tau.C1 = std::move(C1);
  return tau;
}

BoundaryParameter BoundaryParameter::holomorphic(
    std::function<std::pair<Matrix, Matrix>(Complex)> f) {
  BoundaryParameter tau;
  tau.kind = Kind::Holomorphic;
  tau.evaluator = std::move(f);
  return tau;
}

PairReport validate_nevanlinna_pair(const BoundaryParameter& tau,
                                    const std::vector<Complex>& lambda_samples,
                                    const Tolerances& tol) {
  PairReport report;
  if (lambda_samples.empty()) {
    throw ValidationError("pair validation needs at least one sample point");
  }
  report.worst_herglotz = std::numeric_limits<double>::infinity();
  report.rank_margin = std::numeric_limits<double>::infinity();
  bool ok = true;
  std::ostringstream detail;
  for (Complex lambda : lambda_samples) {
    const double im = lambda.imag();
    if (im == 0.0) {
      throw ValidationError("pair validation samples must be non-real");
    }
    auto [C0, C1] = tau.at(lambda);
    if (C0.rows() != C0.cols() || C1.rows() != C1.cols() ||
        C0.rows() != C1.rows()) {
      throw ValidationError("pair matrices must be square and equal-sized");
    }
    const double scale =
        std::max({1.0, max_abs(C0), max_abs(C1)});

    // Sign condition: Im(lambda) Im(C1 C0^*) must be nonnegative.
    Matrix imop = skew_part(Matrix(C1 * C0.adjoint()));
    const double sgn = im > 0 ? 1.0 : -1.0;
    const double eig = min_herm_eigenvalue(Matrix(sgn * imop));
    report.worst_herglotz = std::min(report.worst_herglotz, eig);
    if (eig < -tol.tau_psd * scale * scale) {
      ok = false;
      detail << "sign condition fails at lambda = (" << lambda.real() << ", "
             << lambda.imag() << "), eigenvalue " << eig << "; ";
    }

    // Symmetry across conjugation.
    auto [D0, D1] = tau.at(std::conj(lambda));
    const double sym = max_abs(
        Matrix(C1 * D0.adjoint() - C0 * D1.adjoint()));
    report.worst_symmetry = std::max(report.worst_symmetry, sym);
    if (sym > tol.tau_id * scale * scale) {
      ok = false;
      detail << "conjugation symmetry fails at lambda = (" << lambda.real()
             << ", " << lambda.imag() << "), residual " << sym << "; ";
    }

    // Surjectivity of the stacked pair.
    Matrix stacked(C0.rows(), C0.cols() + C1.cols());
    stacked << C0, C1;
    Eigen::JacobiSVD<Matrix> svd(stacked);
    const auto& sv = svd.singularValues();
    const double margin = sv(0) > 0.0 ? sv(sv.size() - 1) / sv(0) : 0.0;
    report.rank_margin = std::min(report.rank_margin, margin);
    if (margin <= tol.tau_sub) {
      ok = false;
      detail << "stacked pair is rank deficient at lambda = ("
             << lambda.real() << ", " << lambda.imag() << "); ";
    }
  }
  if (tau.kind == BoundaryParameter::Kind::ConstantSelfAdjoint) {
    const double scale = std::max({1.0, max_abs(tau.C0), max_abs(tau.C1)});
    const double herm =
        max_abs(skew_part(Matrix(tau.C1 * tau.C0.adjoint())));
    report.selfadjoint = herm <= tol.tau_herm * scale * scale * 100.0;
    if (!report.selfadjoint) {
      ok = false;
      detail << "constant pair has Im(C1 C0^*) of size " << herm << "; ";
    }
  }
  report.valid = ok;
  report.detail = detail.str();
  return report;
}

Matrix normalize_selfadjoint_pair(const Matrix& C0, const Matrix& C1,
                                  const Tolerances& tol) {
  if (C0.rows() != C0.cols() || C1.rows() != C1.cols() ||
      C0.rows() != C1.rows()) {
    throw ValidationError("pair matrices must be square and equal-sized");
  }
  const int d = static_cast<int>(C0.rows());
  Matrix minus = C0 - kImag * C1;
  Matrix plus = C0 + kImag * C1;
  Eigen::FullPivLU<Matrix> lu(minus);
  if (!lu.isInvertible()) {
    throw ValidationError(
        "pair is not self-adjoint: C0 - i C1 is singular");
  }
  // The Cayley quotient (C0 - i C1)^{-1} (C0 + i C1) cancels any common left
  // factor and equals exp(2iB) exactly when the pair is self-adjoint, which
  // is what makes it the right object to diagonalize.
  Matrix W = lu.solve(plus);
  const double unit_defect =
      max_abs(Matrix(W.adjoint() * W - Matrix::Identity(d, d)));
  if (unit_defect > tol.tau_id * (1.0 + max_abs(W))) {
    throw ValidationError(
        "pair is not self-adjoint: Cayley quotient is not unitary, defect " +
        std::to_string(unit_defect));
  }
  Eigen::ComplexSchur<Matrix> schur(W);
  if (schur.info() != Eigen::Success) {
    throw NumericalError("Schur decomposition of the Cayley quotient failed");
  }
  const Matrix& T = schur.matrixT();
  const Matrix& Q = schur.matrixU();
  // A unitary matrix is normal, so its Schur form is diagonal up to roundoff.
  double offdiag = 0.0;
  for (int i = 0; i < d; ++i)
    for (int j = i + 1; j < d; ++j) offdiag = std::max(offdiag, std::abs(T(i, j)));
  if (offdiag > 1e2 * tol.tau_id) {
    throw NumericalError("Cayley quotient is not normal, off-diagonal " +
                         std::to_string(offdiag));
  }
  RealVector half_angles(d);
  for (int i = 0; i < d; ++i) {
    Complex w = T(i, i);
    w /= std::abs(w);
    // Principal argument lands in (-pi, pi] and sends -1 to +pi, so the
    // halved angle lives in (-pi/2, pi/2] with the tie resolved upward.
    half_angles(i) = 0.5 * std::arg(w);
  }
  Matrix B = Q * half_angles.cast<Complex>().asDiagonal() * Q.adjoint();
  return hermitian_part(B);
}

double pair_kernel_angle(const Matrix& C0a, const Matrix& C1a,
                         const Matrix& C0b, const Matrix& C1b) {
  if (C0a.rows() != C0b.rows() || C0a.cols() != C0b.cols() ||
      C1a.rows() != C1b.rows() || C0a.rows() != C1a.rows()) {
    throw ValidationError("pair kernel comparison needs matching shapes");
  }
  auto kernel_basis = [](const Matrix& C0, const Matrix& C1) {
    Matrix stacked(C0.rows(), C0.cols() + C1.cols());
    stacked << C0, C1;
    Eigen::JacobiSVD<Matrix> svd(stacked, Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    int rank = 0;
    for (int i = 0; i < sv.size(); ++i) {
      if (sv(i) > 1e-12 * sv(0)) ++rank;
    }
    return Matrix(svd.matrixV().rightCols(stacked.cols() - rank));
  };
  Matrix ka = kernel_basis(C0a, C1a);
  Matrix kb = kernel_basis(C0b, C1b);
  if (ka.cols() != kb.cols()) return M_PI / 2.0;
  if (ka.cols() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(Matrix(ka.adjoint() * kb));
  const double smallest = svd.singularValues()(svd.singularValues().size() - 1);
  return std::acos(std::clamp(smallest, 0.0, 1.0));
}

CollectionReport validate_collection(
    const std::function<std::tuple<Matrix, Matrix, Matrix>(Complex)>& plus,
    const std::function<std::tuple<Matrix, Matrix, Matrix>(Complex)>& minus,
    int dim_h1, const std::vector<Complex>& lambda_samples,
    const Tolerances& tol) {
  CollectionReport report;
  if (lambda_samples.empty()) {
    throw ValidationError("collection validation needs sample points");
  }
  report.worst_plus = std::numeric_limits<double>::infinity();
  report.worst_minus = -std::numeric_limits<double>::infinity();
  report.rank_margin = std::numeric_limits<double>::infinity();
  bool ok = true;
  std::ostringstream detail;
  for (Complex sample : lambda_samples) {
    if (sample.imag() == 0.0) {
      throw ValidationError("collection samples must be non-real");
    }
    const Complex lambda =
        sample.imag() > 0 ? sample : std::conj(sample);
    auto [C01, C02, C1] = plus(lambda);
    auto [D01, D02, D1] = minus(std::conj(lambda));
    const int h1 = dim_h1;
    const int h2 = static_cast<int>(C02.cols());
    const int h0 = h1 + h2;
    if (C01.cols() != h1 || C1.cols() != h1 || C01.rows() != h0 ||
        C02.rows() != h0 || C1.rows() != h0) {
      throw ValidationError("upper family blocks have inconsistent shapes");
    }
    if (D01.rows() != h1 || D01.cols() != h1 || D02.rows() != h1 ||
        D02.cols() != h2 || D1.rows() != h1 || D1.cols() != h1) {
      throw ValidationError("lower family blocks have inconsistent shapes");
    }
    const double scale =
        std::max({1.0, max_abs(C01), max_abs(C02), max_abs(C1), max_abs(D01),
                  max_abs(D02), max_abs(D1)});
    const double tol_psd = tol.tau_psd * scale * scale;

    // Upper half-plane sign condition.
    Matrix plus_form = 2.0 * skew_part(Matrix(C1 * C01.adjoint())) +
                       C02 * C02.adjoint();
    const double plus_eig = min_herm_eigenvalue(plus_form);
    report.worst_plus = std::min(report.worst_plus, plus_eig);
    if (plus_eig < -tol_psd) {
      ok = false;
      detail << "upper sign condition fails, eigenvalue " << plus_eig << "; ";
    }

    // Lower half-plane sign condition, with the same plus sign on the block
    // product but the opposite semidefiniteness.
    Matrix minus_form = 2.0 * skew_part(Matrix(D1 * D01.adjoint())) +
                        D02 * D02.adjoint();
    const double minus_eig = -min_herm_eigenvalue(Matrix(-minus_form));
    report.worst_minus = std::max(report.worst_minus, minus_eig);
    if (minus_eig > tol_psd) {
      ok = false;
      detail << "lower sign condition fails, eigenvalue " << minus_eig
             << "; ";
    }

    // Coupling identity across the real axis.
    Matrix coupling = C1 * D01.adjoint() - C01 * D1.adjoint() +
                      kImag * C02 * D02.adjoint();
    const double cval = max_abs(coupling);
    report.worst_coupling = std::max(report.worst_coupling, cval);
    if (cval > tol.tau_id * scale * scale) {
      ok = false;
      detail << "coupling identity residual " << cval << "; ";
    }

    // Surjectivity of both stacked families.
    Matrix up(h0, h0 + h1);
    up << C01, C02, C1;
    Matrix down(h1, h0 + h1);
    down << D01, D02, D1;
    for (const Matrix* m : {&up, &down}) {
      Eigen::JacobiSVD<Matrix> svd(*m);
      const auto& sv = svd.singularValues();
      const double margin = sv(0) > 0.0 ? sv(sv.size() - 1) / sv(0) : 0.0;
      report.rank_margin = std::min(report.rank_margin, margin);
      if (margin <= tol.tau_sub) {
        ok = false;
        detail << "stacked family is rank deficient; ";
      }
    }
  }
  report.valid = ok;
  report.detail = detail.str();
  return report;
}

double frame_a_residual(const BoundaryFrameA& frame) {
  const int p = frame.dims.p;
  const int q = frame.dims.q;
  Matrix target = Matrix::Zero(p + q, p + q);
  target.topLeftCorner(q, q) = kImag * Matrix::Identity(q, q);
  const double row_defect =
      max_abs(Matrix(frame.U * frame.J * frame.U.adjoint() - target));
  const double j_defect = max_abs(
      Matrix(frame.Utilde.adjoint() * frame.J * frame.Utilde - frame.J));
  const double tail_defect =
      max_abs(Matrix(frame.Utilde.bottomRows(p + q) - frame.U));
  return std::max({row_defect, j_defect, tail_defect});
}

}  // namespace symmspectra
