// Boundary frames at both endpoints and the Nevanlinna boundary parameters.
//
// At the regular endpoint a the frame is an n x n J-unitary matrix Utilde
// whose bottom p+q rows are the user's U; Gamma_a y = Utilde y(a) split into
// rows (p, q, p). At b the frame is either a J-unitary endpoint matrix X_b
// (regular) or a family of reference functions theta_j whose pairings
// [y, theta_j]_b realize the boundary maps (singular).
#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "symmspectra/propagate.hpp"
#include "symmspectra/sysdef.hpp"
#include "symmspectra/types.hpp"

namespace symmspectra {

struct BoundaryFrameA {
  SpaceDecomposition dims;
  Matrix U;       // (p+q) x n, full row rank
  Matrix Utilde;  // n x n, Utilde^* J Utilde = J, bottom rows = U
  Matrix J;

  // Exact inverse from J-unitarity: Utilde^{-1} = -J Utilde^* J.
  Matrix utilde_inverse() const { return -J * Utilde.adjoint() * J; }
};

struct GammaBlocks {
  Matrix g0;    // p rows
  Matrix ghat;  // q rows
  Matrix g1;    // p rows
};

// Completes U to a J-unitary Utilde (or validates a caller-supplied hint) and
// checks the frame relations U J U^* = diag(i I_q, 0). The completion solves
// R J U^* = (0; -I_p) on the J-orthogonal complement of the missing rows and
// breaks the remaining gauge freedom by minimizing ||R||_F; see the
// implementation notes. Throws ValidationError naming the violated identity.
BoundaryFrameA build_frame_a(SpaceDecomposition dims, const Matrix& U,
                             std::optional<Matrix> utilde_hint = std::nullopt,
                             const Tolerances& tol = {});

// Convenience: the frame whose Utilde is the identity (valid for canonical J).
BoundaryFrameA identity_frame_a(SpaceDecomposition dims);

// Gamma_a y = Utilde y(a), rows split (p, q, p). Accepts any column count.
GammaBlocks gamma_a(const BoundaryFrameA& frame, const Matrix& y_at_a);
GammaBlocks gamma_a(const BoundaryFrameA& frame, const OperatorSolution& y);

class BoundaryFrameB {
 public:
  enum class Kind { Regular, SingularMinimal };

  static BoundaryFrameB regular(SpaceDecomposition dims, const Matrix& Xb,
                                const Matrix& J, const Tolerances& tol = {});

  // Minimal singular frame: dim H_b = 0, and Gammahat_b y = { [y, theta_j]_b }
  // for q reference functions theta_j normalized so the assembled boundary
  // form satisfies [y, z]_b = i (Gammahat_b y, Gammahat_b z).
  static BoundaryFrameB singular_minimal(
      SpaceDecomposition dims,
      std::vector<std::function<Vector(double)>> theta_hat);

  Kind kind() const { return kind_; }
  int dim_hb() const { return kind_ == Kind::Regular ? dims_.p : 0; }
  const SpaceDecomposition& dims() const { return dims_; }
  const Matrix& Xb() const { return Xb_; }
  const std::vector<std::function<Vector(double)>>& theta_hat() const {
    return theta_hat_;
  }

 private:
  Kind kind_ = Kind::Regular;
  SpaceDecomposition dims_;
  Matrix Xb_;
  std::vector<std::function<Vector(double)>> theta_hat_;
};

// Boundary maps at b. Regular: row blocks of X_b y(b) (y must reach b).
// Singular minimal: g0/g1 empty, ghat from b_form pairings along the
// schedule. Convergence failures propagate as NumericalError.
GammaBlocks gamma_b(const SymmetricSystem& sys, const BoundaryFrameB& frame,
                    const OperatorSolution& y,
                    const std::vector<double>& beta_schedule = {},
                    const Tolerances& tol = {});

// Residual of the boundary-form factorization over a test set of solutions:
//   [y, z]_b  vs  (Gamma1b z)^H (Gamma0b y) - (Gamma0b z)^H (Gamma1b y)
//               + i (Gammahat_b z)^H (Gammahat_b y).
double frame_identity_residual(const SymmetricSystem& sys,
                               const BoundaryFrameB& frame,
                               const std::vector<const OperatorSolution*>& test,
                               const std::vector<double>& beta_schedule = {},
                               const Tolerances& tol = {});

// Boundary parameter tau = (C0, C1): constant pair or holomorphic family.
struct BoundaryParameter {
  enum class Kind { ConstantSelfAdjoint, Holomorphic };
  Kind kind = Kind::ConstantSelfAdjoint;
  Matrix C0, C1;  // constant case
  std::function<std::pair<Matrix, Matrix>(Complex)> evaluator;  // holomorphic

  std::pair<Matrix, Matrix> at(Complex lambda) const {
    if (kind == Kind::ConstantSelfAdjoint) return {C0, C1};
    return evaluator(lambda);
  }

  static BoundaryParameter constant(Matrix C0, Matrix C1);
  static BoundaryParameter holomorphic(
      std::function<std::pair<Matrix, Matrix>(Complex)> f);
};

struct PairReport {
  bool valid = false;
  bool selfadjoint = false;     // constant pair with Im(C1 C0^*) = 0
  double worst_herglotz = 0.0;  // most negative eigenvalue of the sign test
  double worst_symmetry = 0.0;  // |C1(l) C0(lbar)^* - C0(l) C1(lbar)^*| max
  double rank_margin = 0.0;     // smallest singular value of (C0, C1)
  std::string detail;
};

// Checks, at each sample lambda (both half-planes expected):
//   Im(lambda) * Im(C1(l) C0(l)^*) >= 0,
//   C1(l) C0(lbar)^* - C0(l) C1(lbar)^* = 0,
//   rank (C0(l), C1(l)) full.
// Constant pairs additionally get the self-adjointness test Im(C1 C0^*) = 0.
PairReport validate_nevanlinna_pair(const BoundaryParameter& tau,
                                    const std::vector<Complex>& lambda_samples,
                                    const Tolerances& tol = {});

// Recovers the Hermitian B with (cos B, sin B) relation-equivalent to
// (C0, C1): W = (C0 - i C1)^{-1} (C0 + i C1) is exactly e^{2iB} for any
// self-adjoint pair, so B = -(i/2) Log W by unitary diagonalization; the
// principal argument puts eigenvalues of B in (-pi/2, pi/2] and resolves
// W-eigenvalue -1 to +pi/2. Throws ValidationError when C0 +- i C1 is
// singular (pair not self-adjoint).
Matrix normalize_selfadjoint_pair(const Matrix& C0, const Matrix& C1,
                                  const Tolerances& tol = {});

// Principal angles between the kernels of (C0 | C1) and (cos B | sin B);
// used to state pair equivalence without fixing the left factor.
double pair_kernel_angle(const Matrix& C0a, const Matrix& C1a,
                         const Matrix& C0b, const Matrix& C1b);

struct CollectionReport {
  bool valid = false;
  double worst_plus = 0.0;      // PSD defect in the upper half-plane
  double worst_minus = 0.0;     // NSD defect in the lower half-plane
  double worst_coupling = 0.0;  // cross identity residual
  double rank_margin = 0.0;
  std::string detail;
};

// Validation of a (tau_plus, tau_minus) holomorphic collection with block
// splittings C0 = (C01, C02) against D = (D01, D02): the half-plane sign
// conditions 2 Im(C1 C01^*) + C02 C02^* >= 0 (<= 0 for the minus family),
// the coupling identity C1(l) D01(lbar)^* - C01(l) D1(lbar)^* +
// i C02(l) D02(lbar)^* = 0, and surjectivity of the stacked rows. Validation
// only; the solvers consume equal-index Nevanlinna pairs.
CollectionReport validate_collection(
    const std::function<std::tuple<Matrix, Matrix, Matrix>(Complex)>& plus,
    const std::function<std::tuple<Matrix, Matrix, Matrix>(Complex)>& minus,
    int dim_h1, const std::vector<Complex>& lambda_samples,
    const Tolerances& tol = {});

// Residuals of the defining frame relations for diagnostics/tests.
double frame_a_residual(const BoundaryFrameA& frame);

}  // namespace symmspectra
