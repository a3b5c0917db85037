// Weyl theory on the half-open interval: the base operator solutions, the
// block matrix of boundary data, the m-function for a boundary parameter tau,
// the distinguished solution v_tau, the Green's kernel and the resolvent, and
// a set of analytic identities used as test oracles.
#pragma once

#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <utility>
#include <vector>

#include "symmspectra/boundary.hpp"
#include "symmspectra/propagate.hpp"
#include "symmspectra/sysdef.hpp"
#include "symmspectra/types.hpp"

namespace symmspectra {

// Boundary data of the base solutions, assembled from the frame maps. m0 is
// the reduced block acting on H0 = H + Hhat; M2, M3 couple H0 to the
// endpoint space; M4 acts on the endpoint space alone. The reflection
// symmetries m0(conj l) = m0(l)^*, M2(conj l) = M3(l)^*, M4(conj l) = M4(l)^*
// hold for every lambda and are exercised by tests.
struct WeylBlocks {
  Complex lambda;
  Matrix m0;  // (p+q) x (p+q)
  Matrix M2;  // (p+q) x dim_hb
  Matrix M3;  // dim_hb x (p+q)
  Matrix M4;  // dim_hb x dim_hb
};

// A lambda -> (p+q) x (p+q) evaluator with a short human-readable origin tag.
struct MFunction {
  std::function<Matrix(Complex)> evaluator;
  std::string provenance;

  Matrix operator()(Complex lambda) const { return evaluator(lambda); }
};

// Shared propagation context: one system, one frame pair, and a memo of the
// expensive solution propagations keyed by lambda. The memo is insert-only
// and guarded by a mutex; concurrent callers may duplicate a computation but
// can never observe a torn value. The size cap bounds memory during spectral
// sweeps that touch thousands of distinct lambda; once full, lookups simply
// miss and recompute.
class Workspace {
 public:
  Workspace(SymmetricSystem sys, BoundaryFrameA frame_a, BoundaryFrameB frame_b,
            double horizon = std::numeric_limits<double>::quiet_NaN(),
            Tolerances tol = {});

  const SymmetricSystem& system() const { return sys_; }
  const BoundaryFrameA& frame_a() const { return frame_a_; }
  const BoundaryFrameB& frame_b() const { return frame_b_; }
  const Tolerances& tolerances() const { return tol_; }

  // Integration endpoint: b for a regular endpoint, a finite truncation
  // horizon otherwise.
  double horizon() const { return horizon_; }
  bool singular() const {
    return frame_b_.kind() == BoundaryFrameB::Kind::SingularMinimal;
  }

  // Fundamental solution with Utilde Y(a) = I, and the two distinguished
  // solutions determined by their boundary data at a.
  std::shared_ptr<const OperatorSolution> fundamental(Complex lambda) const;
  std::shared_ptr<const OperatorSolution> phi(Complex lambda) const;
  std::shared_ptr<const OperatorSolution> psi(Complex lambda) const;

 private:
  enum class Kind { Fundamental, Phi, Psi };
  std::shared_ptr<const OperatorSolution> get(Kind kind, Complex lambda) const;

  SymmetricSystem sys_;
  BoundaryFrameA frame_a_;
  BoundaryFrameB frame_b_;
  Tolerances tol_;
  double horizon_ = 0.0;

  using Key = std::tuple<int, double, double>;
  mutable std::mutex mu_;
  mutable std::map<Key, std::shared_ptr<const OperatorSolution>> memo_;
  static constexpr std::size_t kMemoCap = 64;
};

std::shared_ptr<Workspace> make_workspace(
    SymmetricSystem sys, BoundaryFrameA frame_a, BoundaryFrameB frame_b,
    double horizon = std::numeric_limits<double>::quiet_NaN(),
    Tolerances tol = {});

// The two base solutions determined by their boundary data: v0 carries
// (Gamma1a; i(Gammahat_a - Gammahat_b); Gamma0b) v0 = (-P_H; P_Hhat; 0) and
// u carries (0; 0; I). Regular endpoint only; the initial values come from
// one n x n constraint solve against the fundamental solution.
struct BaseSolutions {
  std::shared_ptr<const OperatorSolution> v0;
  std::shared_ptr<const OperatorSolution> u;
};

BaseSolutions base_solutions(const Workspace& ws, Complex lambda);

// Assembles m0, M2, M3, M4 from the frame maps applied to v0 and u.
WeylBlocks weyl_blocks(const Workspace& ws, Complex lambda);

// m_tau(lambda) = m0 + M2 (C0 - C1 M4)^{-1} C1 M3 for the boundary parameter
// tau = (C0, C1). Throws NumericalError("... near spectrum ...") when the
// parameter solve is ill-conditioned beyond kappa_max.
MFunction m_function(std::shared_ptr<const Workspace> ws,
                     BoundaryParameter tau);

// Cross-check path: the same m via one direct constrained solve
// (Gamma1a; i(Gammahat_a - Gammahat_b); C0 Gamma0b + C1 Gamma1b) v = rhs
// instead of the block formula. Used by tests; the two must agree.
Matrix m_function_direct(const Workspace& ws, const BoundaryParameter& tau,
                         Complex lambda);

// Singular endpoint with minimal equal deficiency indices: v(., lambda) is
// pinned by the conditions at a together with membership in L2_Delta, which
// is enforced by restricting to the numerically decaying subspace at a
// truncation beta and extrapolating over a growing schedule.
struct SingularLimitOptions {
  // Truncation points; empty selects an arithmetic ladder chosen per lambda.
  std::vector<double> beta_schedule;
  // Hard cap for automatic schedules; NaN picks one from Im lambda.
  double horizon_cap = std::numeric_limits<double>::quiet_NaN();
};

MFunction m_function_singular_minimal(std::shared_ptr<const Workspace> ws,
                                      SingularLimitOptions options = {});

// v_tau(t, lambda) = phi_U(t, lambda) m(lambda) + psi(t, lambda), realized by
// propagating the initial value Utilde^{-1} ((m - (i/2) P_Hhat); -P_H).
OperatorSolution v_tau(const Workspace& ws, const MFunction& m,
                       Complex lambda);
OperatorSolution v_tau(const Workspace& ws, const BoundaryParameter& tau,
                       Complex lambda);

// Green's kernel: v_tau(x,lambda) phi_U^*(t, conj lambda) for x > t and
// phi_U(x,lambda) v_tau^*(t, conj lambda) for x < t. x = t is rejected (the
// kernel jumps there).
Matrix green_kernel(const Workspace& ws, const MFunction& m, double x,
                    double t, Complex lambda);
Matrix green_kernel(const Workspace& ws, const BoundaryParameter& tau,
                    double x, double t, Complex lambda);

// y(x) = phi(x,l) int_x^reach v^*(t, conj l) Delta f dt
//      + v(x,l) int_a^x phi^*(t, conj l) Delta f dt, evaluated with two
// cumulative trapezoid passes over a refined union grid (linear cost).
WeightedFunction apply_resolvent(const Workspace& ws, const MFunction& m,
                                 const WeightedFunction& f, Complex lambda);
WeightedFunction apply_resolvent(const Workspace& ws,
                                 const BoundaryParameter& tau,
                                 const WeightedFunction& f, Complex lambda);

// Smallest eigenvalue of Im m(lambda)/Im lambda - int v^* Delta v; the
// integral runs to the workspace horizon. Nonnegative up to tolerance, zero
// for constant self-adjoint tau.
double herglotz_defect(const Workspace& ws, const MFunction& m,
                       Complex lambda);
double herglotz_defect(const Workspace& ws, const BoundaryParameter& tau,
                       Complex lambda);

// Residual of m(mu) - m(lambda)^* - (mu - conj lambda) int v^*(t,lambda)
// Delta v(t,mu) dt for constant self-adjoint tau.
Matrix nevanlinna_identity_residual(const Workspace& ws, const MFunction& m,
                                    Complex mu, Complex lambda);
Matrix nevanlinna_identity_residual(const Workspace& ws,
                                    const BoundaryParameter& tau, Complex mu,
                                    Complex lambda);

// Two completions of the same frame rows U shift m by a lambda-independent
// Hermitian block supported on H. Verifies constancy across the probe points
// and the block structure, and returns the (p+q) x (p+q) shift.
Matrix frame_shift_check(const SymmetricSystem& sys, const Matrix& U,
                         const Matrix& utilde_1, const Matrix& utilde_2,
                         const BoundaryFrameB& frame_b,
                         const BoundaryParameter& tau,
                         std::vector<Complex> probes = {},
                         const Tolerances& tol = {});

// Entire-in-lambda scalar whose real zeros are the eigenvalues for the given
// constant tau: the determinant of the stacked constraint rows
// (Gamma1a Y; i(Gammahat_a - Gammahat_b) Y; C0 Gamma0b Y + C1 Gamma1b Y).
// Unlike det(C0 - C1 M4) it has no poles, so sign scanning is safe.
Complex pole_indicator(const Workspace& ws, const BoundaryParameter& tau,
                       double s);

}  // namespace symmspectra
