// Closed-form reference systems used by tests and the self-test command: a
// half-line system with an integrable scalar weight whose m-function,
// spectral density, and Fourier transforms are known exactly, and a
// constant-coefficient two-dimensional system on [0,1] whose m-function is a
// shifted tangent. A dense finite-difference boundary-value solver provides
// an independent brute-force path for resolvent and kernel checks.
#pragma once

#include <functional>
#include <vector>

#include "symmspectra/boundary.hpp"
#include "symmspectra/spectral.hpp"
#include "symmspectra/sysdef.hpp"
#include "symmspectra/types.hpp"
#include "symmspectra/weyl.hpp"

namespace symmspectra {

// Half-line system (p = q = 1, n = 3) with weight built from a positive
// integrable delta: Delta(t) has eigenvalues delta(t), 1, 1 and the
// fundamental solution separates along the fixed eigenvectors. All spectral
// objects below are closed forms in Phi(t) = int_0^t delta and C = Phi(inf).
struct ExampleSystem {
  std::function<double(double)> delta;
  std::function<double(double)> Phi;
  double C = 1.0;

  SymmetricSystem sys;
  BoundaryFrameA frame_a;   // identity frame
  BoundaryFrameB frame_b;   // singular minimal, one reference function
};

// Default weight delta(t) = exp(-t), so Phi(t) = 1 - exp(-t) and C = 1.
ExampleSystem make_example_system();
ExampleSystem make_example_system(std::function<double(double)> delta,
                                  std::function<double(double)> Phi, double C);

// The closed-form fundamental solution; columns 1 and 3 are square
// integrable against Delta in the upper half-plane, column 2 is not.
Matrix example_fundamental(const ExampleSystem& ex, double t, Complex lambda);

// The 2x2 m-function: [[i, i sqrt2 e^{i lambda C}], [0, i/2]] in the upper
// half-plane, extended to the lower one by m(lambda) = m(conj lambda)^*.
// Real lambda is rejected.
Matrix example_m(const ExampleSystem& ex, Complex lambda);

// Spectral density (1/pi) [[1, e^{isC}/sqrt2], [e^{-isC}/sqrt2, 1/2]].
Matrix example_sigma_density(const ExampleSystem& ex, double s);

// The square integrable reference solution whose pairing realizes the
// boundary map at infinity, normalized so [theta, theta]_inf = i.
Vector example_theta(const ExampleSystem& ex, double t);

// The distinguished solution v(t, lambda) with the boundary data at a and
// square integrability built in; valid for Im lambda > 0.
Matrix example_v(const ExampleSystem& ex, double t, Complex lambda);

// phi(t, lambda), the n x (p+q) solution with Utilde phi(a) = (I; 0).
Matrix example_phi(const ExampleSystem& ex, double t, Complex lambda);

// Orthonormal basis columns (edot_1, edot_2, edot_3) diagonalizing Delta:
// edot_1 = (1, 0, -i)/sqrt2, edot_2 = (0, 1, 0), edot_3 = (1, 0, i)/sqrt2.
Matrix example_rotation();

// A function given by its components in the rotated basis, supported in
// [0, support_end].
struct RotatedComponents {
  std::function<Complex(double)> f1;
  std::function<Complex(double)> f2;
  std::function<Complex(double)> f3;
  double support_end = 1.0;
};

// The transform evaluated from the two displayed closed-form integrals:
//   fhat_1(s) = (1/sqrt2) int (e^{is Phi} delta f1 + e^{-ist} f3) dt,
//   fhat_2(s) = int e^{ist} f2 dt.
TransformResult example_transform(const ExampleSystem& ex,
                                  const RotatedComponents& f,
                                  const std::vector<double>& s_grid);

// Embeds rotated components as an ambient-basis WeightedFunction for the
// generic transform path.
WeightedFunction example_embed(const ExampleSystem& ex,
                               const RotatedComponents& f, int samples = 1025);

// Constant-coefficient system on [0,1]: p = 1, q = 0, B = 0, Delta = I,
// identity frames at both ends. The fundamental solution is the rotation
// matrix [[cos lt, sin lt], [-sin lt, cos lt]]; for tau = (cos b, sin b) the
// m-function is tan(lambda + b) and the eigenvalues are the zeros of
// cos(s + b), every mass equal to 1.
struct DiracOracle {
  double angle = 0.0;  // tau = (cos angle, sin angle)

  SymmetricSystem sys;
  BoundaryFrameA frame_a;
  BoundaryFrameB frame_b;
  BoundaryParameter tau;

  Complex m(Complex lambda) const;
  Complex m4(Complex lambda) const;  // endpoint block, tau-independent
  Matrix fundamental(double t, Complex lambda) const;
  Vector phi(double t, double s) const;  // (cos st, -sin st)
  std::vector<double> eigenvalues(double s_min, double s_max) const;
};

DiracOracle dirac_oracle(double tau_angle);

// Dense box-scheme discretization of J y' - (B + lambda Delta) y = Delta f
// with the homogeneous boundary rows (Gamma1a y = 0, the paired middle
// condition, and C0 Gamma0b y + C1 Gamma1b y = 0). Regular endpoint only.
// Second-order accurate; the independent cross-check for apply_resolvent.
WeightedFunction fd_bvp_solve(const SymmetricSystem& sys,
                              const BoundaryFrameA& frame_a,
                              const BoundaryFrameB& frame_b,
                              const BoundaryParameter& tau,
                              const WeightedFunction& f, Complex lambda,
                              int nodes = 6001);

// Green's kernel column block G(x, t0, lambda) from the same scheme with a
// doubled node at t0 and the interface jump J (y(t0+) - y(t0-)) = e_j.
Matrix fd_green_matrix(const SymmetricSystem& sys,
                       const BoundaryFrameA& frame_a,
                       const BoundaryFrameB& frame_b,
                       const BoundaryParameter& tau, double x, double t0,
                       Complex lambda, int nodes = 6001);

}  // namespace symmspectra
