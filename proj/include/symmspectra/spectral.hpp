// Spectral measures by Stieltjes inversion, atom extraction, the Fourier
// transform into L2(Sigma) and its inverse, Parseval diagnostics, the
// admissibility limits that characterize spectral functions of the bare
// (exit-space-free) kind, and reconstruction of m from a measure.
#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "symmspectra/boundary.hpp"
#include "symmspectra/sysdef.hpp"
#include "symmspectra/types.hpp"
#include "symmspectra/weyl.hpp"

namespace symmspectra {

struct SpectralAtom {
  double location = 0.0;
  Matrix mass;  // (p+q) x (p+q), Hermitian PSD
};

// Atoms plus an absolutely continuous density sampled on a grid, valid on
// [window_min, window_max]. The induced distribution is nondecreasing and
// normalized to vanish at 0.
struct SpectralMeasure {
  std::vector<SpectralAtom> atoms;
  std::vector<double> density_grid;
  std::vector<Matrix> density_values;  // Sigma'(s) per grid point
  double window_min = 0.0;
  double window_max = 0.0;

  // Distribution increment Sigma(s2) - Sigma(s1): atom masses in (s1, s2]
  // plus the trapezoid integral of the density.
  Matrix increment(double s1, double s2) const;
};

struct TransformResult {
  std::vector<double> s_grid;
  std::vector<Vector> values;  // (p+q) components per grid point
};

// Density part of the measure on the window by evaluating (1/pi) Im m on
// horizontal lines Im lambda = eps and extrapolating eps -> 0 with two-level
// Richardson. Grid points where Im m scales like 1/eps are flagged as atom
// candidates (crude mass estimate attached) and excluded from the density.
SpectralMeasure stieltjes_invert(const MFunction& m, double window_min,
                                 double window_max,
                                 std::vector<double> epsilon_schedule = {},
                                 int grid_points = 2049,
                                 const Tolerances& tol = {});

// Locates the real poles of m for a constant tau on a regular system by
// bisecting sign changes of the phase-normalized entire indicator, then
// estimates each mass as lim eps * Im m(s_k + i eps) with Richardson in
// eps^2 over the schedule. Clustered roots abort with a refinement request.
std::vector<SpectralAtom> extract_atoms(const Workspace& ws,
                                        const BoundaryParameter& tau,
                                        const MFunction& m, double window_min,
                                        double window_max,
                                        std::vector<double> mass_epsilons = {},
                                        const Tolerances& tol = {});

// fhat(s) = int phi_U^*(t, s) Delta(t) f(t) dt over the support of f, with
// Gauss-Legendre panels on the integration steps of phi (the solution grid
// resolves the oscillation in s, the panels then resolve the quadrature).
TransformResult fourier_transform(const SymmetricSystem& sys,
                                  const BoundaryFrameA& frame_a,
                                  const WeightedFunction& f,
                                  const std::vector<double>& s_grid,
                                  const Tolerances& tol = {});

// f(t) = sum_atoms phi_U(t, s_k) mass_k g(s_k) + int phi_U(t, s) Sigma'(s)
// g(s) ds, sampled on t_samples points of [a, min(b, t_max)]. g is read at
// atom locations by linear interpolation on its grid.
WeightedFunction inverse_transform(
    const SymmetricSystem& sys, const BoundaryFrameA& frame_a,
    const TransformResult& g, const SpectralMeasure& sigma,
    int t_samples = 1025,
    double t_max = std::numeric_limits<double>::quiet_NaN(),
    const Tolerances& tol = {});

// (g, h) in L2(Sigma): atoms contribute h(s_k)^* mass_k g(s_k), the density
// contributes the trapezoid quadrature of h(s)^* Sigma'(s) g(s).
Complex sigma_inner(const TransformResult& g, const TransformResult& h,
                    const SpectralMeasure& sigma);

// ||f||^2_Delta - ||fhat||^2_{L2(Sigma)} over the measure window.
// Nonnegative up to quadrature error (the transform is a contraction), and
// near zero when the window captures the measure seen by f.
double parseval_defect(const SymmetricSystem& sys,
                       const BoundaryFrameA& frame_a,
                       const WeightedFunction& f, const SpectralMeasure& sigma,
                       const Tolerances& tol = {});

// The two operator limits along lambda = iy whose vanishing characterizes
// spectral functions obtained without exit-space enlargement:
//   (1/y) (C0(iy) - C1(iy) M4(iy))^{-1} C1(iy)            -> 0
//   (1/y) M4(iy) (C0(iy) - C1(iy) M4(iy))^{-1} C0(iy)     -> 0.
struct AdmissibilityReport {
  Matrix limit1;
  Matrix limit2;
  double norm1 = 0.0;
  double norm2 = 0.0;
  bool sf0 = false;
  std::vector<double> y_values;
};

AdmissibilityReport admissibility_check(
    const std::function<Matrix(Complex)>& m4_evaluator,
    const BoundaryParameter& tau, const std::vector<double>& y_schedule = {},
    double tau_lim = 1e-6);

// Cauchy transform of the measure with the regularized kernel
// 1/(s - lambda) - s/(1 + s^2) plus analytic tail corrections using the
// average density of the outer window quartiles. The result matches m up to
// a Hermitian constant; fit_hermitian_offset computes that constant from one
// reference value.
Matrix reconstruct_m_from_sigma(
    const SpectralMeasure& sigma, Complex lambda,
    std::optional<Matrix> linear_term = std::nullopt);

Matrix fit_hermitian_offset(const SpectralMeasure& sigma,
                            const Matrix& m_reference, Complex lambda_ref);

}  // namespace symmspectra
