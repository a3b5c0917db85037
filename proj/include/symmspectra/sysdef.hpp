// System definition: the first-order symmetric system J y' - B(t) y = z
// with spectral weight Delta(t), on an interval [a, b) whose right endpoint
// may be regular or singular (b = +inf allowed).
#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "symmspectra/types.hpp"

namespace symmspectra {

// Dimensions of the coordinate splitting C^n = H (+) Hhat (+) H with
// dim H = p, dim Hhat = q, n = 2p + q. The first p coordinates and the last
// p coordinates form the signed pair; the middle q coordinates are neutral.
struct SpaceDecomposition {
  int p = 0;
  int q = 0;
  int n() const { return 2 * p + q; }
  int pq() const { return p + q; }
};

// The canonical signature matrix for the (p, q, p) splitting:
//   J = [ 0    0   -I_p ]
//       [ 0  i I_q   0  ]
//       [ I_p  0     0  ]
// J* = J^{-1} = -J, J^2 = -I. For q = 0 this is the Hamiltonian [[0,-I],[I,0]].
Matrix build_canonical_J(int p, int q);

using CoefficientFn = std::function<Matrix(double)>;

struct SymmetricSystem {
  SpaceDecomposition dims;
  double a = 0.0;
  double b = 1.0;  // may be +infinity when regular_b == false
  bool regular_b = true;
  CoefficientFn B;      // Hermitian n x n potential
  CoefficientFn Delta;  // PSD n x n weight
  std::vector<double> breakpoints;  // interior coefficient discontinuities
  Matrix J;
  std::string name;

  int n() const { return dims.n(); }
  bool unbounded() const { return std::isinf(b); }
};

// Builds the system and validates it on coefficient samples: Hermitian B,
// PSD Delta, sane interval and sorted interior breakpoints. Throws
// ValidationError with the offending t in the message.
SymmetricSystem make_system(SpaceDecomposition dims, double a, double b,
                            bool regular_b, CoefficientFn B, CoefficientFn Delta,
                            std::vector<double> breakpoints = {},
                            std::string name = {},
                            const Tolerances& tol = {});

// A function in the weighted space: samples on a strictly increasing grid,
// linearly interpolated in between, plus an optional exact evaluator used by
// quadrature when available (sampled data keeps only its grid accuracy).
struct WeightedFunction {
  std::vector<double> t;
  std::vector<Vector> values;
  std::function<Vector(double)> evaluator;  // optional; may be empty

  bool empty() const { return t.empty() && !evaluator; }
  Vector eval(double x) const;  // evaluator if set, else linear interpolation
  double support_begin() const { return t.empty() ? 0.0 : t.front(); }
  double support_end() const { return t.empty() ? 0.0 : t.back(); }
};

// Builds a WeightedFunction from an evaluator, sampling it on a uniform grid
// of the given size (grid kept for plotting/serialization; quadrature uses
// the evaluator directly).
WeightedFunction make_weighted_function(std::function<Vector(double)> f,
                                        double t0, double t1, int samples = 513);

// (f, g)_Delta = integral of g(t)^H Delta(t) f(t) dt over the common support,
// composite trapezoid on the merged sample grids (plus system breakpoints).
Complex l2delta_inner(const SymmetricSystem& sys, const WeightedFunction& f,
                      const WeightedFunction& g, int min_nodes = 2049);

double l2delta_norm(const SymmetricSystem& sys, const WeightedFunction& f,
                    int min_nodes = 2049);

struct DefinitenessReport {
  bool definite = false;
  double smallest_relative_eigenvalue = 0.0;  // min over lambda samples
  std::vector<Complex> lambdas;
};

// Definiteness probe: for each lambda sample, propagate the fundamental
// matrix over [a, beta] and test the smallest eigenvalue of the Gram matrix
// of Delta-weighted columns against tau_def relative to the largest. A
// definite system has no nontrivial solution annihilated by Delta.
DefinitenessReport check_definiteness(const SymmetricSystem& sys,
                                      const std::vector<Complex>& lambda_samples,
                                      double beta, const Tolerances& tol = {});

}  // namespace symmspectra
