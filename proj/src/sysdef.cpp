#include "symmspectra/sysdef.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "symmspectra/propagate.hpp"

namespace symmspectra {

Matrix build_canonical_J(int p, int q) {
  const int n = 2 * p + q;
  Matrix J = Matrix::Zero(n, n);
  J.block(0, p + q, p, p) = -Matrix::Identity(p, p);
  J.block(p, p, q, q) = kImag * Matrix::Identity(q, q);
  J.block(p + q, 0, p, p) = Matrix::Identity(p, p);
  return J;
}

namespace {

std::vector<double> probe_grid(const SymmetricSystem& sys) {
  const double hi = sys.unbounded() ? sys.a + 10.0 : sys.b;
  std::vector<double> ts;
  for (int k = 0; k <= 32; ++k)
    ts.push_back(sys.a + (hi - sys.a) * k / 32.0);
  // straddle each breakpoint so both one-sided pieces get sampled
  for (double bp : sys.breakpoints) {
    const double h = 1e-6 * (hi - sys.a);
    ts.push_back(std::max(sys.a, bp - h));
    ts.push_back(std::min(hi, bp + h));
  }
  std::sort(ts.begin(), ts.end());
  return ts;
}

}  // namespace

SymmetricSystem make_system(SpaceDecomposition dims, double a, double b,
                            bool regular_b, CoefficientFn B, CoefficientFn Delta,
                            std::vector<double> breakpoints, std::string name,
                            const Tolerances& tol) {
  if (dims.p < 0 || dims.q < 0 || dims.n() == 0)
    throw ValidationError("system dimensions must satisfy p >= 0, q >= 0, n > 0");
  if (!(a < b)) throw ValidationError("interval must satisfy a < b");
  if (std::isinf(b) && regular_b)
    throw ValidationError("an unbounded interval cannot be regular at b");
  if (!B || !Delta) throw ValidationError("coefficient callbacks must be set");

  std::sort(breakpoints.begin(), breakpoints.end());
  for (size_t i = 0; i < breakpoints.size(); ++i) {
    if (breakpoints[i] <= a || breakpoints[i] >= b)
      throw ValidationError("breakpoints must lie strictly inside (a, b)");
    if (i > 0 && breakpoints[i] == breakpoints[i - 1])
      throw ValidationError("duplicate breakpoint");
  }

  SymmetricSystem sys;
  sys.dims = dims;
  sys.a = a;
  sys.b = b;
  sys.regular_b = regular_b;
  sys.B = std::move(B);
  sys.Delta = std::move(Delta);
  sys.breakpoints = std::move(breakpoints);
  sys.J = build_canonical_J(dims.p, dims.q);
  sys.name = std::move(name);

  const int n = sys.n();
  for (double t : probe_grid(sys)) {
    const Matrix Bt = sys.B(t);
    const Matrix Dt = sys.Delta(t);
    if (Bt.rows() != n || Bt.cols() != n || Dt.rows() != n || Dt.cols() != n) {
      std::ostringstream os;
      os << "coefficient shape mismatch at t = " << t << " (expected " << n
         << "x" << n << ")";
      throw ValidationError(os.str());
    }
    // NaN slides through every threshold comparison below; reject it head-on
    if (!Bt.allFinite() || !Dt.allFinite()) {
      std::ostringstream os;
      os << (Bt.allFinite() ? "Delta(t)" : "B(t)")
         << " has a non-finite entry at t = " << t;
      throw ValidationError(os.str());
    }
    const double bscale = 1.0 + max_abs(Bt);
    if (hermiticity_defect(Bt) > tol.tau_herm * bscale) {
      std::ostringstream os;
      os << "B(t) not Hermitian at t = " << t
         << " (defect " << hermiticity_defect(Bt) << ")";
      throw ValidationError(os.str());
    }
    const double dscale = 1.0 + max_abs(Dt);
    if (hermiticity_defect(Dt) > tol.tau_herm * dscale) {
      std::ostringstream os;
      os << "Delta(t) not Hermitian at t = " << t;
      throw ValidationError(os.str());
    }
    Eigen::SelfAdjointEigenSolver<Matrix> es(hermitian_part(Dt));
    if (es.eigenvalues().minCoeff() < -tol.tau_herm * dscale) {
      std::ostringstream os;
      os << "Delta(t) not positive semidefinite at t = " << t
         << " (min eigenvalue " << es.eigenvalues().minCoeff() << ")";
      throw ValidationError(os.str());
    }
  }
  return sys;
}

Vector WeightedFunction::eval(double x) const {
  if (evaluator) return evaluator(x);
  if (t.empty()) return Vector();
  const int dim = static_cast<int>(values.front().size());
  if (x <= t.front()) return x == t.front() ? values.front() : Vector::Zero(dim);
  if (x >= t.back()) return x == t.back() ? values.back() : Vector::Zero(dim);
  const auto it = std::upper_bound(t.begin(), t.end(), x);
  const size_t i = static_cast<size_t>(it - t.begin()) - 1;
  const double w = (x - t[i]) / (t[i + 1] - t[i]);
  return (1.0 - w) * values[i] + w * values[i + 1];
}

WeightedFunction make_weighted_function(std::function<Vector(double)> f,
                                        double t0, double t1, int samples) {
  if (!(t0 < t1) || samples < 2)
    throw ValidationError("make_weighted_function: bad sampling window");
  WeightedFunction wf;
  wf.t.resize(samples);
  wf.values.resize(samples);
  for (int i = 0; i < samples; ++i) {
    wf.t[i] = t0 + (t1 - t0) * i / (samples - 1);
    wf.values[i] = f(wf.t[i]);
  }
  wf.evaluator = std::move(f);
  return wf;
}

namespace {

std::vector<double> merged_grid(const SymmetricSystem& sys,
                                const WeightedFunction& f,
                                const WeightedFunction& g, int min_nodes) {
  const double lo = std::max(f.support_begin(), g.support_begin());
  const double hi = std::min(f.support_end(), g.support_end());
  if (!(lo < hi)) return {};
  std::set<double> nodes{lo, hi};
  auto add_in = [&](const std::vector<double>& ts) {
    for (double x : ts)
      if (x > lo && x < hi) nodes.insert(x);
  };
  add_in(f.t);
  add_in(g.t);
  add_in(sys.breakpoints);
  std::vector<double> grid(nodes.begin(), nodes.end());
  // refine uniformly until the trapezoid grid is dense enough
  while (static_cast<int>(grid.size()) < min_nodes) {
    std::vector<double> finer;
    finer.reserve(grid.size() * 2);
    for (size_t i = 0; i + 1 < grid.size(); ++i) {
      finer.push_back(grid[i]);
      finer.push_back(0.5 * (grid[i] + grid[i + 1]));
    }
    finer.push_back(grid.back());
    grid.swap(finer);
  }
  return grid;
}

}  // namespace

Complex l2delta_inner(const SymmetricSystem& sys, const WeightedFunction& f,
                      const WeightedFunction& g, int min_nodes) {
  const auto grid = merged_grid(sys, f, g, min_nodes);
  if (grid.size() < 2) return Complex(0.0);
  Complex acc(0.0);
  Complex prev = g.eval(grid[0]).dot(sys.Delta(grid[0]) * f.eval(grid[0]));
  for (size_t i = 1; i < grid.size(); ++i) {
    // Eigen's dot conjugates its first argument, matching g^H Delta f.
    const Complex cur = g.eval(grid[i]).dot(sys.Delta(grid[i]) * f.eval(grid[i]));
    acc += 0.5 * (grid[i] - grid[i - 1]) * (prev + cur);
    prev = cur;
  }
  return acc;
}

double l2delta_norm(const SymmetricSystem& sys, const WeightedFunction& f,
                    int min_nodes) {
  const double v = std::real(l2delta_inner(sys, f, f, min_nodes));
  return std::sqrt(std::max(0.0, v));
}

DefinitenessReport check_definiteness(const SymmetricSystem& sys,
                                      const std::vector<Complex>& lambda_samples,
                                      double beta, const Tolerances& tol) {
  if (!(beta > sys.a) || (sys.regular_b && beta > sys.b))
    throw ValidationError("check_definiteness: beta outside the interval");
  DefinitenessReport rep;
  rep.lambdas = lambda_samples;
  rep.definite = true;
  rep.smallest_relative_eigenvalue = std::numeric_limits<double>::infinity();
  const int n = sys.n();
  for (Complex lambda : lambda_samples) {
    const OperatorSolution Y =
        propagate(sys, Matrix::Identity(n, n), lambda, sys.a, beta, tol);
    const Matrix G = solution_gram(sys, Y, Y, sys.a, beta);
    Eigen::SelfAdjointEigenSolver<Matrix> es(hermitian_part(G));
    const double top = std::max(es.eigenvalues().maxCoeff(), 0.0);
    const double rel = top > 0.0 ? es.eigenvalues().minCoeff() / top : 0.0;
    rep.smallest_relative_eigenvalue =
        std::min(rep.smallest_relative_eigenvalue, rel);
    if (rel < tol.tau_def) rep.definite = false;
  }
  return rep;
}

}  // namespace symmspectra
