#include "symmspectra/acceptance.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "symmspectra/boundary.hpp"
#include "symmspectra/oracle.hpp"
#include "symmspectra/propagate.hpp"
#include "symmspectra/spectral.hpp"
#include "symmspectra/sysdef.hpp"
#include "symmspectra/weyl.hpp"

namespace symmspectra {
namespace {

constexpr double kPi = std::numbers::pi;

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2e", v);
  return buf;
}

// Matrix exponential by scaling and squaring with a Taylor tail; adequate
// for the small dense matrices used here.
Matrix expm(const Matrix& a) {
  Matrix base = a;
  int squarings = 0;
  while (max_abs(base) > 0.5) {
    base *= 0.5;
    ++squarings;
  }
  const Eigen::Index n = a.rows();
  Matrix term = Matrix::Identity(n, n);
  Matrix sum = term;
  for (int k = 1; k <= 24; ++k) {
    term = Matrix(term * base / static_cast<double>(k));
    sum += term;
  }
  for (; squarings > 0; --squarings) sum = Matrix(sum * sum);
  return sum;
}

Matrix random_complex(std::mt19937_64& rng, int rows, int cols) {
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  Matrix m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int k = 0; k < cols; ++k) m(i, k) = Complex(u(rng), u(rng));
  }
  return m;
}

Matrix random_hermitian(std::mt19937_64& rng, int n) {
  const Matrix a = random_complex(rng, n, n);
  return Matrix(0.5 * (a + a.adjoint()));
}

// cos/sin of a Hermitian matrix by unitary diagonalization.
std::pair<Matrix, Matrix> cos_sin_pair(const Matrix& b) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(b);
  const Eigen::VectorXd d = es.eigenvalues();
  Eigen::VectorXcd cd(d.size()), sd(d.size());
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    cd(i) = std::cos(d(i));
    sd(i) = std::sin(d(i));
  }
  const Matrix v = es.eigenvectors();
  return {Matrix(v * cd.asDiagonal() * v.adjoint()),
          Matrix(v * sd.asDiagonal() * v.adjoint())};
}

// Midpoint box residual of a sampled function against the inhomogeneous
// system: max over cells of |J dy - h (B + l Delta)(mid) ybar - h Delta f|/h.
double box_residual(const SymmetricSystem& sys, const WeightedFunction& y,
                    const WeightedFunction& f, Complex lambda) {
  double worst = 0.0;
  for (std::size_t i = 0; i + 1 < y.t.size(); ++i) {
    const double h = y.t[i + 1] - y.t[i];
    if (h <= 0.0) continue;
    const double mid = 0.5 * (y.t[i] + y.t[i + 1]);
    const Vector ybar = 0.5 * (y.values[i] + y.values[i + 1]);
    const Matrix coeff = sys.B(mid) + lambda * sys.Delta(mid);
    const Vector r = sys.J * (y.values[i + 1] - y.values[i]) -
                     h * (coeff * ybar) - h * (sys.Delta(mid) * f.eval(mid));
    worst = std::max(worst, r.cwiseAbs().maxCoeff() / h);
  }
  return worst;
}

// Smooth random trig series supported on [t0, t1], normalized to unit
// weighted norm. Kept as an exact evaluator so quadrature is not limited by
// the sample grid.
WeightedFunction random_unit_function(const SymmetricSystem& sys,
                                      std::mt19937_64& rng, double t0,
                                      double t1) {
  const int n = sys.n();
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<std::vector<Complex>> c(static_cast<std::size_t>(n));
  for (auto& row : c) {
    for (int k = 0; k < 3; ++k) row.push_back(Complex(u(rng), u(rng)));
  }
  const double len = t1 - t0;
  auto fn = [c, t0, len, n](double t) {
    Vector v = Vector::Zero(n);
    const double x = (t - t0) / len;
    for (int j = 0; j < n; ++j) {
      for (std::size_t k = 0; k < c[static_cast<std::size_t>(j)].size(); ++k) {
        v(j) += c[static_cast<std::size_t>(j)][k] *
                std::sin((static_cast<double>(k) + 1.0) * kPi * x);
      }
    }
    return v;
  };
  WeightedFunction f = make_weighted_function(fn, t0, t1);
  const double s = l2delta_norm(sys, f);
  auto scaled = [fn, s](double t) { return Vector(fn(t) / s); };
  return make_weighted_function(scaled, t0, t1);
}

using Clock = std::chrono::steady_clock;

CriterionResult timed(int index, const std::string& name,
                      const std::function<void(CriterionResult&)>& body) {
  CriterionResult r;
  r.index = index;
  r.name = name;
  const auto start = Clock::now();
  try {
    body(r);
  } catch (const std::exception& e) {
    r.passed = false;
    r.detail = std::string("exception: ") + e.what();
  }
  r.seconds = std::chrono::duration<double>(Clock::now() - start).count();
  return r;
}

// --------------------------------------------------------------------------
// 1. Singular minimal m-limit against the closed form.

void criterion_singular_m(CriterionResult& r, const Tolerances& tol) {
  const ExampleSystem ex = make_example_system();
  auto ws = make_workspace(ex.sys, ex.frame_a, ex.frame_b,
                           std::numeric_limits<double>::quiet_NaN(), tol);
  const MFunction m = m_function_singular_minimal(ws);

  const Complex iu(0.0, 1.0);
  double worst = 0.0;
  int points = 0;
  for (double x : {-2.4, -1.2, 0.0, 1.2, 2.4}) {
    for (double y : {0.6, 1.1, 1.7, 2.5}) {
      const Complex l(x, y);
      Matrix ref(2, 2);
      ref << iu, iu * std::sqrt(2.0) * std::exp(iu * l),  //
          Complex(0.0, 0.0), Complex(0.0, 0.5);
      const Matrix got = m(l);
      worst = std::max(worst, max_abs(Matrix(got - ref)) / max_abs(ref));
      ++points;
    }
  }
  r.passed = worst <= 1e-6 && points == 20;
  r.detail = "worst relative error " + sci(worst) + " over 20 points";
}

// --------------------------------------------------------------------------
// 2. Inverted density against the closed form on [-pi, pi].

void criterion_density(CriterionResult& r, const Tolerances& tol,
                       const std::vector<double>& eps_schedule) {
  const ExampleSystem ex = make_example_system();
  auto ws = make_workspace(ex.sys, ex.frame_a, ex.frame_b,
                           std::numeric_limits<double>::quiet_NaN(), tol);
  const MFunction m = m_function_singular_minimal(ws);

  const SpectralMeasure sigma =
      stieltjes_invert(m, -kPi, kPi, eps_schedule, 257, tol);
  double worst = 0.0;
  for (std::size_t i = 0; i < sigma.density_grid.size(); ++i) {
    const Matrix ref = example_sigma_density(ex, sigma.density_grid[i]);
    worst = std::max(worst, max_abs(Matrix(sigma.density_values[i] - ref)));
  }
  r.passed = worst <= 1e-3 && sigma.atoms.empty() &&
             sigma.density_grid.size() == 257;
  r.detail = "sup error " + sci(worst) + " on " +
             std::to_string(sigma.density_grid.size()) + " points, " +
             std::to_string(sigma.atoms.size()) + " spurious atom flags";
}

// --------------------------------------------------------------------------
// 3. Regular-endpoint blocks and both closed-form m-functions.

void criterion_regular_m(CriterionResult& r, const Tolerances& tol) {
  const DiracOracle d = dirac_oracle(0.0);
  auto ws = make_workspace(d.sys, d.frame_a, d.frame_b,
                           std::numeric_limits<double>::quiet_NaN(), tol);
  const Matrix one = Matrix::Identity(1, 1);
  const Matrix zero = Matrix::Zero(1, 1);
  const MFunction m_dirichlet = m_function(ws, d.tau);  // (I, 0)
  const MFunction m_neumann =
      m_function(ws, BoundaryParameter::constant(zero, one));  // (0, I)

  double worst = 0.0;
  for (int k = 0; k < 50; ++k) {
    const double x = -2.35 + 4.7 * k / 49.0;
    const double y =
        (k % 2 == 0 ? 1.0 : -1.0) * (0.4 + 1.6 * ((k * 13) % 50) / 49.0);
    const Complex l(x, y);
    const Complex tn = std::tan(l);
    const Complex ct = -1.0 / tn;
    const Complex sc = 1.0 / std::cos(l);
    worst = std::max(worst, std::abs(m_dirichlet(l)(0, 0) - tn) / std::abs(tn));
    worst = std::max(worst, std::abs(m_neumann(l)(0, 0) - ct) / std::abs(ct));
    const WeylBlocks blocks = weyl_blocks(*ws, l);
    worst = std::max(worst, std::abs(blocks.m0(0, 0) - tn) / std::abs(tn));
    worst = std::max(worst, std::abs(blocks.M2(0, 0) - sc) / std::abs(sc));
    worst = std::max(worst, std::abs(blocks.M3(0, 0) - sc) / std::abs(sc));
    worst = std::max(worst, std::abs(blocks.M4(0, 0) - tn) / std::abs(tn));
  }
  r.passed = worst <= 1e-8;
  r.detail = "worst relative error " + sci(worst) +
             " over 50 points, both parameters and all four blocks";
}

// --------------------------------------------------------------------------
// 4. Atom extraction on the half-integer ladder.

void criterion_atoms(CriterionResult& r, const Tolerances& tol) {
  const DiracOracle d = dirac_oracle(0.0);
  auto ws = make_workspace(d.sys, d.frame_a, d.frame_b,
                           std::numeric_limits<double>::quiet_NaN(), tol);
  const MFunction m = m_function(ws, d.tau);
  const std::vector<SpectralAtom> atoms =
      extract_atoms(*ws, d.tau, m, 0.0, 20.0, {}, tol);

  double worst_loc = 0.0, worst_mass = 0.0;
  bool count_ok = atoms.size() == 6;
  for (std::size_t k = 0; k < atoms.size(); ++k) {
    const double target = (static_cast<double>(k) + 0.5) * kPi;
    worst_loc = std::max(worst_loc, std::abs(atoms[k].location - target));
    worst_mass =
        std::max(worst_mass, std::abs(atoms[k].mass(0, 0) - Complex(1.0)));
  }
  r.passed = count_ok && worst_loc <= 1e-6 && worst_mass <= 1e-4;
  r.detail = std::to_string(atoms.size()) +
             " atoms, worst location error " + sci(worst_loc) +
             ", worst mass error " + sci(worst_mass);
}

// --------------------------------------------------------------------------
// 5. Identity suite on both oracles and one randomized frame.

struct IdentityWorst {
  double wronskian = 0.0;
  double kernel = 0.0;
  double herglotz_min = 0.0;  // most negative defect seen
  double nevanlinna = 0.0;
  int herglotz_samples = 0;
  int nevanlinna_pairs = 0;
};

// One system/frame combination: pairing conservation of the fundamental
// solution, the kernel factorization phi v^* - v phi^* = J, the Herglotz
// inequality, and the two-point difference identity.
void identity_pass(IdentityWorst& w, const SymmetricSystem& sys,
                   const BoundaryFrameA& frame_a, const MFunction& m,
                   const Workspace& ws_eval,
                   const std::vector<double>& kernel_x,
                   const std::vector<Complex>& herglotz_lambdas,
                   const std::vector<std::pair<Complex, Complex>>& nev_pairs,
                   double wronskian_beta, const Tolerances& tol) {
  const Complex lw(0.6, 0.9);
  const OperatorSolution yw =
      fundamental_solution(sys, frame_a, lw, wronskian_beta, tol);
  const OperatorSolution zw =
      fundamental_solution(sys, frame_a, std::conj(lw), wronskian_beta, tol);
  w.wronskian = std::max(w.wronskian, wronskian_residual(sys.J, yw, zw));

  const Complex lk(0.3, 1.1);
  const OperatorSolution v_k = v_tau(ws_eval, m, lk);
  const OperatorSolution v_kc = v_tau(ws_eval, m, std::conj(lk));
  const OperatorSolution phi_k =
      phi_solution(sys, frame_a, lk, ws_eval.horizon(), tol);
  const OperatorSolution phi_kc =
      phi_solution(sys, frame_a, std::conj(lk), ws_eval.horizon(), tol);
  for (double x : kernel_x) {
    const Matrix lhs = phi_k.eval(x) * v_kc.eval(x).adjoint() -
                       v_k.eval(x) * phi_kc.eval(x).adjoint();
    w.kernel = std::max(w.kernel, max_abs(Matrix(lhs - sys.J)));
  }

  for (Complex l : herglotz_lambdas) {
    w.herglotz_min = std::min(w.herglotz_min, herglotz_defect(ws_eval, m, l));
    ++w.herglotz_samples;
  }
  for (const auto& [mu, l] : nev_pairs) {
    w.nevanlinna = std::max(
        w.nevanlinna, max_abs(nevanlinna_identity_residual(ws_eval, m, mu, l)));
    ++w.nevanlinna_pairs;
  }
}

void criterion_identities(CriterionResult& r, const Tolerances& tol) {
  IdentityWorst w;

  {  // Regular oracle with its own frame.
    const DiracOracle d = dirac_oracle(0.6);
    auto ws = make_workspace(d.sys, d.frame_a, d.frame_b,
                             std::numeric_limits<double>::quiet_NaN(), tol);
    const MFunction m = m_function(ws, d.tau);
    identity_pass(w, d.sys, d.frame_a, m, *ws, {0.13, 0.41, 0.77, 0.96},
                  {{0.3, 1.1}, {-0.6, 0.8}, {1.2, 1.6}, {0.0, 2.3},
                   {0.3, -1.1}, {-0.6, -0.8}, {1.2, -1.6}, {0.0, -2.3}},
                  {{{0.5, 1.1}, {0.0, 1.0}}, {{-0.4, 0.9}, {0.7, -1.3}}},
                  d.sys.b, tol);
  }

  {  // Singular oracle; identity evaluations on a short-horizon workspace,
     // weighted integrals on the standard one.
    const ExampleSystem ex = make_example_system();
    auto ws = make_workspace(ex.sys, ex.frame_a, ex.frame_b,
                             std::numeric_limits<double>::quiet_NaN(), tol);
    auto ws_short =
        make_workspace(ex.sys, ex.frame_a, ex.frame_b, ex.sys.a + 3.0, tol);
    const MFunction m = m_function_singular_minimal(ws);
    const Complex lk(0.3, 1.1);
    const OperatorSolution v_k = v_tau(*ws_short, m, lk);
    const OperatorSolution v_kc = v_tau(*ws_short, m, std::conj(lk));
    const OperatorSolution phi_k =
        phi_solution(ex.sys, ex.frame_a, lk, ex.sys.a + 3.0, tol);
    const OperatorSolution phi_kc = phi_solution(
        ex.sys, ex.frame_a, std::conj(lk), ex.sys.a + 3.0, tol);
    for (double x : {0.3, 0.9, 1.5, 2.0}) {
      const Matrix lhs = phi_k.eval(x) * v_kc.eval(x).adjoint() -
                         v_k.eval(x) * phi_kc.eval(x).adjoint();
      w.kernel = std::max(w.kernel, max_abs(Matrix(lhs - ex.sys.J)));
    }
    const Complex lw(0.6, 0.9);
    const OperatorSolution yw =
        fundamental_solution(ex.sys, ex.frame_a, lw, ex.sys.a + 4.0, tol);
    const OperatorSolution zw = fundamental_solution(
        ex.sys, ex.frame_a, std::conj(lw), ex.sys.a + 4.0, tol);
    w.wronskian = std::max(w.wronskian, wronskian_residual(ex.sys.J, yw, zw));
    for (Complex l : {Complex(0.0, 1.0), Complex(0.5, 1.3), Complex(-0.8, 0.9),
                      Complex(1.4, 1.8), Complex(0.0, -1.0),
                      Complex(-0.5, -1.2)}) {
      w.herglotz_min = std::min(w.herglotz_min, herglotz_defect(*ws, m, l));
      ++w.herglotz_samples;
    }
    w.nevanlinna = std::max(
        w.nevanlinna,
        max_abs(nevanlinna_identity_residual(
            *ws, m, Complex(0.5, 1.1), Complex(0.0, 1.0))));
    ++w.nevanlinna_pairs;
  }

  {  // Regular oracle again, under a randomized J-unitary frame.
    const DiracOracle d = dirac_oracle(0.6);
    std::mt19937_64 rng(20240817u);
    const Matrix s = random_hermitian(rng, d.sys.n());
    const Matrix utilde = expm(Matrix(d.sys.J * s * 0.4));
    const Matrix u = utilde.bottomRows(d.sys.dims.p + d.sys.dims.q);
    const BoundaryFrameA frame = build_frame_a(d.sys.dims, u, utilde, tol);
    auto ws = make_workspace(d.sys, frame, d.frame_b,
                             std::numeric_limits<double>::quiet_NaN(), tol);
    const MFunction m = m_function(ws, d.tau);
    identity_pass(w, d.sys, frame, m, *ws, {0.21, 0.5, 0.83, 0.97},
                  {{0.4, 1.0}, {-0.9, 1.5}, {0.8, 2.1}, {0.0, 0.7},
                   {0.4, -1.0}, {-0.9, -1.5}},
                  {{{0.3, 0.8}, {0.0, 1.4}}, {{-0.2, 1.1}, {0.5, -0.9}}},
                  d.sys.b, tol);
  }

  const double wronskian_limit = 50.0 * tol.tol_ode;
  r.passed = w.wronskian <= wronskian_limit && w.kernel <= 1e-8 &&
             w.herglotz_min >= -1e-8 && w.nevanlinna <= 1e-7 &&
             w.herglotz_samples == 20 && w.nevanlinna_pairs == 5;
  r.detail = "pairing drift " + sci(w.wronskian) + " (limit " +
             sci(wronskian_limit) + "), kernel defect " + sci(w.kernel) +
             ", Herglotz floor " + sci(w.herglotz_min) + " over " +
             std::to_string(w.herglotz_samples) +
             " points, two-point residual " + sci(w.nevanlinna) + " over " +
             std::to_string(w.nevanlinna_pairs) + " pairs";
}

// --------------------------------------------------------------------------
// 6. Resolvent: equation residual, boundary conditions, box-scheme check.

void criterion_resolvent(CriterionResult& r, const Tolerances& tol) {
  double worst_eq = 0.0, worst_bc = 0.0, worst_fd = 0.0;
  std::mt19937_64 rng(51842u);

  {  // Regular oracle: both separated conditions plus the box-scheme solve.
    const DiracOracle d = dirac_oracle(0.6);
    auto ws = make_workspace(d.sys, d.frame_a, d.frame_b,
                             std::numeric_limits<double>::quiet_NaN(), tol);
    const MFunction m = m_function(ws, d.tau);
    const std::vector<Complex> lambdas = {{0.3, 1.1},
                                          {-0.7, 0.9},
                                          {0.0, 1.2},
                                          {0.5, -1.3},
                                          {0.4, 2.1}};
    for (Complex l : lambdas) {
      const WeightedFunction f = random_unit_function(d.sys, rng, 0.0, 1.0);
      const WeightedFunction y = apply_resolvent(*ws, m, f, l);
      worst_eq = std::max(worst_eq, box_residual(d.sys, y, f, l));
      const Vector ya = d.frame_a.Utilde * y.values.front();
      worst_bc = std::max(worst_bc, std::abs(ya(1)));
      const Vector yb = y.values.back();
      worst_bc = std::max(worst_bc, std::abs(std::cos(d.angle) * yb(0) +
                                             std::sin(d.angle) * yb(1)));
      const WeightedFunction y_fd =
          fd_bvp_solve(d.sys, d.frame_a, d.frame_b, d.tau, f, l);
      for (double t : {0.11, 0.29, 0.5, 0.73, 0.95}) {
        worst_fd = std::max(
            worst_fd, (y.eval(t) - y_fd.eval(t)).cwiseAbs().maxCoeff());
      }
    }
  }

  {  // Singular oracle: condition at a plus the coupled interior condition,
     // with the far-end value read where the output has already decayed.
    const ExampleSystem ex = make_example_system();
    auto ws = make_workspace(ex.sys, ex.frame_a, ex.frame_b,
                             std::numeric_limits<double>::quiet_NaN(), tol);
    const MFunction m = m_function_singular_minimal(ws);
    const std::vector<Complex> lambdas = {{0.0, 2.2},
                                          {0.4, 2.2},
                                          {-0.6, 2.3},
                                          {1.0, 2.25},
                                          {-1.2, 2.4}};
    const auto& theta = ex.frame_b.theta_hat().front();
    for (Complex l : lambdas) {
      const WeightedFunction f = random_unit_function(ex.sys, rng, 0.0, 1.0);
      const WeightedFunction y = apply_resolvent(*ws, m, f, l);
      worst_eq = std::max(worst_eq, box_residual(ex.sys, y, f, l));
      const Vector ya = ex.frame_a.Utilde * y.values.front();
      worst_bc = std::max(worst_bc, std::abs(ya(2)));
      const double t_end = y.t.back();
      const Vector jy = ex.sys.J * y.values.back();
      const Complex hat_b = theta(t_end).dot(jy);
      worst_bc = std::max(worst_bc, std::abs(ya(1) - hat_b));
    }
  }

  r.passed = worst_eq <= 1e-6 && worst_bc <= 1e-6 && worst_fd <= 1e-6;
  r.detail = "equation residual " + sci(worst_eq) +
             ", boundary residual " + sci(worst_bc) +
             ", box-scheme disagreement " + sci(worst_fd) +
             " over 5 unit-norm inputs per system";
}

// --------------------------------------------------------------------------
// 7. Transform round trip and the Parseval defect.

void criterion_roundtrip(CriterionResult& r, const Tolerances& tol) {
  const DiracOracle d = dirac_oracle(0.0);

  SpectralMeasure sigma;
  sigma.window_min = -200.0;
  sigma.window_max = 200.0;
  std::vector<double> s_grid;
  for (double s : d.eigenvalues(-200.0, 200.0)) {
    SpectralAtom atom;
    atom.location = s;
    atom.mass = Matrix::Identity(1, 1);
    sigma.atoms.push_back(std::move(atom));
    s_grid.push_back(s);
  }

  auto fn = [](double t) {
    const double w = t * t * (1.0 - t) * (1.0 - t);
    Vector v(2);
    v << Complex(w, 0.0), Complex(w * (2.0 - t), 0.0);
    return v;
  };
  const WeightedFunction f = make_weighted_function(fn, 0.0, 1.0);
  const double f_norm = l2delta_norm(d.sys, f);

  const TransformResult g =
      fourier_transform(d.sys, d.frame_a, f, s_grid, tol);
  const WeightedFunction rec =
      inverse_transform(d.sys, d.frame_a, g, sigma, 1025,
                        std::numeric_limits<double>::quiet_NaN(), tol);

  WeightedFunction diff;
  diff.t = rec.t;
  for (std::size_t i = 0; i < rec.t.size(); ++i) {
    diff.values.push_back(Vector(rec.values[i] - f.eval(rec.t[i])));
  }
  const double err = l2delta_norm(d.sys, diff);
  const double defect = parseval_defect(d.sys, d.frame_a, f, sigma, tol);

  r.passed = err <= 1e-4 && defect <= 1e-3 * f_norm * f_norm &&
             defect >= -1e-6 && sigma.atoms.size() >= 120;
  r.detail = "recovery error " + sci(err) + " against norm " + sci(f_norm) +
             ", Parseval defect " + sci(defect) + " with " +
             std::to_string(sigma.atoms.size()) + " atoms";
}

// --------------------------------------------------------------------------
// 8. Admissibility limits along the imaginary axis.

void criterion_admissibility(CriterionResult& r, const Tolerances&) {
  const DiracOracle d = dirac_oracle(0.0);
  auto m4_eval = [d](Complex l) {
    Matrix m(1, 1);
    m(0, 0) = d.m4(l);
    return m;
  };
  const Matrix one = Matrix::Identity(1, 1);
  const Matrix zero = Matrix::Zero(1, 1);

  const AdmissibilityReport dirichlet =
      admissibility_check(m4_eval, BoundaryParameter::constant(one, zero));
  const AdmissibilityReport neumann =
      admissibility_check(m4_eval, BoundaryParameter::constant(zero, one));

  // Both limits vanish for both parameters; the checker's linear
  // extrapolation in 1/y removes the leading decay exactly.
  const double worst = std::max({dirichlet.norm1, dirichlet.norm2,
                                 neumann.norm1, neumann.norm2});
  r.passed = dirichlet.sf0 && neumann.sf0 && worst <= 1e-6 &&
             dirichlet.y_values.size() == 5;
  r.detail = "worst limit magnitude " + sci(worst) + " along " +
             std::to_string(dirichlet.y_values.size()) +
             " imaginary-axis points, both parameters admissible";
}

// --------------------------------------------------------------------------
// 9. Completion-shift invariance.

void criterion_frame_shift(CriterionResult& r, const Tolerances& tol) {
  const std::vector<Complex> probes = {{0.0, 1.0}, {0.5, 0.8}, {-1.1, 1.7}};

  // Regular oracle: shear the completion row and compare m under both
  // frames directly.
  double dirac_var = 0.0;
  Complex dirac_shift(0.0, 0.0);
  {
    const DiracOracle d = dirac_oracle(0.6);
    const double alpha = 0.37;
    Matrix utilde_2 = Matrix::Identity(2, 2);
    utilde_2(0, 1) = alpha;
    Matrix u(1, 2);
    u << Complex(0.0), Complex(1.0);
    const Matrix shift =
        frame_shift_check(d.sys, u, Matrix(Matrix::Identity(2, 2)), utilde_2,
                          d.frame_b, d.tau, probes, tol);
    dirac_shift = shift(0, 0);

    const BoundaryFrameA f1 = identity_frame_a(d.sys.dims);
    const BoundaryFrameA f2 = build_frame_a(d.sys.dims, u, utilde_2, tol);
    auto ws1 = make_workspace(d.sys, f1, d.frame_b,
                              std::numeric_limits<double>::quiet_NaN(), tol);
    auto ws2 = make_workspace(d.sys, f2, d.frame_b,
                              std::numeric_limits<double>::quiet_NaN(), tol);
    const MFunction m1 = m_function(ws1, d.tau);
    const MFunction m2 = m_function(ws2, d.tau);
    std::vector<Matrix> shifts;
    for (Complex l : probes) shifts.push_back(Matrix(m2(l) - m1(l)));
    for (std::size_t i = 0; i < shifts.size(); ++i) {
      for (std::size_t k = i + 1; k < shifts.size(); ++k) {
        dirac_var =
            std::max(dirac_var, max_abs(Matrix(shifts[i] - shifts[k])));
      }
    }
  }

  // Singular oracle: same construction in the 2x2 block setting, where the
  // shift must live in the top-left entry and be Hermitian.
  double ex_var = 0.0, ex_offblock = 0.0, ex_herm = 0.0;
  {
    const ExampleSystem ex = make_example_system();
    Matrix utilde_2 = ex.frame_a.Utilde;
    utilde_2.row(0) += 0.3 * utilde_2.row(2);
    const Matrix shift =
        frame_shift_check(ex.sys, ex.frame_a.U, ex.frame_a.Utilde, utilde_2,
                          ex.frame_b,
                          BoundaryParameter::constant(Matrix::Identity(1, 1),
                                                      Matrix::Zero(1, 1)),
                          probes, tol);
    Matrix structural = shift;
    structural(0, 0) = Complex(0.0);
    ex_offblock = max_abs(structural);
    ex_herm = hermiticity_defect(Matrix(shift.block(0, 0, 1, 1)));

    const BoundaryFrameA f2 =
        build_frame_a(ex.sys.dims, ex.frame_a.U, utilde_2, tol);
    auto ws1 = make_workspace(ex.sys, ex.frame_a, ex.frame_b,
                              std::numeric_limits<double>::quiet_NaN(), tol);
    auto ws2 = make_workspace(ex.sys, f2, ex.frame_b,
                              std::numeric_limits<double>::quiet_NaN(), tol);
    const MFunction m1 = m_function_singular_minimal(ws1);
    const MFunction m2 = m_function_singular_minimal(ws2);
    std::vector<Matrix> shifts;
    for (Complex l : probes) shifts.push_back(Matrix(m2(l) - m1(l)));
    for (std::size_t i = 0; i < shifts.size(); ++i) {
      for (std::size_t k = i + 1; k < shifts.size(); ++k) {
        ex_var = std::max(ex_var, max_abs(Matrix(shifts[i] - shifts[k])));
      }
    }
  }

  r.passed = dirac_var <= 1e-8 && ex_var <= 1e-8 &&
             std::abs(dirac_shift - Complex(-0.37)) <= 1e-7 &&
             std::abs(dirac_shift.imag()) <= 1e-8 && ex_offblock <= 1e-7 &&
             ex_herm <= 1e-8;
  r.detail = "shift variation " + sci(dirac_var) + " (regular) / " +
             sci(ex_var) + " (singular) across 3 points; shear of 0.37 " +
             "shifts m by " + sci(-dirac_shift.real()) +
             ", off-block leakage " + sci(ex_offblock);
}

// --------------------------------------------------------------------------
// 10. Pair normalization round trip and Nevanlinna validation.

void criterion_pairs(CriterionResult& r, const Tolerances& tol) {
  std::mt19937_64 rng(90125u);
  double worst_angle = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int p = 1 + trial % 3;
    const Matrix b = random_hermitian(rng, p);
    auto [c0, c1] = cos_sin_pair(b);
    const Matrix t = expm(Matrix(0.35 * random_complex(rng, p, p)));
    const Matrix tc0 = t * c0;
    const Matrix tc1 = t * c1;
    const Matrix b_rec = normalize_selfadjoint_pair(tc0, tc1, tol);
    auto [r0, r1] = cos_sin_pair(b_rec);
    worst_angle =
        std::max(worst_angle, pair_kernel_angle(tc0, tc1, r0, r1));
  }

  const std::vector<Complex> samples = {{0.6, 1.2},  {0.6, -1.2}, {0.0, 2.0},
                                        {0.0, -2.0}, {-1.0, 0.5}, {-1.0, -0.5}};
  const Matrix eye = Matrix::Identity(2, 2);
  const BoundaryParameter herglotz_family = BoundaryParameter::holomorphic(
      [eye](Complex l) { return std::make_pair(Matrix(l * eye), Matrix(-eye)); });
  const BoundaryParameter reflected_family = BoundaryParameter::holomorphic(
      [eye](Complex l) {
        return std::make_pair(Matrix(std::conj(l) * eye), Matrix(-eye));
      });
  const BoundaryParameter dirichlet =
      BoundaryParameter::constant(eye, Matrix(Matrix::Zero(2, 2)));

  const PairReport accept1 = validate_nevanlinna_pair(herglotz_family, samples, tol);
  const PairReport reject = validate_nevanlinna_pair(reflected_family, samples, tol);
  const PairReport accept2 = validate_nevanlinna_pair(dirichlet, samples, tol);

  r.passed = worst_angle <= 1e-8 && accept1.valid && !reject.valid &&
             accept2.valid && accept2.selfadjoint;
  r.detail = "worst kernel angle " + sci(worst_angle) +
             " over 100 pairs; sign test floor " + sci(reject.worst_herglotz) +
             " on the rejected family";
}

}  // namespace

std::vector<CriterionResult> run_acceptance(
    const Tolerances& tol, const std::vector<double>& eps_schedule) {
  std::vector<CriterionResult> out;
  out.push_back(timed(1, "singular minimal limit matches the closed-form m",
                      [&](CriterionResult& r) { criterion_singular_m(r, tol); }));
  out.push_back(timed(2, "inverted spectral density matches the closed form",
                      [&](CriterionResult& r) {
                        criterion_density(r, tol, eps_schedule);
                      }));
  out.push_back(timed(3, "regular blocks reproduce tan and -cot",
                      [&](CriterionResult& r) { criterion_regular_m(r, tol); }));
  out.push_back(timed(4, "atom extraction on the half-integer ladder",
                      [&](CriterionResult& r) { criterion_atoms(r, tol); }));
  out.push_back(timed(5, "identity suite across systems and frames",
                      [&](CriterionResult& r) {
                        criterion_identities(r, tol);
                      }));
  out.push_back(timed(6, "resolvent equation, boundary data, and box scheme",
                      [&](CriterionResult& r) {
                        criterion_resolvent(r, tol);
                      }));
  out.push_back(timed(7, "transform round trip and Parseval defect",
                      [&](CriterionResult& r) {
                        criterion_roundtrip(r, tol);
                      }));
  out.push_back(timed(8, "admissibility limits along the imaginary axis",
                      [&](CriterionResult& r) {
                        criterion_admissibility(r, tol);
                      }));
  out.push_back(timed(9, "completion-shift invariance",
                      [&](CriterionResult& r) {
                        criterion_frame_shift(r, tol);
                      }));
  out.push_back(timed(10, "pair normalization and Nevanlinna validation",
                      [&](CriterionResult& r) { criterion_pairs(r, tol); }));

  // Stated runtime budgets are part of the acceptance verdict.
  for (CriterionResult& r : out) {
    if (r.index == 1 && r.seconds > 30.0) r.passed = false;
    if (r.index == 2 && r.seconds > 60.0) r.passed = false;
    if (r.index == 3 && r.seconds > 10.0) r.passed = false;
  }
  return out;
}

}  // namespace symmspectra
