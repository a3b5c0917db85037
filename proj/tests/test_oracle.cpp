// Checks for the closed-form reference systems and the dense
// finite-difference solver. Expected values are frozen numerically so a
// regression in the closed forms cannot hide behind a matching change here.
#include <cmath>
#include <complex>

#include "symmspectra/oracle.hpp"
#include "symmspectra/propagate.hpp"
#include "testkit.hpp"

using namespace symmspectra;
using testkit::check;
using testkit::check_matrix_near;
using testkit::check_near;
using testkit::check_throws;

namespace {

void half_line_example_checks() {
  ExampleSystem ex = make_example_system();

  // Weight assembly: Delta(t) = R diag(delta, 1, 1) R^H with the fixed
  // rotation, positive semidefinite, and Delta annihilates nothing.
  const Matrix rot = example_rotation();
  check_matrix_near(rot.adjoint() * rot, Matrix::Identity(3, 3), 1e-14,
                    "rotation is unitary");
  Matrix jdiag(3, 3);
  jdiag.setZero();
  jdiag(0, 0) = kImag;
  jdiag(1, 1) = kImag;
  jdiag(2, 2) = -kImag;
  check_matrix_near(rot.adjoint() * ex.sys.J * rot, jdiag, 1e-14,
                    "rotation diagonalizes the signature matrix");
  for (double t : {0.0, 0.37, 2.5}) {
    Matrix expected = Matrix::Zero(3, 3);
    expected(0, 0) = std::exp(-t);
    expected(1, 1) = 1.0;
    expected(2, 2) = 1.0;
    check_matrix_near(rot.adjoint() * ex.sys.Delta(t) * rot, expected, 1e-14,
                      "weight diagonal in the rotated basis, t=" +
                          std::to_string(t));
  }

  // Fundamental solution: frozen initial value and the differential
  // equation J Y' = lambda Delta Y checked against an independent
  // integration of the same initial value problem.
  Matrix y0(3, 3);
  y0 << 1.0, 0.0, 1.0,  //
      0.0, 1.0, 0.0,    //
      -kImag, 0.0, kImag;
  check_matrix_near(example_fundamental(ex, 0.0, Complex(0.4, 1.1)), y0, 1e-14,
                    "fundamental initial value");

  // Interior points go through the interpolant, whose error dominates the
  // step-local integration tolerance; the bound reflects that.
  const Complex lambda(0.4, 1.1);
  OperatorSolution numeric = propagate(ex.sys, y0, lambda, 0.0, 3.0);
  for (double t : {0.8, 1.9, 3.0}) {
    check_matrix_near(numeric.eval(t), example_fundamental(ex, t, lambda),
                      2e-7, "fundamental vs integrator, t=" +
                                std::to_string(t));
  }

  // m-function, frozen at lambda = i (so e^{i lambda C} = e^{-1}).
  Matrix m_expected(2, 2);
  m_expected << kImag, Complex(0.0, 0.520260095022889),  //
      0.0, Complex(0.0, 0.5);
  check_matrix_near(example_m(ex, kImag), m_expected, 1e-15,
                    "m at lambda=i");
  Matrix m2_expected(2, 2);
  m2_expected << kImag, Complex(0.0, 0.19139299302082188),  //
      0.0, Complex(0.0, 0.5);
  check_matrix_near(example_m(ex, 2.0 * kImag), m2_expected, 1e-15,
                    "m at lambda=2i");
  check_matrix_near(example_m(ex, Complex(0.3, -0.7)),
                    example_m(ex, Complex(0.3, 0.7)).adjoint(), 1e-15,
                    "m reflects across the real axis");
  check_throws([&] { example_m(ex, Complex(1.0, 0.0)); },
               "m rejects real lambda");

  // Herglotz property: Im m >= 0 in the upper half-plane.
  for (Complex l : {Complex(0.0, 0.3), Complex(2.0, 1.5), Complex(-1.0, 0.05)}) {
    const Matrix im = skew_part(example_m(ex, l)) / kImag;
    check(min_herm_eigenvalue(im) >= -1e-14,
          "Im m is positive semidefinite at Im lambda > 0");
  }

  // Spectral density: frozen at s = 0, PSD and rank one everywhere
  // (det [[1, x], [conj x, 1/2]] = 0 when |x|^2 = 1/2).
  Matrix d0(2, 2);
  d0 << 0.3183098861837907, 0.22507907903927651,  //
      0.22507907903927651, 0.15915494309189535;
  check_matrix_near(example_sigma_density(ex, 0.0), d0, 1e-15,
                    "spectral density at s=0");
  for (double s : {-2.4, 0.9, 17.0}) {
    const Matrix d = example_sigma_density(ex, s);
    check(hermiticity_defect(d) < 1e-15, "density Hermitian");
    check(min_herm_eigenvalue(d) >= -1e-15, "density PSD, s=" +
                                                std::to_string(s));
    check_near(d.determinant(), Complex(0.0, 0.0), 1e-15,
               "density has rank one");
  }

  // Reference solution theta: pairing theta^H J theta equals
  // i e^{2(Phi(t) - C)}, increasing to i at infinity.
  for (double t : {0.0, 1.0, 6.0, 30.0}) {
    const Vector th = example_theta(ex, t);
    const Complex pairing = (th.adjoint() * ex.sys.J * th)(0, 0);
    const Complex expected =
        kImag * std::exp(2.0 * (ex.Phi(t) - ex.C));
    check_near(pairing, expected, 1e-15,
               "theta self-pairing, t=" + std::to_string(t));
  }

  // Distinguished solution v: boundary data at a and the pairings against
  // theta at infinity. With the identity frame, row 2 of v(0) is the middle
  // boundary value and row 3 the final one.
  const Complex lam(0.0, 1.0);
  const Matrix v0 = example_v(ex, 0.0, lam);
  check_near(v0(2, 0), Complex(-1.0, 0.0), 1e-15, "v column 1 endpoint row");
  check_near(v0(1, 0), Complex(0.0, 0.0), 1e-15, "v column 1 middle row");
  check_near(v0(2, 1), Complex(0.0, 0.0), 1e-15, "v column 2 endpoint row");
  // [v_1, theta] vanishes identically; [v_2, theta] tends to i, matching the
  // middle boundary condition value -i after the sign in the frame pairing.
  for (double t : {0.5, 4.0, 20.0}) {
    const Matrix v = example_v(ex, t, lam);
    const Vector th = example_theta(ex, t);
    const Complex p1 = (th.adjoint() * ex.sys.J * v.col(0))(0, 0);
    check_near(p1, Complex(0.0, 0.0), 1e-15, "theta pairing kills column 1");
  }
  const Complex p2_far =
      (example_theta(ex, 40.0).adjoint() * ex.sys.J *
       example_v(ex, 40.0, lam).col(1))(0, 0);
  check_near(p2_far, kImag, 1e-12, "theta pairing of column 2 tends to i");

  // v solves the system: compare with an integration from v(0).
  OperatorSolution v_num = propagate(ex.sys, v0, lam, 0.0, 2.0);
  check_matrix_near(v_num.eval(2.0), example_v(ex, 2.0, lam), 5e-9,
                    "v vs integrator");

  // phi: initial value (I; 0) in the identity frame, solves the system.
  const Matrix phi0 = example_phi(ex, 0.0, lambda);
  Matrix phi0_expected(3, 2);
  phi0_expected << 1.0, 0.0,  //
      0.0, 1.0,               //
      0.0, 0.0;
  check_matrix_near(phi0, phi0_expected, 1e-15, "phi initial value");
  OperatorSolution phi_num = propagate(ex.sys, phi0, lambda, 0.0, 2.0);
  check_matrix_near(phi_num.eval(2.0), example_phi(ex, 2.0, lambda), 5e-9,
                    "phi vs integrator");

  // Numeric limit of the boundary pairing [v_2, theta] through the b_form
  // machinery agrees with the closed-form value i.
  auto theta_fn = [&ex](double t) { return example_theta(ex, t); };
  OperatorSolution v_ext = propagate(ex.sys, v0, lam, 0.0, 40.0);
  LimitResult lim = b_form(ex.sys, v_ext, theta_fn,
                           geometric_beta_schedule(0.0, 5.0, 40.0, 4));
  check_near(lim.value(0, 1), kImag, 1e-7, "b_form limit of [v_2, theta]");
}

void transform_checks() {
  ExampleSystem ex = make_example_system();

  // Component f2 = 1 on [0,1]: hat f_2(s) = (e^{is} - 1) / (is).
  RotatedComponents f;
  f.f1 = [](double) { return Complex(0.0); };
  f.f2 = [](double) { return Complex(1.0); };
  f.f3 = [](double) { return Complex(0.0); };
  f.support_end = 1.0;
  const std::vector<double> s_grid = {-11.3, 0.5, 3.7, 41.0};
  TransformResult tr = example_transform(ex, f, s_grid);
  for (std::size_t k = 0; k < s_grid.size(); ++k) {
    const double s = s_grid[k];
    const Complex expected =
        (std::exp(kImag * s) - 1.0) / (kImag * s);
    check_near(tr.values[k](1), expected, 1e-10,
               "transform of flat middle component, s=" + std::to_string(s));
    check_near(tr.values[k](0), Complex(0.0), 1e-12,
               "first transform row vanishes");
  }

  // Component f3 = 1: hat f_1(s) = (1 - e^{-is}) / (i s sqrt(2)).
  RotatedComponents g;
  g.f1 = [](double) { return Complex(0.0); };
  g.f2 = [](double) { return Complex(0.0); };
  g.f3 = [](double) { return Complex(1.0); };
  TransformResult tg = example_transform(ex, g, s_grid);
  for (std::size_t k = 0; k < s_grid.size(); ++k) {
    const double s = s_grid[k];
    const Complex expected =
        (1.0 - std::exp(-kImag * s)) / (kImag * s * std::sqrt(2.0));
    check_near(tg.values[k](0), expected, 1e-10,
               "transform of third component, s=" + std::to_string(s));
  }

  // Component f1 = 1 integrates in the substitution u = Phi(t):
  // hat f_1(s) = (e^{is Phi(1)} - 1) / (i s sqrt(2)).
  RotatedComponents h;
  h.f1 = [](double) { return Complex(1.0); };
  h.f2 = [](double) { return Complex(0.0); };
  h.f3 = [](double) { return Complex(0.0); };
  TransformResult th = example_transform(ex, h, s_grid);
  const double phi1 = 0.6321205588285577;
  for (std::size_t k = 0; k < s_grid.size(); ++k) {
    const double s = s_grid[k];
    const Complex expected =
        (std::exp(kImag * s * phi1) - 1.0) / (kImag * s * std::sqrt(2.0));
    check_near(th.values[k](0), expected, 1e-10,
               "transform of first component, s=" + std::to_string(s));
  }

  // Embedding: the weighted norm of the ambient function matches the
  // rotated-basis integral int (delta |f1|^2 + |f2|^2 + |f3|^2).
  RotatedComponents mix;
  mix.f1 = [](double t) { return Complex(t); };
  mix.f2 = [](double t) { return Complex(1.0 - t); };
  mix.f3 = [](double t) { return Complex(std::sin(t), 0.5); };
  WeightedFunction w = example_embed(ex, mix);
  // int_0^1 e^{-t} t^2 = 2 - 5/e; int_0^1 (1-t)^2 = 1/3;
  // int_0^1 (sin^2 t + 1/4) = 1/2 - sin(2)/4 + 1/4.
  const double expected_sq = (2.0 - 5.0 * std::exp(-1.0)) + 1.0 / 3.0 +
                             (0.75 - std::sin(2.0) / 4.0);
  check_near(l2delta_norm(ex.sys, w), std::sqrt(expected_sq), 1e-6,
             "embedded norm matches the rotated-basis integral");
}

void dirac_checks() {
  DiracOracle d0 = dirac_oracle(0.0);

  // m = tan(lambda): frozen at lambda = i and a generic complex point.
  check_near(d0.m(kImag), Complex(0.0, 0.7615941559557649), 1e-15,
             "tangent m at lambda=i");
  check_near(d0.m(Complex(1.3, 0.9)),
             Complex(0.22905222597521802, 1.307293455911048), 1e-14,
             "tangent m at a generic point");
  check_near(d0.m4(Complex(1.3, 0.9)), d0.m(Complex(1.3, 0.9)), 1e-15,
             "endpoint block matches m for the untilted parameter");

  // Fundamental solution solves the system; frozen rotation structure.
  const Complex lambda(0.8, 0.6);
  OperatorSolution y_num =
      propagate(d0.sys, Matrix::Identity(2, 2), lambda, 0.0, 1.0);
  for (double t : {0.3, 1.0}) {
    check_matrix_near(y_num.eval(t), d0.fundamental(t, lambda), 2e-8,
                      "rotation fundamental solution, t=" + std::to_string(t));
  }

  // phi is the eigenfunction column for every parameter angle.
  DiracOracle d1 = dirac_oracle(M_PI / 2.0);
  const double s0 = M_PI;  // eigenvalue of the tilted parameter
  const Vector ef = d1.phi(1.0, s0);
  auto [c0, c1] = d1.tau.at(Complex(s0, 0.0));
  check_near(c0(0, 0) * ef(0) + c1(0, 0) * ef(1), Complex(0.0), 1e-15,
             "eigenfunction satisfies the endpoint condition");

  // Eigenvalue ladders.
  const std::vector<double> ev0 = d0.eigenvalues(0.0, 20.0);
  check(ev0.size() == 6, "untilted ladder count in [0,20]");
  bool ladder_ok = true;
  for (std::size_t k = 0; k < ev0.size(); ++k) {
    ladder_ok = ladder_ok &&
                std::abs(ev0[k] - (k + 0.5) * M_PI) < 1e-12;
  }
  check(ladder_ok, "untilted ladder at half-integer multiples of pi");
  const std::vector<double> ev1 = d1.eigenvalues(0.0, 20.0);
  check(ev1.size() == 7 && std::abs(ev1[0]) < 1e-12 &&
            std::abs(ev1[6] - 6.0 * M_PI) < 1e-12,
        "tilted ladder at integer multiples of pi");
  const std::vector<double> ev_neg = d0.eigenvalues(-10.0, 10.0);
  check(ev_neg.size() == 6 && std::abs(ev_neg[0] + 2.5 * M_PI) < 1e-12,
        "ladder extends to negative energies");
}

void dense_solver_checks() {
  DiracOracle d = dirac_oracle(0.0);
  const Complex lambda(0.0, 0.7);

  // Manufactured solution: y = (sin(pi t), t(1-t)) satisfies both boundary
  // rows; f = J y' - lambda y. The scheme should recover y at second order.
  auto y_exact = [](double t) {
    Vector v(2);
    v << std::sin(M_PI * t), t * (1.0 - t);
    return v;
  };
  auto f_fn = [lambda, y_exact](double t) {
    Vector yp(2);
    yp << M_PI * std::cos(M_PI * t), 1.0 - 2.0 * t;
    Vector v(2);
    v << -yp(1), yp(0);  // J y'
    return Vector(v - lambda * y_exact(t));
  };
  WeightedFunction f = make_weighted_function(f_fn, 0.0, 1.0, 257);

  auto max_err = [&](int nodes) {
    WeightedFunction y = fd_bvp_solve(d.sys, d.frame_a, d.frame_b, d.tau, f,
                                      lambda, nodes);
    double err = 0.0;
    for (std::size_t i = 0; i < y.t.size(); ++i) {
      err = std::max(err, (y.values[i] - y_exact(y.t[i])).cwiseAbs().maxCoeff());
    }
    return err;
  };
  const double e_coarse = max_err(751);
  const double e_fine = max_err(1501);
  check(e_coarse < 1e-5, "dense solver accuracy at 751 nodes");
  const double ratio = e_coarse / e_fine;
  check(ratio > 3.0 && ratio < 5.0,
        "dense solver converges at second order (ratio " +
            std::to_string(ratio) + ")");

  // Green's kernel against the closed form: phi(x) v(t)^T below the
  // diagonal and v(x) phi(t)^T above it, with v = phi m + psi.
  const Complex m = d.m(lambda);
  auto phi_l = [&](double t) {
    Vector v(2);
    v << std::cos(lambda * t), -std::sin(lambda * t);
    return v;
  };
  auto v_l = [&](double t) {
    Vector v(2);
    v << std::cos(lambda * t) * m - std::sin(lambda * t),
        -std::sin(lambda * t) * m - std::cos(lambda * t);
    return v;
  };
  const double x = 0.3, t0 = 0.7;
  Matrix g_below = phi_l(x) * v_l(t0).transpose();
  check_matrix_near(fd_green_matrix(d.sys, d.frame_a, d.frame_b, d.tau, x, t0,
                                    lambda),
                    g_below, 1e-5, "kernel below the diagonal");
  Matrix g_above = v_l(t0) * phi_l(x).transpose();
  check_matrix_near(fd_green_matrix(d.sys, d.frame_a, d.frame_b, d.tau, t0, x,
                                    lambda),
                    g_above, 1e-5, "kernel above the diagonal");

  // Resolvent consistency: the dense solution of J y' - lambda y = f obeys
  // the differential equation midpoint residual at second order.
  WeightedFunction y = fd_bvp_solve(d.sys, d.frame_a, d.frame_b, d.tau, f,
                                    lambda, 2001);
  check_near(y.values.front()(1), Complex(0.0), 1e-9,
             "dense solution satisfies the left boundary row");
  check_near(y.values.back()(0), Complex(0.0), 1e-9,
             "dense solution satisfies the endpoint parameter row");
}

}  // namespace

int main() {
  half_line_example_checks();
  transform_checks();
  dirac_checks();
  dense_solver_checks();
  return testkit::summary("test_oracle");
}
