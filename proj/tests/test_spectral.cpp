// Checks for the spectral layer: Stieltjes inversion against the closed-form
// density of the half-line example, atom flagging and extraction on the
// constant-coefficient oracle, the transform pair and its Parseval defect,
// the admissibility ray limits, and measure-to-m reconstruction.
#include <cmath>
#include <complex>
#include <vector>

#include "symmspectra/oracle.hpp"
#include "symmspectra/spectral.hpp"
#include "symmspectra/weyl.hpp"
#include "testkit.hpp"

using namespace symmspectra;
using testkit::check;
using testkit::check_matrix_near;
using testkit::check_near;
using testkit::check_throws;

namespace {

constexpr Complex kI{0.0, 1.0};

MFunction example_m_closed_form(const ExampleSystem& ex) {
  return MFunction{[ex](Complex l) { return example_m(ex, l); },
                   "closed form"};
}

// Exact integral of the example density over [x, y].
Matrix example_density_integral(double x, double y) {
  Matrix r(2, 2);
  r(0, 0) = (y - x) / M_PI;
  r(1, 1) = 0.5 * (y - x) / M_PI;
  r(0, 1) = (std::exp(kI * y) - std::exp(kI * x)) / (kI * std::sqrt(2.0) * M_PI);
  r(1, 0) = std::conj(r(0, 1));
  return r;
}

SpectralMeasure example_closed_form_measure(const ExampleSystem& ex,
                                            double lo, double hi, int n) {
  SpectralMeasure sig;
  sig.window_min = lo;
  sig.window_max = hi;
  for (int i = 0; i < n; ++i) {
    const double s = lo + (hi - lo) * static_cast<double>(i) / (n - 1);
    sig.density_grid.push_back(s);
    sig.density_values.push_back(example_sigma_density(ex, s));
  }
  return sig;
}

void increment_checks() {
  ExampleSystem ex = make_example_system();
  SpectralMeasure sig = example_closed_form_measure(ex, -M_PI, M_PI, 2049);
  SpectralAtom atom;
  atom.location = 0.5;
  atom.mass = Matrix::Identity(2, 2);
  sig.atoms.push_back(atom);

  const Matrix inc_with_atom = sig.increment(0.0, 0.5);
  check_matrix_near(inc_with_atom,
                    Matrix(example_density_integral(0.0, 0.5) +
                           Matrix::Identity(2, 2)),
                    1e-5, "increment counts an atom at the right endpoint");
  const Matrix inc_without = sig.increment(0.5, 1.0);
  check_matrix_near(inc_without, example_density_integral(0.5, 1.0), 1e-5,
                    "increment excludes an atom at the left endpoint");
  check_matrix_near(sig.increment(1.0, -1.0), Matrix(-sig.increment(-1.0, 1.0)),
                    1e-14, "reversed interval flips the sign");
  const Matrix split = sig.increment(-1.2, 0.7) + sig.increment(0.7, 2.2);
  check_matrix_near(split, sig.increment(-1.2, 2.2), 1e-13,
                    "increments add across a split point");
  check_matrix_near(sig.increment(2.0, 10.0),
                    example_density_integral(2.0, M_PI), 1e-5,
                    "integration clips to the stored window");
}

void example_stieltjes_checks() {
  ExampleSystem ex = make_example_system();
  const MFunction m = example_m_closed_form(ex);
  const SpectralMeasure sig = stieltjes_invert(m, -M_PI, M_PI);
  check(sig.atoms.empty(), "no atom candidates on a purely ac window");
  check(sig.density_grid.size() == 2049, "full grid retained");
  check(sig.window_min == -M_PI && sig.window_max == M_PI,
        "window recorded on the measure");
  double sup = 0.0;
  for (std::size_t i = 0; i < sig.density_grid.size(); ++i) {
    sup = std::max(sup,
                   max_abs(Matrix(sig.density_values[i] -
                                  example_sigma_density(
                                      ex, sig.density_grid[i]))));
  }
  check_near(sup, 0.0, 1e-3, "density sup error within tolerance");

  // Two-level schedule exercises the shorter extrapolation table.
  const SpectralMeasure sig2 =
      stieltjes_invert(m, -1.0, 1.0, {0.2, 0.1}, 257);
  double sup2 = 0.0;
  for (std::size_t i = 0; i < sig2.density_grid.size(); ++i) {
    sup2 = std::max(sup2,
                    max_abs(Matrix(sig2.density_values[i] -
                                   example_sigma_density(
                                       ex, sig2.density_grid[i]))));
  }
  check_near(sup2, 0.0, 1e-2, "two-level schedule stays first-order accurate");

  check_throws([&] { stieltjes_invert(m, 1.0, -1.0); },
               "inverted window rejected");
  check_throws([&] { stieltjes_invert(m, -1.0, 1.0, {0.1, -0.2}); },
               "negative smoothing level rejected");
  check_throws([&] { stieltjes_invert(m, -1.0, 1.0, {}, 1); },
               "degenerate grid rejected");
}

void dirac_stieltjes_flag_checks() {
  const MFunction m{[](Complex l) {
                      Matrix v(1, 1);
                      v(0, 0) = std::tan(l);
                      return v;
                    },
                    "closed form"};
  const SpectralMeasure sig = stieltjes_invert(m, 0.0, 3.0, {}, 1025);
  check(!sig.atoms.empty(), "pole flagged as an atom candidate");
  const double pole = M_PI / 2.0;
  double worst_loc = 0.0;
  double best_mass = 0.0;
  for (const SpectralAtom& a : sig.atoms) {
    worst_loc = std::max(worst_loc, std::abs(a.location - pole));
    best_mass = std::max(best_mass, std::real(a.mass(0, 0)));
  }
  check_near(worst_loc, 0.0, 0.12, "all candidates cluster at the pole");
  check(best_mass > 0.9 && best_mass < 1.02,
        "crude mass near the residue at the closest grid point");
  double closest_retained = 1e9;
  for (double s : sig.density_grid) {
    closest_retained = std::min(closest_retained, std::abs(s - pole));
  }
  check(closest_retained > 0.6, "density excluded around the pole");
  double density_sup = 0.0;
  double at_03 = 1e9;
  for (std::size_t i = 0; i < sig.density_grid.size(); ++i) {
    density_sup = std::max(density_sup, max_abs(sig.density_values[i]));
    if (std::abs(sig.density_grid[i] - 0.3) < 2e-3) {
      at_03 = max_abs(sig.density_values[i]);
    }
  }
  check_near(density_sup, 0.0, 2.5e-2,
             "retained density vanishes away from the pole");
  check_near(at_03, 0.0, 1e-3, "density residual small at a distant point");
}

void dirac_extract_checks() {
  {
    DiracOracle d = dirac_oracle(0.0);
    auto ws = make_workspace(d.sys, d.frame_a, d.frame_b);
    const MFunction m = m_function(ws, d.tau);
    const std::vector<SpectralAtom> atoms =
        extract_atoms(*ws, d.tau, m, 0.0, 20.0);
    const std::vector<double> expect = d.eigenvalues(0.0, 20.0);
    check(atoms.size() == expect.size(), "all eigenvalues in the window found");
    double worst_loc = 0.0;
    double worst_mass = 0.0;
    for (std::size_t i = 0;
         i < std::min(atoms.size(), expect.size()); ++i) {
      worst_loc = std::max(worst_loc, std::abs(atoms[i].location - expect[i]));
      worst_mass =
          std::max(worst_mass, std::abs(atoms[i].mass(0, 0) - Complex(1.0)));
    }
    check_near(worst_loc, 0.0, 1e-6, "eigenvalue locations");
    check_near(worst_mass, 0.0, 1e-4, "unit masses");
  }
  {
    // Rotated boundary parameter: shifted eigenvalues, same unit masses.
    DiracOracle d = dirac_oracle(0.6);
    auto ws = make_workspace(d.sys, d.frame_a, d.frame_b);
    const MFunction m = m_function(ws, d.tau);
    const std::vector<SpectralAtom> atoms =
        extract_atoms(*ws, d.tau, m, 0.0, 8.0);
    const std::vector<double> expect = d.eigenvalues(0.0, 8.0);
    check(atoms.size() == expect.size(), "rotated parameter atom count");
    double worst = 0.0;
    for (std::size_t i = 0;
         i < std::min(atoms.size(), expect.size()); ++i) {
      worst = std::max(worst, std::abs(atoms[i].location - expect[i]));
      worst = std::max(worst, std::abs(atoms[i].mass(0, 0) - Complex(1.0)));
    }
    check_near(worst, 0.0, 1e-4, "rotated parameter locations and masses");
  }
}

void transform_checks() {
  {
    DiracOracle d = dirac_oracle(0.0);
    const WeightedFunction f = make_weighted_function(
        [](double) {
          Vector v(2);
          v << 1.0, 0.0;
          return v;
        },
        0.0, 1.0);
    const std::vector<double> sg = {-3.0, -1.2, 0.0, 0.5, 2.0, 5.0};
    const TransformResult th = fourier_transform(d.sys, d.frame_a, f, sg);
    double worst = 0.0;
    for (std::size_t i = 0; i < sg.size(); ++i) {
      const double s = sg[i];
      const double expect = s == 0.0 ? 1.0 : std::sin(s) / s;
      worst = std::max(worst, std::abs(th.values[i](0) - Complex(expect)));
    }
    check_near(worst, 0.0, 1e-8, "transform of the constant matches sinc");
  }
  {
    ExampleSystem ex = make_example_system();
    RotatedComponents rc;
    rc.f1 = [](double t) { return Complex(t * (1.0 - t)); };
    rc.f2 = [](double t) { return Complex(std::sin(M_PI * t)); };
    rc.f3 = [](double t) { return Complex(t * t * (1.0 - t)); };
    rc.support_end = 1.0;
    const WeightedFunction fe = example_embed(ex, rc);
    const std::vector<double> sg = {-2.5, -1.0, 0.0, 0.7, 1.9, 3.3};
    const TransformResult ge = fourier_transform(ex.sys, ex.frame_a, fe, sg);
    const TransformResult oe = example_transform(ex, rc, sg);
    double worst = 0.0;
    for (std::size_t i = 0; i < sg.size(); ++i) {
      worst = std::max(worst, (ge.values[i] - oe.values[i]).cwiseAbs()
                                  .maxCoeff());
    }
    check_near(worst, 0.0, 1e-7,
               "generic transform matches the displayed integrals");
  }
  check_throws(
      [&] {
        DiracOracle d = dirac_oracle(0.0);
        fourier_transform(d.sys, d.frame_a, WeightedFunction{}, {1.0});
      },
      "empty input function rejected");
}

void roundtrip_checks() {
  DiracOracle d = dirac_oracle(0.0);
  // Smooth, compactly supported, flat to second order at both endpoints so
  // the expansion coefficients decay fast enough for a 1e-4 tail at |s|=200.
  auto f1 = [](double t) { return t * t * (1.0 - t) * (1.0 - t); };
  auto f2 = [](double t) {
    return t * t * (1.0 - t) * (1.0 - t) * (2.0 - t);
  };
  const WeightedFunction f = make_weighted_function(
      [&](double t) {
        Vector v(2);
        v << f1(t), f2(t);
        return v;
      },
      0.0, 1.0);

  SpectralMeasure sig;
  sig.window_min = -200.0;
  sig.window_max = 200.0;
  std::vector<double> sgrid;
  for (double s : d.eigenvalues(-200.0, 200.0)) {
    SpectralAtom atom;
    atom.location = s;
    atom.mass = Matrix::Identity(1, 1);
    sig.atoms.push_back(atom);
    sgrid.push_back(s);
  }
  check(sig.atoms.size() > 100, "atom window densely populated");

  const TransformResult fh = fourier_transform(d.sys, d.frame_a, f, sgrid);
  const WeightedFunction rec = inverse_transform(d.sys, d.frame_a, fh, sig);
  WeightedFunction diff;
  diff.t = rec.t;
  for (std::size_t i = 0; i < rec.t.size(); ++i) {
    diff.values.push_back(rec.values[i] - f.eval(rec.t[i]));
  }
  const double err = l2delta_norm(d.sys, diff);
  check_near(err, 0.0, 1e-4, "round trip recovers f in the weighted norm");

  const double norm_sq = std::real(l2delta_inner(d.sys, f, f));
  const double defect = parseval_defect(d.sys, d.frame_a, f, sig);
  check(defect <= 1e-3 * norm_sq, "norm defect within the contraction budget");
  check(defect >= -1e-6, "norm defect not significantly negative");

  // Consistency of the measure inner product on the atom grid.
  const Complex self = sigma_inner(fh, fh, sig);
  Complex manual = 0.0;
  for (std::size_t i = 0; i < sgrid.size(); ++i) {
    manual += std::norm(fh.values[i](0));
  }
  check_near(self, manual, 1e-12, "atomic inner product sums the squares");

  check_throws(
      [&] { inverse_transform(d.sys, d.frame_a, fh, sig, 1); },
      "degenerate sample count rejected");
}

void admissibility_checks() {
  DiracOracle d0 = dirac_oracle(0.0);
  DiracOracle d1 = dirac_oracle(M_PI / 2.0);
  const std::function<Matrix(Complex)> m4 = [d0](Complex l) {
    Matrix v(1, 1);
    v(0, 0) = d0.m4(l);
    return v;
  };

  const AdmissibilityReport r0 = admissibility_check(m4, d0.tau);
  check(r0.sf0, "first parameter admitted");
  check_near(r0.norm1, 0.0, 1e-6, "first ray limit vanishes");
  check_near(r0.norm2, 0.0, 1e-6, "second ray limit vanishes");
  check(r0.y_values.size() == 5, "default ray schedule recorded");

  const AdmissibilityReport r1 = admissibility_check(m4, d1.tau);
  check(r1.sf0, "rotated parameter admitted");
  check_near(std::max(r1.norm1, r1.norm2), 0.0, 1e-6,
             "rotated parameter limits vanish");

  // A family whose constraint matrix degenerates like 1/lambda keeps both
  // rescaled solves order one; the check must reject it.
  const BoundaryParameter bad =
      BoundaryParameter::holomorphic([](Complex l) {
        Matrix c0(1, 1), c1(1, 1);
        c0(0, 0) = std::tan(l) + 1.0 / l;
        c1(0, 0) = 1.0;
        return std::make_pair(c0, c1);
      });
  const AdmissibilityReport rb = admissibility_check(m4, bad);
  check(!rb.sf0, "degenerating family rejected");
  check_near(rb.norm1, 1.0, 1e-3, "first limit saturates at order one");
  check_near(rb.norm2, 1.0, 1e-3, "second limit saturates at order one");

  check_throws([&] { admissibility_check(m4, d0.tau, {100.0}); },
               "single ray point rejected");
}

void reconstruction_checks() {
  {
    // Pure atoms, symmetric window: the regularized kernel sum telescopes to
    // the tangent, up to the 2/(pi S) truncation tail.
    DiracOracle d = dirac_oracle(0.0);
    SpectralMeasure sig;
    sig.window_min = -200.0;
    sig.window_max = 200.0;
    for (double s : d.eigenvalues(-200.0, 200.0)) {
      SpectralAtom atom;
      atom.location = s;
      atom.mass = Matrix::Identity(1, 1);
      sig.atoms.push_back(atom);
    }
    const Matrix r = reconstruct_m_from_sigma(sig, kI);
    check_near(r(0, 0), Complex(0.0, std::tanh(1.0)), 5e-3,
               "atom sum reproduces the tangent at i");
  }
  {
    ExampleSystem ex = make_example_system();
    const SpectralMeasure sig =
        example_closed_form_measure(ex, -60.0, 60.0, 4097);
    const Matrix mtrue = example_m(ex, Complex(0.0, 2.0));
    const Matrix r = reconstruct_m_from_sigma(sig, Complex(0.0, 2.0));
    check_near(r(0, 0), mtrue(0, 0), 2e-3, "diagonal reconstruction at 2i");
    check_near(r(1, 1), mtrue(1, 1), 2e-3,
               "second diagonal reconstruction at 2i");

    // The off-diagonal density e^{is}/(pi sqrt2) puts one pole's residue out
    // of reach of the contour, leaving the constant Hermitian offset
    // [[0, i e^{-1}/sqrt2], [-i e^{-1}/sqrt2, 0]].
    const Matrix off = fit_hermitian_offset(
        sig, example_m(ex, Complex(0.0, 1.5)), Complex(0.0, 1.5));
    const Complex a01(0.0, std::exp(-1.0) / std::sqrt(2.0));
    check_near(off(0, 1), a01, 5e-3, "fitted offset matches the residue value");
    check_near(off(0, 0), Complex(0.0), 5e-3, "fitted offset has no diagonal");
    check_near(hermiticity_defect(off), 0.0, 1e-14, "fitted offset Hermitian");

    const Complex probe(0.4, 1.1);
    check_matrix_near(Matrix(reconstruct_m_from_sigma(sig, probe) + off),
                      example_m(ex, probe), 1e-2,
                      "offset-corrected reconstruction away from the axis");

    const Matrix lin = Matrix::Identity(2, 2);
    check_matrix_near(
        Matrix(reconstruct_m_from_sigma(sig, probe, lin) - probe * lin),
        reconstruct_m_from_sigma(sig, probe), 1e-13,
        "linear term enters additively");

    check_throws([&] { reconstruct_m_from_sigma(sig, Complex(0.7, 0.0)); },
                 "real point rejected");
    check_throws([&] { reconstruct_m_from_sigma(SpectralMeasure{}, kI); },
                 "empty measure rejected");
  }
}

}  // namespace

int main() {
  increment_checks();
  example_stieltjes_checks();
  dirac_stieltjes_flag_checks();
  dirac_extract_checks();
  transform_checks();
  roundtrip_checks();
  admissibility_checks();
  reconstruction_checks();
  return testkit::summary("spectral");
}
