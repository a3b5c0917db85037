#include "symmspectra/spectral.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <utility>

namespace symmspectra {

namespace {

// Linear interpolation of a matrix-valued table at s; clamps to the edge
// values outside the grid range.
Matrix interp_table(const std::vector<double>& grid,
                    const std::vector<Matrix>& values, double s) {
  if (grid.empty()) throw ValidationError("empty interpolation table");
  if (s <= grid.front()) return values.front();
  if (s >= grid.back()) return values.back();
  const auto it = std::upper_bound(grid.begin(), grid.end(), s);
  const std::size_t hi = static_cast<std::size_t>(it - grid.begin());
  const std::size_t lo = hi - 1;
  const double w = (s - grid[lo]) / (grid[hi] - grid[lo]);
  return (1.0 - w) * values[lo] + w * values[hi];
}

Vector interp_transform(const TransformResult& g, double s) {
  if (g.s_grid.empty()) throw ValidationError("empty transform grid");
  if (s < g.s_grid.front() || s > g.s_grid.back()) {
    return Vector::Zero(g.values.front().size());
  }
  const auto it = std::upper_bound(g.s_grid.begin(), g.s_grid.end(), s);
  if (it == g.s_grid.begin()) return g.values.front();
  const std::size_t hi = static_cast<std::size_t>(it - g.s_grid.begin());
  if (hi >= g.s_grid.size()) return g.values.back();
  const std::size_t lo = hi - 1;
  const double w = (s - g.s_grid[lo]) / (g.s_grid[hi] - g.s_grid[lo]);
  return (1.0 - w) * g.values[lo] + w * g.values[hi];
}

// Neville extrapolation of matrix samples D(eps_i) to eps = 0. With three
// levels this is the two-stage Richardson table; the error is O(prod eps_i)
// for smooth level values.
Matrix neville_to_zero(const std::vector<double>& eps,
                       const std::vector<Matrix>& samples) {
  std::vector<Matrix> row = samples;
  const std::size_t n = eps.size();
  for (std::size_t level = 1; level < n; ++level) {
    for (std::size_t i = 0; i + level < n; ++i) {
      const double e0 = eps[i];
      const double e1 = eps[i + level];
      row[i] = (e0 * row[i + 1] - e1 * row[i]) / (e0 - e1);
    }
  }
  return row[0];
}

// Hermitian PSD projection: clamp negative eigenvalues of the Hermitian
// part at zero.
Matrix psd_project(const Matrix& a) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(hermitian_part(a));
  Eigen::VectorXd ev = es.eigenvalues();
  for (Eigen::Index i = 0; i < ev.size(); ++i) ev(i) = std::max(ev(i), 0.0);
  return es.eigenvectors() * ev.asDiagonal().toDenseMatrix().cast<Complex>() *
         es.eigenvectors().adjoint();
}

}  // namespace

Matrix SpectralMeasure::increment(double s1, double s2) const {
  if (s2 < s1) return Matrix(-increment(s2, s1));
  int dim = 0;
  if (!density_values.empty()) {
    dim = static_cast<int>(density_values.front().rows());
  } else if (!atoms.empty()) {
    dim = static_cast<int>(atoms.front().mass.rows());
  } else {
    throw ValidationError("empty spectral measure");
  }
  Matrix total = Matrix::Zero(dim, dim);
  for (const SpectralAtom& atom : atoms) {
    if (atom.location > s1 && atom.location <= s2) total += atom.mass;
  }
  if (density_grid.size() >= 2) {
    const double lo = std::max(s1, density_grid.front());
    const double hi = std::min(s2, density_grid.back());
    if (hi > lo) {
      // Trapezoid over the stored grid with interpolated partial end cells.
      std::vector<double> pts;
      pts.push_back(lo);
      for (double s : density_grid) {
        if (s > lo && s < hi) pts.push_back(s);
      }
      pts.push_back(hi);
      Matrix prev = interp_table(density_grid, density_values, pts[0]);
      for (std::size_t i = 1; i < pts.size(); ++i) {
        const Matrix cur = interp_table(density_grid, density_values, pts[i]);
        total += 0.5 * (pts[i] - pts[i - 1]) * (prev + cur);
        prev = cur;
      }
    }
  }
  return total;
}

SpectralMeasure stieltjes_invert(const MFunction& m, double window_min,
                                 double window_max,
                                 std::vector<double> epsilon_schedule,
                                 int grid_points, const Tolerances& tol) {
  if (!(window_max > window_min)) {
    throw ValidationError("spectral window must have positive length");
  }
  if (grid_points < 2) throw ValidationError("need at least two grid points");
  if (epsilon_schedule.empty()) epsilon_schedule = {0.3, 0.15, 0.075};
  std::sort(epsilon_schedule.begin(), epsilon_schedule.end(),
            std::greater<double>());
  for (double e : epsilon_schedule) {
    if (!(e > 0.0)) throw ValidationError("epsilon levels must be positive");
  }
  const std::size_t levels = epsilon_schedule.size();
  const double eps_min = epsilon_schedule.back();

  SpectralMeasure out;
  out.window_min = window_min;
  out.window_max = window_max;

  std::vector<double> grid(grid_points);
  for (int i = 0; i < grid_points; ++i) {
    grid[i] = window_min +
              (window_max - window_min) * static_cast<double>(i) /
                  (grid_points - 1);
  }

  std::vector<Matrix> extrapolated(grid_points);
  std::vector<bool> atom_flag(grid_points, false);
  std::vector<double> atom_center;
  for (int i = 0; i < grid_points; ++i) {
    std::vector<Matrix> lines(levels);
    for (std::size_t k = 0; k < levels; ++k) {
      lines[k] = skew_part(m(Complex(grid[i], epsilon_schedule[k]))) / M_PI;
    }
    // A pole makes the line values scale like 1/eps; a smooth density keeps
    // them level. Flag growth beyond the geometric mean of the two regimes.
    if (levels >= 2) {
      const double n_prev = max_abs(lines[levels - 2]);
      const double n_last = max_abs(lines[levels - 1]);
      const double ratio = epsilon_schedule[levels - 2] / eps_min;
      if (n_prev > 1e-12 && n_last > 0.5 * (1.0 + ratio) * n_prev) {
        atom_flag[i] = true;
        atom_center.push_back(grid[i]);
        SpectralAtom atom;
        atom.location = grid[i];
        // Crude mass: eps * Im m at the sharpest level.
        atom.mass = psd_project(Matrix(M_PI * eps_min * lines[levels - 1]));
        out.atoms.push_back(std::move(atom));
        continue;
      }
    }
    extrapolated[i] = neville_to_zero(epsilon_schedule, lines);
  }

  // Exclude the smoothing halo around each flagged pole from the density.
  for (int i = 0; i < grid_points; ++i) {
    if (atom_flag[i]) continue;
    bool near_atom = false;
    for (double c : atom_center) {
      if (std::abs(grid[i] - c) <= 10.0 * eps_min) {
        near_atom = true;
        break;
      }
    }
    if (near_atom) continue;
    out.density_grid.push_back(grid[i]);
    out.density_values.push_back(hermitian_part(extrapolated[i]));
  }
  (void)tol;
  return out;
}

std::vector<SpectralAtom> extract_atoms(const Workspace& ws,
                                        const BoundaryParameter& tau,
                                        const MFunction& m, double window_min,
                                        double window_max,
                                        std::vector<double> mass_epsilons,
                                        const Tolerances& tol) {
  if (!(window_max > window_min)) {
    throw ValidationError("atom window must have positive length");
  }
  if (mass_epsilons.empty()) mass_epsilons = {1e-2, 1e-3, 1e-4};
  std::sort(mass_epsilons.begin(), mass_epsilons.end(),
            std::greater<double>());

  const int scan = 4096;
  const double h = (window_max - window_min) / scan;
  std::vector<Complex> det(scan + 1);
  for (int i = 0; i <= scan; ++i) {
    det[i] = pole_indicator(ws, tau, window_min + i * h);
  }
  // The indicator is entire and real on the axis up to one constant phase;
  // estimate that phase from the squared samples and scan the rotated real
  // part for sign changes.
  Complex sq_sum = 0.0;
  double amp_max = 0.0;
  for (const Complex& d : det) {
    sq_sum += d * d;
    amp_max = std::max(amp_max, std::abs(d));
  }
  const double phase = 0.5 * std::arg(sq_sum);
  const Complex rot = std::exp(Complex(0.0, -phase));
  auto value = [&](double s) {
    return (rot * pole_indicator(ws, tau, s)).real();
  };

  std::vector<double> roots;
  for (int i = 0; i < scan; ++i) {
    double lo = window_min + i * h;
    double hi = lo + h;
    double flo = (rot * det[i]).real();
    double fhi = (rot * det[i + 1]).real();
    if (flo == 0.0) {
      roots.push_back(lo);
      continue;
    }
    if (flo * fhi >= 0.0) continue;
    while (hi - lo > 1e-10 * (1.0 + std::abs(lo))) {
      const double mid = 0.5 * (lo + hi);
      const double fm = value(mid);
      if (fm == 0.0) {
        lo = hi = mid;
        break;
      }
      if (flo * fm < 0.0) {
        hi = mid;
        fhi = fm;
      } else {
        lo = mid;
        flo = fm;
      }
    }
    const double root = 0.5 * (lo + hi);
    // Reject spurious zeros of the rotated real part where the full
    // indicator stays large (possible under slow phase drift).
    if (std::abs(pole_indicator(ws, tau, root)) > 1e-4 * amp_max) continue;
    roots.push_back(root);
  }
  for (std::size_t i = 1; i < roots.size(); ++i) {
    if (roots[i] - roots[i - 1] < 2.0 * h) {
      std::ostringstream msg;
      msg << "clustered eigenvalues near s = " << roots[i]
          << "; refine the window";
      throw NumericalError(msg.str());
    }
  }

  std::vector<SpectralAtom> atoms;
  for (double s : roots) {
    std::vector<Matrix> masses(mass_epsilons.size());
    for (std::size_t k = 0; k < mass_epsilons.size(); ++k) {
      const double e = mass_epsilons[k];
      masses[k] = e * skew_part(m(Complex(s, e)));
    }
    // eps * Im m(s + i eps) = mass + O(eps^2): Richardson in eps^2.
    std::vector<double> eps_sq(mass_epsilons.size());
    for (std::size_t k = 0; k < mass_epsilons.size(); ++k) {
      eps_sq[k] = mass_epsilons[k] * mass_epsilons[k];
    }
    SpectralAtom atom;
    atom.location = s;
    atom.mass = psd_project(neville_to_zero(eps_sq, masses));
    if (max_abs(atom.mass) > tol.tau_psd) atoms.push_back(std::move(atom));
  }
  return atoms;
}

TransformResult fourier_transform(const SymmetricSystem& sys,
                                  const BoundaryFrameA& frame_a,
                                  const WeightedFunction& f,
                                  const std::vector<double>& s_grid,
                                  const Tolerances& tol) {
  if (f.empty()) throw ValidationError("transform input function is empty");
  const double t1 = std::min(f.support_end(), sys.b);
  if (!(t1 > sys.a)) {
    throw ValidationError("transform input support does not meet the interval");
  }

  // 5-point Gauss-Legendre nodes on [0, 1].
  static const double gl_x[5] = {0.046910077030668, 0.230765344947158,
                                 0.5, 0.769234655052841, 0.953089922969332};
  static const double gl_w[5] = {0.118463442528095, 0.239314335249683,
                                 0.284444444444444, 0.239314335249683,
                                 0.118463442528095};

  TransformResult out;
  out.s_grid = s_grid;
  out.values.reserve(s_grid.size());
  for (double s : s_grid) {
    OperatorSolution phi =
        phi_solution(sys, frame_a, Complex(s, 0.0), t1, tol);
    const std::vector<double>& steps = phi.grid();
    Vector acc = Vector::Zero(sys.dims.pq());
    for (std::size_t i = 0; i + 1 < steps.size(); ++i) {
      const double a0 = steps[i];
      const double b0 = steps[i + 1];
      const double len = b0 - a0;
      if (len <= 0.0) continue;
      for (int k = 0; k < 5; ++k) {
        const double t = a0 + gl_x[k] * len;
        acc += (gl_w[k] * len) *
               (phi.eval(t).adjoint() * (sys.Delta(t) * f.eval(t)));
      }
    }
    out.values.push_back(std::move(acc));
  }
  return out;
}

WeightedFunction inverse_transform(const SymmetricSystem& sys,
                                   const BoundaryFrameA& frame_a,
                                   const TransformResult& g,
                                   const SpectralMeasure& sigma, int t_samples,
                                   double t_max, const Tolerances& tol) {
  if (t_samples < 2) throw ValidationError("need at least two time samples");
  double reach = t_max;
  if (std::isnan(reach)) reach = sys.unbounded() ? sys.a + 8.0 : sys.b;
  reach = std::min(reach, sys.b);
  if (!(reach > sys.a)) throw ValidationError("empty time range");

  WeightedFunction out;
  out.t.resize(t_samples);
  for (int i = 0; i < t_samples; ++i) {
    out.t[i] = sys.a +
               (reach - sys.a) * static_cast<double>(i) / (t_samples - 1);
  }
  out.values.assign(t_samples, Vector::Zero(sys.dims.n()));

  auto add_line = [&](double s, const Vector& weight) {
    OperatorSolution phi =
        phi_solution(sys, frame_a, Complex(s, 0.0), reach, tol);
    for (int i = 0; i < t_samples; ++i) {
      out.values[i] += phi.eval(out.t[i]) * weight;
    }
  };

  for (const SpectralAtom& atom : sigma.atoms) {
    add_line(atom.location, Vector(atom.mass * interp_transform(g,
                                                        atom.location)));
  }
  if (sigma.density_grid.size() >= 2) {
    for (std::size_t j = 0; j < sigma.density_grid.size(); ++j) {
      const double s = sigma.density_grid[j];
      double w = 0.0;
      if (j > 0) w += 0.5 * (s - sigma.density_grid[j - 1]);
      if (j + 1 < sigma.density_grid.size()) {
        w += 0.5 * (sigma.density_grid[j + 1] - s);
      }
      add_line(s, Vector(w * (sigma.density_values[j] *
                              interp_transform(g, s))));
    }
  }
  return out;
}

Complex sigma_inner(const TransformResult& g, const TransformResult& h,
                    const SpectralMeasure& sigma) {
  Complex total = 0.0;
  for (const SpectralAtom& atom : sigma.atoms) {
    total += interp_transform(h, atom.location)
                 .dot(atom.mass * interp_transform(g, atom.location));
  }
  if (sigma.density_grid.size() >= 2) {
    Complex prev = 0.0;
    bool have_prev = false;
    double s_prev = 0.0;
    for (std::size_t j = 0; j < sigma.density_grid.size(); ++j) {
      const double s = sigma.density_grid[j];
      const Complex val = interp_transform(h, s).dot(
          sigma.density_values[j] * interp_transform(g, s));
      if (have_prev) total += 0.5 * (s - s_prev) * (prev + val);
      prev = val;
      s_prev = s;
      have_prev = true;
    }
  }
  return total;
}

double parseval_defect(const SymmetricSystem& sys,
                       const BoundaryFrameA& frame_a,
                       const WeightedFunction& f, const SpectralMeasure& sigma,
                       const Tolerances& tol) {
  std::vector<double> s_grid = sigma.density_grid;
  for (const SpectralAtom& atom : sigma.atoms) {
    s_grid.push_back(atom.location);
  }
  std::sort(s_grid.begin(), s_grid.end());
  s_grid.erase(std::unique(s_grid.begin(), s_grid.end()), s_grid.end());
  if (s_grid.empty()) throw ValidationError("empty spectral measure");

  const TransformResult fhat =
      fourier_transform(sys, frame_a, f, s_grid, tol);
  const double norm_f = std::real(l2delta_inner(sys, f, f));
  const double norm_hat = std::real(sigma_inner(fhat, fhat, sigma));
  return norm_f - norm_hat;
}

AdmissibilityReport admissibility_check(
    const std::function<Matrix(Complex)>& m4_evaluator,
    const BoundaryParameter& tau, const std::vector<double>& y_schedule,
    double tau_lim) {
  std::vector<double> ys = y_schedule;
  if (ys.empty()) ys = {1e2, 1e3, 1e4, 1e5, 1e6};
  std::sort(ys.begin(), ys.end());
  if (ys.size() < 2) throw ValidationError("need at least two ray points");

  auto limits_at = [&](double y) -> std::pair<Matrix, Matrix> {
    const Complex lambda(0.0, y);
    const Matrix m4 = m4_evaluator(lambda);
    auto [C0, C1] = tau.at(lambda);
    const Matrix A = C0 - C1 * m4;
    auto lu = A.fullPivLu();
    if (!lu.isInvertible()) {
      throw NumericalError("admissibility solve is singular along the ray");
    }
    return {Matrix(lu.solve(C1) / y), Matrix(m4 * lu.solve(C0) / y)};
  };

  // The ray values behave like L + c/y; one linear extrapolation step in
  // 1/y over the two largest points removes the c term.
  const double y1 = ys[ys.size() - 2];
  const double y2 = ys[ys.size() - 1];
  auto [l1_a, l2_a] = limits_at(y1);
  auto [l1_b, l2_b] = limits_at(y2);

  AdmissibilityReport report;
  report.y_values = ys;
  report.limit1 = (y2 * l1_b - y1 * l1_a) / (y2 - y1);
  report.limit2 = (y2 * l2_b - y1 * l2_a) / (y2 - y1);
  report.norm1 = max_abs(report.limit1);
  report.norm2 = max_abs(report.limit2);
  report.sf0 = report.norm1 <= tau_lim && report.norm2 <= tau_lim;
  return report;
}

Matrix reconstruct_m_from_sigma(const SpectralMeasure& sigma, Complex lambda,
                                std::optional<Matrix> linear_term) {
  if (lambda.imag() == 0.0) {
    throw ValidationError("reconstruction needs a non-real point");
  }
  auto kernel = [&](double s) {
    return 1.0 / (s - lambda) - s / (1.0 + s * s);
  };

  int dim = 0;
  if (!sigma.density_values.empty()) {
    dim = static_cast<int>(sigma.density_values.front().rows());
  } else if (!sigma.atoms.empty()) {
    dim = static_cast<int>(sigma.atoms.front().mass.rows());
  } else {
    throw ValidationError("empty spectral measure");
  }
  Matrix total = Matrix::Zero(dim, dim);
  for (const SpectralAtom& atom : sigma.atoms) {
    total += kernel(atom.location) * atom.mass;
  }
  const std::size_t nd = sigma.density_grid.size();
  if (nd >= 2) {
    Matrix prev = kernel(sigma.density_grid[0]) * sigma.density_values[0];
    for (std::size_t j = 1; j < nd; ++j) {
      const Matrix cur =
          kernel(sigma.density_grid[j]) * sigma.density_values[j];
      total += 0.5 * (sigma.density_grid[j] - sigma.density_grid[j - 1]) *
               (prev + cur);
      prev = cur;
    }
    // Tail corrections: the regularized kernel integrates in closed form,
    //   int [1/(s - l) - s/(1+s^2)] ds = Log(s - l) - (1/2) log(1 + s^2),
    // which tends to 0 at +inf and to -i pi sign(Im lambda) at -inf (the
    // argument of s - lambda limits to -/+ pi). The density beyond the
    // window is approximated by the average over the outer quartile on
    // each side.
    const std::size_t quart = std::max<std::size_t>(1, nd / 4);
    Matrix rho_right = Matrix::Zero(dim, dim);
    Matrix rho_left = Matrix::Zero(dim, dim);
    for (std::size_t j = 0; j < quart; ++j) {
      rho_left += sigma.density_values[j];
      rho_right += sigma.density_values[nd - 1 - j];
    }
    rho_left /= static_cast<double>(quart);
    rho_right /= static_cast<double>(quart);
    const double R = sigma.density_grid.back();
    const double L = sigma.density_grid.front();
    // int_R^inf = F(inf) - F(R) = -F(R) and int_-inf^L = F(L) - F(-inf);
    // the path stays in one half-plane, so the principal branch is
    // continuous.
    const double sgn = lambda.imag() > 0.0 ? 1.0 : -1.0;
    const Complex tail_r =
        -(std::log(Complex(R, 0.0) - lambda) - 0.5 * std::log(1.0 + R * R));
    const Complex tail_l =
        std::log(Complex(L, 0.0) - lambda) - 0.5 * std::log(1.0 + L * L) +
        Complex(0.0, sgn * M_PI);
    total += tail_r * rho_right + tail_l * rho_left;
  }
  if (linear_term.has_value()) total += lambda * (*linear_term);
  return total;
}

Matrix fit_hermitian_offset(const SpectralMeasure& sigma,
                            const Matrix& m_reference, Complex lambda_ref) {
  const Matrix recon = reconstruct_m_from_sigma(sigma, lambda_ref);
  return hermitian_part(Matrix(m_reference - recon));
}

}  // namespace symmspectra
