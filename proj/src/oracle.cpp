#include "symmspectra/oracle.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>
#include <complex>
#include <utility>
#include <vector>

namespace symmspectra {

namespace {

constexpr double kSqrt2 = 1.4142135623730951;

// Composite 5-point Gauss-Legendre over [t0, t1] split into panels sized so
// that oscillation at rate |s| is resolved (|s| h <= 1).
template <typename F>
Complex oscillatory_quadrature(const F& integrand, double t0, double t1,
                               double rate) {
  static const double gx[5] = {-0.906179845938664, -0.538469310105683, 0.0,
                               0.538469310105683, 0.906179845938664};
  static const double gw[5] = {0.236926885056189, 0.478628670499366,
                               0.568888888888889, 0.478628670499366,
                               0.236926885056189};
  const double span = t1 - t0;
  const int panels =
      std::max(32, static_cast<int>(std::ceil(span * (1.0 + std::abs(rate)))));
  Complex acc = 0.0;
  const double h = span / panels;
  for (int k = 0; k < panels; ++k) {
    const double mid = t0 + (k + 0.5) * h;
    for (int g = 0; g < 5; ++g) {
      acc += gw[g] * 0.5 * h * integrand(mid + 0.5 * h * gx[g]);
    }
  }
  return acc;
}

Matrix example_delta_matrix(double d) {
  Matrix out(3, 3);
  const Complex half_sum = 0.5 * (d + 1.0);
  const Complex half_diff = 0.5 * kImag * (d - 1.0);
  out << half_sum, 0.0, half_diff,  //
      0.0, 1.0, 0.0,                //
      -half_diff, 0.0, half_sum;
  return out;
}

}  // namespace

ExampleSystem make_example_system(std::function<double(double)> delta,
                                  std::function<double(double)> Phi,
                                  double C) {
  ExampleSystem ex;
  ex.delta = std::move(delta);
  ex.Phi = std::move(Phi);
  ex.C = C;

  SpaceDecomposition dims{1, 1};
  auto delta_fn = ex.delta;
  ex.sys = make_system(
      dims, 0.0, std::numeric_limits<double>::infinity(), false,
      [](double) { return Matrix::Zero(3, 3); },
      [delta_fn](double t) { return example_delta_matrix(delta_fn(t)); },
      {}, "paper-example");
  ex.frame_a = identity_frame_a(dims);

  auto phi_fn = ex.Phi;
  const double total = ex.C;
  std::function<Vector(double)> theta = [phi_fn, total](double t) {
    Vector v(3);
    const Complex amp = (kImag / kSqrt2) * std::exp(phi_fn(t) - total);
    v << amp, 0.0, -kImag * amp;
    return v;
  };
  ex.frame_b = BoundaryFrameB::singular_minimal(dims, {theta});
  return ex;
}

ExampleSystem make_example_system() {
  return make_example_system([](double t) { return std::exp(-t); },
                             [](double t) { return 1.0 - std::exp(-t); },
                             1.0);
}

Matrix example_fundamental(const ExampleSystem& ex, double t, Complex lambda) {
  const Complex down = std::exp(-kImag * lambda * ex.Phi(t));
  const Complex osc_minus = std::exp(-kImag * lambda * t);
  const Complex osc_plus = std::exp(kImag * lambda * t);
  Matrix y(3, 3);
  y << down, 0.0, osc_plus,        //
      0.0, osc_minus, 0.0,         //
      -kImag * down, 0.0, kImag * osc_plus;
  return y;
}

Matrix example_m(const ExampleSystem& ex, Complex lambda) {
  if (lambda.imag() == 0.0) {
    throw ValidationError(
        "the closed-form m is defined off the real axis only");
  }
  const bool upper = lambda.imag() > 0.0;
  const Complex l = upper ? lambda : std::conj(lambda);
  Matrix m(2, 2);
  m << kImag, kImag * kSqrt2 * std::exp(kImag * l * ex.C),  //
      0.0, 0.5 * kImag;
  if (!upper) m = m.adjoint().eval();
  return m;
}

Matrix example_sigma_density(const ExampleSystem& ex, double s) {
  Matrix d(2, 2);
  const Complex osc = std::exp(kImag * s * ex.C) / kSqrt2;
  d << 1.0, osc,  //
      std::conj(osc), 0.5;
  return d / M_PI;
}

Vector example_theta(const ExampleSystem& ex, double t) {
  Vector v(3);
  const Complex amp = (kImag / kSqrt2) * std::exp(ex.Phi(t) - ex.C);
  v << amp, 0.0, -kImag * amp;
  return v;
}

Matrix example_v(const ExampleSystem& ex, double t, Complex lambda) {
  if (lambda.imag() <= 0.0) {
    throw ValidationError(
        "the closed-form v is the upper half-plane solution");
  }
  const Complex down = std::exp(-kImag * lambda * ex.Phi(t));
  const Complex up = std::exp(kImag * lambda * t);
  const Complex amp = (kImag / kSqrt2) * std::exp(kImag * lambda * ex.C);
  Matrix v(3, 2);
  v << kImag * up, amp * (down + up),  //
      0.0, 0.0,                        //
      -up, amp * (-kImag * down + kImag * up);
  return v;
}

Matrix example_phi(const ExampleSystem& ex, double t, Complex lambda) {
  const Complex down = std::exp(-kImag * lambda * ex.Phi(t));
  const Complex up = std::exp(kImag * lambda * t);
  Matrix phi(3, 2);
  phi << 0.5 * (down + up), 0.0,             //
      0.0, std::exp(-kImag * lambda * t),    //
      0.5 * kImag * (up - down), 0.0;
  return phi;
}

Matrix example_rotation() {
  Matrix r(3, 3);
  r << 1.0 / kSqrt2, 0.0, 1.0 / kSqrt2,  //
      0.0, 1.0, 0.0,                     //
      -kImag / kSqrt2, 0.0, kImag / kSqrt2;
  return r;
}

TransformResult example_transform(const ExampleSystem& ex,
                                  const RotatedComponents& f,
                                  const std::vector<double>& s_grid) {
  TransformResult out;
  out.s_grid = s_grid;
  out.values.reserve(s_grid.size());
  for (double s : s_grid) {
    const Complex f1 = oscillatory_quadrature(
        [&](double t) {
          return std::exp(kImag * s * ex.Phi(t)) * ex.delta(t) * f.f1(t) +
                 std::exp(-kImag * s * t) * f.f3(t);
        },
        0.0, f.support_end, s);
    const Complex f2 = oscillatory_quadrature(
        [&](double t) { return std::exp(kImag * s * t) * f.f2(t); }, 0.0,
        f.support_end, s);
    Vector v(2);
    v << f1 / kSqrt2, f2;
    out.values.push_back(std::move(v));
  }
  return out;
}

WeightedFunction example_embed(const ExampleSystem& ex,
                               const RotatedComponents& f, int samples) {
  const Matrix rot = example_rotation();
  auto f1 = f.f1;
  auto f2 = f.f2;
  auto f3 = f.f3;
  const double T = f.support_end;
  auto ambient = [rot, f1, f2, f3, T](double t) -> Vector {
    if (t < 0.0 || t > T) return Vector::Zero(3);
    Vector comp(3);
    comp << f1(t), f2(t), f3(t);
    return rot * comp;
  };
  WeightedFunction w = make_weighted_function(ambient, 0.0, T, samples);
  (void)ex;
  return w;
}

DiracOracle dirac_oracle(double tau_angle) {
  if (!std::isfinite(tau_angle)) {
    throw ValidationError("unsupported boundary parameter choice");
  }
  DiracOracle d;
  d.angle = tau_angle;
  SpaceDecomposition dims{1, 0};
  d.sys = make_system(
      dims, 0.0, 1.0, true, [](double) { return Matrix::Zero(2, 2); },
      [](double) { return Matrix::Identity(2, 2); }, {}, "dirac-oracle");
  d.frame_a = identity_frame_a(dims);
  d.frame_b = BoundaryFrameB::regular(dims, Matrix::Identity(2, 2),
                                      d.frame_a.J);
  Matrix c0(1, 1), c1(1, 1);
  c0 << std::cos(tau_angle);
  c1 << std::sin(tau_angle);
  d.tau = BoundaryParameter::constant(c0, c1);
  return d;
}

Complex DiracOracle::m(Complex lambda) const {
  return std::tan(lambda + angle);
}

Complex DiracOracle::m4(Complex lambda) const { return std::tan(lambda); }

Matrix DiracOracle::fundamental(double t, Complex lambda) const {
  Matrix y(2, 2);
  const Complex c = std::cos(lambda * t);
  const Complex s = std::sin(lambda * t);
  y << c, s,  //
      -s, c;
  return y;
}

Vector DiracOracle::phi(double t, double s) const {
  Vector v(2);
  v << std::cos(s * t), -std::sin(s * t);
  return v;
}

std::vector<double> DiracOracle::eigenvalues(double s_min,
                                             double s_max) const {
  std::vector<double> out;
  // Zeros of cos(s + angle): s = (k + 1/2) pi - angle.
  const long k_lo =
      static_cast<long>(std::ceil((s_min + angle) / M_PI - 0.5));
  const long k_hi =
      static_cast<long>(std::floor((s_max + angle) / M_PI - 0.5));
  for (long k = k_lo; k <= k_hi; ++k) {
    out.push_back((static_cast<double>(k) + 0.5) * M_PI - angle);
  }
  return out;
}

namespace {

using SparseMatrix = Eigen::SparseMatrix<Complex>;
using Triplet = Eigen::Triplet<Complex>;

struct BoxGrid {
  std::vector<double> t;       // node coordinates, nondecreasing
  std::vector<int> duplicate;  // indices i with t[i] == t[i+1] (interfaces)
};

BoxGrid build_grid(double a, double b, int nodes,
                   const std::vector<double>& inserts,
                   const std::vector<double>& duplicates) {
  std::vector<double> base(nodes);
  const double h = (b - a) / (nodes - 1);
  for (int i = 0; i < nodes; ++i) base[i] = a + i * h;
  auto snap = [&](double x) {
    if (x <= a || x >= b) return;
    const int idx = static_cast<int>(std::lround((x - a) / h));
    base[std::clamp(idx, 1, nodes - 2)] = x;
  };
  for (double x : inserts) snap(x);
  for (double x : duplicates) snap(x);
  std::sort(base.begin(), base.end());
  BoxGrid grid;
  grid.t = base;
  for (double x : duplicates) {
    if (x <= a || x >= b) continue;
    const auto it = std::lower_bound(grid.t.begin(), grid.t.end(), x);
    const int idx = static_cast<int>(it - grid.t.begin());
    grid.t.insert(grid.t.begin() + idx, x);
    grid.duplicate.push_back(idx);
  }
  return grid;
}

// Assembles the box-scheme system: one midpoint row block per interval,
// interface jump rows at duplicated nodes, and the n boundary rows. Returns
// the node values for every right-hand side column.
std::vector<Matrix> box_solve(const SymmetricSystem& sys,
                              const BoundaryFrameA& frame_a,
                              const BoundaryFrameB& frame_b,
                              const BoundaryParameter& tau, Complex lambda,
                              const BoxGrid& grid,
                              const std::function<Vector(double)>& source,
                              const std::vector<Matrix>& jumps) {
  if (frame_b.kind() != BoundaryFrameB::Kind::Regular) {
    throw ValidationError(
        "the dense box scheme needs a regular right endpoint");
  }
  const int n = sys.n();
  const int p = sys.dims.p;
  const int q = sys.dims.q;
  const int m = static_cast<int>(grid.t.size());
  const int unknowns = m * n;
  auto [C0, C1] = tau.at(lambda);
  if (C0.rows() != p || C0.cols() != p || C1.rows() != p || C1.cols() != p) {
    throw ValidationError("boundary parameter must act on the endpoint space");
  }

  std::vector<Triplet> trip;
  trip.reserve(static_cast<std::size_t>(unknowns) * 2 * n);
  const int rhs_count = jumps.empty() ? 1 : static_cast<int>(jumps.size());
  Eigen::MatrixXcd rhs = Eigen::MatrixXcd::Zero(unknowns, rhs_count);

  auto is_interface = [&](int i) {
    return std::find(grid.duplicate.begin(), grid.duplicate.end(), i) !=
           grid.duplicate.end();
  };

  int row = 0;
  for (int i = 0; i + 1 < m; ++i) {
    if (is_interface(i)) {
      // Jump rows J (y_{i+1} - y_i) = prescribed column.
      for (int r = 0; r < n; ++r) {
        for (int c = 0; c < n; ++c) {
          const Complex jrc = sys.J(r, c);
          if (jrc != Complex(0.0)) {
            trip.emplace_back(row + r, (i + 1) * n + c, jrc);
            trip.emplace_back(row + r, i * n + c, -jrc);
          }
        }
        for (int k = 0; k < rhs_count; ++k) {
          rhs(row + r, k) = jumps.empty() ? Complex(0.0) : jumps[k](r, 0);
        }
      }
      row += n;
      continue;
    }
    const double h = grid.t[i + 1] - grid.t[i];
    const double mid = 0.5 * (grid.t[i] + grid.t[i + 1]);
    const Matrix coeff = sys.B(mid) + lambda * sys.Delta(mid);
    const Matrix left = -sys.J - 0.5 * h * coeff;
    const Matrix right = sys.J - 0.5 * h * coeff;
    const Vector src =
        source ? Vector(h * (sys.Delta(mid) * source(mid))) : Vector();
    for (int r = 0; r < n; ++r) {
      for (int c = 0; c < n; ++c) {
        if (left(r, c) != Complex(0.0))
          trip.emplace_back(row + r, i * n + c, left(r, c));
        if (right(r, c) != Complex(0.0))
          trip.emplace_back(row + r, (i + 1) * n + c, right(r, c));
      }
      if (source) rhs(row + r, 0) = src(r);
    }
    row += n;
  }

  // Boundary rows. Gamma blocks at a come from Utilde y_0, at b from X_b
  // y_{m-1}; the homogeneous conditions are Gamma1a y = 0, the paired middle
  // condition Gammahat_a y = Gammahat_b y, and C0 Gamma0b y + C1 Gamma1b y = 0.
  const Matrix& Ut = frame_a.Utilde;
  const Matrix& Xb = frame_b.Xb();
  for (int r = 0; r < p; ++r) {
    for (int c = 0; c < n; ++c) {
      const Complex u = Ut(p + q + r, c);
      if (u != Complex(0.0)) trip.emplace_back(row, c, u);
    }
    ++row;
  }
  for (int r = 0; r < q; ++r) {
    for (int c = 0; c < n; ++c) {
      const Complex ua = Ut(p + r, c);
      if (ua != Complex(0.0)) trip.emplace_back(row, c, ua);
      const Complex ub = Xb(p + r, c);
      if (ub != Complex(0.0))
        trip.emplace_back(row, (m - 1) * n + c, -ub);
    }
    ++row;
  }
  for (int r = 0; r < p; ++r) {
    for (int c = 0; c < n; ++c) {
      Complex coeff = 0.0;
      for (int k = 0; k < p; ++k) {
        coeff += C0(r, k) * Xb(k, c) + C1(r, k) * Xb(p + q + k, c);
      }
      if (coeff != Complex(0.0))
        trip.emplace_back(row, (m - 1) * n + c, coeff);
    }
    ++row;
  }
  if (row != unknowns) {
    throw NumericalError("box scheme assembled a non-square system");
  }

  SparseMatrix A(unknowns, unknowns);
  A.setFromTriplets(trip.begin(), trip.end());
  A.makeCompressed();
  Eigen::SparseLU<SparseMatrix> lu;
  lu.compute(A);
  if (lu.info() != Eigen::Success) {
    throw NumericalError(
        "box scheme factorization failed (lambda near an eigenvalue?)");
  }
  Eigen::MatrixXcd sol = lu.solve(rhs);
  if (lu.info() != Eigen::Success) {
    throw NumericalError("box scheme solve failed");
  }

  std::vector<Matrix> nodes(rhs_count);
  for (int k = 0; k < rhs_count; ++k) {
    Matrix values(n, m);
    for (int i = 0; i < m; ++i) values.col(i) = sol.col(k).segment(i * n, n);
    nodes[k] = std::move(values);
  }
  return nodes;
}

}  // namespace

WeightedFunction fd_bvp_solve(const SymmetricSystem& sys,
                              const BoundaryFrameA& frame_a,
                              const BoundaryFrameB& frame_b,
                              const BoundaryParameter& tau,
                              const WeightedFunction& f, Complex lambda,
                              int nodes) {
  if (!sys.regular_b) {
    throw ValidationError("the dense solver works on bounded intervals only");
  }
  BoxGrid grid = build_grid(sys.a, sys.b, nodes, sys.breakpoints, {});
  auto source = [&f](double t) { return Vector(f.eval(t)); };
  std::vector<Matrix> sol =
      box_solve(sys, frame_a, frame_b, tau, lambda, grid, source, {});
  WeightedFunction out;
  out.t = grid.t;
  out.values.reserve(grid.t.size());
  for (int i = 0; i < static_cast<int>(grid.t.size()); ++i) {
    out.values.push_back(sol[0].col(i));
  }
  return out;
}

Matrix fd_green_matrix(const SymmetricSystem& sys,
                       const BoundaryFrameA& frame_a,
                       const BoundaryFrameB& frame_b,
                       const BoundaryParameter& tau, double x, double t0,
                       Complex lambda, int nodes) {
  if (!sys.regular_b) {
    throw ValidationError("the dense solver works on bounded intervals only");
  }
  if (x == t0) {
    throw ValidationError("the kernel jumps at coinciding arguments");
  }
  const int n = sys.n();
  BoxGrid grid = build_grid(sys.a, sys.b, nodes, {x}, {t0});
  std::vector<Matrix> jumps;
  for (int j = 0; j < n; ++j) {
    Matrix e = Matrix::Zero(n, 1);
    e(j, 0) = 1.0;
    jumps.push_back(e);
  }
  std::vector<Matrix> sol =
      box_solve(sys, frame_a, frame_b, tau, lambda, grid, nullptr, jumps);

  // Evaluate at x, taking the correct side if x snapped onto the interface.
  int idx = -1;
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < static_cast<int>(grid.t.size()); ++i) {
    const double d = std::abs(grid.t[i] - x);
    if (d < best) {
      best = d;
      idx = i;
    }
  }
  Matrix g(n, n);
  for (int j = 0; j < n; ++j) g.col(j) = sol[j].col(idx);
  return g;
}

}  // namespace symmspectra
