#include "symmspectra/serialize.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <memory>
#include <sstream>
#include <utility>

#include <Eigen/Dense>

#include "json.hpp"
#include "symmspectra/oracle.hpp"

namespace symmspectra {

using nlohmann::json;

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= static_cast<std::uint64_t>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string fnv1a64_hex(std::string_view bytes) {
  static const char* digits = "0123456789abcdef";
  std::uint64_t h = fnv1a64(bytes);
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[h & 0xf];
    h >>= 4;
  }
  return out;
}

namespace {

double parse_env_double(const char* name) {
  const char* raw = std::getenv(name);
  if (raw == nullptr) return std::numeric_limits<double>::quiet_NaN();
  char* end = nullptr;
  const double v = std::strtod(raw, &end);
  if (end == raw || *end != '\0' || !(v > 0.0)) {
    throw ValidationError(std::string(name) +
                          " must be a positive number, got '" + raw + "'");
  }
  return v;
}

}  // namespace

Tolerances env_adjusted_tolerances(Tolerances base) {
  const double ode = parse_env_double("SYMM_SPECTRA_TOL_ODE");
  if (!std::isnan(ode)) base.tol_ode = ode;
  const double id = parse_env_double("SYMM_SPECTRA_TOL_ID");
  if (!std::isnan(id)) base.tau_id = id;
  return base;
}

std::vector<double> env_eps_schedule(std::vector<double> fallback) {
  const char* raw = std::getenv("SYMM_SPECTRA_EPS_SCHEDULE");
  if (raw == nullptr) return fallback;
  std::vector<double> out = parse_double_list(raw);
  if (out.empty()) {
    throw ValidationError("SYMM_SPECTRA_EPS_SCHEDULE is set but empty");
  }
  return out;
}

Complex parse_complex_literal(const std::string& text) {
  std::string s;
  for (char c : text) {
    if (!std::isspace(static_cast<unsigned char>(c))) s.push_back(c);
  }
  if (s.empty()) throw ValidationError("empty complex literal");

  auto parse_coeff = [](const std::string& part, double sign_only) -> double {
    // The coefficient of i may be empty ("i", "+i", "-i").
    if (part.empty()) return sign_only;
    if (part == "+") return 1.0;
    if (part == "-") return -1.0;
    char* end = nullptr;
    const double v = std::strtod(part.c_str(), &end);
    if (end != part.c_str() + part.size()) {
      throw ValidationError("malformed number in complex literal: '" + part +
                            "'");
    }
    return v;
  };

  if (s.back() == 'i') {
    const std::string body = s.substr(0, s.size() - 1);
    // Find the sign splitting real and imaginary parts; skip a leading sign
    // and signs that belong to exponents.
    std::size_t split = std::string::npos;
    for (std::size_t k = body.size(); k-- > 1;) {
      if ((body[k] == '+' || body[k] == '-') &&
          body[k - 1] != 'e' && body[k - 1] != 'E') {
        split = k;
        break;
      }
    }
    if (split == std::string::npos) {
      return Complex(0.0, parse_coeff(body, 1.0));
    }
    const double re = parse_coeff(body.substr(0, split), 1.0);
    const double im = parse_coeff(body.substr(split), 1.0);
    return Complex(re, im);
  }
  return Complex(parse_coeff(s, 1.0), 0.0);
}

std::vector<Complex> parse_complex_list(const std::string& text) {
  std::vector<Complex> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    out.push_back(parse_complex_literal(item));
  }
  return out;
}

std::vector<double> parse_double_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    char* end = nullptr;
    const double v = std::strtod(item.c_str(), &end);
    if (end == item.c_str() || *end != '\0') {
      throw ValidationError("malformed number in list: '" + item + "'");
    }
    out.push_back(v);
  }
  return out;
}

namespace {

[[noreturn]] void fail_field(const std::string& where, const std::string& why) {
  throw ValidationError("config field '" + where + "': " + why);
}

const json& require_key(const json& obj, const std::string& key,
                        const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) {
    fail_field(where.empty() ? key : where + "." + key, "missing");
  }
  return obj.at(key);
}

double json_double(const json& j, const std::string& where) {
  if (!j.is_number()) fail_field(where, "expected a number");
  return j.get<double>();
}

Complex json_complex(const json& j, const std::string& where) {
  if (j.is_number()) return Complex(j.get<double>(), 0.0);
  if (j.is_array() && j.size() == 2 && j[0].is_number() && j[1].is_number()) {
    return Complex(j[0].get<double>(), j[1].get<double>());
  }
  fail_field(where, "expected a number or an [re, im] pair");
}

Matrix json_matrix(const json& j, const std::string& where) {
  if (!j.is_array() || j.empty()) {
    fail_field(where, "expected a non-empty array of rows");
  }
  const std::size_t rows = j.size();
  if (!j[0].is_array() || j[0].empty()) {
    fail_field(where, "rows must be non-empty arrays");
  }
  const std::size_t cols = j[0].size();
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < rows; ++i) {
    if (!j[i].is_array() || j[i].size() != cols) {
      fail_field(where + " row " + std::to_string(i), "ragged matrix");
    }
    for (std::size_t k = 0; k < cols; ++k) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) =
          json_complex(j[i][k], where + "[" + std::to_string(i) + "][" +
                                    std::to_string(k) + "]");
    }
  }
  return m;
}

json complex_to_json(Complex z) { return json::array({z.real(), z.imag()}); }

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index k = 0; k < m.cols(); ++k) {
      row.push_back(complex_to_json(m(i, k)));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

// One polynomial piece of a coefficient entry: sum_k c_k (t - t0)^k on
// [t0, t1]. Entries evaluate to 0 outside all their pieces.
struct PolyPiece {
  double t0 = -std::numeric_limits<double>::infinity();
  double t1 = std::numeric_limits<double>::infinity();
  std::vector<Complex> coeffs;
};
using EntryTable = std::vector<PolyPiece>;

Complex eval_entry(const EntryTable& entry, double t) {
  for (const PolyPiece& piece : entry) {
    if (t < piece.t0 || t > piece.t1) continue;
    Complex acc = 0.0;
    // polynomials are written in the local variable t - t0; an unbounded
    // piece (a plain constant) has no left edge to anchor to, so it stays
    // in the global variable
    const double x = std::isfinite(piece.t0) ? t - piece.t0 : t;
    for (std::size_t k = piece.coeffs.size(); k-- > 0;) {
      acc = acc * x + piece.coeffs[k];
    }
    return acc;
  }
  return 0.0;
}

EntryTable json_entry_table(const json& j, const std::string& where) {
  EntryTable entry;
  if (j.is_number() ||
      (j.is_array() && j.size() == 2 && j[0].is_number() &&
       j[1].is_number())) {
    PolyPiece piece;
    piece.coeffs = {json_complex(j, where)};
    entry.push_back(std::move(piece));
    return entry;
  }
  if (!j.is_array()) {
    fail_field(where, "expected a constant or an array of pieces");
  }
  for (std::size_t i = 0; i < j.size(); ++i) {
    const json& p = j[i];
    const std::string pw = where + " piece " + std::to_string(i);
    if (!p.is_object()) fail_field(pw, "expected an object");
    PolyPiece piece;
    piece.t0 = json_double(require_key(p, "t0", pw), pw + ".t0");
    piece.t1 = json_double(require_key(p, "t1", pw), pw + ".t1");
    if (!(piece.t1 > piece.t0)) fail_field(pw, "needs t1 > t0");
    const json& cj = require_key(p, "coeffs", pw);
    if (!cj.is_array() || cj.empty()) {
      fail_field(pw + ".coeffs", "expected a non-empty array");
    }
    for (std::size_t k = 0; k < cj.size(); ++k) {
      piece.coeffs.push_back(
          json_complex(cj[k], pw + ".coeffs[" + std::to_string(k) + "]"));
    }
    entry.push_back(std::move(piece));
  }
  return entry;
}

CoefficientFn json_coefficient(const json& j, int n, const std::string& where,
                               std::vector<double>* knots) {
  if (!j.is_array() || static_cast<int>(j.size()) != n) {
    fail_field(where, "expected " + std::to_string(n) + " rows");
  }
  auto table = std::make_shared<std::vector<EntryTable>>();
  table->reserve(static_cast<std::size_t>(n) * n);
  for (int i = 0; i < n; ++i) {
    const json& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<int>(row.size()) != n) {
      fail_field(where + " row " + std::to_string(i),
                 "expected " + std::to_string(n) + " entries");
    }
    for (int k = 0; k < n; ++k) {
      EntryTable entry = json_entry_table(
          row[static_cast<std::size_t>(k)],
          where + "[" + std::to_string(i) + "][" + std::to_string(k) + "]");
      for (const PolyPiece& piece : entry) {
        if (std::isfinite(piece.t0)) knots->push_back(piece.t0);
        if (std::isfinite(piece.t1)) knots->push_back(piece.t1);
      }
      table->push_back(std::move(entry));
    }
  }
  return [table, n](double t) {
    Matrix m(n, n);
    for (int i = 0; i < n; ++i) {
      for (int k = 0; k < n; ++k) {
        m(i, k) = eval_entry((*table)[static_cast<std::size_t>(i * n + k)], t);
      }
    }
    return m;
  };
}

// Matrix cosine/sine of a Hermitian matrix by unitary diagonalization.
std::pair<Matrix, Matrix> cos_sin_pair(const Matrix& b) {
  if (hermiticity_defect(b) > 1e-12 * (1.0 + max_abs(b))) {
    throw ValidationError("tau.B_sa must be Hermitian");
  }
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

BoundaryParameter json_tau(const json& j, int p) {
  if (!j.is_object()) fail_field("tau", "expected an object");
  auto check_dims = [p](const Matrix& m, const std::string& where) {
    if (m.rows() != p || m.cols() != p) {
      fail_field(where, "expected a " + std::to_string(p) + "x" +
                            std::to_string(p) + " matrix");
    }
  };
  if (j.contains("C0") || j.contains("C1")) {
    const Matrix c0 = json_matrix(require_key(j, "C0", "tau"), "tau.C0");
    const Matrix c1 = json_matrix(require_key(j, "C1", "tau"), "tau.C1");
    check_dims(c0, "tau.C0");
    check_dims(c1, "tau.C1");
    return BoundaryParameter::constant(c0, c1);
  }
  if (j.contains("B_sa")) {
    const Matrix b = json_matrix(j.at("B_sa"), "tau.B_sa");
    check_dims(b, "tau.B_sa");
    auto [c0, c1] = cos_sin_pair(b);
    return BoundaryParameter::constant(c0, c1);
  }
  if (j.contains("poly_C0") || j.contains("poly_C1")) {
    auto read_poly = [&](const char* key) {
      const json& pj = require_key(j, key, "tau");
      if (!pj.is_array() || pj.empty()) {
        fail_field(std::string("tau.") + key,
                   "expected a non-empty array of matrices");
      }
      if (pj.size() > 5) {
        fail_field(std::string("tau.") + key,
                   "polynomial degree is limited to 4");
      }
      std::vector<Matrix> coeffs;
      for (std::size_t k = 0; k < pj.size(); ++k) {
        Matrix m = json_matrix(pj[k], std::string("tau.") + key + "[" +
                                          std::to_string(k) + "]");
        check_dims(m, std::string("tau.") + key);
        coeffs.push_back(std::move(m));
      }
      return coeffs;
    };
    const std::vector<Matrix> c0s = read_poly("poly_C0");
    const std::vector<Matrix> c1s = read_poly("poly_C1");
    const std::string var = j.value("var", std::string("lambda"));
    if (var != "lambda" && var != "conj_lambda") {
      fail_field("tau.var", "expected 'lambda' or 'conj_lambda'");
    }
    const bool use_conj = var == "conj_lambda";
    return BoundaryParameter::holomorphic(
        [c0s, c1s, use_conj, p](Complex lambda) {
          const Complex z = use_conj ? std::conj(lambda) : lambda;
          auto horner = [&](const std::vector<Matrix>& cs) {
            Matrix acc = Matrix::Zero(p, p);
            for (std::size_t k = cs.size(); k-- > 0;) {
              acc = (acc * z + cs[k]).eval();
            }
            return acc;
          };
          return std::make_pair(horner(c0s), horner(c1s));
        });
  }
  fail_field("tau", "expected {C0, C1}, {B_sa}, or {poly_C0, poly_C1}");
}

void parse_inline_system(JobConfig& cfg, const json& s, const Tolerances& tol) {
  const json& interval = require_key(s, "interval", "system");
  if (!interval.is_array() || interval.size() != 2) {
    fail_field("system.interval", "expected [a, b]");
  }
  const double a = json_double(interval[0], "system.interval[0]");
  double b = std::numeric_limits<double>::infinity();
  if (interval[1].is_string()) {
    if (interval[1].get<std::string>() != "inf") {
      fail_field("system.interval[1]", "expected a number or 'inf'");
    }
  } else {
    b = json_double(interval[1], "system.interval[1]");
  }
  SpaceDecomposition dims;
  dims.p = require_key(s, "p", "system").get<int>();
  dims.q = require_key(s, "q", "system").get<int>();
  const bool regular_b = s.value("regular_b", std::isfinite(b));
  if (regular_b && !std::isfinite(b)) {
    fail_field("system.regular_b", "a regular right endpoint must be finite");
  }

  std::vector<double> knots;
  CoefficientFn bfn =
      json_coefficient(require_key(s, "B", "system"), dims.n(), "system.B",
                       &knots);
  CoefficientFn dfn = json_coefficient(require_key(s, "Delta", "system"),
                                       dims.n(), "system.Delta", &knots);
  if (s.contains("breakpoints")) {
    const json& bp = s.at("breakpoints");
    if (!bp.is_array()) fail_field("system.breakpoints", "expected an array");
    for (std::size_t i = 0; i < bp.size(); ++i) {
      knots.push_back(
          json_double(bp[i], "system.breakpoints[" + std::to_string(i) + "]"));
    }
  }
  std::sort(knots.begin(), knots.end());
  knots.erase(std::unique(knots.begin(), knots.end()), knots.end());
  std::vector<double> interior;
  for (double t : knots) {
    if (t > a && t < b) interior.push_back(t);
  }

  cfg.sys = make_system(dims, a, b, regular_b, std::move(bfn), std::move(dfn),
                        std::move(interior), s.value("name", std::string{}),
                        tol);
  cfg.system_name = "inline";
}

void parse_system(JobConfig& cfg, const json& doc, const Tolerances& tol) {
  const json& s = require_key(doc, "system", "");
  std::string name;
  const json* obj = nullptr;
  if (s.is_string()) {
    name = s.get<std::string>();
  } else if (s.is_object() && s.contains("name") && s.at("name").is_string()) {
    name = s.at("name").get<std::string>();
    obj = &s;
  }
  if (name == "paper-example") {
    ExampleSystem ex = make_example_system();
    cfg.sys = ex.sys;
    cfg.frame_a = ex.frame_a;
    cfg.frame_b = ex.frame_b;
    cfg.system_name = name;
    return;
  }
  if (name == "dirac-oracle") {
    const double angle = obj != nullptr ? obj->value("angle", 0.0) : 0.0;
    DiracOracle d = dirac_oracle(angle);
    cfg.sys = d.sys;
    cfg.frame_a = d.frame_a;
    cfg.frame_b = d.frame_b;
    cfg.tau = d.tau;
    cfg.has_tau = true;
    cfg.system_name = name;
    return;
  }
  if (!name.empty()) {
    fail_field("system", "unknown registry name '" + name + "'");
  }
  if (!s.is_object()) {
    fail_field("system", "expected a registry name or an inline object");
  }
  parse_inline_system(cfg, s, tol);
  // Inline defaults; overridden below when the config names frames.
  cfg.frame_a = identity_frame_a(cfg.sys.dims);
  if (cfg.sys.regular_b) {
    cfg.frame_b = BoundaryFrameB::regular(
        cfg.sys.dims, Matrix::Identity(cfg.sys.n(), cfg.sys.n()), cfg.sys.J,
        tol);
  }
  // A singular inline system keeps the default-constructed frame until the
  // config provides reference functions (checked after frame parsing).
}

void parse_job_section(JobConfig& cfg, const json& doc) {
  if (!doc.contains("job")) return;
  const json& j = doc.at("job");
  if (!j.is_object()) fail_field("job", "expected an object");
  if (j.contains("lambda_grid")) {
    const json& g = j.at("lambda_grid");
    if (!g.is_array()) fail_field("job.lambda_grid", "expected an array");
    for (std::size_t i = 0; i < g.size(); ++i) {
      cfg.lambda_grid.push_back(
          json_complex(g[i], "job.lambda_grid[" + std::to_string(i) + "]"));
    }
  }
  if (j.contains("window")) {
    const json& w = j.at("window");
    if (!w.is_array() || w.size() != 2) {
      fail_field("job.window", "expected [min, max]");
    }
    cfg.has_window = true;
    cfg.window_min = json_double(w[0], "job.window[0]");
    cfg.window_max = json_double(w[1], "job.window[1]");
  }
  auto read_list = [&](const char* key, std::vector<double>* out) {
    if (!j.contains(key)) return;
    const json& e = j.at(key);
    if (!e.is_array()) fail_field(std::string("job.") + key,
                                  "expected an array of numbers");
    for (std::size_t i = 0; i < e.size(); ++i) {
      out->push_back(json_double(e[i], std::string("job.") + key + "[" +
                                           std::to_string(i) + "]"));
    }
  };
  read_list("eps", &cfg.eps_schedule);
  read_list("mass_eps", &cfg.mass_epsilons);
  if (j.contains("grid_points")) cfg.grid_points = j.at("grid_points").get<int>();
  if (j.contains("t_samples")) cfg.t_samples = j.at("t_samples").get<int>();
  if (j.contains("input")) cfg.input_path = j.at("input").get<std::string>();
  if (j.contains("measure")) cfg.measure_path = j.at("measure").get<std::string>();
  if (j.contains("direction")) cfg.direction = j.at("direction").get<std::string>();
  if (j.contains("lambda")) {
    cfg.has_lambda = true;
    cfg.lambda = json_complex(j.at("lambda"), "job.lambda");
  }
}

}  // namespace

JobConfig parse_job_config(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("config parse error: ") + e.what());
  }
  if (!doc.is_object()) {
    throw ValidationError("config root must be a JSON object");
  }

  JobConfig cfg;
  cfg.canonical = doc.dump();
  cfg.config_hash = fnv1a64_hex(cfg.canonical);
  cfg.tol = env_adjusted_tolerances();

  parse_system(cfg, doc, cfg.tol);

  if (doc.contains("frame_a")) {
    const json& f = doc.at("frame_a");
    const Matrix u = json_matrix(require_key(f, "U", "frame_a"), "frame_a.U");
    std::optional<Matrix> hint;
    if (f.contains("Utilde")) {
      hint = json_matrix(f.at("Utilde"), "frame_a.Utilde");
    }
    cfg.frame_a = build_frame_a(cfg.sys.dims, u, hint, cfg.tol);
  }
  if (doc.contains("frame_b")) {
    const json& f = doc.at("frame_b");
    if (f.contains("Xb")) {
      cfg.frame_b = BoundaryFrameB::regular(
          cfg.sys.dims, json_matrix(f.at("Xb"), "frame_b.Xb"), cfg.sys.J,
          cfg.tol);
    } else if (f.contains("theta")) {
      const std::string ref = f.at("theta").get<std::string>();
      if (ref != "paper-example") {
        fail_field("frame_b.theta",
                   "the only registered reference family is 'paper-example'");
      }
      if (cfg.sys.dims.p != 1 || cfg.sys.dims.q != 1) {
        fail_field("frame_b.theta",
                   "'paper-example' references need p = 1, q = 1");
      }
      cfg.frame_b = make_example_system().frame_b;
    } else {
      fail_field("frame_b", "expected {Xb} or {theta}");
    }
  }
  if (cfg.system_name == "inline" && !cfg.sys.regular_b &&
      cfg.frame_b.kind() == BoundaryFrameB::Kind::Regular &&
      cfg.frame_b.Xb().size() == 0) {
    fail_field("frame_b",
               "a singular inline system needs reference functions "
               "({theta: ...})");
  }

  if (doc.contains("tau")) {
    cfg.tau = json_tau(doc.at("tau"), cfg.sys.dims.p);
    cfg.has_tau = true;
  } else if (!cfg.has_tau && cfg.sys.regular_b) {
    // Default boundary condition at a regular endpoint.
    cfg.tau = BoundaryParameter::constant(
        Matrix::Identity(cfg.sys.dims.p, cfg.sys.dims.p),
        Matrix::Zero(cfg.sys.dims.p, cfg.sys.dims.p));
  }

  parse_job_section(cfg, doc);
  if (cfg.eps_schedule.empty()) {
    cfg.eps_schedule = env_eps_schedule();
  }
  return cfg;
}

JobConfig load_job_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_job_config(buf.str());
}

std::string format_double(double v) {
  std::array<char, 40> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  out += "\"";
  return out;
}

std::string CsvTable::str() const {
  std::string out;
  auto append_row = [&out](const std::vector<std::string>& row) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i != 0) out.push_back(',');
      out += csv_escape(row[i]);
    }
    out += "\r\n";
  };
  append_row(header);
  for (const auto& row : rows) append_row(row);
  return out;
}

std::vector<std::string> matrix_entry_headers(const std::string& prefix,
                                              int rows, int cols) {
  std::vector<std::string> out;
  for (int i = 0; i < rows; ++i) {
    for (int k = 0; k < cols; ++k) {
      const std::string base =
          prefix + "_" + std::to_string(i) + std::to_string(k);
      out.push_back(base + "_re");
      out.push_back(base + "_im");
    }
  }
  return out;
}

void append_complex_fields(std::vector<std::string>& row, Complex z) {
  row.push_back(format_double(z.real()));
  row.push_back(format_double(z.imag()));
}

void append_matrix_fields(std::vector<std::string>& row, const Matrix& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index k = 0; k < m.cols(); ++k) {
      append_complex_fields(row, m(i, k));
    }
  }
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

}  // namespace

NumericCsv parse_numeric_csv(const std::string& text) {
  NumericCsv out;
  std::size_t pos = 0;
  bool first = true;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    std::string line = text.substr(pos, end - pos);
    pos = end + 1;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    // '#' lines carry provenance when a table is emitted to a terminal;
    // they are not part of the table.
    if (line.front() == '#') continue;
    const std::vector<std::string> fields = split_csv_line(line);
    if (first) {
      out.header = fields;
      first = false;
      continue;
    }
    std::vector<double> row;
    row.reserve(fields.size());
    for (const std::string& f : fields) {
      if (f.empty()) {
        row.push_back(std::numeric_limits<double>::quiet_NaN());
        continue;
      }
      char* endp = nullptr;
      const double v = std::strtod(f.c_str(), &endp);
      if (endp == f.c_str()) {
        throw ValidationError("non-numeric CSV field: '" + f + "'");
      }
      row.push_back(v);
    }
    out.rows.push_back(std::move(row));
  }
  if (first) throw ValidationError("CSV input has no header row");
  return out;
}

NumericCsv read_numeric_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open CSV file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_numeric_csv(buf.str());
}

namespace {

int component_count(const NumericCsv& data, const std::string& what) {
  if (data.header.size() < 3 || data.header.size() % 2 == 0) {
    throw ValidationError(what +
                          " CSV needs columns (x, c_0_re, c_0_im, ...)");
  }
  return static_cast<int>((data.header.size() - 1) / 2);
}

}  // namespace

CsvTable weighted_function_to_csv(const WeightedFunction& f) {
  CsvTable out;
  const int ncomp = f.values.empty() ? 0 : static_cast<int>(f.values[0].size());
  out.header.push_back("t");
  for (int k = 0; k < ncomp; ++k) {
    out.header.push_back("f_" + std::to_string(k) + "_re");
    out.header.push_back("f_" + std::to_string(k) + "_im");
  }
  for (std::size_t i = 0; i < f.t.size(); ++i) {
    std::vector<std::string> row;
    row.push_back(format_double(f.t[i]));
    for (int k = 0; k < ncomp; ++k) {
      append_complex_fields(row, f.values[i](k));
    }
    out.rows.push_back(std::move(row));
  }
  return out;
}

WeightedFunction weighted_function_from_csv(const NumericCsv& data) {
  const int ncomp = component_count(data, "sampled-function");
  WeightedFunction f;
  for (const auto& row : data.rows) {
    if (row.size() != data.header.size()) {
      throw ValidationError("CSV row width does not match the header");
    }
    f.t.push_back(row[0]);
    Vector v(ncomp);
    for (int k = 0; k < ncomp; ++k) {
      v(k) = Complex(row[static_cast<std::size_t>(1 + 2 * k)],
                     row[static_cast<std::size_t>(2 + 2 * k)]);
    }
    f.values.push_back(std::move(v));
  }
  for (std::size_t i = 1; i < f.t.size(); ++i) {
    if (!(f.t[i] > f.t[i - 1])) {
      throw ValidationError("sample grid must be strictly increasing");
    }
  }
  return f;
}

CsvTable transform_to_csv(const TransformResult& g) {
  CsvTable out;
  const int ncomp = g.values.empty() ? 0 : static_cast<int>(g.values[0].size());
  out.header.push_back("s");
  for (int k = 0; k < ncomp; ++k) {
    out.header.push_back("g_" + std::to_string(k) + "_re");
    out.header.push_back("g_" + std::to_string(k) + "_im");
  }
  for (std::size_t i = 0; i < g.s_grid.size(); ++i) {
    std::vector<std::string> row;
    row.push_back(format_double(g.s_grid[i]));
    for (int k = 0; k < ncomp; ++k) {
      append_complex_fields(row, g.values[i](k));
    }
    out.rows.push_back(std::move(row));
  }
  return out;
}

TransformResult transform_from_csv(const NumericCsv& data) {
  const int ncomp = component_count(data, "transform");
  TransformResult g;
  for (const auto& row : data.rows) {
    if (row.size() != data.header.size()) {
      throw ValidationError("CSV row width does not match the header");
    }
    g.s_grid.push_back(row[0]);
    Vector v(ncomp);
    for (int k = 0; k < ncomp; ++k) {
      v(k) = Complex(row[static_cast<std::size_t>(1 + 2 * k)],
                     row[static_cast<std::size_t>(2 + 2 * k)]);
    }
    g.values.push_back(std::move(v));
  }
  for (std::size_t i = 1; i < g.s_grid.size(); ++i) {
    if (!(g.s_grid[i] > g.s_grid[i - 1])) {
      throw ValidationError("spectral grid must be strictly increasing");
    }
  }
  return g;
}

namespace {

json tolerances_json(const Tolerances& tol) {
  json out;
  out["tol_ode"] = tol.tol_ode;
  out["tau_herm"] = tol.tau_herm;
  out["tau_def"] = tol.tau_def;
  out["tau_quad"] = tol.tau_quad;
  out["tau_frame"] = tol.tau_frame;
  out["tau_sub"] = tol.tau_sub;
  out["tau_form"] = tol.tau_form;
  out["tau_id"] = tol.tau_id;
  out["tau_psd"] = tol.tau_psd;
  out["kappa_max"] = tol.kappa_max;
  out["cauchy_tol"] = tol.cauchy_tol;
  out["conv_tol"] = tol.conv_tol;
  out["gap_min"] = tol.gap_min;
  out["tail_frac"] = tol.tail_frac;
  return out;
}

}  // namespace

std::string tolerances_to_json_text(const Tolerances& tol) {
  return tolerances_json(tol).dump();
}

std::string measure_to_json_text(const SpectralMeasure& sigma,
                                 const MeasureProvenance& prov,
                                 const std::string& config_hash,
                                 const Tolerances& tol) {
  json doc;
  doc["config_hash"] = config_hash;
  doc["tolerances"] = tolerances_json(tol);
  doc["window"] = json::array({sigma.window_min, sigma.window_max});
  json atoms = json::array();
  for (const SpectralAtom& atom : sigma.atoms) {
    json a;
    a["s"] = atom.location;
    a["mass"] = matrix_to_json(atom.mass);
    atoms.push_back(std::move(a));
  }
  doc["atoms"] = std::move(atoms);
  json density;
  density["s_grid"] = sigma.density_grid;
  json values = json::array();
  for (const Matrix& v : sigma.density_values) {
    values.push_back(matrix_to_json(v));
  }
  density["values"] = std::move(values);
  doc["density"] = std::move(density);
  json p;
  p["eps_schedule"] = prov.eps_schedule;
  p["mass_epsilons"] = prov.mass_epsilons;
  p["grid_points"] = prov.grid_points;
  p["exclusion_radius"] = prov.exclusion_radius;
  p["edge_density_sup"] = prov.edge_density_sup;
  doc["provenance"] = std::move(p);
  return doc.dump(2) + "\n";
}

SpectralMeasure measure_from_json_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("measure parse error: ") + e.what());
  }
  SpectralMeasure sigma;
  if (doc.contains("window") && doc.at("window").is_array() &&
      doc.at("window").size() == 2) {
    sigma.window_min = json_double(doc.at("window")[0], "window[0]");
    sigma.window_max = json_double(doc.at("window")[1], "window[1]");
  }
  if (doc.contains("atoms")) {
    const json& atoms = doc.at("atoms");
    if (!atoms.is_array()) fail_field("atoms", "expected an array");
    for (std::size_t i = 0; i < atoms.size(); ++i) {
      const json& a = atoms[i];
      SpectralAtom atom;
      atom.location =
          json_double(require_key(a, "s", "atoms[" + std::to_string(i) + "]"),
                      "atoms[" + std::to_string(i) + "].s");
      atom.mass = json_matrix(
          require_key(a, "mass", "atoms[" + std::to_string(i) + "]"),
          "atoms[" + std::to_string(i) + "].mass");
      sigma.atoms.push_back(std::move(atom));
    }
  }
  if (doc.contains("density")) {
    const json& d = doc.at("density");
    const json& grid = require_key(d, "s_grid", "density");
    const json& values = require_key(d, "values", "density");
    if (!grid.is_array() || !values.is_array() ||
        grid.size() != values.size()) {
      fail_field("density", "s_grid and values must be parallel arrays");
    }
    for (std::size_t i = 0; i < grid.size(); ++i) {
      sigma.density_grid.push_back(
          json_double(grid[i], "density.s_grid[" + std::to_string(i) + "]"));
      sigma.density_values.push_back(json_matrix(
          values[i], "density.values[" + std::to_string(i) + "]"));
    }
  }
  return sigma;
}

SpectralMeasure load_measure(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open measure file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return measure_from_json_text(buf.str());
}

CsvTable measure_density_csv(const SpectralMeasure& sigma) {
  CsvTable out;
  const int rows =
      sigma.density_values.empty() ? 0
                                   : static_cast<int>(
                                         sigma.density_values[0].rows());
  const int cols =
      sigma.density_values.empty() ? 0
                                   : static_cast<int>(
                                         sigma.density_values[0].cols());
  out.header.push_back("s");
  for (const std::string& h : matrix_entry_headers("sigma", rows, cols)) {
    out.header.push_back(h);
  }
  for (std::size_t i = 0; i < sigma.density_grid.size(); ++i) {
    std::vector<std::string> row;
    row.push_back(format_double(sigma.density_grid[i]));
    append_matrix_fields(row, sigma.density_values[i]);
    out.rows.push_back(std::move(row));
  }
  return out;
}

}  // namespace symmspectra
