// Checks for the serialization layer and the command-line front end. The
// binary under test is injected at build time (SYMM_CLI_BIN); commands run
// through the shell with stdout/stderr captured to files, so exit codes,
// document formats, and determinism are all exercised exactly as a user
// sees them.
#include <sys/wait.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "symmspectra/oracle.hpp"
#include "symmspectra/serialize.hpp"
#include "testkit.hpp"

using namespace symmspectra;
using nlohmann::json;
using testkit::check;
using testkit::check_near;

namespace {

std::string g_dir;  // scratch directory for configs and outputs

std::string path_of(const std::string& name) { return g_dir + "/" + name; }

void write_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  f << text;
}

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  std::ostringstream buf;
  buf << f.rdbuf();
  return buf.str();
}

struct RunResult {
  int code = -1;
  std::string out;
  std::string err;
};

// Runs the CLI with the given argument string; env_prefix can carry
// variable assignments ("X=1 ").
RunResult run_cli(const std::string& args, const std::string& env_prefix = {}) {
  const std::string out_path = path_of("cmd.out");
  const std::string err_path = path_of("cmd.err");
  const std::string cmd = env_prefix + SYMM_CLI_BIN + " " + args + " > " +
                          out_path + " 2> " + err_path;
  const int status = std::system(cmd.c_str());
  RunResult r;
  if (WIFEXITED(status)) r.code = WEXITSTATUS(status);
  r.out = read_file(out_path);
  r.err = read_file(err_path);
  return r;
}

// ---------------------------------------------------------------------------

void complex_literal_checks() {
  check_near(parse_complex_literal("1.5"), Complex(1.5, 0.0), 0.0, "literal 1.5");
  check_near(parse_complex_literal("2i"), Complex(0.0, 2.0), 0.0, "literal 2i");
  check_near(parse_complex_literal("i"), Complex(0.0, 1.0), 0.0, "literal i");
  check_near(parse_complex_literal("-i"), Complex(0.0, -1.0), 0.0, "literal -i");
  check_near(parse_complex_literal("1-i"), Complex(1.0, -1.0), 0.0, "literal 1-i");
  check_near(parse_complex_literal("-1e-3+0.5i"), Complex(-1e-3, 0.5), 0.0,
             "literal -1e-3+0.5i");
  check_near(parse_complex_literal("3.5e-2-1.25e-1i"), Complex(0.035, -0.125),
             1e-18, "literal with exponents in both parts");
  check_near(parse_complex_literal(" 2 + 3 i "), Complex(2.0, 3.0), 0.0,
             "literal tolerates spaces");
  testkit::check_throws([] { parse_complex_literal(""); }, "empty literal throws");
  testkit::check_throws([] { parse_complex_literal("1+"); },
                        "dangling sign throws");
  testkit::check_throws([] { parse_complex_literal("foo"); },
                        "non-numeric literal throws");

  const std::vector<Complex> list = parse_complex_list("2i, 1+0.5i");
  check(list.size() == 2, "complex list splits on commas");
  check_near(list[1], Complex(1.0, 0.5), 0.0, "complex list second entry");
  check(parse_double_list("0.3,0.15,0.075").size() == 3, "double list size");
}

void hash_and_format_checks() {
  // FNV-1a 64 reference vectors.
  check(fnv1a64("") == 0xcbf29ce484222325ULL, "FNV-1a offset basis");
  check(fnv1a64("a") == 0xaf63dc4c8601ec8cULL, "FNV-1a of 'a'");
  check(fnv1a64_hex("") == "cbf29ce484222325", "hex encoding of the hash");

  check(format_double(0.1) == "0.1", "shortest form of 0.1");
  check(format_double(2.5) == "2.5", "shortest form of 2.5");
  const double third = 1.0 / 3.0;
  check(std::strtod(format_double(third).c_str(), nullptr) == third,
        "formatted doubles round-trip exactly");

  check(csv_escape("plain") == "plain", "no quoting when unneeded");
  check(csv_escape("a,b") == "\"a,b\"", "comma forces quotes");
  check(csv_escape("say \"hi\"") == "\"say \"\"hi\"\"\"", "quotes doubled");
}

void csv_roundtrip_checks() {
  auto fn = [](double t) {
    Vector v(2);
    v << Complex(t, -t), Complex(std::sin(t), 0.25);
    return v;
  };
  const WeightedFunction f = make_weighted_function(fn, 0.0, 1.0, 33);
  const std::string text = weighted_function_to_csv(f).str();
  const WeightedFunction g = weighted_function_from_csv(parse_numeric_csv(text));
  check(g.t.size() == f.t.size(), "sampled-function CSV keeps the grid");
  double worst = 0.0;
  for (std::size_t i = 0; i < f.t.size(); ++i) {
    worst = std::max(worst, (g.values[i] - f.values[i]).cwiseAbs().maxCoeff());
    worst = std::max(worst, std::abs(g.t[i] - f.t[i]));
  }
  check_near(worst, 0.0, 0.0, "sampled-function CSV round trip is exact");

  TransformResult tr;
  tr.s_grid = {-1.0, 0.5, 2.25};
  for (double s : tr.s_grid) {
    Vector v(1);
    v << Complex(s * s, -s);
    tr.values.push_back(v);
  }
  const TransformResult tr2 =
      transform_from_csv(parse_numeric_csv(transform_to_csv(tr).str()));
  check(tr2.s_grid == tr.s_grid, "transform CSV keeps the s grid");
  check_near((tr2.values[2] - tr.values[2]).cwiseAbs().maxCoeff(), 0.0, 0.0,
             "transform CSV round trip is exact");

  // '#' lines are provenance, not data.
  const std::string commented =
      "# config_hash: f00\r\n" + weighted_function_to_csv(f).str() +
      "# trailing note\r\n";
  const WeightedFunction h =
      weighted_function_from_csv(parse_numeric_csv(commented));
  check(h.t.size() == f.t.size(), "comment lines are skipped by the parser");

  testkit::check_throws([] { parse_numeric_csv("a,b\r\n1,x\r\n"); },
                        "non-numeric field rejected");
}

void measure_roundtrip_checks() {
  SpectralMeasure sigma;
  sigma.window_min = -2.0;
  sigma.window_max = 2.0;
  SpectralAtom atom;
  atom.location = 0.5;
  atom.mass = Matrix(2, 2);
  atom.mass << Complex(1.0, 0.0), Complex(0.1, 0.2),  //
      Complex(0.1, -0.2), Complex(0.5, 0.0);
  sigma.atoms.push_back(atom);
  sigma.density_grid = {-1.0, 0.0, 1.0};
  for (double s : sigma.density_grid) {
    Matrix v(2, 2);
    v << Complex(1.0 + s * s, 0.0), Complex(0.3, 0.1 * s),  //
        Complex(0.3, -0.1 * s), Complex(0.75, 0.0);
    sigma.density_values.push_back(v);
  }
  MeasureProvenance prov;
  prov.eps_schedule = {0.3, 0.15};
  prov.grid_points = 3;
  prov.exclusion_radius = 1.5;

  const std::string text =
      measure_to_json_text(sigma, prov, "deadbeef", Tolerances{});
  const SpectralMeasure back = measure_from_json_text(text);
  check(back.atoms.size() == 1 && back.density_grid.size() == 3,
        "measure JSON keeps atoms and grid");
  check_near(back.atoms[0].location, 0.5, 0.0, "atom location round trip");
  check_near((back.atoms[0].mass - atom.mass).cwiseAbs().maxCoeff(), 0.0, 0.0,
             "atom mass round trip");
  check_near(
      (back.density_values[2] - sigma.density_values[2]).cwiseAbs().maxCoeff(),
      0.0, 0.0, "density value round trip");
  check_near(back.window_min, -2.0, 0.0, "window round trip");

  const std::string mpath = path_of("roundtrip_measure.json");
  write_file(mpath, text);
  const SpectralMeasure loaded = load_measure(mpath);
  check(loaded.atoms.size() == 1, "measure loads from a file");
}

void config_checks() {
  const std::string t1 =
      R"({"system": {"name": "dirac-oracle", "angle": 0.25}, "job": {"grid_points": 7}})";
  const std::string t2 =
      R"({"job": {"grid_points": 7}, "system": {"angle": 0.25, "name": "dirac-oracle"}})";
  const JobConfig c1 = parse_job_config(t1);
  const JobConfig c2 = parse_job_config(t2);
  check(!c1.config_hash.empty(), "config hash is set");
  check(c1.config_hash == c2.config_hash,
        "hash is over the canonical form, not the byte order");
  const JobConfig c3 = parse_job_config(
      R"({"system": {"name": "dirac-oracle", "angle": 0.3}, "job": {"grid_points": 7}})");
  check(c3.config_hash != c1.config_hash, "different content, different hash");
  check(c1.system_name == "dirac-oracle" && c1.has_tau,
        "registry system carries its boundary parameter");
  check(c1.grid_points == 7, "job section parsed");

  const JobConfig pe = parse_job_config(R"({"system": "paper-example"})");
  check(pe.system_name == "paper-example" && !pe.sys.regular_b,
        "reference half-line system is singular");
  check(pe.frame_b.kind() == BoundaryFrameB::Kind::SingularMinimal,
        "reference half-line system has a singular frame");

  const JobConfig inl = parse_job_config(
      R"({"system": {"interval": [0, 1], "p": 1, "q": 0,
          "B": [[0, 0], [0, 0]], "Delta": [[1, 0], [0, 1]]},
          "tau": {"C0": [[1]], "C1": [[0]]}})");
  check(inl.system_name == "inline" && inl.sys.n() == 2 && inl.has_tau,
        "inline system parses with constant tau");

  testkit::check_throws(
      [] { parse_job_config(R"({"system": {"name": "no-such-system"}})"); },
      "unknown registry name rejected");
  testkit::check_throws([] { parse_job_config("{not json"); },
                        "malformed JSON rejected");
}

void env_override_checks() {
  setenv("SYMM_SPECTRA_TOL_ODE", "2.5e-10", 1);
  check_near(env_adjusted_tolerances().tol_ode, 2.5e-10, 0.0,
             "integrator tolerance override");
  setenv("SYMM_SPECTRA_TOL_ODE", "abc", 1);
  testkit::check_throws([] { env_adjusted_tolerances(); },
                        "malformed tolerance override throws");
  unsetenv("SYMM_SPECTRA_TOL_ODE");
  check_near(env_adjusted_tolerances().tol_ode, 1e-10, 0.0,
             "default tolerance restored");

  setenv("SYMM_SPECTRA_EPS_SCHEDULE", "0.2,0.1", 1);
  const std::vector<double> eps = env_eps_schedule();
  check(eps.size() == 2 && eps[0] == 0.2 && eps[1] == 0.1,
        "epsilon schedule override");
  unsetenv("SYMM_SPECTRA_EPS_SCHEDULE");
  check(env_eps_schedule({0.4}).size() == 1, "epsilon schedule fallback");
}

// ---------------------------------------------------------------------------

void usage_checks() {
  check(run_cli("--help").code == 0, "--help exits 0");
  check(run_cli("").code == 3, "missing subcommand exits 3");
  check(run_cli("mfunction").code == 3, "missing --config exits 3");
  check(run_cli("frobnicate").code == 3, "unknown subcommand exits 3");
  check(run_cli("mfunction --config /no/such/file.json").code == 1,
        "unreadable config exits 1");
  const std::string cfg = path_of("win.json");
  write_file(cfg, R"({"system": {"name": "dirac-oracle"}})");
  check(run_cli("spectral --config " + cfg).code == 3,
        "spectral without a window exits 3");
  check(run_cli("spectral --config " + cfg + " --window 2,1").code == 3,
        "inverted window exits 3");
}

void mfunction_binary_checks() {
  const std::string cfg = path_of("dirac.json");
  write_file(cfg, R"({"system": {"name": "dirac-oracle", "angle": 0.0},
                      "job": {"lambda_grid": [[0.0, 1.0]]}})");

  const std::string out_json = path_of("m_dirac.json");
  RunResult r = run_cli("mfunction --config " + cfg + " --json --out " + out_json);
  check(r.code == 0, "mfunction exits 0");
  const json doc = json::parse(read_file(out_json));
  check(doc.at("config_hash") == load_job_config(cfg).config_hash,
        "document embeds the config hash");
  check_near(doc.at("tolerances").at("tol_ode").get<double>(), 1e-10, 0.0,
             "document embeds the tolerance set");
  const json& row = doc.at("rows").at(0);
  check(row.at("status") == "ok", "clean evaluation has status ok");
  // tan(i) = i tanh(1)
  check_near(Complex(row.at("m")[0][0][0].get<double>(),
                     row.at("m")[0][0][1].get<double>()),
             Complex(0.0, std::tanh(1.0)), 1e-8, "value of m at i");

  // Half-line reference system through the singular-limit path.
  const std::string pe = path_of("pe.json");
  write_file(pe, R"({"system": "paper-example",
                     "job": {"lambda_grid": [[0.0, 2.0]]}})");
  const std::string out_pe = path_of("m_pe.json");
  check(run_cli("mfunction --config " + pe + " --json --out " + out_pe).code == 0,
        "singular mfunction exits 0");
  const json pedoc = json::parse(read_file(out_pe));
  const json& m = pedoc.at("rows").at(0).at("m");
  auto entry = [&m](int i, int k) {
    return Complex(m[i][k][0].get<double>(), m[i][k][1].get<double>());
  };
  check_near(entry(0, 0), Complex(0.0, 1.0), 1e-7, "m00 at 2i");
  check_near(entry(0, 1), Complex(0.0, std::sqrt(2.0) * std::exp(-2.0)), 1e-7,
             "m01 at 2i");
  check_near(entry(1, 0), Complex(0.0, 0.0), 1e-7, "m10 at 2i");
  check_near(entry(1, 1), Complex(0.0, 0.5), 1e-7, "m11 at 2i");

  // Empty grid: a header-only table, still exit 0.
  const std::string empty_csv = path_of("empty.csv");
  check(run_cli("mfunction --config " + cfg + " --lambda-grid \"\" --out " +
                empty_csv)
                .code == 0,
        "empty lambda grid exits 0");
  check(read_file(empty_csv) == "lambda_re,lambda_im,m_00_re,m_00_im,status\r\n",
        "empty grid gives the bare header");

  // Grid from the flag instead of the config.
  const std::string flag_json = path_of("m_flag.json");
  check(run_cli("mfunction --config " + cfg + " --lambda-grid '2i,1+0.5i'" +
                " --json --out " + flag_json)
                .code == 0,
        "flag-provided grid exits 0");
  const json flagdoc = json::parse(read_file(flag_json));
  check(flagdoc.at("rows").size() == 2, "flag grid row count");
  check_near(Complex(flagdoc.at("rows")[0].at("m")[0][0][0].get<double>(),
                     flagdoc.at("rows")[0].at("m")[0][0][1].get<double>()),
             Complex(0.0, std::tanh(2.0)), 1e-8, "value of m at 2i");

  // CSV sink: pure table plus a metadata sidecar; byte-identical reruns.
  const std::string csv_a = path_of("m_a.csv");
  const std::string csv_b = path_of("m_b.csv");
  check(run_cli("mfunction --config " + cfg + " --out " + csv_a).code == 0,
        "CSV output exits 0");
  run_cli("mfunction --config " + cfg + " --out " + csv_b);
  check(read_file(csv_a) == read_file(csv_b) && !read_file(csv_a).empty(),
        "identical configs give byte-identical tables");
  check(read_file(csv_a + ".meta.json") == read_file(csv_b + ".meta.json"),
        "identical configs give byte-identical sidecars");
  const json meta = json::parse(read_file(csv_a + ".meta.json"));
  check(meta.at("config_hash") == load_job_config(cfg).config_hash,
        "sidecar carries the config hash");
  check(meta.contains("tolerances"), "sidecar carries the tolerance set");
  check(read_file(csv_a).rfind("lambda_re,", 0) == 0,
        "file table is pure CSV (no comment lines)");

  // Stdout sink: provenance precedes the table as '#' lines.
  RunResult rs = run_cli("mfunction --config " + cfg);
  check(rs.code == 0 && rs.out.rfind("# config_hash: ", 0) == 0,
        "stdout table is preceded by the config hash");
  check(rs.out.find("# tolerances: {") != std::string::npos,
        "stdout table is preceded by the tolerance set");

  // Environment override lands in the emitted document.
  RunResult re = run_cli("mfunction --config " + cfg + " --json",
                         "SYMM_SPECTRA_TOL_ODE=2e-10 ");
  check(re.code == 0 &&
            json::parse(re.out).at("tolerances").at("tol_ode").get<double>() ==
                2e-10,
        "tolerance override is reflected in the output");

  // A spectral-parameter hit inside the grid degrades to a row status, not
  // a process failure.
  const std::string near = path_of("near.json");
  write_file(near, R"({"system": {"name": "dirac-oracle", "angle": 0.0},
    "job": {"lambda_grid": [[1.5707963267948966, 1e-12], [0.0, 1.0]]}})");
  RunResult rn = run_cli("mfunction --config " + near + " --json");
  check(rn.code == 0, "near-spectrum row does not fail the command");
  const json ndoc = json::parse(rn.out);
  check(ndoc.at("rows")[0].at("status") == "near-spectrum",
        "near-spectrum row is labelled");
  check(ndoc.at("rows")[0].at("m")[0][0][0].is_null(),
        "near-spectrum value is vacated");
  check(ndoc.at("rows")[1].at("status") == "ok",
        "later rows are unaffected");
}

void validate_binary_checks() {
  const std::string pe = path_of("val_pe.json");
  write_file(pe, R"({"system": "paper-example"})");
  RunResult r = run_cli("validate --config " + pe + " --json");
  check(r.code == 0, "reference half-line config validates");
  const json doc = json::parse(r.out);
  check(doc.at("passed").get<bool>(), "validate document agrees with the code");

  const std::string dirac = path_of("val_dirac.json");
  write_file(dirac, R"({"system": {"name": "dirac-oracle", "angle": 0.4}})");
  check(run_cli("validate --config " + dirac).code == 0,
        "regular oracle config validates");

  const std::string bad_b = path_of("val_bad_b.json");
  write_file(bad_b, R"({"system": {"interval": [0, 1], "p": 1, "q": 0,
    "B": [[0, 1], [0, 0]], "Delta": [[1, 0], [0, 1]]}})");
  RunResult rb = run_cli("validate --config " + bad_b);
  check(rb.code == 1, "non-Hermitian potential exits 1");
  check(rb.err.find("validation error") != std::string::npos,
        "validation failure goes to stderr");

  const std::string no_theta = path_of("val_no_theta.json");
  write_file(no_theta, R"({"system": {"interval": [0, "inf"], "p": 1, "q": 1,
    "B": [[0,0,0],[0,0,0],[0,0,0]],
    "Delta": [[1,0,0],[0,1,0],[0,0,1]]}})");
  check(run_cli("validate --config " + no_theta).code == 1,
        "singular inline system without reference functions exits 1");

  // tau must be holomorphic in lambda, not in its conjugate: the same
  // polynomial family passes with var=lambda and fails with var=conj_lambda.
  const std::string tau_ok = path_of("val_tau_ok.json");
  write_file(tau_ok, R"({"system": {"interval": [0, 1], "p": 1, "q": 0,
    "B": [[0, 0], [0, 0]], "Delta": [[1, 0], [0, 1]]},
    "tau": {"poly_C0": [[[0]], [[1]]], "poly_C1": [[[-1]]], "var": "lambda"}})");
  check(run_cli("validate --config " + tau_ok).code == 0,
        "Nevanlinna family in lambda validates");

  const std::string tau_bad = path_of("val_tau_bad.json");
  write_file(tau_bad, R"({"system": {"interval": [0, 1], "p": 1, "q": 0,
    "B": [[0, 0], [0, 0]], "Delta": [[1, 0], [0, 1]]},
    "tau": {"poly_C0": [[[0]], [[1]]], "poly_C1": [[[-1]]],
            "var": "conj_lambda"}})");
  RunResult rt = run_cli("validate --config " + tau_bad + " --json");
  check(rt.code == 1, "anti-holomorphic family exits 1");
  bool pair_failed = false;
  for (const json& c : json::parse(rt.out).at("checks")) {
    if (c.at("name") == "nevanlinna-pair") pair_failed = !c.at("passed").get<bool>();
  }
  check(pair_failed, "the sign test is the check that fails");
}

void spectral_binary_checks() {
  const double pi = std::numbers::pi;
  const std::string cfg = path_of("spec_dirac.json");
  write_file(cfg, R"({"system": {"name": "dirac-oracle", "angle": 0.0},
                      "job": {"window": [0, 10], "grid_points": 201}})");
  const std::string out = path_of("measure_dirac.json");
  RunResult r = run_cli("spectral --config " + cfg + " --out " + out);
  check(r.code == 0, "spectral exits 0");
  const json doc = json::parse(read_file(out));
  check(doc.at("config_hash") == load_job_config(cfg).config_hash,
        "measure embeds the config hash");
  const json& atoms = doc.at("atoms");
  check(atoms.size() == 3, "three eigenvalues below 10");
  const double expected[3] = {0.5 * pi, 1.5 * pi, 2.5 * pi};
  for (int k = 0; k < 3; ++k) {
    check_near(atoms[k].at("s").get<double>(), expected[k], 1e-6,
               "atom location " + std::to_string(k));
    check_near(atoms[k].at("mass")[0][0][0].get<double>(), 1.0, 1e-4,
               "atom mass " + std::to_string(k));
    check_near(atoms[k].at("mass")[0][0][1].get<double>(), 0.0, 1e-10,
               "atom mass is real " + std::to_string(k));
  }
  check(!read_file(path_of("measure_dirac.csv")).empty(),
        "density table lands next to the measure");

  // A window that dodges the spectrum has no atoms.
  const std::string cfg2 = path_of("spec_gap.json");
  write_file(cfg2, R"({"system": {"name": "dirac-oracle", "angle": 0.0},
                       "job": {"window": [0.1, 1.0], "grid_points": 51}})");
  const std::string out2 = path_of("measure_gap.json");
  check(run_cli("spectral --config " + cfg2 + " --out " + out2).code == 0,
        "gap-window spectral exits 0");
  check(json::parse(read_file(out2)).at("atoms").empty(),
        "no atoms inside a spectral gap");
}

void transform_binary_checks() {
  const DiracOracle d = dirac_oracle(0.0);

  // Hand-built pure-point measure from the known eigenvalues.
  SpectralMeasure sigma;
  sigma.window_min = -60.0;
  sigma.window_max = 60.0;
  for (double s : d.eigenvalues(-60.0, 60.0)) {
    SpectralAtom atom;
    atom.location = s;
    atom.mass = Matrix::Identity(1, 1);
    sigma.atoms.push_back(std::move(atom));
  }
  const std::string measure_path = path_of("measure_hand.json");
  write_file(measure_path, measure_to_json_text(sigma, MeasureProvenance{},
                                                "handmade", Tolerances{}));

  auto fn = [](double t) {
    const double w = t * t * (1.0 - t) * (1.0 - t);
    Vector v(2);
    v << Complex(w, 0.0), Complex(w * (2.0 - t), 0.0);
    return v;
  };
  const WeightedFunction f = make_weighted_function(fn, 0.0, 1.0, 2049);
  const std::string f_path = path_of("f.csv");
  write_file(f_path, weighted_function_to_csv(f).str());
  const double f_norm = l2delta_norm(d.sys, f);

  const std::string fwd_cfg = path_of("tf_fwd.json");
  write_file(fwd_cfg, R"({"system": {"name": "dirac-oracle", "angle": 0.0},
    "job": {"input": ")" + f_path + R"(", "measure": ")" + measure_path +
                       R"("}})");
  const std::string g_path = path_of("g.csv");
  RunResult rf = run_cli("transform --config " + fwd_cfg + " --out " + g_path);
  check(rf.code == 0, "forward transform exits 0");
  const json gmeta = json::parse(read_file(g_path + ".meta.json"));
  const double defect = gmeta.at("parseval_defect").get<double>();
  check(defect >= -1e-6 && defect <= 1e-3 * f_norm * f_norm,
        "Parseval defect is small and nonnegative");

  const std::string inv_cfg = path_of("tf_inv.json");
  write_file(inv_cfg, R"({"system": {"name": "dirac-oracle", "angle": 0.0},
    "job": {"input": ")" + g_path + R"(", "measure": ")" + measure_path +
                       R"(", "direction": "inverse", "t_samples": 513}})");
  const std::string rec_path = path_of("rec.csv");
  check(run_cli("transform --config " + inv_cfg + " --out " + rec_path).code == 0,
        "inverse transform exits 0");
  const WeightedFunction rec =
      weighted_function_from_csv(parse_numeric_csv(read_file(rec_path)));
  double worst = 0.0;
  for (std::size_t i = 0; i < rec.t.size(); ++i) {
    worst = std::max(worst,
                     (rec.values[i] - fn(rec.t[i])).cwiseAbs().maxCoeff());
  }
  check_near(worst, 0.0, 1e-3, "round trip through both CSV directions");

  // Forward transform on the half-line system against its closed form.
  const ExampleSystem ex = make_example_system();
  RotatedComponents rc;
  rc.f1 = [](double t) { return Complex(t * (1.0 - t), 0.0); };
  rc.f2 = [](double t) { return Complex(t * t * (1.0 - t), 0.1 * t); };
  rc.f3 = [](double t) { return Complex(0.5 * std::sin(std::numbers::pi * t), 0.0); };
  rc.support_end = 1.0;
  const WeightedFunction femb = example_embed(ex, rc, 4097);
  const std::string fe_path = path_of("f_halfline.csv");
  write_file(fe_path, weighted_function_to_csv(femb).str());
  const std::string pe_cfg = path_of("tf_pe.json");
  write_file(pe_cfg, R"({"system": "paper-example",
    "job": {"input": ")" + fe_path +
                         R"(", "window": [-3, 3], "grid_points": 13}})");
  const std::string ge_path = path_of("g_halfline.csv");
  check(run_cli("transform --config " + pe_cfg + " --out " + ge_path).code == 0,
        "half-line forward transform exits 0");
  const TransformResult got =
      transform_from_csv(parse_numeric_csv(read_file(ge_path)));
  const TransformResult want = example_transform(ex, rc, got.s_grid);
  double worst_t = 0.0;
  for (std::size_t i = 0; i < got.s_grid.size(); ++i) {
    worst_t = std::max(
        worst_t, (got.values[i] - want.values[i]).cwiseAbs().maxCoeff());
  }
  check_near(worst_t, 0.0, 1e-6, "half-line transform matches the closed form");

  // Support violations are validation failures.
  auto wide = [](double t) {
    Vector v(2);
    v << Complex(1.0 - 0.4 * t, 0.0), Complex(0.0, 0.0);
    return v;
  };
  const std::string wide_path = path_of("wide.csv");
  write_file(wide_path,
             weighted_function_to_csv(make_weighted_function(wide, 0.0, 2.0, 65))
                 .str());
  const std::string wide_cfg = path_of("tf_wide.json");
  write_file(wide_cfg, R"({"system": {"name": "dirac-oracle", "angle": 0.0},
    "job": {"input": ")" + wide_path + R"(", "measure": ")" + measure_path +
                         R"("}})");
  check(run_cli("transform --config " + wide_cfg).code == 1,
        "support outside the interval exits 1");

  // Forward transform with neither measure nor window is a usage error.
  const std::string bare_cfg = path_of("tf_bare.json");
  write_file(bare_cfg, R"({"system": {"name": "dirac-oracle", "angle": 0.0},
    "job": {"input": ")" + f_path + R"("}})");
  check(run_cli("transform --config " + bare_cfg).code == 3,
        "missing s-grid specification exits 3");
}

void resolvent_binary_checks() {
  const DiracOracle d = dirac_oracle(0.0);
  const std::string f_path = path_of("f.csv");  // written by the transform checks

  const std::string cfg = path_of("res.json");
  write_file(cfg, R"({"system": {"name": "dirac-oracle", "angle": 0.0},
    "job": {"lambda": [0.5, 1.1], "input": ")" + f_path + R"("}})");
  const std::string y_path = path_of("y.csv");
  RunResult r = run_cli("resolvent --config " + cfg + " --out " + y_path);
  check(r.code == 0, "resolvent exits 0");

  const NumericCsv table = parse_numeric_csv(read_file(y_path));
  const WeightedFunction y = weighted_function_from_csv(table);
  check(y.t.front() == 0.0 && y.t.back() == 1.0,
        "resolvent output covers the interval");
  check_near(std::abs(y.values.front()(1)), 0.0, 1e-7,
             "separated condition at the left endpoint");
  check_near(std::abs(y.values.back()(0)), 0.0, 1e-7,
             "boundary condition at the right endpoint");

  // Independent dense solve of the same boundary-value problem.
  const WeightedFunction f_in =
      weighted_function_from_csv(parse_numeric_csv(read_file(f_path)));
  const WeightedFunction y_fd = fd_bvp_solve(d.sys, d.frame_a, d.frame_b,
                                             d.tau, f_in, Complex(0.5, 1.1));
  double worst = 0.0;
  for (double t : {0.2, 0.5, 0.85}) {
    worst = std::max(worst, (y.eval(t) - y_fd.eval(t)).cwiseAbs().maxCoeff());
  }
  check_near(worst, 0.0, 1e-6, "agrees with the dense box-scheme solve");

  // Error taxonomy through the exit code.
  const std::string real_cfg = path_of("res_real.json");
  write_file(real_cfg, R"({"system": {"name": "dirac-oracle", "angle": 0.0},
    "job": {"lambda": [1.0, 0.0], "input": ")" + f_path + R"("}})");
  check(run_cli("resolvent --config " + real_cfg).code == 1,
        "real spectral parameter exits 1");

  const std::string pole_cfg = path_of("res_pole.json");
  write_file(pole_cfg, R"({"system": {"name": "dirac-oracle", "angle": 0.0},
    "job": {"lambda": [1.5707963267948966, 1e-12], "input": ")" + f_path +
                          R"("}})");
  RunResult rp = run_cli("resolvent --config " + pole_cfg);
  check(rp.code == 2, "spectral parameter on top of an eigenvalue exits 2");
  check(rp.err.find("numerical error") != std::string::npos,
        "numerical failure goes to stderr");

  const std::string no_lambda = path_of("res_nolambda.json");
  write_file(no_lambda, R"({"system": {"name": "dirac-oracle", "angle": 0.0},
    "job": {"input": ")" + f_path + R"("}})");
  check(run_cli("resolvent --config " + no_lambda).code == 3,
        "missing spectral parameter exits 3");
}

}  // namespace

int main() {
  char tmpl[] = "/tmp/symm_cli_XXXXXX";
  const char* dir = mkdtemp(tmpl);
  if (dir == nullptr) {
    std::printf("cannot create scratch directory\n");
    return 1;
  }
  g_dir = dir;
  std::printf("scratch directory: %s\n", g_dir.c_str());

  complex_literal_checks();
  hash_and_format_checks();
  csv_roundtrip_checks();
  measure_roundtrip_checks();
  config_checks();
  env_override_checks();
  usage_checks();
  mfunction_binary_checks();
  validate_binary_checks();
  spectral_binary_checks();
  transform_binary_checks();
  resolvent_binary_checks();

  return testkit::summary("cli");
}
