// Job-configuration parsing (single JSON document), environment overrides,
// the config fingerprint, and the machine-readable output formats: RFC-4180
// CSV tables and JSON documents for m-values, spectral measures, and
// transforms. The JSON dependency stays inside the implementation; this
// interface trades in strings and library types.
#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "symmspectra/boundary.hpp"
#include "symmspectra/spectral.hpp"
#include "symmspectra/sysdef.hpp"
#include "symmspectra/types.hpp"
#include "symmspectra/weyl.hpp"

namespace symmspectra {

// 64-bit FNV-1a of the canonical (sorted-key) config dump; hex-encoded in
// every output document so results can be traced to their inputs.
std::uint64_t fnv1a64(std::string_view bytes);
std::string fnv1a64_hex(std::string_view bytes);

// Environment overrides: SYMM_SPECTRA_TOL_ODE (integrator tolerance) and
// SYMM_SPECTRA_TOL_ID (identity-residual allowance). Unset variables leave
// the base values; malformed ones throw ValidationError naming the variable.
Tolerances env_adjusted_tolerances(Tolerances base = {});

// SYMM_SPECTRA_EPS_SCHEDULE ("0.3,0.15,0.075") or the fallback.
std::vector<double> env_eps_schedule(std::vector<double> fallback = {});

// Complex literals "1.5", "2i", "-1e-3+0.5i", "i", "1-i"; lists are
// comma-separated. Throws ValidationError on malformed input.
Complex parse_complex_literal(const std::string& text);
std::vector<Complex> parse_complex_list(const std::string& text);
std::vector<double> parse_double_list(const std::string& text);

// One parsed job: the system with its frames and boundary parameter, the
// effective tolerances (after environment overrides), the fingerprint of the
// originating document, and the command-specific job parameters.
struct JobConfig {
  SymmetricSystem sys;
  BoundaryFrameA frame_a;
  BoundaryFrameB frame_b;
  BoundaryParameter tau;
  bool has_tau = false;

  std::string system_name;  // registry name, or "inline"
  Tolerances tol;
  std::string config_hash;
  std::string canonical;  // sorted-key dump the hash was taken over

  // job section (all optional; zero/empty when absent)
  std::vector<Complex> lambda_grid;
  bool has_window = false;
  double window_min = 0.0;
  double window_max = 0.0;
  std::vector<double> eps_schedule;
  std::vector<double> mass_epsilons;
  int grid_points = 0;
  int t_samples = 0;
  std::string input_path;
  std::string measure_path;
  std::string direction;  // "forward" (default) or "inverse"
  bool has_lambda = false;
  Complex lambda{0.0, 0.0};
};

JobConfig parse_job_config(const std::string& json_text);
JobConfig load_job_config(const std::string& path);

// Shortest round-trip decimal form (std::to_chars); used by both CSV and
// JSON output so identical inputs give bit-identical documents.
std::string format_double(double v);

// RFC-4180: CRLF row endings, fields quoted only when they need to be.
std::string csv_escape(const std::string& field);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::string str() const;
};

// Row-major matrix entry headers "prefix_00_re, prefix_00_im, ..." and the
// matching field appenders.
std::vector<std::string> matrix_entry_headers(const std::string& prefix,
                                              int rows, int cols);
void append_complex_fields(std::vector<std::string>& row, Complex z);
void append_matrix_fields(std::vector<std::string>& row, const Matrix& m);

// Numeric CSV input: one header row, then double fields (empty -> NaN).
struct NumericCsv {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};
NumericCsv read_numeric_csv(const std::string& path);
NumericCsv parse_numeric_csv(const std::string& text);

// Sampled functions as CSV: (t, f_0_re, f_0_im, ...) per row; transforms the
// same with an s column. Parsers require at least one component pair.
CsvTable weighted_function_to_csv(const WeightedFunction& f);
WeightedFunction weighted_function_from_csv(const NumericCsv& data);
CsvTable transform_to_csv(const TransformResult& g);
TransformResult transform_from_csv(const NumericCsv& data);

// Resolution/provenance block carried by serialized measures.
struct MeasureProvenance {
  std::vector<double> eps_schedule;
  std::vector<double> mass_epsilons;
  int grid_points = 0;
  double exclusion_radius = 0.0;
  // Tail indicators: the density magnitude at the window edges (mass beyond
  // the window) and the sharpest-level smoothing radius (atom resolution).
  double edge_density_sup = 0.0;
};

std::string measure_to_json_text(const SpectralMeasure& sigma,
                                 const MeasureProvenance& prov,
                                 const std::string& config_hash,
                                 const Tolerances& tol);
SpectralMeasure measure_from_json_text(const std::string& text);
SpectralMeasure load_measure(const std::string& path);
CsvTable measure_density_csv(const SpectralMeasure& sigma);

// JSON object text with every tolerance field by name; CLI documents embed
// it verbatim.
std::string tolerances_to_json_text(const Tolerances& tol);

}  // namespace symmspectra
