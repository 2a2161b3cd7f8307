#pragma once

#include "dbm/model.hpp"
#include "dbm/quadrature.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace dbm::cli {

inline constexpr int kSchemaVersion = 1;

enum ExitCode : int { kOk = 0, kInvalidInput = 1, kNonConvergence = 2, kCheckFailed = 3 };

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct RunConfig {
  int schema_version = kSchemaVersion;
  ModelSpec model{{0.5, 0.5}, {4.0}, {0.1, 0.1}};
  QuadratureConfig quadrature;

  struct Run {
    std::uint64_t seed = 20240601;
    int threads = 0;  // 0: all available cores
    std::string out = "out";
  } run;

  struct Solve {
    std::vector<std::string> methods{"auto"};  // auto | fixed_point | pi_ascent | nested_bisection
    double tol = 1e-10;
    int max_iterations = 200000;
    double damping = 0.5;
    int nested_max_layers = 6;
  } solve;

  struct Scan {
    std::string axis = "mu_edge";  // mu_edge | alpha_simplex | h_uniform
    int edge = 1;                  // 1-based: edge r couples layers r and r+1
    double start = 1.0, stop = 3.0, step = 0.1;
    std::vector<double> values;    // overrides start/stop/step when non-empty
    int alpha_steps = 10;          // alpha_simplex: grid spacing 1/alpha_steps
    std::vector<std::vector<double>> alpha_rows;  // overrides alpha_steps when non-empty
    double tol = 1e-9;
  } scan;

  struct Optimize {
    int grid = 40;
  } optimize_alpha;

  struct Simulate {
    std::string engine = "block_gibbs";  // block_gibbs | enumeration
    int n = 2000;
    int n_disorder = 100;
    int sweeps = 2000;
    int burn_in = 500;
    int replicas = 2;
    int batches = 20;
  } simulate;

  struct Enumerate {
    std::vector<int> sizes{8, 16, 24};
    int n_disorder = 200;
  } enumerate;

  struct Verify {
    int random_specs = 8;
    int disorder_samples = 100;
    int enumeration_n = 12;
  } verify;

  struct QuadratureCheck {
    double h_min = 1e-6, h_max = 100.0;
    int points = 25;
    std::vector<int> moments{1, 2, 3};
    double threshold = 1e-10;
  } quadrature_check;
};

// JSON documents. Unknown keys, wrong types and invariant violations raise
// ConfigError naming the offending key path.
RunConfig parse_config_text(const std::string& text);
RunConfig load_config_file(const std::string& path);
// Fully resolved config, every default spelled out.
std::string config_to_json(const RunConfig& config);
// Semantic checks shared by the parser and the command-line overrides.
void validate_config(const RunConfig& config);

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<std::string> out;
  std::optional<double> tol;  // solve.tol and scan.tol
};
void apply_overrides(RunConfig& config, const Overrides& overrides);

// CSV: comma separated, '.' decimal, reals with 17 significant digits, header
// row first.
std::string csv_real(double v);
class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header);
  CsvWriter& row();
  CsvWriter& add(double v);
  CsvWriter& add(int v);
  CsvWriter& add(std::uint64_t v);
  CsvWriter& add(const std::string& v);
  std::string str() const;
  void write(const std::string& path) const;

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

const std::vector<std::string>& command_names();
// Echoes the effective config to `out`, runs the command, writes artifacts
// under config.run.out and returns an ExitCode. Never throws.
int run_command(const std::string& command, const RunConfig& config, std::ostream& out, std::ostream& err);

}  // namespace dbm::cli
