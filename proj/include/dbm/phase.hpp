#pragma once

#include "dbm/model.hpp"
#include "dbm/variational.hpp"

#include <string>
#include <vector>

namespace dbm {

enum class ScanAxis { MuEdge, AlphaSimplex, HUniform };
const char* to_string(ScanAxis a);
ScanAxis scan_axis_from_string(const std::string& s);

struct ScanRequest {
  ModelSpec base;
  ScanAxis axis = ScanAxis::MuEdge;
  int edge = 0;                                   // 0-based edge for MuEdge
  std::vector<double> values;                     // MuEdge / HUniform grid
  std::vector<std::vector<double>> alpha_rows;    // AlphaSimplex grid
  double tol = 1e-9;
  const OneBody* one_body = nullptr;  // default_one_body() when null
};

struct PhasePoint {
  double value = 0.0;  // grid value (row index for AlphaSimplex)
  ModelSpec spec;
  double rho = 0.0;
  Vector x_bar;
  double pressure = 0.0;
  Phase phase = Phase::Unresolved;
  bool ok = true;
  std::string error;
};

// One point per grid entry, in grid order. Points are solved independently
// (in parallel); a failing point is marked and the scan continues.
std::vector<PhasePoint> scan(const ScanRequest& request);

enum class OptimumCondition { None, EqualPair, CentredTriple };
const char* to_string(OptimumCondition c);

struct FormFactorOptimum {
  std::vector<double> alpha;
  double rho = 0.0;
  double bound = 0.0;  // max_r mu_{r,r+1}^2 / 4
  OptimumCondition condition = OptimumCondition::None;
  int r_star = -1;     // 0-based layer index of r* (1-based r* = r_star + 1)
  int grid_points = 0;
};

inline constexpr double kConditionTolerance = 1e-3;

// Maximise rho([M^2]^(oo)) over the simplex: 1/40 grid, then Nelder-Mead with
// vertices projected onto the simplex.
FormFactorOptimum optimize_form_factors(const std::vector<double>& mu, int grid = 40);

// Which optimality condition alpha satisfies within tol: (a) two adjacent
// halves on a maximal edge, or (b) alpha_{r*} = alpha_{r*-1} + alpha_{r*+1}
// = 1/2 with both edges at r* maximal.
OptimumCondition classify_optimum(const std::vector<double>& alpha, const std::vector<double>& mu, double tol,
                                  int* r_star = nullptr);

// Euclidean projection onto the probability simplex.
std::vector<double> project_to_simplex(std::vector<double> v);

enum class Stability { Stable, Unstable, Inconclusive };
const char* to_string(Stability s);

struct PerronCheck {
  Stability verdict = Stability::Inconclusive;
  double rho = 0.0;
  std::vector<double> epsilons;
  std::vector<double> delta_pi;    // pi(eps v) - pi(0)
  std::vector<double> prediction;  // (eps^2/2)(v, alpha_o v / 2)(rho - 1)
  double epsilon_used = 0.0;       // eps that decided the verdict
  Vector direction;
};

// h = 0, K even, every alpha_r > 0 and mu edge > 0.
PerronCheck perron_instability_check(const ModelSpec& spec, std::vector<double> epsilons = {1e-2, 1e-3, 1e-4});

}  // namespace dbm
