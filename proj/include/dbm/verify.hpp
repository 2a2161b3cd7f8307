#pragma once

#include "dbm/model.hpp"
#include "dbm/one_body.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace dbm {

// ---- one-body identity suite ---------------------------------------------------

struct QuadratureCheckOptions {
  double h_min = 1e-6;
  double h_max = 100.0;
  int points = 25;                 // log grid
  std::vector<int> moments{1, 2, 3};
  double threshold = 1e-10;        // residual bound
};

struct QuadratureResidual {
  double h = 0.0;
  int n = 0;
  double residual = 0.0;
};

struct QuadratureCheckReport {
  std::vector<QuadratureResidual> residuals;
  double max_residual = 0.0;
  double min_second_difference = 0.0;  // psi, step 1e-3 on [1e-3, 50]
  double max_third_difference = 0.0;   // psi, step 1e-3 on [0.1, 50]
  double max_derivative_error = 0.0;   // |F - (2 psi' - 1)|, delta 1e-5 on [0.1, 20]
  double max_roundtrip_error = 0.0;    // |F(F^{-1}(y)) - y|
  bool residuals_ok = false, convexity_ok = false, third_ok = false, derivative_ok = false, roundtrip_ok = false;
  double seconds = 0.0;

  bool passed() const { return residuals_ok && convexity_ok && third_ok && derivative_ok && roundtrip_ok; }
};

QuadratureCheckReport quadrature_check(const QuadratureCheckOptions& options = {},
                                       const OneBody& one_body = default_one_body());

// ---- cross-module property suite ------------------------------------------------

struct CheckResult {
  std::string module;
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

struct VerifyOptions {
  ModelSpec model;            // the configured spec, checked alongside random ones
  std::uint64_t seed = 0;
  int random_specs = 8;       // per randomised invariant
  int disorder_samples = 100; // enumeration-based identities
  int enumeration_n = 12;
};

// Runs every invariant; never throws for a failing check (failures, including
// exceptions, are reported as rows).
std::vector<CheckResult> run_property_suite(const VerifyOptions& options);

}  // namespace dbm
