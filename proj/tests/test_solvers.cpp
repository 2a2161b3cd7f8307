#include "doctest.h"

#include "dbm/variational.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

#include <cmath>
#include <random>

using namespace dbm;

namespace {
// Positive root of m = F(2m) (K = 2, mu = 4, balanced alpha, h = 0).
constexpr double kBrokenRoot = 0.61844750934882291261;
// Root of x = F(2x + 1).
constexpr double kScalarTwoOne = 0.85093936110809130493;

double sup(const Vector& v) { return v.cwiseAbs().maxCoeff(); }
}  // namespace

TEST_CASE("scalar_solution") {
  CHECK(scalar_solution(2.0, 0.5) > scalar_solution(1.0, 0.5));
  CHECK(scalar_solution(1.0, 1.0) > scalar_solution(1.0, 0.5));
  CHECK(scalar_solution(1.0, 50.0) > 0.99);
  const double ref = oracle::scalar_root(2.0, 1.0);
  CHECK(std::abs(ref - kScalarTwoOne) < 1e-12);
  CHECK(std::abs(scalar_solution(2.0, 1.0) - ref) < 1e-10);
  CHECK_THROWS_AS(scalar_solution(1.0, 0.0), std::domain_error);
}

TEST_CASE("fixed point: weak couplings give the zero solution") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 10; ++trial) {
    const int k = 2 + trial % 5;
    const auto spec = test::random_spec(rng, k, 0.0, 1.99, 0.0, 0.0);
    const auto sol = solve_fixed_point(spec, Vector::Constant(k, 0.9));
    CHECK(sol.phase == Phase::ZeroSolution);
    CHECK(sol.x_bar.isZero());
  }
}

TEST_CASE("fixed point: K = 2 broken phase against the scalar oracle") {
  const double ref = oracle::bisect([](double m) { return m - oracle::big_f(2.0 * m); }, 0.3, 0.9, 60);
  CHECK(std::abs(ref - kBrokenRoot) < 1e-12);
  const auto spec = make_spec({0.5, 0.5}, {4.0});
  const auto sol = solve_fixed_point(spec);
  CHECK(sol.phase == Phase::BrokenSymmetry);
  CHECK(std::abs(sol.x_bar[0] - ref) < 1e-8);
  CHECK(std::abs(sol.x_bar[1] - ref) < 1e-8);
  CHECK(sol.gradient_norm < 1e-9);
  // From near zero the unstable zero solution is still avoided only if the
  // start is nonzero; exactly zero is a fixed point.
  const auto zero = solve_fixed_point(spec, Vector::Zero(2));
  CHECK(zero.x_bar.isZero());
}

TEST_CASE("fixed point input checks") {
  const auto spec = make_spec({0.5, 0.5}, {1.0});
  FixedPointOptions bad;
  bad.tol = 0.0;
  CHECK_THROWS_AS(solve_fixed_point(spec, bad), std::invalid_argument);
  bad = {};
  bad.damping = 1.5;
  CHECK_THROWS_AS(solve_fixed_point(spec, bad), std::invalid_argument);
  CHECK_THROWS_AS(solve_fixed_point(spec, Vector::Constant(2, 1.0)), std::domain_error);
  FixedPointOptions tiny;
  tiny.max_iterations = 2;
  try {
    solve_fixed_point(make_spec({0.5, 0.5}, {4.0}, {0.1, 0.1}), tiny);
    CHECK(false);
  } catch (const ConvergenceError& e) {
    CHECK(e.best_residual() > 0.0);
  }
}

TEST_CASE("critical point is reported as unresolved") {
  FixedPointOptions opts;
  opts.max_iterations = 2000;
  const auto sol = solve_fixed_point(make_spec({0.5, 0.5}, {2.0}), opts);
  CHECK(sol.phase == Phase::Unresolved);
}

TEST_CASE("three solvers agree with a field") {
  std::mt19937_64 rng(32);
  for (int trial = 0; trial < 8; ++trial) {
    const int k = 2 + trial % 4;
    const auto spec = test::random_spec(rng, k, 0.2, 4.0, 0.05, 1.0);
    const auto fp = solve_fixed_point(spec);
    ChainDiagnostics diag;
    const auto nb = solve_nested_bisection(spec, {}, &diag);
    CHECK(fp.phase == Phase::FieldDriven);
    CHECK(fp.x_bar.minCoeff() > 0.0);
    CHECK(sup(fp.x_bar - nb.x_bar) < 1e-8);
    CHECK(fp.gradient_norm < 1e-9);
    CHECK(diag.chain_residual < 1e-8);
    CHECK(diag.theta_residual < 1e-8);
    CHECK(diag.a.minCoeff() > 0.0);
    if (k % 2 == 0) {
      const auto pa = solve_pi_ascent(spec);
      CHECK(sup(fp.x_bar - pa.x_bar) < 1e-7);
      const VariationalProblem prob(spec);
      CHECK(sup(prob.grad_pi(odd_part(fp.x_bar))) < 1e-8);
    }
  }
}

TEST_CASE("chain theta reproduces M x at the solution") {
  const auto spec = make_spec({0.1, 0.2, 0.3, 0.4}, {1.5, 2.5, 3.5}, {0.1, 0.2, 0.3, 0.4});
  ChainDiagnostics diag;
  const auto sol = solve_nested_bisection(spec, {}, &diag);
  const Vector mx = build_effective(spec).m * sol.x_bar;
  const Vector theta = chain_theta(spec, diag.a);
  for (int r = 0; r < 4; ++r) CHECK(std::abs(mx[r] - theta[r] * sol.x_bar[r]) < 1e-8);
}

TEST_CASE("nested bisection preconditions") {
  CHECK_THROWS_AS(solve_nested_bisection(make_spec({0.5, 0.5}, {1.0}, {0.1, 0.0})), std::invalid_argument);
  NestedBisectionOptions opts;
  opts.max_layers = 3;
  CHECK_THROWS_AS(solve_nested_bisection(make_spec({0.25, 0.25, 0.25, 0.25}, {1, 1, 1}, {.1, .1, .1, .1}), opts),
                  std::invalid_argument);
}

TEST_CASE("phase dichotomy at zero field, K even") {
  std::mt19937_64 rng(33);
  int checked = 0;
  for (int trial = 0; trial < 30 && checked < 12; ++trial) {
    const int k = 2 + 2 * (trial % 2);
    const auto spec = test::random_spec(rng, k, 0.5, 6.0, 0.0, 0.0);
    const double rho = spectral_radius_oo(build_effective(spec));
    if (std::abs(rho - 1.0) < 0.05) continue;
    ++checked;
    const auto fp = solve_fixed_point(spec);
    const auto pa = solve_pi_ascent(spec);
    if (rho < 1.0) {
      CHECK(fp.phase == Phase::ZeroSolution);
      CHECK(pa.x_bar.isZero());
    } else {
      CHECK(fp.phase == Phase::BrokenSymmetry);
      CHECK(fp.x_bar.minCoeff() > 0.0);
      CHECK(pa.x_bar.minCoeff() > 0.0);
      CHECK(sup(fp.x_bar - pa.x_bar) < 1e-7);
    }
  }
  CHECK(checked == 12);
}

TEST_CASE("order parameter is non-decreasing in each field") {
  std::mt19937_64 rng(34);
  for (int trial = 0; trial < 6; ++trial) {
    const int k = 2 + trial % 4;
    auto spec = test::random_spec(rng, k, 0.5, 4.0, 0.05, 1.0);
    const Vector base = solve_fixed_point(spec).x_bar;
    spec.h[trial % k] += 0.3;
    const Vector raised = solve_fixed_point(spec).x_bar;
    for (int r = 0; r < k; ++r) CHECK(raised[r] >= base[r] - 1e-10);
  }
}

TEST_CASE("saddle structure at the optimiser") {
  std::mt19937_64 rng(35);
  std::uniform_real_distribution<double> u(-1e-2, 1e-2);
  for (int trial = 0; trial < 4; ++trial) {
    const int k = 2 + 2 * (trial % 2);
    const auto spec = test::random_spec(rng, k, 0.5, 4.0, 0.05, 1.0);
    const VariationalProblem prob(spec);
    const Vector x = solve_fixed_point(spec).x_bar;
    const Vector xo = odd_part(x), xe = even_part(x);
    const double p = prob.p_var(x), pi = prob.pi_value(xo);
    CHECK(std::abs(p - pi) < 1e-10);
    for (int i = 0; i < 20; ++i) {
      Vector de = xe, dof = xo;
      for (auto& v : de) v = std::clamp(v + u(rng), 0.0, 0.999);
      for (auto& v : dof) v = std::clamp(v + u(rng), 0.0, 0.999);
      CHECK(prob.p_var(interleave(xo, de)) >= p - 1e-12);
      CHECK(prob.pi_value(dof) <= pi + 1e-12);
    }
  }
}

TEST_CASE("odd K uses the fixed point only") {
  const auto spec = make_spec({0.3, 0.4, 0.3}, {4.0, 4.0}, {0.0, 0.0, 0.0});
  const auto sol = solve_fixed_point(spec);
  CHECK(sol.x_bar.minCoeff() > 0.0);
  CHECK(sol.residual < 1e-9);
  CHECK_THROWS_AS(solve_pi_ascent(spec), std::invalid_argument);
}

TEST_CASE("decoupled chains") {
  // A vanishing form factor splits the chain; the zero layer is slaved.
  const auto spec = make_spec({0.25, 0.25, 0.0, 0.25, 0.25}, {3.0, 2.0, 1.0, 5.0}, {0.1, 0.2, 0.3, 0.4, 0.5});
  const auto fp = solve_fixed_point(spec);
  const auto nb = solve_nested_bisection(spec);
  CHECK(nb.decoupled);
  CHECK(fp.decoupled);
  CHECK(sup(fp.x_bar - nb.x_bar) < 1e-8);
  CHECK(fp.residual < 1e-9);

  // A vanishing coupling with even blocks allows the pi route.
  const auto edge = make_spec({0.2, 0.3, 0.3, 0.2}, {4.0, 0.0, 3.0}, {0.1, 0.1, 0.2, 0.2});
  const auto pa = solve_pi_ascent(edge);
  CHECK(pa.decoupled);
  CHECK(sup(pa.x_bar - solve_fixed_point(edge).x_bar) < 1e-7);
  CHECK(sup(pa.x_bar - solve_nested_bisection(edge).x_bar) < 1e-7);

  // Odd-length block cannot use pi.
  CHECK_THROWS_AS(solve_pi_ascent(make_spec({0.2, 0.2, 0.2, 0.4}, {1.0, 1.0, 0.0}, {0.1, 0.1, 0.1, 0.1})),
                  std::invalid_argument);
}
