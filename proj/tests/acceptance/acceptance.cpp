// Acceptance suite: one PASS/FAIL line per criterion, measured values on the
// indented lines below it. Exit status is nonzero when any criterion fails.

#include "dbm/one_body.hpp"
#include "dbm/phase.hpp"
#include "dbm/simulator.hpp"
#include "dbm/variational.hpp"
#include "dbm/verify.hpp"

#include <Eigen/Eigenvalues>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace dbm;

namespace {

constexpr std::uint64_t kBaseSeed = 20240601;

struct Verdict {
  bool passed = true;
  std::ostringstream notes;

  void require(bool ok, const std::string& what) {
    if (!ok) passed = false;
    notes << "    " << (ok ? "ok    " : "broken") << "  " << what << '\n';
  }
  void note(const std::string& what) { notes << "    " << what << '\n'; }
};

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string fmt(const char* f, double a, double b) {
  char buf[160];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

std::string fmt(const char* f, double a, double b, double c) {
  char buf[200];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

int failures = 0;

void criterion(int id, const std::string& title, double budget_seconds, const std::function<void(Verdict&)>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Verdict v;
  try {
    body(v);
  } catch (const std::exception& e) {
    v.passed = false;
    v.note(std::string("exception: ") + e.what());
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  v.require(secs < budget_seconds, fmt("runtime %.1f s within budget %.0f s", secs, budget_seconds));
  std::printf("criterion %d: %s  %s (%.1f s)\n%s", id, v.passed ? "PASS" : "FAIL", title.c_str(), secs,
              v.notes.str().c_str());
  std::fflush(stdout);
  failures += !v.passed;
}

std::vector<double> random_alpha(std::mt19937_64& rng, int k) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  std::vector<double> a(k);
  double s = 0.0;
  for (auto& v : a) s += (v = u(rng));
  for (auto& v : a) v /= s;
  return a;
}

ModelSpec random_spec(std::mt19937_64& rng, int k, double mu_lo, double mu_hi, double h_lo, double h_hi) {
  std::uniform_real_distribution<double> mu(mu_lo, mu_hi), h(h_lo, h_hi);
  ModelSpec s;
  s.alpha = random_alpha(rng, k);
  for (int r = 0; r + 1 < k; ++r) s.mu.push_back(mu(rng));
  for (int r = 0; r < k; ++r) s.h.push_back(h_hi > 0.0 ? h(rng) : 0.0);
  s.validate();
  return s;
}

double max_sym_eigenvalue(const Matrix& a) {
  const Matrix sym = 0.5 * (a + a.transpose());
  const Vector ev = Eigen::SelfAdjointEigenSolver<Matrix>(sym).eigenvalues();
  return ev.maxCoeff();
}

}  // namespace

int main() {
  std::printf("acceptance suite (base seed %llu)\n", static_cast<unsigned long long>(kBaseSeed));

  criterion(1, "one-body identities: Nishimori residuals, psi convexity, third derivative", 5.0, [](Verdict& v) {
    const auto rep = quadrature_check();
    v.require(rep.residuals_ok, fmt("max nishimori residual %.3g < 1e-10 (25 h values, n = 1, 2, 3)",
                                    rep.max_residual));
    v.require(rep.convexity_ok, fmt("min second difference of psi %.3g >= -1e-10", rep.min_second_difference));
    v.require(rep.third_ok, fmt("max third difference of psi %.3g <= 1e-8", rep.max_third_difference));
    v.require(rep.derivative_ok, fmt("max |F - (2 psi' - 1)| %.3g < 1e-6", rep.max_derivative_error));
    v.require(rep.roundtrip_ok, fmt("max |F(F^-1(y)) - y| %.3g < 1e-9", rep.max_roundtrip_error));
  });

  criterion(2, "phase boundary at mu = 2 (K = 2, balanced alpha, h = 0)", 10.0, [](Verdict& v) {
    for (double mu : {1.0, 1.5, 1.9}) {
      const auto sol = solve_fixed_point(make_spec({0.5, 0.5}, {mu}));
      v.require(sol.x_bar.cwiseAbs().maxCoeff() == 0.0,
                fmt("mu = %.1f: x_bar = 0 (max |x_r| = %.3g)", mu, sol.x_bar.cwiseAbs().maxCoeff()));
    }
    for (double mu : {2.1, 2.5, 3.0}) {
      const auto sol = solve_fixed_point(make_spec({0.5, 0.5}, {mu}));
      v.require(sol.x_bar.minCoeff() > 0.1, fmt("mu = %.1f: min x_r = %.6f > 0.1", mu, sol.x_bar.minCoeff()));
    }
    // rho on a 0.01 grid: the sign change of rho - 1 must bracket mu = 2.
    double lo = NAN, hi = NAN;
    for (int i = 0; i < 200; ++i) {
      const double a = 1.0 + 0.01 * i, b = 1.0 + 0.01 * (i + 1);
      const double ra = spectral_radius_oo(build_effective(make_spec({0.5, 0.5}, {a})));
      const double rb = spectral_radius_oo(build_effective(make_spec({0.5, 0.5}, {b})));
      if (ra < 1.0 && rb >= 1.0) lo = a, hi = b;
    }
    v.require(std::abs(lo - 2.0) <= 0.01 + 1e-12 && std::abs(hi - 2.0) <= 0.01 + 1e-12,
              fmt("rho crosses 1 between mu = %.2f and %.2f", lo, hi));
  });

  criterion(3, "form-factor optimum = max mu^2/4 with condition (a) or (b)", 120.0, [](Verdict& v) {
    std::mt19937_64 rng(kBaseSeed + 3);
    std::uniform_real_distribution<double> u(0.1, 3.0);
    const int ks[] = {3, 4, 5, 6};
    for (int t = 0; t < 10; ++t) {
      const int k = ks[t % 4];
      std::vector<double> mu(k - 1);
      for (auto& m : mu) m = u(rng);
      const auto opt = optimize_form_factors(mu);
      std::ostringstream alpha;
      for (double a : opt.alpha) alpha << ' ' << fmt("%.4f", a);
      v.require(std::abs(opt.rho - opt.bound) < 1e-6 && opt.condition != OptimumCondition::None,
                "K = " + std::to_string(k) + fmt(": rho* = %.10f, bound %.10f", opt.rho, opt.bound) +
                    ", condition " + to_string(opt.condition) + " r* = " + std::to_string(opt.r_star + 1) +
                    ", alpha* =" + alpha.str());
    }
  });

  criterion(4, "solver cross-validation on 20 random specs", 300.0, [](Verdict& v) {
    std::mt19937_64 rng(kBaseSeed + 4);
    double worst_diff = 0.0, worst_grad = 0.0;
    int pi_runs = 0, nested_runs = 0;
    for (int t = 0; t < 20; ++t) {
      const int k = 2 + t % 4;
      const auto spec = random_spec(rng, k, 0.2, 4.0, 0.05, 1.0);
      std::vector<VariationalSolution> sols{solve_fixed_point(spec)};
      if (k % 2 == 0) sols.push_back(solve_pi_ascent(spec)), ++pi_runs;
      sols.push_back(solve_nested_bisection(spec)), ++nested_runs;
      for (const auto& s : sols) {
        worst_diff = std::max(worst_diff, (s.x_bar - sols.front().x_bar).cwiseAbs().maxCoeff());
        worst_grad = std::max(worst_grad, s.gradient_norm);
      }
    }
    v.note(std::to_string(pi_runs) + " pi-ascent and " + std::to_string(nested_runs) + " nested-bisection runs");
    v.require(worst_diff < 1e-7, fmt("max componentwise disagreement %.3g < 1e-7", worst_diff));
    v.require(worst_grad < 1e-8, fmt("max gradient residual %.3g < 1e-8", worst_grad));
  });

  criterion(5, "Hessian sign dichotomy of pi (K = 4)", 60.0, [](Verdict& v) {
    std::mt19937_64 rng(kBaseSeed + 5);
    std::uniform_real_distribution<double> interior(0.05, 0.95);
    int below = 0, negative = 0, tries = 0;
    double worst = -INFINITY;
    while (below < 10 && ++tries < 10000) {
      const auto spec = random_spec(rng, 4, 0.1, 3.0, 0.0, 1.0);
      if (spectral_radius_oo(build_effective(spec)) >= 0.9) continue;
      ++below;
      const VariationalProblem prob(spec);
      for (int i = 0; i < 5; ++i) {
        const Vector xo = Vector::NullaryExpr(2, [&](Eigen::Index) { return interior(rng); });
        const double top = std::max(max_sym_eigenvalue(prob.hessian_pi(xo)),
                                    Eigen::SelfAdjointEigenSolver<Matrix>(prob.hessian_pi_congruent(xo))
                                        .eigenvalues()
                                        .maxCoeff());
        worst = std::max(worst, top);
        negative += top < 0.0;
      }
    }
    v.require(below == 10 && negative == 50,
              fmt("rho < 0.9: %.0f of 50 Hessians negative definite (largest eigenvalue %.3g)", negative, worst));
    int above = 0, positive = 0, unstable = 0;
    tries = 0;
    while (above < 10 && ++tries < 10000) {
      const auto spec = random_spec(rng, 4, 0.5, 5.0, 0.0, 0.0);
      if (spectral_radius_oo(build_effective(spec)) <= 1.1) continue;
      ++above;
      const VariationalProblem prob(spec);
      positive += max_sym_eigenvalue(prob.hessian_pi(Vector::Zero(2))) > 0.0;
      unstable += perron_instability_check(spec).verdict == Stability::Unstable;
    }
    v.require(above == 10 && positive == 10,
              fmt("rho > 1.1, h = 0: %.0f of 10 Hessians at the origin have a positive eigenvalue", positive));
    v.require(unstable == 10, fmt("Perron-direction check reports unstable in %.0f of 10", unstable));
  });

  // Shared by criteria 6 and 7.
  const ModelSpec spec = make_spec({0.5, 0.5}, {4.0}, {0.1, 0.1});
  const auto theory = solve_fixed_point(spec);
  std::vector<QuenchedReport> enumerated;

  criterion(6, "finite-N magnetisation approaches x_bar (K = 2, mu = 4, h = 0.1)", 900.0, [&](Verdict& v) {
    v.note(fmt("x_bar = (%.6f, %.6f)", theory.x_bar[0], theory.x_bar[1]));
    QuenchedOptions o;
    o.n_disorder = 200;
    o.base_seed = kBaseSeed;
    for (int n : {8, 16, 24}) enumerated.push_back(quenched_run(spec, SystemSize::from_alpha(spec.alpha, n), o));
    for (int r = 0; r < 2; ++r) {
      std::vector<double> gap;
      for (const auto& rep : enumerated) gap.push_back(std::abs(rep.mean_m[r] - theory.x_bar[r]));
      v.require(gap[1] < gap[0] && gap[2] < gap[1],
                "layer " + std::to_string(r + 1) +
                    fmt(": |E<m> - x_bar| at N = 8, 16, 24: %.4f, %.4f, %.4f decreasing", gap[0], gap[1], gap[2]));
    }
    QuenchedOptions g;
    g.n_disorder = 100;
    g.base_seed = kBaseSeed;
    g.engine = Engine::BlockGibbs;
    g.gibbs.sweeps = 2000;
    g.gibbs.burn_in = 500;
    const auto rep = quenched_run(spec, SystemSize::from_alpha(spec.alpha, 2000), g);
    for (int r = 0; r < 2; ++r) {
      const double diff = std::abs(rep.mean_m[r] - theory.x_bar[r]);
      const double tol = std::max(0.02, 4.0 * rep.stderr_m[r]);
      v.require(diff <= tol, "block Gibbs N = 2000, layer " + std::to_string(r + 1) +
                                 fmt(": E<m> = %.4f +- %.4f, |diff| %.4f", rep.mean_m[r], rep.stderr_m[r], diff) +
                                 fmt(" <= %.4f", tol));
    }
  });

  criterion(7, "Nishimori identities at finite N (enumeration runs of criterion 6)", 900.0, [&](Verdict& v) {
    if (enumerated.size() != 3) throw std::runtime_error("criterion 6 enumeration runs unavailable");
    for (const auto& rep : enumerated) {
      for (int r = 0; r < 2; ++r) {
        const double combined = std::hypot(rep.stderr_m[r], rep.stderr_q[r]);
        const double diff = std::abs(rep.mean_m[r] - rep.mean_q[r]);
        v.require(diff < 4.0 * combined, "N = " + std::to_string(rep.n) + ", layer " + std::to_string(r + 1) +
                                             fmt(": |E<m> - E<q>| = %.5f < 4 x %.5f", diff, combined));
      }
      v.require(std::abs(rep.site_identity_mean) < 4.0 * rep.site_identity_stderr,
                "N = " + std::to_string(rep.n) +
                    fmt(": site identity |E<s>^2 - E<s>| = %.5f < 4 x %.5f", std::abs(rep.site_identity_mean),
                        rep.site_identity_stderr));
    }
  });

  criterion(8, "quenched pressure converges to p_var(x_bar), Var(p_N) ~ 1/N", 600.0, [&](Verdict& v) {
    QuenchedOptions o;
    o.n_disorder = 200;
    o.base_seed = kBaseSeed;
    const auto p10 = quenched_run(spec, SystemSize::from_alpha(spec.alpha, 10), o);
    const auto p20 = quenched_run(spec, SystemSize::from_alpha(spec.alpha, 20), o);
    const double gap10 = std::abs(*p10.mean_pressure - theory.pressure);
    const double gap20 = std::abs(*p20.mean_pressure - theory.pressure);
    v.note(fmt("p_var(x_bar) = %.6f, E[p_10] = %.6f +- %.6f", theory.pressure, *p10.mean_pressure,
               *p10.stderr_pressure) +
           fmt(", E[p_20] = %.6f +- %.6f", *p20.mean_pressure, *p20.stderr_pressure));
    v.require(gap20 < 0.05, fmt("|E[p_20] - p_var| = %.5f < 0.05", gap20));
    v.require(gap20 < gap10, fmt("|E[p_20] - p_var| = %.5f < |E[p_10] - p_var| = %.5f", gap20, gap10));
    const double ratio = *p10.var_pressure / *p20.var_pressure;
    v.require(ratio >= 1.0 && ratio <= 4.0,
              fmt("Var(p_10) / Var(p_20) = %.6g / %.6g = ", *p10.var_pressure, *p20.var_pressure) +
                  fmt("%.3f within a factor 2 of 2", ratio));
  });

  std::printf("%d of 8 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
