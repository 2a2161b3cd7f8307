#include "dbm/verify.hpp"

#include "dbm/phase.hpp"
#include "dbm/rng.hpp"
#include "dbm/simulator.hpp"
#include "dbm/variational.hpp"

#include <omp.h>

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <random>
#include <sstream>

namespace dbm {

QuadratureCheckReport quadrature_check(const QuadratureCheckOptions& o, const OneBody& ob) {
  if (!(o.h_min > 0.0) || !(o.h_max > o.h_min) || o.points < 2) {
    throw std::invalid_argument("quadrature_check: need 0 < h_min < h_max and points >= 2");
  }
  for (int n : o.moments) {
    if (n < 1) throw std::invalid_argument("quadrature_check: moments must be >= 1");
  }
  const auto t0 = std::chrono::steady_clock::now();
  QuadratureCheckReport rep;
  const double lo = std::log10(o.h_min), hi = std::log10(o.h_max);
  for (int i = 0; i < o.points; ++i) {
    const double h = std::pow(10.0, lo + (hi - lo) * i / (o.points - 1));
    for (int n : o.moments) {
      const double res = ob.nishimori_residual(h, n);
      rep.residuals.push_back({h, n, res});
      rep.max_residual = std::max(rep.max_residual, res);
    }
  }
  rep.residuals_ok = rep.max_residual < o.threshold;

  const double d = 1e-3;
  rep.min_second_difference = INFINITY;
  for (int i = 0; d + 0.25 * i <= 50.0; ++i) {
    const double x = d + 0.25 * i;
    rep.min_second_difference =
        std::min(rep.min_second_difference, ob.psi(x + d) - 2 * ob.psi(x) + ob.psi(x - d));
  }
  rep.convexity_ok = rep.min_second_difference >= -1e-10;

  rep.max_third_difference = -INFINITY;
  for (int i = 0; 0.1 + 0.25 * i <= 50.0; ++i) {
    const double x = 0.1 + 0.25 * i;
    rep.max_third_difference = std::max(
        rep.max_third_difference, ob.psi(x + 2 * d) - 2 * ob.psi(x + d) + 2 * ob.psi(x - d) - ob.psi(x - 2 * d));
  }
  rep.third_ok = rep.max_third_difference <= 1e-8;

  const double delta = 1e-5;
  for (int i = 0; 0.1 + 0.3 * i <= 20.0; ++i) {
    const double h = 0.1 + 0.3 * i;
    rep.max_derivative_error = std::max(
        rep.max_derivative_error, std::abs(ob.big_f(h) - (ob.psi(h + delta) - ob.psi(h - delta)) / delta + 1.0));
  }
  rep.derivative_ok = rep.max_derivative_error < 1e-6;

  std::vector<double> ys{0.01};
  for (int i = 1; i <= 9; ++i) ys.push_back(0.1 * i);
  ys.push_back(0.99);
  for (double y : ys) {
    rep.max_roundtrip_error = std::max(rep.max_roundtrip_error, std::abs(ob.big_f(ob.big_f_inverse(y)) - y));
  }
  rep.roundtrip_ok = rep.max_roundtrip_error < 1e-9;
  rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

namespace {

struct Outcome {
  bool passed = true;
  std::ostringstream detail;

  void fail_if(bool bad, const std::string& why) {
    if (bad && passed) {
      passed = false;
      detail << why;
    }
  }
};

std::vector<double> random_simplex(std::mt19937_64& rng, int k) {
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
  s.alpha = random_simplex(rng, k);
  for (int r = 0; r + 1 < k; ++r) s.mu.push_back(mu(rng));
  for (int r = 0; r < k; ++r) s.h.push_back(h_hi > 0.0 ? h(rng) : 0.0);
  return s;
}

double largest_abs_eigenvalue(const Matrix& a) {
  const Eigen::VectorXcd ev = Eigen::EigenSolver<Matrix>(a, false).eigenvalues();
  return ev.cwiseAbs().maxCoeff();
}

struct Suite {
  const VerifyOptions& opt;
  std::vector<CheckResult> rows;

  void run(const std::string& module, const std::string& name, const std::function<void(Outcome&)>& body) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome out;
    try {
      body(out);
    } catch (const std::exception& e) {
      out.passed = false;
      out.detail << "exception: " << e.what();
    }
    CheckResult r{module, name, out.passed, out.detail.str(), 0.0};
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    rows.push_back(std::move(r));
  }

  std::mt19937_64 rng(const std::string& label) const {
    return std::mt19937_64(rng::derive_key(opt.seed, label));
  }
};

void special_function_checks(Suite& s) {
  QuadratureCheckReport rep;
  s.run("special_functions", "nishimori residual < 1e-10 (h log grid, n = 1..3)", [&](Outcome& o) {
    rep = quadrature_check();
    o.detail << "max residual " << rep.max_residual;
    o.passed = rep.residuals_ok;
  });
  s.run("special_functions", "psi convex (second difference >= -1e-10)", [&](Outcome& o) {
    o.detail << "min " << rep.min_second_difference;
    o.passed = rep.convexity_ok;
  });
  s.run("special_functions", "psi third difference <= 1e-8", [&](Outcome& o) {
    o.detail << "max " << rep.max_third_difference;
    o.passed = rep.third_ok;
  });
  s.run("special_functions", "F = 2 psi' - 1", [&](Outcome& o) {
    o.detail << "max error " << rep.max_derivative_error;
    o.passed = rep.derivative_ok;
  });
  s.run("special_functions", "F(F^-1(y)) = y", [&](Outcome& o) {
    o.detail << "max error " << rep.max_roundtrip_error;
    o.passed = rep.roundtrip_ok;
  });
}

void model_checks(Suite& s) {
  const int n = s.opt.random_specs;
  s.run("model", "Delta = diag(alpha) M", [&](Outcome& o) {
    auto rng = s.rng("delta");
    double worst = 0.0;
    for (int t = 0; t < n; ++t) {
      const auto spec = random_spec(rng, 2 + t % 5, 0.0, 4.0, 0.0, 0.0);
      const auto em = build_effective(spec);
      const Vector a = Eigen::Map<const Vector>(spec.alpha.data(), spec.layers());
      worst = std::max(worst, (em.delta - a.asDiagonal() * em.m).cwiseAbs().maxCoeff());
    }
    o.detail << "max deviation " << worst;
    o.fail_if(worst > 1e-14, "");
  });
  s.run("model", "rho(oo) = rho(ee) for K even", [&](Outcome& o) {
    auto rng = s.rng("similar");
    double worst = 0.0;
    for (int t = 0; t < n; ++t) {
      const auto spec = random_spec(rng, 2 + 2 * (t % 3), 0.1, 4.0, 0.0, 0.0);
      const auto em = build_effective(spec);
      const auto blocks = odd_even_split(em.m);
      const double ee = largest_abs_eigenvalue(blocks.eo * blocks.oe);
      worst = std::max(worst, std::abs(spectral_radius_oo(em) - ee));
    }
    o.detail << "max difference " << worst;
    o.fail_if(worst > 1e-10, "");
  });
  s.run("model", "rho invariant under layer reversal", [&](Outcome& o) {
    auto rng = s.rng("reverse");
    double worst = 0.0;
    for (int t = 0; t < n; ++t) {
      const auto spec = random_spec(rng, 2 + t % 5, 0.1, 4.0, 0.0, 0.0);
      worst = std::max(worst, std::abs(spectral_radius_oo(build_effective(spec)) -
                                       spectral_radius_oo(build_effective(spec.reversed()))));
    }
    o.detail << "max difference " << worst;
    o.fail_if(worst > 1e-10, "");
  });
  s.run("model", "all mu < 2 => rho < 1 on a simplex grid", [&](Outcome& o) {
    auto rng = s.rng("subcritical");
    double worst = 0.0;
    int points = 0;
    for (int t = 0; t < std::min(n, 4); ++t) {
      const int k = 3 + t % 3;
      const auto spec = random_spec(rng, k, 0.0, 1.999, 0.0, 0.0);
      // all compositions of 10 into k parts
      std::vector<int> c(k, 0);
      c[k - 1] = 10;
      while (true) {
        ModelSpec g = spec;
        for (int r = 0; r < k; ++r) g.alpha[r] = c[r] / 10.0;
        worst = std::max(worst, spectral_radius_oo_dense(g));
        ++points;
        int j = k - 1;
        while (j > 0 && c[j] == 0) --j;
        if (j == 0) break;
        const int moved = c[j];
        c[j] = 0;
        ++c[j - 1];
        c[k - 1] = moved - 1;
      }
    }
    o.detail << points << " points, max rho " << worst;
    o.fail_if(worst >= 1.0, "");
  });
}

void variational_checks(Suite& s) {
  const int n = s.opt.random_specs;
  s.run("variational", "configured model: stationary solution", [&](Outcome& o) {
    const auto sol = solve_fixed_point(s.opt.model);
    o.detail << "phase " << to_string(sol.phase) << ", |grad| " << sol.gradient_norm;
    o.fail_if(!(sol.gradient_norm < 1e-8), "; gradient too large");
  });
  s.run("variational", "stationarity |grad p_var| < 1e-8", [&](Outcome& o) {
    auto rng = s.rng("stationary");
    double worst = 0.0;
    for (int t = 0; t < n; ++t) {
      const auto spec = random_spec(rng, 2 + t % 4, 0.2, 3.0, 0.05, 1.0);
      worst = std::max(worst, solve_fixed_point(spec).gradient_norm);
    }
    o.detail << "max " << worst;
    o.fail_if(worst >= 1e-8, "");
  });
  s.run("variational", "solver agreement within 1e-7", [&](Outcome& o) {
    auto rng = s.rng("agree");
    double worst = 0.0;
    for (int t = 0; t < n; ++t) {
      const int k = 2 + t % 4;
      const auto spec = random_spec(rng, k, 0.2, 3.0, 0.05, 1.0);
      const auto fp = solve_fixed_point(spec);
      if (k % 2 == 0) worst = std::max(worst, (solve_pi_ascent(spec).x_bar - fp.x_bar).cwiseAbs().maxCoeff());
      worst = std::max(worst, (solve_nested_bisection(spec).x_bar - fp.x_bar).cwiseAbs().maxCoeff());
    }
    o.detail << "max difference " << worst;
    o.fail_if(worst >= 1e-7, "");
  });
  s.run("variational", "x_bar non-decreasing in each h_s", [&](Outcome& o) {
    auto rng = s.rng("monotone");
    double worst = INFINITY;
    for (int t = 0; t < n; ++t) {
      const int k = 2 + t % 4;
      auto spec = random_spec(rng, k, 0.2, 3.0, 0.05, 1.0);
      const auto base = solve_fixed_point(spec).x_bar;
      spec.h[t % k] += 0.2;
      const auto more = solve_fixed_point(spec).x_bar;
      worst = std::min(worst, (more - base).minCoeff());
    }
    o.detail << "min increment " << worst;
    o.fail_if(worst < -1e-9, "");
  });
  s.run("variational", "phase dichotomy at h = 0, K even", [&](Outcome& o) {
    auto rng = s.rng("dichotomy");
    int checked = 0;
    for (int t = 0; t < 4 * n && checked < n; ++t) {
      const auto spec = random_spec(rng, 2 + 2 * (t % 2), 0.5, 4.5, 0.0, 0.0);
      const double rho = spectral_radius_oo(build_effective(spec));
      if (std::abs(rho - 1.0) < 0.05) continue;
      const auto sol = solve_fixed_point(spec);
      const bool zero = sol.x_bar.maxCoeff() < 1e-6;
      o.fail_if(zero != (rho < 1.0), "rho " + std::to_string(rho) + " disagrees with solution");
      ++checked;
    }
    o.detail << (o.passed ? "" : "; ") << checked << " specs";
  });
  s.run("variational", "saddle: min over x_e, max over x_o", [&](Outcome& o) {
    auto rng = s.rng("saddle");
    std::normal_distribution<double> g(0.0, 1e-2);
    double worst = 0.0;
    for (int t = 0; t < n; ++t) {
      const int k = 2 + 2 * (t % 2);
      const auto spec = random_spec(rng, k, 0.2, 3.0, 0.05, 1.0);
      const VariationalProblem prob(spec);
      const auto sol = solve_fixed_point(spec);
      const double p0 = prob.p_var(sol.x_bar);
      const Vector xo = odd_part(sol.x_bar);
      const double pi0 = prob.pi_value(xo);
      for (int j = 0; j < 5; ++j) {
        Vector x = sol.x_bar;
        for (int r = 1; r < k; r += 2) x[r] = std::clamp(x[r] + g(rng), 0.0, 1.0 - 1e-9);
        worst = std::max(worst, p0 - prob.p_var(x));
        Vector y = xo;
        for (auto& v : y) v = std::clamp(v + g(rng), 0.0, 1.0 - 1e-9);
        worst = std::max(worst, prob.pi_value(y) - pi0);
      }
    }
    o.detail << "max violation " << worst;
    o.fail_if(worst > 1e-12, "");
  });
  s.run("variational", "sum alpha psi(Mx) convex along segments", [&](Outcome& o) {
    auto rng = s.rng("convex");
    std::uniform_real_distribution<double> u(0.0, 0.999);
    double worst = 0.0;
    for (int t = 0; t < n; ++t) {
      const int k = 2 + t % 4;
      const VariationalProblem prob(random_spec(rng, k, 0.2, 4.0, 0.0, 0.0));
      for (int j = 0; j < 5; ++j) {
        Vector a(k), b(k);
        for (int r = 0; r < k; ++r) a[r] = u(rng), b[r] = u(rng);
        const double mid = prob.psi_part(0.5 * (a + b));
        worst = std::max(worst, mid - 0.5 * (prob.psi_part(a) + prob.psi_part(b)));
      }
    }
    o.detail << "max violation " << worst;
    o.fail_if(worst > 1e-12, "");
  });
}

void phase_checks(Suite& s) {
  s.run("phase", "form-factor optimum = max mu^2/4, condition (a) or (b)", [&](Outcome& o) {
    auto rng = s.rng("optimum");
    std::uniform_real_distribution<double> u(0.1, 3.0);
    double worst = 0.0;
    for (int t = 0; t < std::min(s.opt.random_specs, 6); ++t) {
      std::vector<double> mu(2 + t % 3);
      for (auto& m : mu) m = u(rng);
      const auto opt = optimize_form_factors(mu);
      worst = std::max(worst, std::abs(opt.rho - opt.bound));
      o.fail_if(opt.rho > opt.bound + 1e-9, "optimum above the bound; ");
      o.fail_if(opt.condition == OptimumCondition::None, "no condition matched; ");
    }
    o.detail << "max |rho* - bound| " << worst;
    o.fail_if(worst > 1e-6, "");
  });
  s.run("phase", "mu scan: deterministic, rho monotone, phase = sign(rho - 1)", [&](Outcome& o) {
    ScanRequest req;
    req.base = make_spec({0.5, 0.5}, {1.0});
    for (int i = 0; i <= 20; ++i) req.values.push_back(1.0 + 0.1 * i);
    const auto a = scan(req);
    const auto b = scan(req);
    for (std::size_t i = 0; i < a.size(); ++i) {
      o.fail_if(!a[i].ok, "failed point; ");
      o.fail_if(a[i].rho != b[i].rho || a[i].pressure != b[i].pressure || a[i].x_bar != b[i].x_bar,
                "repeat differs; ");
      if (i > 0) o.fail_if(a[i].rho < a[i - 1].rho, "rho not monotone; ");
      if (std::abs(a[i].rho - 1.0) > kCriticalWindow && a[i].ok) {
        const bool broken = a[i].phase == Phase::BrokenSymmetry;
        o.fail_if(broken != (a[i].rho > 1.0), "phase disagrees with rho; ");
      }
    }
    o.detail << a.size() << " points";
  });
  s.run("phase", "Perron direction verdicts", [&](Outcome& o) {
    auto rng = s.rng("perron");
    int checked = 0;
    for (int t = 0; t < 4 * s.opt.random_specs && checked < s.opt.random_specs; ++t) {
      const auto spec = random_spec(rng, 4, 0.5, 4.5, 0.0, 0.0);
      const auto chk = perron_instability_check(spec);
      if (std::abs(chk.rho - 1.0) < 0.1) continue;
      const auto want = chk.rho > 1.0 ? Stability::Unstable : Stability::Stable;
      o.fail_if(chk.verdict != want, "wrong verdict at rho " + std::to_string(chk.rho) + "; ");
      const double rel = std::abs(chk.delta_pi[1] - chk.prediction[1]) / std::abs(chk.prediction[1]);
      o.fail_if(rel > 0.2, "quadratic prediction off; ");
      ++checked;
    }
    o.detail << checked << " specs";
  });
}

void simulator_checks(Suite& s) {
  const ModelSpec& spec = s.opt.model;
  const int n = std::max(s.opt.enumeration_n, spec.layers());
  const auto size = SystemSize::from_alpha(spec.alpha, n);
  s.run("simulator", "disorder reproducible from seed", [&](Outcome& o) {
    const auto a = sample_disorder(spec, size, s.opt.seed);
    const auto b = sample_disorder(spec, size, s.opt.seed);
    o.fail_if(a.field != b.field, "fields differ");
    for (std::size_t e = 0; e < a.forward.size(); ++e) {
      o.fail_if(a.forward[e] != b.forward[e] || a.backward[e] != b.backward[e], "couplings differ");
    }
  });
  s.run("simulator", "energy invariant under global flip at zero field", [&](Outcome& o) {
    auto d = sample_disorder(spec, size, s.opt.seed + 1);
    d.field.setZero();
    auto rng = s.rng("flip");
    double worst = 0.0;
    for (int t = 0; t < 20; ++t) {
      std::vector<int> sigma(size.n), flipped(size.n);
      for (int i = 0; i < size.n; ++i) sigma[i] = (rng() & 1) ? 1 : -1, flipped[i] = -sigma[i];
      worst = std::max(worst, std::abs(energy(sigma, d) - energy(flipped, d)));
    }
    o.detail << "max difference " << worst;
    o.fail_if(worst > 1e-12, "");
  });
  s.run("simulator", "enumeration = brute force; thread-count invariant", [&](Outcome& o) {
    const auto d = sample_disorder(spec, SystemSize::from_alpha(spec.alpha, std::max(10, spec.layers())),
                                   s.opt.seed + 2);
    const auto fast = exact_enumerate(d);
    const auto ref = exact_enumerate_reference(d);
    const double dp = std::abs(*fast.pressure - *ref.pressure);
    const double dm = (fast.site_mean - ref.site_mean).cwiseAbs().maxCoeff();
    const int threads = omp_get_max_threads();
    omp_set_num_threads(1);
    const auto single = exact_enumerate(d);
    omp_set_num_threads(threads);
    o.detail << "|dp| " << dp << ", |d<sigma>| " << dm;
    o.fail_if(dp > 1e-12 || dm > 1e-12, "; reference mismatch");
    o.fail_if(*single.pressure != *fast.pressure || single.site_mean != fast.site_mean, "; thread dependence");
  });
  QuenchedReport rep;
  s.run("simulator", "E<m_r> = E<q_r> within 4 combined stderr", [&](Outcome& o) {
    QuenchedOptions q;
    q.n_disorder = s.opt.disorder_samples;
    q.base_seed = s.opt.seed;
    rep = quenched_run(spec, size, q);
    for (int r = 0; r < spec.layers(); ++r) {
      const double z =
          std::abs(rep.mean_m[r] - rep.mean_q[r]) / std::hypot(rep.stderr_m[r], rep.stderr_q[r]);
      o.detail << (r ? ", " : "") << "z_" << r + 1 << " " << z;
      o.fail_if(!(z < 4.0), "");
    }
  });
  s.run("simulator", "site identity E<s_i>^2 = E<s_i> within 4 stderr", [&](Outcome& o) {
    const double z = std::abs(rep.site_identity_mean) / rep.site_identity_stderr;
    o.detail << "z " << z;
    o.fail_if(!(z < 4.0), "");
  });
  s.run("simulator", "zero field: E<m_r> = 0", [&](Outcome& o) {
    ModelSpec zero = spec;
    std::fill(zero.h.begin(), zero.h.end(), 0.0);
    QuenchedOptions q;
    q.n_disorder = std::min(20, s.opt.disorder_samples);
    q.base_seed = s.opt.seed + 3;
    const auto z = quenched_run(zero, size, q);
    const double worst = z.mean_m.cwiseAbs().maxCoeff();
    o.detail << "max |E<m_r>| " << worst;
    o.fail_if(worst > 1e-12, "");
  });
  s.run("simulator", "block Gibbs = enumeration within 4 stderr", [&](Outcome& o) {
    const auto d = sample_disorder(spec, size, s.opt.seed + 4);
    const auto exact = exact_enumerate(d);
    GibbsOptions g;
    g.sweeps = 20000;
    g.burn_in = 1000;
    g.seed = s.opt.seed + 5;
    const auto est = run_block_gibbs(d, g);
    for (int r = 0; r < spec.layers(); ++r) {
      const double zm = std::abs(est.m[r] - exact.m[r]) / std::max(est.stderr_m[r], 1e-12);
      const double zq = std::abs(est.q[r] - exact.q[r]) / std::max(est.stderr_q[r], 1e-12);
      o.detail << (r ? ", " : "") << "z_m" << r + 1 << " " << zm << " z_q" << r + 1 << " " << zq;
      o.fail_if(!(zm < 4.0 && zq < 4.0), "");
    }
  });
}

}  // namespace

std::vector<CheckResult> run_property_suite(const VerifyOptions& options) {
  options.model.validate();
  Suite s{options, {}};
  special_function_checks(s);
  model_checks(s);
  variational_checks(s);
  phase_checks(s);
  simulator_checks(s);
  return s.rows;
}

}  // namespace dbm
