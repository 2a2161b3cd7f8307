#include "dbm/cli.hpp"

#include "dbm/one_body.hpp"
#include "dbm/phase.hpp"
#include "dbm/simulator.hpp"
#include "dbm/variational.hpp"
#include "dbm/verify.hpp"

#include <json.hpp>
#include <omp.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>

namespace dbm::cli {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

struct Context {
  const RunConfig& cfg;
  const OneBody& ob;
  std::ostream& out;
  fs::path dir;

  std::string path(const std::string& file) const { return (dir / file).string(); }

  void write_json(const std::string& file, const json& j) const {
    std::ofstream f(path(file), std::ios::binary);
    if (!f) throw std::runtime_error("cannot write '" + path(file) + "'");
    f << j.dump(2) << '\n';
  }
};

std::vector<double> to_std(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

std::vector<std::string> layer_columns(const std::string& prefix, int k) {
  std::vector<std::string> cols;
  for (int r = 1; r <= k; ++r) cols.push_back(prefix + std::to_string(r));
  return cols;
}

template <class T>
std::vector<T> concat(std::vector<T> a, const std::vector<T>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

json model_json(const ModelSpec& s) {
  return {{"K", s.layers()}, {"alpha", s.alpha}, {"mu", s.mu}, {"h", s.h}};
}

bool all_positive_fields(const ModelSpec& s) {
  return std::all_of(s.h.begin(), s.h.end(), [](double h) { return h > 0.0; });
}

// ---- solve -----------------------------------------------------------------------

int cmd_solve(const Context& ctx) {
  const auto& c = ctx.cfg;
  const auto& spec = c.model;
  const int k = spec.layers();
  const bool even = k % 2 == 0;
  const bool nested_ok = all_positive_fields(spec) && k <= c.solve.nested_max_layers;

  std::vector<std::string> methods;
  auto add = [&](const std::string& m) {
    if (std::find(methods.begin(), methods.end(), m) == methods.end()) methods.push_back(m);
  };
  for (const auto& m : c.solve.methods) {
    if (m == "auto") {
      add("fixed_point");
      if (even) add("pi_ascent");
      if (nested_ok) add("nested_bisection");
    } else {
      if (m == "pi_ascent" && !even) throw ConfigError("solve.methods: pi_ascent requires K even");
      if (m == "nested_bisection" && !nested_ok) {
        throw ConfigError("solve.methods: nested_bisection requires all h_r > 0 and K <= solve.nested_max_layers");
      }
      add(m);
    }
  }

  const double rho = spectral_radius_oo(build_effective(spec));
  json record;
  record["model"] = model_json(spec);
  record["rho"] = rho;
  record["solutions"] = json::array();

  CsvWriter csv(concat<std::string>({"method", "status", "phase", "pressure", "gradient_norm", "residual", "iterations"},
                                    layer_columns("x_", k)));
  bool failed = false;
  std::vector<Vector> solutions;
  for (const auto& m : methods) {
    json row{{"method", m}};
    try {
      VariationalSolution sol;
      if (m == "fixed_point") {
        FixedPointOptions o;
        o.tol = c.solve.tol;
        o.damping = c.solve.damping;
        o.max_iterations = c.solve.max_iterations;
        sol = solve_fixed_point(spec, o, ctx.ob);
      } else if (m == "pi_ascent") {
        PiAscentOptions o;
        o.tol = c.solve.tol;
        o.max_iterations = c.solve.max_iterations;
        sol = solve_pi_ascent(spec, o, ctx.ob);
      } else {
        NestedBisectionOptions o;
        o.tol = c.solve.tol;
        o.max_layers = c.solve.nested_max_layers;
        sol = solve_nested_bisection(spec, o, nullptr, ctx.ob);
      }
      solutions.push_back(sol.x_bar);
      // Inside the critical window the orbit is returned without meeting tol.
      const bool unresolved = sol.phase == Phase::Unresolved;
      failed = failed || unresolved;
      const std::string status = unresolved ? "unresolved" : "converged";
      row["status"] = status;
      row["phase"] = to_string(sol.phase);
      row["x_bar"] = to_std(sol.x_bar);
      row["pressure"] = sol.pressure;
      row["gradient_norm"] = sol.gradient_norm;
      row["residual"] = sol.residual;
      row["iterations"] = sol.iterations;
      row["decoupled"] = sol.decoupled;
      csv.row().add(m).add(status).add(std::string(to_string(sol.phase))).add(sol.pressure);
      csv.add(sol.gradient_norm).add(sol.residual).add(sol.iterations);
      for (int r = 0; r < k; ++r) csv.add(sol.x_bar[r]);
      ctx.out << std::setw(17) << std::left << m << " phase " << to_string(sol.phase) << ", p_var "
              << csv_real(sol.pressure) << ", |grad| " << sol.gradient_norm << ", x_bar =";
      for (int r = 0; r < k; ++r) ctx.out << ' ' << csv_real(sol.x_bar[r]);
      ctx.out << '\n';
    } catch (const ConvergenceError& e) {
      failed = true;
      row["status"] = "not_converged";
      row["error"] = e.what();
      row["best_residual"] = e.best_residual();
      csv.row().add(m).add(std::string("not_converged")).add(std::string("")).add(NAN).add(NAN);
      csv.add(e.best_residual()).add(0);
      for (int r = 0; r < k; ++r) csv.add(NAN);
      ctx.out << std::setw(17) << std::left << m << " did not converge: " << e.what() << '\n';
    }
    record["solutions"].push_back(row);
  }
  double spread = 0.0;
  for (const auto& s : solutions) spread = std::max(spread, (s - solutions.front()).cwiseAbs().maxCoeff());
  record["max_disagreement"] = spread;
  ctx.out << "rho([M^2]^(oo)) = " << csv_real(rho) << ", max disagreement between methods " << spread << '\n';
  ctx.write_json("solve.json", record);
  csv.write(ctx.path("solve.csv"));
  return failed ? kNonConvergence : kOk;
}

// ---- phase-scan --------------------------------------------------------------------

std::vector<std::vector<double>> simplex_rows(int k, int steps) {
  std::vector<std::vector<double>> rows;
  std::vector<int> c(k, 0);
  c[k - 1] = steps;
  while (true) {
    std::vector<double> a(k);
    for (int r = 0; r < k; ++r) a[r] = static_cast<double>(c[r]) / steps;
    rows.push_back(a);
    int j = k - 1;
    while (j > 0 && c[j] == 0) --j;
    if (j == 0) break;
    const int moved = c[j];
    c[j] = 0;
    ++c[j - 1];
    c[k - 1] = moved - 1;
  }
  return rows;
}

int cmd_phase_scan(const Context& ctx) {
  const auto& c = ctx.cfg;
  const int k = c.model.layers();
  ScanRequest req;
  req.base = c.model;
  req.axis = scan_axis_from_string(c.scan.axis);
  req.edge = c.scan.edge - 1;
  req.tol = c.scan.tol;
  req.one_body = &ctx.ob;
  if (req.axis == ScanAxis::AlphaSimplex) {
    req.alpha_rows = c.scan.alpha_rows.empty() ? simplex_rows(k, c.scan.alpha_steps) : c.scan.alpha_rows;
  } else if (!c.scan.values.empty()) {
    req.values = c.scan.values;
  } else {
    const int count = static_cast<int>(std::floor((c.scan.stop - c.scan.start) / c.scan.step + 1e-9)) + 1;
    for (int i = 0; i < count; ++i) req.values.push_back(c.scan.start + i * c.scan.step);
  }
  const auto points = scan(req);

  std::string first = "row";
  if (req.axis == ScanAxis::MuEdge) first = "mu_" + std::to_string(c.scan.edge) + std::to_string(c.scan.edge + 1);
  if (req.axis == ScanAxis::HUniform) first = "h";
  std::vector<std::string> header{first, "rho"};
  header = concat(header, layer_columns("x_", k));
  header.push_back("pressure");
  header.push_back("phase");
  if (req.axis == ScanAxis::AlphaSimplex) header = concat(header, layer_columns("alpha_", k));
  header.push_back("status");
  CsvWriter csv(header);
  int failed = 0;
  for (const auto& p : points) {
    if (req.axis == ScanAxis::AlphaSimplex) {
      csv.row().add(static_cast<int>(p.value));
    } else {
      csv.row().add(p.value);
    }
    csv.add(p.ok ? p.rho : NAN);
    for (int r = 0; r < k; ++r) csv.add(p.ok ? p.x_bar[r] : NAN);
    csv.add(p.pressure).add(std::string(p.ok ? to_string(p.phase) : "failed"));
    if (req.axis == ScanAxis::AlphaSimplex) {
      for (int r = 0; r < k; ++r) csv.add(req.alpha_rows[static_cast<std::size_t>(p.value)][r]);
    }
    csv.add(p.ok ? std::string("ok") : "error: " + p.error);
    failed += !p.ok;
  }
  csv.write(ctx.path("phase_scan.csv"));
  ctx.out << points.size() << " points (" << failed << " failed) written to " << ctx.path("phase_scan.csv") << '\n';
  // Report each sign change of rho - 1, bracketed by the nearest non-critical points.
  const PhasePoint* last = nullptr;
  for (const auto& b : points) {
    if (!b.ok || b.rho == 1.0) continue;
    if (last && (last->rho - 1.0) * (b.rho - 1.0) < 0.0) {
      ctx.out << "rho - 1 changes sign between " << csv_real(last->value) << " (" << to_string(last->phase)
              << ") and " << csv_real(b.value) << " (" << to_string(b.phase) << ")\n";
    }
    last = &b;
  }
  return failed ? kNonConvergence : kOk;
}

// ---- optimize-alpha ------------------------------------------------------------------

int cmd_optimize_alpha(const Context& ctx) {
  const auto& c = ctx.cfg;
  const int k = c.model.layers();
  const auto opt = optimize_form_factors(c.model.mu, c.optimize_alpha.grid);
  CsvWriter csv(concat<std::string>({"rho_star", "bound", "condition", "r_star"}, layer_columns("alpha_", k)));
  csv.row().add(opt.rho).add(opt.bound).add(std::string(to_string(opt.condition))).add(opt.r_star + 1);
  for (double a : opt.alpha) csv.add(a);
  csv.write(ctx.path("optimize_alpha.csv"));
  ctx.out << "rho* = " << csv_real(opt.rho) << " (bound max mu^2/4 = " << csv_real(opt.bound) << ")\nalpha* =";
  for (double a : opt.alpha) ctx.out << ' ' << csv_real(a);
  ctx.out << "\ncondition " << to_string(opt.condition);
  if (opt.r_star >= 0) ctx.out << " with r* = " << opt.r_star + 1;
  ctx.out << " (" << opt.grid_points << " grid points)\n";
  return kOk;
}

// ---- simulate / enumerate ----------------------------------------------------------------

json report_json(const QuenchedReport& rep, const SystemSize& size) {
  json j;
  j["engine"] = to_string(rep.engine);
  j["n"] = rep.n;
  j["layer_sizes"] = size.sizes;
  j["n_disorder"] = rep.n_disorder;
  j["mean_m"] = to_std(rep.mean_m);
  j["stderr_m"] = to_std(rep.stderr_m);
  j["mean_q"] = to_std(rep.mean_q);
  j["stderr_q"] = to_std(rep.stderr_q);
  j["mean_m_minus_q"] = to_std(rep.mean_m_minus_q);
  j["stderr_m_minus_q"] = to_std(rep.stderr_m_minus_q);
  j["site_identity_mean"] = rep.site_identity_mean;
  j["site_identity_stderr"] = rep.site_identity_stderr;
  if (rep.mean_pressure) {
    j["mean_pressure"] = *rep.mean_pressure;
    j["stderr_pressure"] = *rep.stderr_pressure;
    j["var_pressure"] = *rep.var_pressure;
    j["stderr_var_pressure"] = *rep.stderr_var_pressure;
    j["pressures"] = rep.pressures;
  }
  j["disorder_seeds"] = rep.disorder_seeds;
  return j;
}

std::vector<std::string> layer_header() {
  return {"n", "layer", "n_r", "x_bar", "mean_m", "stderr_m", "mean_q", "stderr_q", "mean_m_minus_q",
          "stderr_m_minus_q"};
}

void add_layer_rows(CsvWriter& csv, const QuenchedReport& rep, const SystemSize& size, const Vector& x_bar) {
  for (int r = 0; r < size.layers(); ++r) {
    csv.row().add(rep.n).add(r + 1).add(size.sizes[r]).add(x_bar[r]).add(rep.mean_m[r]).add(rep.stderr_m[r]);
    csv.add(rep.mean_q[r]).add(rep.stderr_q[r]).add(rep.mean_m_minus_q[r]).add(rep.stderr_m_minus_q[r]);
  }
}

void print_layers(std::ostream& out, const QuenchedReport& rep, const Vector& x_bar) {
  for (int r = 0; r < rep.mean_m.size(); ++r) {
    out << "  layer " << r + 1 << ": E<m> = " << rep.mean_m[r] << " +- " << rep.stderr_m[r] << ", E<q> = "
        << rep.mean_q[r] << " +- " << rep.stderr_q[r] << ", x_bar = " << x_bar[r] << '\n';
  }
}

int cmd_simulate(const Context& ctx) {
  const auto& c = ctx.cfg;
  const auto theory = solve_fixed_point(c.model, FixedPointOptions{}, ctx.ob);
  const auto size = SystemSize::from_alpha(c.model.alpha, c.simulate.n);
  QuenchedOptions q;
  q.n_disorder = c.simulate.n_disorder;
  q.base_seed = c.run.seed;
  q.engine = c.simulate.engine == "enumeration" ? Engine::Enumeration : Engine::BlockGibbs;
  q.gibbs.sweeps = c.simulate.sweeps;
  q.gibbs.burn_in = c.simulate.burn_in;
  q.gibbs.replicas = c.simulate.replicas;
  q.gibbs.batches = c.simulate.batches;
  const auto rep = quenched_run(c.model, size, q);

  json record;
  record["model"] = model_json(c.model);
  record["base_seed"] = c.run.seed;
  record["theory"] = {{"x_bar", to_std(theory.x_bar)}, {"p_var", theory.pressure}, {"phase", to_string(theory.phase)}};
  record["report"] = report_json(rep, size);
  ctx.write_json("simulate.json", record);
  CsvWriter csv(layer_header());
  add_layer_rows(csv, rep, size, theory.x_bar);
  csv.write(ctx.path("simulate.csv"));

  ctx.out << to_string(rep.engine) << ", N = " << rep.n << ", " << rep.n_disorder << " disorder samples\n";
  print_layers(ctx.out, rep, theory.x_bar);
  if (rep.mean_pressure) {
    ctx.out << "  E[p_N] = " << *rep.mean_pressure << " +- " << *rep.stderr_pressure << ", p_var(x_bar) = "
            << theory.pressure << '\n';
  }
  return kOk;
}

int cmd_enumerate(const Context& ctx) {
  const auto& c = ctx.cfg;
  const auto theory = solve_fixed_point(c.model, FixedPointOptions{}, ctx.ob);
  CsvWriter layers(layer_header());
  CsvWriter pressure({"n", "mean_pressure", "stderr_pressure", "var_pressure", "stderr_var_pressure", "p_var",
                      "abs_gap"});
  json record;
  record["model"] = model_json(c.model);
  record["base_seed"] = c.run.seed;
  record["theory"] = {{"x_bar", to_std(theory.x_bar)}, {"p_var", theory.pressure}, {"phase", to_string(theory.phase)}};
  record["reports"] = json::array();
  for (int n : c.enumerate.sizes) {
    const auto size = SystemSize::from_alpha(c.model.alpha, n);
    QuenchedOptions q;
    q.n_disorder = c.enumerate.n_disorder;
    q.base_seed = c.run.seed;
    q.engine = Engine::Enumeration;
    const auto rep = quenched_run(c.model, size, q);
    add_layer_rows(layers, rep, size, theory.x_bar);
    pressure.row().add(n).add(*rep.mean_pressure).add(*rep.stderr_pressure).add(*rep.var_pressure);
    pressure.add(*rep.stderr_var_pressure).add(theory.pressure).add(std::abs(*rep.mean_pressure - theory.pressure));
    record["reports"].push_back(report_json(rep, size));
    ctx.out << "N = " << n << ": E[p_N] = " << *rep.mean_pressure << " +- " << *rep.stderr_pressure
            << ", Var(p_N) = " << *rep.var_pressure << '\n';
    print_layers(ctx.out, rep, theory.x_bar);
  }
  ctx.out << "p_var(x_bar) = " << theory.pressure << '\n';
  layers.write(ctx.path("enumerate.csv"));
  pressure.write(ctx.path("enumerate_pressure.csv"));
  ctx.write_json("enumerate.json", record);
  return kOk;
}

// ---- verify / quadrature-check ---------------------------------------------------------------

int cmd_verify(const Context& ctx) {
  const auto& c = ctx.cfg;
  VerifyOptions o;
  o.model = c.model;
  o.seed = c.run.seed;
  o.random_specs = c.verify.random_specs;
  o.disorder_samples = c.verify.disorder_samples;
  o.enumeration_n = c.verify.enumeration_n;
  const auto rows = run_property_suite(o);
  CsvWriter csv({"module", "invariant", "status", "detail"});
  int failed = 0;
  ctx.out << std::left << std::setw(18) << "module" << std::setw(62) << "invariant" << std::setw(6) << "result"
          << std::right << std::setw(9) << "seconds" << "  detail\n";
  for (const auto& r : rows) {
    const std::string status = r.passed ? "PASS" : "FAIL";
    failed += !r.passed;
    csv.row().add(r.module).add(r.name).add(status).add(r.detail);
    ctx.out << std::left << std::setw(18) << r.module << std::setw(62) << r.name << std::setw(6) << status
            << std::right << std::setw(9) << std::fixed << std::setprecision(2) << r.seconds
            << std::defaultfloat << std::setprecision(6) << "  " << r.detail << '\n';
  }
  csv.write(ctx.path("verify.csv"));
  ctx.out << rows.size() - failed << "/" << rows.size() << " invariants hold\n";
  return failed ? kCheckFailed : kOk;
}

int cmd_quadrature_check(const Context& ctx) {
  const auto& q = ctx.cfg.quadrature_check;
  QuadratureCheckOptions o;
  o.h_min = q.h_min;
  o.h_max = q.h_max;
  o.points = q.points;
  o.moments = q.moments;
  o.threshold = q.threshold;
  const auto rep = quadrature_check(o, ctx.ob);
  CsvWriter residuals({"h", "n", "residual"});
  for (const auto& r : rep.residuals) residuals.row().add(r.h).add(r.n).add(r.residual);
  residuals.write(ctx.path("quadrature_check.csv"));

  CsvWriter summary({"identity", "value", "bound", "status"});
  auto line = [&](const std::string& name, double value, const std::string& rel, double bound, bool ok) {
    summary.row().add(name).add(value).add(bound).add(std::string(ok ? "PASS" : "FAIL"));
    ctx.out << std::left << std::setw(34) << name << std::setw(6) << (ok ? "PASS" : "FAIL") << csv_real(value)
            << ' ' << rel << ' ' << bound << '\n';
  };
  line("max nishimori residual", rep.max_residual, "<", q.threshold, rep.residuals_ok);
  line("min second difference of psi", rep.min_second_difference, ">=", -1e-10, rep.convexity_ok);
  line("max third difference of psi", rep.max_third_difference, "<=", 1e-8, rep.third_ok);
  line("max |F - (2 psi' - 1)|", rep.max_derivative_error, "<", 1e-6, rep.derivative_ok);
  line("max |F(F^-1(y)) - y|", rep.max_roundtrip_error, "<", 1e-9, rep.roundtrip_ok);
  summary.write(ctx.path("quadrature_identities.csv"));
  ctx.out << rep.residuals.size() << " residuals in " << rep.seconds << " s\n";
  return rep.passed() ? kOk : kCheckFailed;
}

}  // namespace

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names{"solve",    "phase-scan", "optimize-alpha",  "simulate",
                                              "enumerate", "verify",    "quadrature-check"};
  return names;
}

int run_command(const std::string& command, const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  try {
    validate_config(cfg);
    const auto& names = command_names();
    if (std::find(names.begin(), names.end(), command) == names.end()) {
      throw ConfigError("unknown command '" + command + "'");
    }
    out << "# command: " << command << "\n# effective config:\n" << config_to_json(cfg) << '\n';
    out.flush();
    omp_set_num_threads(cfg.run.threads > 0 ? cfg.run.threads : omp_get_num_procs());
    const fs::path dir(cfg.run.out);
    fs::create_directories(dir);
    {
      std::ofstream f(dir / "effective_config.json", std::ios::binary);
      f << config_to_json(cfg) << '\n';
    }
    const OneBody ob(cfg.quadrature);
    const Context ctx{cfg, ob, out, dir};
    if (command == "solve") return cmd_solve(ctx);
    if (command == "phase-scan") return cmd_phase_scan(ctx);
    if (command == "optimize-alpha") return cmd_optimize_alpha(ctx);
    if (command == "simulate") return cmd_simulate(ctx);
    if (command == "enumerate") return cmd_enumerate(ctx);
    if (command == "verify") return cmd_verify(ctx);
    return cmd_quadrature_check(ctx);
  } catch (const ConvergenceError& e) {
    err << "error: did not converge: " << e.what() << " (best residual " << e.best_residual() << ")\n";
    return kNonConvergence;
  } catch (const std::invalid_argument& e) {
    err << "error: invalid input: " << e.what() << '\n';
    return kInvalidInput;
  } catch (const std::domain_error& e) {
    err << "error: invalid input: " << e.what() << '\n';
    return kInvalidInput;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kInvalidInput;
  }
}

}  // namespace dbm::cli
