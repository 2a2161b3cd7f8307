#include "dbm/variational.hpp"

#include <boost/math/tools/roots.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <sstream>

namespace dbm {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

// Bracketed root of a function increasing on [lo, hi]; returns the midpoint of
// the final bracket.
template <class Fn>
double bracketed_root(Fn&& fn, double lo, double hi, double flo, double fhi) {
  auto tol = [](double a, double b) { return std::abs(b - a) <= 4.0 * kEps * std::max(1.0, std::abs(a)); };
  std::uintmax_t max_iter = 300;
  const auto r = boost::math::tools::toms748_solve(fn, lo, hi, flo, fhi, tol, max_iter);
  return 0.5 * (r.first + r.second);
}

double sup_norm(const Vector& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

// Fill the derived fields of a solution from its x_bar.
void finish(VariationalSolution& sol, const VariationalProblem& prob) {
  sol.pressure = prob.p_var(sol.x_bar);
  sol.gradient_norm = sup_norm(prob.grad_p_var(sol.x_bar));
  sol.residual = sup_norm(sol.x_bar - prob.consistency_map(sol.x_bar));
}

// Snap a numerically vanishing h = 0 solution onto x = 0.
void settle_phase(VariationalSolution& sol, const VariationalProblem& prob, double zero_threshold) {
  sol.phase = classify_phase(prob.spec(), sol.x_bar, zero_threshold);
  if (sol.phase == Phase::ZeroSolution) sol.x_bar.setZero();
  finish(sol, prob);
}

// Layers with alpha_r = 0 are slaved to their neighbours.
void fill_slaved_layers(const VariationalProblem& prob, Vector& x) {
  const auto& spec = prob.spec();
  const Vector f = prob.fields(x);
  for (int r = 0; r < spec.layers(); ++r) {
    if (spec.alpha[r] == 0.0) x[r] = prob.one_body().big_f(f[r]);
  }
}

}  // namespace

Vector default_fixed_point_start(int layers) { return Vector::Constant(layers, 1.0 - 1e-6); }

// ---- damped fixed point ----------------------------------------------------

VariationalSolution solve_fixed_point(const ModelSpec& spec, const Vector& init, const FixedPointOptions& options,
                                      const OneBody& one_body) {
  if (!(options.tol > 0.0)) throw std::invalid_argument("solve_fixed_point: tol must be positive");
  if (!(options.damping > 0.0 && options.damping <= 1.0)) {
    throw std::invalid_argument("solve_fixed_point: damping must lie in (0, 1]");
  }
  const VariationalProblem prob(spec, one_body);
  check_order_parameter(init, spec.layers());

  const bool zero_field = spec.zero_field();
  const double rho = zero_field ? spectral_radius_oo(prob.effective()) : 0.0;
  const bool critical = zero_field && std::abs(rho - 1.0) < kCriticalWindow;
  const double zero_threshold = std::max(1e-3 * options.tol, 1e-14);

  VariationalSolution sol;
  sol.method = Method::FixedPoint;
  sol.decoupled = !is_coupled_chain(spec);

  Vector x = init;
  double gamma = options.damping;
  double prev = std::numeric_limits<double>::infinity();
  double best = prev;
  for (int it = 0; it < options.max_iterations; ++it) {
    const Vector t = prob.consistency_map(x);
    const double res = sup_norm(x - t);
    best = std::min(best, res);
    // At h = 0 the zero solution is approached geometrically, so the stopping
    // rule is relative there and the orbit runs until it is numerically zero.
    const double scale = zero_field ? std::min(1.0, sup_norm(x)) : 1.0;
    sol.iterations = it;
    if (res < options.tol * scale || (zero_field && sup_norm(x) <= zero_threshold)) {
      sol.x_bar = x;
      settle_phase(sol, prob, zero_threshold);
      return sol;
    }
    if (res > prev) gamma = std::max(options.min_damping, 0.5 * gamma);
    prev = res;
    x = (1.0 - gamma) * x + gamma * t;
  }
  if (critical) {
    sol.x_bar = x;
    finish(sol, prob);
    sol.phase = Phase::Unresolved;
    return sol;
  }
  std::ostringstream os;
  os << "solve_fixed_point: no convergence after " << options.max_iterations << " iterations (best residual "
     << best << ")";
  throw ConvergenceError(os.str(), best);
}

VariationalSolution solve_fixed_point(const ModelSpec& spec, const FixedPointOptions& options,
                                      const OneBody& one_body) {
  return solve_fixed_point(spec, default_fixed_point_start(spec.layers()), options, one_body);
}

// ---- ascent on pi ------------------------------------------------------------

namespace {

Vector pi_ascent_chain(const VariationalProblem& prob, const PiAscentOptions& options, int& iterations) {
  const auto& spec = prob.spec();
  const int half = spec.layers() / 2;
  Vector xo = Vector::Constant(half, options.start);
  double value = prob.pi_value(xo);

  auto project = [&](Vector v) {
    for (int i = 0; i < half; ++i) v[i] = std::clamp(v[i], 0.0, options.boundary);
    return v;
  };
  // Stationarity in field units: bracket of grad pi without the alpha_o / 2 prefactor.
  auto field_residual = [&](const Vector& g, const Vector& x) {
    double worst = 0.0;
    for (int i = 0; i < half; ++i) {
      double gi = g[i] / (0.5 * spec.alpha[2 * i]);
      if (x[i] <= 0.0 && gi < 0.0) gi = 0.0;
      worst = std::max(worst, std::abs(gi));
    }
    return worst;
  };

  for (int it = 0; it < options.max_iterations; ++it) {
    iterations = it;
    const Vector g = prob.grad_pi(xo);
    if (field_residual(g, xo) < 1e-2 * options.tol) return xo;

    Matrix hess = prob.hessian_pi(xo);
    hess = 0.5 * (hess + hess.transpose());
    Vector dir;
    Eigen::LLT<Matrix> llt(-hess);
    if (llt.info() == Eigen::Success) {
      dir = llt.solve(g);
    } else {
      dir = g;
      const double m = sup_norm(dir);
      if (m > 0.1) dir *= 0.1 / m;
    }
    for (int i = 0; i < half; ++i) {
      if (xo[i] <= 0.0 && dir[i] < 0.0) dir[i] = 0.0;
    }

    bool accepted = false;
    double t = 1.0;
    for (int ls = 0; ls < 60; ++ls, t *= 0.5) {
      const Vector cand = project(xo + t * dir);
      const Vector step = cand - xo;
      if (sup_norm(step) == 0.0) break;
      const double cand_value = prob.pi_value(cand);
      const double slack = 1e-15 * std::max(1.0, std::abs(value));
      if (cand_value >= value + 1e-4 * g.dot(step) - slack) {
        xo = cand;
        value = cand_value;
        accepted = true;
        break;
      }
    }
    if (!accepted) return xo;  // no ascent direction left within round-off
  }
  std::ostringstream os;
  os << "solve_pi_ascent: no convergence after " << options.max_iterations << " iterations";
  throw ConvergenceError(os.str(), field_residual(prob.grad_pi(xo), xo));
}

// Reconstruct x_e = F(M^(eo) x_o + h_e).
Vector reconstruct_even(const VariationalProblem& prob, const Vector& xo) {
  const auto& spec = prob.spec();
  Vector fe = prob.m_blocks().eo * xo;
  Vector xe(fe.size());
  for (Eigen::Index i = 0; i < fe.size(); ++i) xe[i] = prob.one_body().big_f(fe[i] + spec.h[2 * i + 1]);
  return xe;
}

}  // namespace

VariationalSolution solve_pi_ascent(const ModelSpec& spec, const PiAscentOptions& options, const OneBody& one_body) {
  const VariationalProblem prob(spec, one_body);
  const int k = spec.layers();
  if (k % 2 != 0) throw std::invalid_argument("solve_pi_ascent: requires an even number of layers");

  VariationalSolution sol;
  sol.method = Method::PiAscent;
  Vector x = Vector::Zero(k);
  int iterations = 0;
  if (is_coupled_chain(spec)) {
    const Vector xo = pi_ascent_chain(prob, options, iterations);
    x = interleave(xo, reconstruct_even(prob, xo));
  } else {
    sol.decoupled = true;
    for (const auto& block : decouple(spec)) {
      if (block.count == 1) {
        x[block.first] = one_body.big_f(spec.h[block.first]);
        continue;
      }
      if (block.count % 2 != 0) {
        throw std::invalid_argument("solve_pi_ascent: decoupled block starting at layer " +
                                    std::to_string(block.first + 1) + " has an odd number of layers");
      }
      const VariationalProblem sub(block.spec, one_body);
      int sub_it = 0;
      const Vector xo = pi_ascent_chain(sub, options, sub_it);
      iterations += sub_it;
      x.segment(block.first, block.count) = interleave(xo, reconstruct_even(sub, xo));
    }
    fill_slaved_layers(prob, x);
  }
  sol.iterations = iterations;
  sol.x_bar = x;
  settle_phase(sol, prob, std::max(1e-3 * options.tol, 1e-14));
  return sol;
}

// ---- nested bisection --------------------------------------------------------

double scalar_solution(double t, double h, const OneBody& one_body) {
  if (!(t >= 0.0) || !(h > 0.0)) throw std::domain_error("scalar_solution: requires t >= 0 and h > 0");
  if (t == 0.0) return one_body.big_f(h);
  auto g = [&](double x) { return x - one_body.big_f(t * x + h); };
  const double g0 = -one_body.big_f(h);
  const double g1 = g(1.0);
  if (g1 <= 0.0) return 1.0;  // F saturated to 1 in double precision
  return bracketed_root(g, 0.0, 1.0, g0, g1);
}

Vector chain_theta(const ModelSpec& spec, const Vector& a) {
  const int k = spec.layers();
  Vector theta(k);
  for (int r = 0; r < k; ++r) {
    double v = 0.0;
    if (r > 0) v += spec.mu[r - 1] / a[r - 1];
    if (r + 1 < k) v += spec.mu[r] * a[r];
    theta[r] = spec.alpha[r] * v;
  }
  return theta;
}

namespace {

class NestedChain {
 public:
  NestedChain(const ModelSpec& spec, const OneBody& ob) : spec_(spec), ob_(ob), k_(spec.layers()) {}

  // Solve level r (0-based edge index, 0..K-2) for a_r given a_{r+1}.
  // Fills a[0..r].
  void solve_level(int r, double a_next, Vector& a) const {
    auto g = [&](double u) {
      a[r] = std::exp(u);
      if (r > 0) solve_level(r - 1, a[r], a);
      return std::log(lhs(r, a)) - std::log(rhs(r, a[r], a_next));
    };
    double lo = std::log(1e-12), hi = 0.0;
    double glo = g(lo);
    while (glo > 0.0) {
      lo -= std::log(1e12);
      glo = g(lo);
      if (lo < -2000.0) throw ConvergenceError("solve_nested_bisection: cannot bracket lower end", glo);
    }
    double ghi = g(hi);
    while (ghi < 0.0) {
      hi += std::log(2.0);
      ghi = g(hi);
      if (hi > 2000.0) throw ConvergenceError("solve_nested_bisection: cannot bracket upper end", ghi);
    }
    const double u = (glo == 0.0) ? lo : (ghi == 0.0) ? hi : bracketed_root(g, lo, hi, glo, ghi);
    a[r] = std::exp(u);
    if (r > 0) solve_level(r - 1, a[r], a);
  }

 private:
  // X_1(a_1) a_1 ... a_r
  double lhs(int r, const Vector& a) const {
    double prod = spec_.alpha[0] * scalar_solution(spec_.alpha[0] * spec_.mu[0] * a[0], spec_.h[0], ob_);
    for (int l = 0; l <= r; ++l) prod *= a[l];
    return prod;
  }
  // X_{r+1}(1/a_r, a_{r+1}) in 1-based terms: layer r+1 (0-based) with its
  // left variable a_r and right variable a_next (0 at the top level).
  double rhs(int r, double a_r, double a_next) const {
    const int layer = r + 1;
    double theta = spec_.mu[r] / a_r;
    if (layer + 1 < k_) theta += spec_.mu[layer] * a_next;
    return spec_.alpha[layer] * scalar_solution(spec_.alpha[layer] * theta, spec_.h[layer], ob_);
  }

  const ModelSpec& spec_;
  const OneBody& ob_;
  int k_;
};

Vector nested_chain(const ModelSpec& spec, const OneBody& ob, ChainDiagnostics* diag) {
  const int k = spec.layers();
  Vector a = Vector::Ones(k - 1);
  NestedChain chain(spec, ob);
  chain.solve_level(k - 2, 0.0, a);
  const Vector theta = chain_theta(spec, a);
  Vector x(k);
  for (int r = 0; r < k; ++r) x[r] = scalar_solution(theta[r], spec.h[r], ob);
  if (diag) {
    diag->a = a;
    diag->theta = theta;
    diag->chain_residual = 0.0;
    for (int r = 0; r + 1 < k; ++r) {
      diag->chain_residual = std::max(diag->chain_residual,
                                      std::abs(spec.alpha[r] * x[r] * a[r] - spec.alpha[r + 1] * x[r + 1]));
    }
    const Vector mx = build_effective(spec).m * x;
    diag->theta_residual = 0.0;
    for (int r = 0; r < k; ++r) diag->theta_residual = std::max(diag->theta_residual, std::abs(mx[r] - theta[r] * x[r]));
  }
  return x;
}

}  // namespace

VariationalSolution solve_nested_bisection(const ModelSpec& spec, const NestedBisectionOptions& options,
                                           ChainDiagnostics* diagnostics, const OneBody& one_body) {
  spec.validate();
  for (int r = 0; r < spec.layers(); ++r) {
    if (!(spec.h[r] > 0.0)) {
      throw std::invalid_argument("solve_nested_bisection: requires h_r > 0 for every layer (h_" +
                                  std::to_string(r + 1) + " = 0)");
    }
  }
  if (spec.layers() > options.max_layers) {
    throw std::invalid_argument("solve_nested_bisection: K = " + std::to_string(spec.layers()) +
                                " exceeds the layer cap " + std::to_string(options.max_layers));
  }
  const VariationalProblem prob(spec, one_body);
  VariationalSolution sol;
  sol.method = Method::NestedBisection;
  const int k = spec.layers();
  Vector x = Vector::Zero(k);
  if (is_coupled_chain(spec)) {
    x = nested_chain(spec, one_body, diagnostics);
  } else {
    sol.decoupled = true;
    for (const auto& block : decouple(spec)) {
      if (block.count == 1) {
        x[block.first] = one_body.big_f(spec.h[block.first]);
      } else {
        x.segment(block.first, block.count) = nested_chain(block.spec, one_body, nullptr);
      }
    }
    fill_slaved_layers(prob, x);
  }
  sol.x_bar = x;
  sol.iterations = 0;
  sol.phase = Phase::FieldDriven;
  finish(sol, prob);
  if (sol.residual > std::max(options.tol, 1e-9)) {
    std::ostringstream os;
    os << "solve_nested_bisection: consistency residual " << sol.residual << " above tolerance";
    throw ConvergenceError(os.str(), sol.residual);
  }
  return sol;
}

}  // namespace dbm
