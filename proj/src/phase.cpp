#include "dbm/phase.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace dbm {

const char* to_string(ScanAxis a) {
  switch (a) {
    case ScanAxis::MuEdge: return "mu_edge";
    case ScanAxis::AlphaSimplex: return "alpha_simplex";
    case ScanAxis::HUniform: return "h_uniform";
  }
  return "?";
}

ScanAxis scan_axis_from_string(const std::string& s) {
  if (s == "mu_edge") return ScanAxis::MuEdge;
  if (s == "alpha_simplex") return ScanAxis::AlphaSimplex;
  if (s == "h_uniform") return ScanAxis::HUniform;
  throw std::invalid_argument("unknown scan axis '" + s + "' (expected mu_edge, alpha_simplex or h_uniform)");
}

const char* to_string(OptimumCondition c) {
  switch (c) {
    case OptimumCondition::None: return "none";
    case OptimumCondition::EqualPair: return "a";
    case OptimumCondition::CentredTriple: return "b";
  }
  return "?";
}

const char* to_string(Stability s) {
  switch (s) {
    case Stability::Stable: return "stable";
    case Stability::Unstable: return "unstable";
    case Stability::Inconclusive: return "inconclusive";
  }
  return "?";
}

// ---- scans -------------------------------------------------------------------

namespace {

ModelSpec point_spec(const ScanRequest& req, std::size_t i) {
  ModelSpec s = req.base;
  switch (req.axis) {
    case ScanAxis::MuEdge:
      if (req.edge < 0 || req.edge >= static_cast<int>(s.mu.size())) {
        throw std::invalid_argument("scan: edge index out of range");
      }
      s.mu[req.edge] = req.values[i];
      break;
    case ScanAxis::HUniform:
      std::fill(s.h.begin(), s.h.end(), req.values[i]);
      break;
    case ScanAxis::AlphaSimplex:
      s.alpha = req.alpha_rows[i];
      break;
  }
  return s;
}

}  // namespace

std::vector<PhasePoint> scan(const ScanRequest& req) {
  const std::size_t n = req.axis == ScanAxis::AlphaSimplex ? req.alpha_rows.size() : req.values.size();
  std::vector<PhasePoint> out(n);
  FixedPointOptions fp;
  fp.tol = req.tol;

#pragma omp parallel for schedule(dynamic, 1)
  for (std::size_t i = 0; i < n; ++i) {
    PhasePoint& p = out[i];
    p.value = req.axis == ScanAxis::AlphaSimplex ? static_cast<double>(i) : req.values[i];
    try {
      p.spec = point_spec(req, i);
      p.spec.validate();
      p.rho = spectral_radius_oo(build_effective(p.spec));
      const auto sol = solve_fixed_point(p.spec, fp, req.one_body ? *req.one_body : default_one_body());
      p.x_bar = sol.x_bar;
      p.pressure = sol.pressure;
      p.phase = sol.phase;
    } catch (const std::exception& e) {
      p.ok = false;
      p.error = e.what();
      p.x_bar = Vector::Constant(std::max(1, p.spec.layers()), std::nan(""));
      p.pressure = std::nan("");
    }
  }
  return out;
}

// ---- form factors --------------------------------------------------------------

std::vector<double> project_to_simplex(std::vector<double> v) {
  std::vector<double> u = v;
  std::sort(u.begin(), u.end(), std::greater<>());
  double cum = 0.0, theta = 0.0;
  for (std::size_t j = 0; j < u.size(); ++j) {
    cum += u[j];
    const double t = (cum - 1.0) / static_cast<double>(j + 1);
    if (u[j] - t > 0.0) theta = t;
  }
  for (auto& x : v) x = std::max(0.0, x - theta);
  return v;
}

namespace {

double rho_at(const std::vector<double>& alpha, const std::vector<double>& mu) {
  return spectral_radius_oo_dense(ModelSpec{alpha, mu, std::vector<double>(alpha.size(), 0.0)});
}

// Compositions of `total` into k parts, visited in lexicographic order.
template <class Fn>
void for_each_composition(int k, int total, Fn&& fn) {
  std::vector<int> c(k, 0);
  c[k - 1] = total;
  while (true) {
    fn(c);
    // next composition: move one unit from the last nonzero non-first slot
    int j = k - 1;
    while (j > 0 && c[j] == 0) --j;
    if (j == 0) return;
    const int moved = c[j];
    c[j] = 0;
    ++c[j - 1];
    c[k - 1] = moved - 1;
  }
}

std::vector<double> nelder_mead_simplex(const std::vector<double>& start, const std::vector<double>& mu,
                                        double& best) {
  const int k = static_cast<int>(start.size());
  auto f = [&](const std::vector<double>& a) { return -rho_at(project_to_simplex(a), mu); };
  std::vector<std::vector<double>> pts(k + 1, start);
  std::vector<double> val(k + 1);
  for (int i = 0; i < k; ++i) pts[i + 1][i] += 0.0125;
  for (int i = 0; i <= k; ++i) val[i] = f(pts[i]);
  for (int it = 0; it < 2000; ++it) {
    std::vector<int> order(k + 1);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) { return val[a] < val[b]; });
    const int lo = order[0], hi = order[k], second = order[k - 1];
    if (std::abs(val[hi] - val[lo]) < 1e-15) break;
    std::vector<double> centroid(k, 0.0);
    for (int i = 0; i <= k; ++i) {
      if (i == hi) continue;
      for (int d = 0; d < k; ++d) centroid[d] += pts[i][d] / k;
    }
    auto along = [&](double t) {
      std::vector<double> p(k);
      for (int d = 0; d < k; ++d) p[d] = centroid[d] + t * (pts[hi][d] - centroid[d]);
      return p;
    };
    const auto refl = along(-1.0);
    const double fr = f(refl);
    if (fr < val[lo]) {
      const auto exp = along(-2.0);
      const double fe = f(exp);
      if (fe < fr) pts[hi] = exp, val[hi] = fe; else pts[hi] = refl, val[hi] = fr;
    } else if (fr < val[second]) {
      pts[hi] = refl, val[hi] = fr;
    } else {
      const auto con = along(0.5);
      const double fc = f(con);
      if (fc < val[hi]) {
        pts[hi] = con, val[hi] = fc;
      } else {
        for (int i = 0; i <= k; ++i) {
          if (i == lo) continue;
          for (int d = 0; d < k; ++d) pts[i][d] = pts[lo][d] + 0.5 * (pts[i][d] - pts[lo][d]);
          val[i] = f(pts[i]);
        }
      }
    }
  }
  const int lo = static_cast<int>(std::min_element(val.begin(), val.end()) - val.begin());
  best = -val[lo];
  return project_to_simplex(pts[lo]);
}

}  // namespace

OptimumCondition classify_optimum(const std::vector<double>& alpha, const std::vector<double>& mu, double tol,
                                  int* r_star) {
  const int k = static_cast<int>(alpha.size());
  const double top = *std::max_element(mu.begin(), mu.end());
  auto is_max = [&](int edge) { return std::abs(mu[edge] - top) <= 1e-12 * std::max(1.0, top); };
  for (int r = 0; r + 1 < k; ++r) {
    if (is_max(r) && std::abs(alpha[r] - 0.5) <= tol && std::abs(alpha[r + 1] - 0.5) <= tol) {
      if (r_star) *r_star = r;
      return OptimumCondition::EqualPair;
    }
  }
  for (int r = 1; r + 1 < k; ++r) {
    if (is_max(r - 1) && is_max(r) && std::abs(alpha[r] - 0.5) <= tol &&
        std::abs(alpha[r - 1] + alpha[r + 1] - 0.5) <= tol) {
      if (r_star) *r_star = r;
      return OptimumCondition::CentredTriple;
    }
  }
  if (r_star) *r_star = -1;
  return OptimumCondition::None;
}

FormFactorOptimum optimize_form_factors(const std::vector<double>& mu, int grid) {
  if (mu.empty()) throw std::invalid_argument("optimize_form_factors: need K >= 2");
  for (double m : mu) {
    if (!(m >= 0.0)) throw std::invalid_argument("optimize_form_factors: couplings must be nonnegative");
  }
  const double top = *std::max_element(mu.begin(), mu.end());
  if (top == 0.0) throw std::invalid_argument("optimize_form_factors: all couplings vanish");
  const int k = static_cast<int>(mu.size()) + 1;

  FormFactorOptimum out;
  out.bound = 0.25 * top * top;
  out.rho = -1.0;
  std::vector<double> alpha(k);
  for_each_composition(k, grid, [&](const std::vector<int>& c) {
    for (int r = 0; r < k; ++r) alpha[r] = static_cast<double>(c[r]) / grid;
    const double rho = rho_at(alpha, mu);
    ++out.grid_points;
    if (rho > out.rho) {
      out.rho = rho;
      out.alpha = alpha;
    }
  });
  double refined = 0.0;
  const auto polished = nelder_mead_simplex(out.alpha, mu, refined);
  if (refined > out.rho) {
    out.rho = refined;
    out.alpha = polished;
  }
  out.condition = classify_optimum(out.alpha, mu, kConditionTolerance, &out.r_star);
  return out;
}

// ---- Perron direction ------------------------------------------------------------

PerronCheck perron_instability_check(const ModelSpec& spec, std::vector<double> epsilons) {
  spec.validate();
  if (!spec.zero_field()) throw std::invalid_argument("perron_instability_check: requires h = 0");
  if (spec.layers() % 2 != 0) throw std::invalid_argument("perron_instability_check: requires K even");
  const VariationalProblem prob(spec);
  PerronCheck out;
  out.rho = spectral_radius_oo(prob.effective());
  out.direction = perron_vector(spec);  // rejects vanishing alpha or mu
  out.epsilons = std::move(epsilons);

  const Vector& v = out.direction;
  const Vector alpha_o = odd_part(Eigen::Map<const Vector>(spec.alpha.data(), spec.layers()));
  const double quad = v.dot((alpha_o.array() * v.array()).matrix()) / 2.0;
  const double pi0 = prob.pi_value(Vector::Zero(v.size()));
  for (double eps : out.epsilons) {
    out.delta_pi.push_back(prob.pi_value(eps * v) - pi0);
    out.prediction.push_back(0.5 * eps * eps * quad * (out.rho - 1.0));
  }
  if (out.rho > 1.0) {
    for (std::size_t i = 0; i < out.epsilons.size(); ++i) {
      if (out.delta_pi[i] > 0.0) {
        out.verdict = Stability::Unstable;
        out.epsilon_used = out.epsilons[i];
        break;
      }
    }
  } else if (out.rho < 1.0) {
    const bool all_negative =
        std::all_of(out.delta_pi.begin(), out.delta_pi.end(), [](double d) { return d < 0.0; });
    if (all_negative) {
      out.verdict = Stability::Stable;
      out.epsilon_used = out.epsilons.empty() ? 0.0 : out.epsilons.back();
    }
  }
  return out;
}

}  // namespace dbm
