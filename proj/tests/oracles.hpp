#pragma once

// Test-only reference computations. Nothing here calls into the library's
// quadrature or root finders.

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <vector>

namespace oracle {

// E[g(z sqrt(x) + x)], z ~ N(0,1), by adaptive Gauss-Kronrod on pieces of
// [-12, 12] split around the zero crossing of the argument.
inline double gaussian_expectation(double x, const std::function<double(double)>& g) {
  const double s = std::sqrt(std::max(x, 0.0));
  auto integrand = [&](double z) {
    return g(z * s + x) * std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
  };
  std::vector<double> cuts{-12.0, 12.0};
  if (s > 0.0) {
    const double z0 = -s;
    for (double w : {-20.0, -5.0, -1.0, 0.0, 1.0, 5.0, 20.0}) {
      const double c = z0 + w / s;
      if (c > -12.0 && c < 12.0) cuts.push_back(c);
    }
  }
  std::sort(cuts.begin(), cuts.end());
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    if (cuts[i + 1] - cuts[i] < 1e-14) continue;
    double err = 0.0;
    total += boost::math::quadrature::gauss_kronrod<double, 31>::integrate(integrand, cuts[i], cuts[i + 1], 12,
                                                                             1e-14, &err);
  }
  return total;
}

inline double psi(double x) {
  return gaussian_expectation(x, [](double y) { return std::log(2.0 * std::cosh(y)); });
}

inline double big_f(double h) {
  return gaussian_expectation(h, [](double y) { return std::tanh(y); });
}

// Plain bisection for an increasing function on [lo, hi].
inline double bisect(const std::function<double(double)>& fn, double lo, double hi, int steps = 200) {
  for (int i = 0; i < steps; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (fn(mid) < 0.0) lo = mid; else hi = mid;
  }
  return 0.5 * (lo + hi);
}

// Unique positive root of x = F(t x + h) (F from the oracle integrator).
inline double scalar_root(double t, double h) {
  return bisect([&](double x) { return x - big_f(t * x + h); }, 0.0, 1.0, 60);
}

}  // namespace oracle
