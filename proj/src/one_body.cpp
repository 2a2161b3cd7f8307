#include "dbm/one_body.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace dbm {

namespace {

double clamp_argument(double x, const char* what) {
  if (!(x >= -OneBody::kClamp)) {
    throw std::domain_error(std::string(what) + ": argument " + std::to_string(x) + " is negative");
  }
  return std::max(x, 0.0);
}

}  // namespace

OneBody::OneBody(QuadratureConfig config)
    : config_(config),
      graded_(config.scheme == QuadratureScheme::GradedLegendre ? config.order : 16),
      hermite_(config.scheme == QuadratureScheme::GaussHermite ? gauss_hermite(config.order)
                                                               : QuadratureRule{}) {}

QuadratureRule OneBody::rule_for(double h) const {
  if (config_.scheme == QuadratureScheme::GaussHermite) return hermite_;
  return graded_.rule_for(h);
}

double OneBody::psi(double x) const {
  x = clamp_argument(x, "psi");
  if (x == 0.0) return std::log(2.0);
  const double s = std::sqrt(x);
  if (x > kAsymptotic) {
    // log 2cosh y = |y| + log1p(e^{-2|y|}); y < 0 has probability ~e^{-x/2}.
    return x;
  }
  const auto rule = rule_for(x);
  return rule.expect([&](double z) { return log_2cosh(z * s + x); });
}

double OneBody::big_f(double h) const {
  h = clamp_argument(h, "big_f");
  if (h == 0.0) return 0.0;
  if (h > kAsymptotic) return 1.0;
  const double s = std::sqrt(h);
  const auto rule = rule_for(h);
  return rule.expect([&](double z) { return std::tanh(z * s + h); });
}

double OneBody::big_f_prime(double h) const {
  h = clamp_argument(h, "big_f_prime");
  if (h == 0.0) return 1.0;
  if (h > kAsymptotic) return 0.0;
  const double s = std::sqrt(h);
  const auto rule = rule_for(h);
  return rule.expect([&](double z) {
    const double t = std::tanh(z * s + h);
    const double u = 1.0 - t * t;
    return u * u;
  });
}

double OneBody::big_f_inverse(double y) const {
  if (!(y >= 0.0) || y >= 1.0 - kInverseGuard) {
    throw std::domain_error("big_f_inverse: target " + std::to_string(y) + " outside [0, 1)");
  }
  if (y == 0.0) return 0.0;

  // Bracket [lo, hi] with F(lo) <= y < F(hi).
  double lo = 0.0, hi = 1.0;
  while (big_f(hi) <= y) {
    lo = hi;
    hi *= 2.0;
    if (hi > kAsymptotic) throw std::domain_error("big_f_inverse: failed to bracket target");
  }
  // F is concave increasing: Newton from the right bracket end stays inside.
  double h = hi;
  for (int it = 0; it < 200; ++it) {
    const double fv = big_f(h) - y;
    if (fv == 0.0) return h;
    if (fv > 0.0) hi = h; else lo = h;
    const double d = big_f_prime(h);
    double next = (d > 0.0) ? h - fv / d : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - h) <= 4e-16 * std::max(1.0, h) || hi - lo <= 4e-16 * std::max(1.0, hi)) {
      return next;
    }
    h = next;
  }
  return h;
}

double OneBody::nishimori_residual(double h, int n) const {
  if (n < 1) throw std::domain_error("nishimori_residual: n must be >= 1");
  h = clamp_argument(h, "nishimori_residual");
  if (h == 0.0) return 0.0;
  const double s = std::sqrt(h);
  const auto rule = rule_for(h);
  double odd = 0.0, even = 0.0;
  for (std::size_t i = 0; i < rule.size(); ++i) {
    const double t = std::tanh(rule.nodes[i] * s + h);
    const double t_odd = std::pow(t, 2 * n - 1);
    odd += rule.weights[i] * t_odd;
    even += rule.weights[i] * t_odd * t;
  }
  return std::abs(odd - even);
}

const OneBody& default_one_body() {
  static const OneBody instance{};
  return instance;
}

double psi(double x) { return default_one_body().psi(x); }
double big_f(double h) { return default_one_body().big_f(h); }
double big_f_prime(double h) { return default_one_body().big_f_prime(h); }
double big_f_inverse(double y) { return default_one_body().big_f_inverse(y); }
double nishimori_residual(double h, int n) { return default_one_body().nishimori_residual(h, n); }

}  // namespace dbm
