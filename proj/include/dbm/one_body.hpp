#pragma once

#include "dbm/quadrature.hpp"

#include <cmath>

namespace dbm {

// Gaussian expectations of the one-body Nishimori system with field
// y = z sqrt(h) + h, z ~ N(0,1):
//
//   psi(x)   = E log 2cosh(y)
//   F(h)     = E tanh(y)                 = 2 psi'(h) - 1
//   F'(h)    = E (1 - tanh^2 y)^2        = 2 psi''(h)
//
// All members are const and the object is immutable after construction, so a
// single instance may be shared across threads.
class OneBody {
 public:
  // Inputs in [-kClamp, 0) are treated as 0; anything lower is a domain error.
  static constexpr double kClamp = 1e-14;
  // Above this argument the asymptotic forms are used.
  static constexpr double kAsymptotic = 1e4;
  // F^{-1} refuses targets at or above 1 - kInverseGuard.
  static constexpr double kInverseGuard = 1e-12;

  explicit OneBody(QuadratureConfig config = {});

  double psi(double x) const;
  double big_f(double h) const;
  double big_f_prime(double h) const;
  double big_f_inverse(double y) const;
  // |E tanh^{2n-1}(y) - E tanh^{2n}(y)|, zero in exact arithmetic.
  double nishimori_residual(double h, int n) const;

  QuadratureRule rule_for(double h) const;
  const QuadratureConfig& config() const { return config_; }

 private:
  QuadratureConfig config_;
  GradedLegendre graded_;
  QuadratureRule hermite_;
};

// Process-wide default instance (graded Legendre, 16 nodes per panel).
const OneBody& default_one_body();

double psi(double x);
double big_f(double h);
double big_f_prime(double h);
double big_f_inverse(double y);
double nishimori_residual(double h, int n);

// Numerically safe log(2 cosh y).
inline double log_2cosh(double y) {
  const double a = std::abs(y);
  return a + std::log1p(std::exp(-2.0 * a));
}

}  // namespace dbm
