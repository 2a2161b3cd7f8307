#pragma once

#include "dbm/model.hpp"
#include "dbm/one_body.hpp"

#include <stdexcept>
#include <string>

namespace dbm {

enum class Phase { ZeroSolution, BrokenSymmetry, FieldDriven, Unresolved };
enum class Method { FixedPoint, PiAscent, NestedBisection };

const char* to_string(Phase p);
const char* to_string(Method m);

// Raised when a solver exhausts its iteration budget. Carries the best
// residual reached so callers can report it.
class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, double best_residual)
      : std::runtime_error(what), best_residual_(best_residual) {}
  double best_residual() const { return best_residual_; }

 private:
  double best_residual_;
};

// Throws std::domain_error unless every component lies in [0, 1).
void check_order_parameter(const Vector& x, int layers);

struct VariationalSolution {
  Vector x_bar;
  double pressure = 0.0;
  double gradient_norm = 0.0;  // sup-norm of grad p_var at x_bar
  double residual = 0.0;       // sup-norm of x_bar - T(x_bar)
  Phase phase = Phase::Unresolved;
  Method method = Method::FixedPoint;
  int iterations = 0;
  bool decoupled = false;      // solved block-wise (some alpha_r or mu edge vanishes)
};

// The variational pressure of the K-layer chain together with the auxiliary
// function pi obtained by minimising over the even layers (K even).
class VariationalProblem {
 public:
  explicit VariationalProblem(ModelSpec spec, const OneBody& one_body = default_one_body());

  const ModelSpec& spec() const { return spec_; }
  const EffectiveMatrices& effective() const { return em_; }
  const OddEvenSplit& m_blocks() const { return m_split_; }
  const OneBody& one_body() const { return *ob_; }
  int layers() const { return spec_.layers(); }

  // (M x)_r + h_r
  Vector fields(const Vector& x) const;

  double p_var(const Vector& x) const;
  // Same value from the odd/even bilinear form; used as a cross-check.
  double p_var_odd_even(const Vector& x) const;
  Vector grad_p_var(const Vector& x) const;
  Vector consistency_map(const Vector& x) const;

  // Minimiser over x_e of p_var(x_o, .), solving M^(oe) x_e = F^{-1}(x_o) - h_o
  // by substitution on the lower bidiagonal M^(oe). The result may leave
  // [0,1) but always keeps M^(oe) x_e + h_o >= 0.
  Vector even_minimiser(const Vector& x_o) const;
  double pi_value(const Vector& x_o) const;
  Vector grad_pi(const Vector& x_o) const;
  Matrix hessian_pi(const Vector& x_o) const;
  // -1 + S^(oo): symmetric and congruent to the Hessian, so it carries the
  // same eigenvalue signs.
  Matrix hessian_pi_congruent(const Vector& x_o) const;

  // Partial sum sum_r alpha_r psi((Mx)_r), convex wherever Mx >= 0.
  double psi_part(const Vector& x) const;

 private:
  void require_even(const char* what) const;
  void check_half(const Vector& x_o, const char* what) const;

  ModelSpec spec_;
  EffectiveMatrices em_;
  OddEvenSplit m_split_;
  const OneBody* ob_;
};

// Free-function forms.
double p_var(const Vector& x, const ModelSpec& spec);
Vector grad_p_var(const Vector& x, const ModelSpec& spec);
Vector consistency_map(const Vector& x, const ModelSpec& spec);
double pi_value(const Vector& x_o, const ModelSpec& spec);
Vector grad_pi(const Vector& x_o, const ModelSpec& spec);
Matrix hessian_pi(const Vector& x_o, const ModelSpec& spec);

// ---- solvers -------------------------------------------------------------

struct FixedPointOptions {
  double damping = 0.5;
  double tol = 1e-10;
  int max_iterations = 200000;
  double min_damping = 1e-3;
};

// Default start (1 - 1e-6) * ones: the monotone orbit decreases to the
// maximal fixed point.
Vector default_fixed_point_start(int layers);

VariationalSolution solve_fixed_point(const ModelSpec& spec, const Vector& init,
                                      const FixedPointOptions& options = {},
                                      const OneBody& one_body = default_one_body());
VariationalSolution solve_fixed_point(const ModelSpec& spec, const FixedPointOptions& options = {},
                                      const OneBody& one_body = default_one_body());

struct PiAscentOptions {
  double tol = 1e-10;
  int max_iterations = 5000;
  double start = 0.5;
  double boundary = 1.0 - 1e-9;  // upper guard for the odd components
};

// K even. Ascent on pi over [0, 1)^(K/2): Newton direction when the Hessian is
// negative definite, gradient direction otherwise, Armijo backtracking and
// projection onto the box.
VariationalSolution solve_pi_ascent(const ModelSpec& spec, const PiAscentOptions& options = {},
                                    const OneBody& one_body = default_one_body());

struct NestedBisectionOptions {
  double tol = 1e-10;
  int max_layers = 6;
};

struct ChainDiagnostics {
  Vector a;                // decoupling variables a_1..a_{K-1}
  Vector theta;            // Theta_r(a)
  double chain_residual = 0.0;  // max |alpha_r x_r a_r - alpha_{r+1} x_{r+1}|
  double theta_residual = 0.0;  // max |(M x)_r - Theta_r(a) x_r|
};

// Theta_r(a) = alpha_r (mu_{r-1,r} / a_{r-1} + mu_{r,r+1} a_r), the factor for
// which (M x)_r = Theta_r(a) x_r once alpha_r x_r a_r = alpha_{r+1} x_{r+1}.
Vector chain_theta(const ModelSpec& spec, const Vector& a);

// All h_r > 0. Solves the consistency equation by the nested monotone
// induction over the decoupling variables a_1, ..., a_{K-1} (top level a_K = 0).
VariationalSolution solve_nested_bisection(const ModelSpec& spec, const NestedBisectionOptions& options = {},
                                           ChainDiagnostics* diagnostics = nullptr,
                                           const OneBody& one_body = default_one_body());

// Unique root in (0, 1) of x = F(t x + h) for t, h > 0.
double scalar_solution(double t, double h, const OneBody& one_body = default_one_body());

// Phase label for a computed optimiser. At h = 0 the label follows the size of
// x_bar; |rho - 1| < kCriticalWindow is reported as Unresolved.
inline constexpr double kCriticalWindow = 1e-6;
Phase classify_phase(const ModelSpec& spec, const Vector& x_bar, double zero_threshold);

}  // namespace dbm
