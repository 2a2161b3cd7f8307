#include "dbm/variational.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace dbm {

const char* to_string(Phase p) {
  switch (p) {
    case Phase::ZeroSolution: return "ZeroSolution";
    case Phase::BrokenSymmetry: return "BrokenSymmetry";
    case Phase::FieldDriven: return "FieldDriven";
    case Phase::Unresolved: return "Unresolved";
  }
  return "?";
}

const char* to_string(Method m) {
  switch (m) {
    case Method::FixedPoint: return "FixedPoint";
    case Method::PiAscent: return "PiAscent";
    case Method::NestedBisection: return "NestedBisection";
  }
  return "?";
}

void check_order_parameter(const Vector& x, int layers) {
  if (x.size() != layers) {
    throw std::domain_error("order parameter has " + std::to_string(x.size()) + " components, expected " +
                            std::to_string(layers));
  }
  for (Eigen::Index r = 0; r < x.size(); ++r) {
    if (!(x[r] >= 0.0 && x[r] < 1.0)) {
      std::ostringstream os;
      os << "order parameter component " << r + 1 << " = " << x[r] << " outside [0, 1)";
      throw std::domain_error(os.str());
    }
  }
}

VariationalProblem::VariationalProblem(ModelSpec spec, const OneBody& one_body)
    : spec_(std::move(spec)), em_(build_effective(spec_)), m_split_(odd_even_split(em_.m)), ob_(&one_body) {}

Vector VariationalProblem::fields(const Vector& x) const {
  if (x.size() != layers()) throw std::domain_error("fields: dimension mismatch");
  Vector f = em_.m * x;
  for (int r = 0; r < layers(); ++r) f[r] += spec_.h[r];
  return f;
}

double VariationalProblem::psi_part(const Vector& x) const {
  const Vector mx = em_.m * x;
  double acc = 0.0;
  for (int r = 0; r < layers(); ++r) acc += spec_.alpha[r] * ob_->psi(mx[r]);
  return acc;
}

double VariationalProblem::p_var(const Vector& x) const {
  const Vector f = fields(x);
  double acc = 0.0;
  for (int r = 0; r < layers(); ++r) {
    if (spec_.alpha[r] != 0.0) acc += spec_.alpha[r] * ob_->psi(f[r]);
  }
  for (int r = 0; r + 1 < layers(); ++r) {
    const double d = em_.delta(r, r + 1);
    acc += 0.5 * d * ((1.0 - x[r]) * (1.0 - x[r + 1]) - 2.0 * x[r] * x[r + 1]);
  }
  return acc;
}

double VariationalProblem::p_var_odd_even(const Vector& x) const {
  const Vector f = fields(x);
  double acc = 0.0;
  for (int r = 0; r < layers(); ++r) {
    if (spec_.alpha[r] != 0.0) acc += spec_.alpha[r] * ob_->psi(f[r]);
  }
  const auto d = odd_even_split(em_.delta);
  const Vector xo = odd_part(x), xe = even_part(x);
  const Vector one_o = Vector::Ones(xo.size()), one_e = Vector::Ones(xe.size());
  acc += 0.5 * (one_o - xo).dot(d.oe * (one_e - xe));
  acc -= xo.dot(d.oe * xe);
  return acc;
}

Vector VariationalProblem::consistency_map(const Vector& x) const {
  const Vector f = fields(x);
  Vector t(layers());
  for (int r = 0; r < layers(); ++r) t[r] = ob_->big_f(f[r]);
  return t;
}

Vector VariationalProblem::grad_p_var(const Vector& x) const {
  return 0.5 * em_.delta * (consistency_map(x) - x);
}

void VariationalProblem::require_even(const char* what) const {
  if (layers() % 2 != 0) {
    throw std::invalid_argument(std::string(what) + ": requires an even number of layers");
  }
}

void VariationalProblem::check_half(const Vector& x_o, const char* what) const {
  require_even(what);
  if (x_o.size() != layers() / 2) throw std::domain_error(std::string(what) + ": x_o has wrong dimension");
  for (Eigen::Index i = 0; i < x_o.size(); ++i) {
    if (!(x_o[i] >= 0.0 && x_o[i] < 1.0)) {
      throw std::domain_error(std::string(what) + ": odd component outside [0, 1)");
    }
  }
}

Vector VariationalProblem::even_minimiser(const Vector& x_o) const {
  check_half(x_o, "even_minimiser");
  const Matrix& moe = m_split_.oe;
  const auto n = moe.rows();
  for (Eigen::Index i = 0; i < n; ++i) {
    if (moe(i, i) == 0.0) {
      throw std::domain_error("even_minimiser: M^(oe) is singular (vanishing alpha or mu); decouple the chain");
    }
  }
  Vector rhs(n);
  for (Eigen::Index i = 0; i < n; ++i) rhs[i] = ob_->big_f_inverse(x_o[i]) - spec_.h[2 * i];
  // Lower bidiagonal: row i couples even layers i-1 and i.
  Vector xe(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double v = rhs[i];
    if (i > 0) v -= moe(i, i - 1) * xe[i - 1];
    xe[i] = v / moe(i, i);
  }
  return xe;
}

double VariationalProblem::pi_value(const Vector& x_o) const {
  return p_var(interleave(x_o, even_minimiser(x_o)));
}

Vector VariationalProblem::grad_pi(const Vector& x_o) const {
  check_half(x_o, "grad_pi");
  const auto n = x_o.size();
  Vector even_fields = m_split_.eo * x_o;
  for (Eigen::Index i = 0; i < n; ++i) even_fields[i] += spec_.h[2 * i + 1];
  Vector fe(n);
  for (Eigen::Index i = 0; i < n; ++i) fe[i] = ob_->big_f(even_fields[i]);
  const Vector coupled = m_split_.oe * fe;
  Vector g(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    g[i] = 0.5 * spec_.alpha[2 * i] * (-ob_->big_f_inverse(x_o[i]) + spec_.h[2 * i] + coupled[i]);
  }
  return g;
}

Matrix VariationalProblem::hessian_pi(const Vector& x_o) const {
  check_half(x_o, "hessian_pi");
  const Vector x = interleave(x_o, even_minimiser(x_o));
  const Vector f = fields(x);
  const int k = layers();
  Vector dvec(k);
  for (int r = 0; r < k; ++r) dvec[r] = ob_->big_f_prime(f[r]);
  const Matrix dm = dvec.asDiagonal() * em_.m;
  const Matrix dm2_oo = odd_even_split(dm * dm).oo;
  const auto n = x_o.size();
  Matrix h = dm2_oo - Matrix::Identity(n, n);
  for (Eigen::Index i = 0; i < n; ++i) h.row(i) *= 0.5 * spec_.alpha[2 * i] / dvec[2 * i];
  return h;
}

Matrix VariationalProblem::hessian_pi_congruent(const Vector& x_o) const {
  check_half(x_o, "hessian_pi_congruent");
  const Vector x = interleave(x_o, even_minimiser(x_o));
  const Vector f = fields(x);
  const int k = layers();
  Vector dvec(k);
  for (int r = 0; r < k; ++r) dvec[r] = ob_->big_f_prime(f[r]);
  const auto d = odd_even_split(em_.delta);
  const auto n = x_o.size();
  Vector left(n), mid(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    left[i] = std::sqrt(dvec[2 * i] / spec_.alpha[2 * i]);
    mid[i] = dvec[2 * i + 1] / spec_.alpha[2 * i + 1];
  }
  const Matrix s = left.asDiagonal() * d.oe * mid.asDiagonal() * d.eo * left.asDiagonal();
  return 0.5 * (s + s.transpose()) - Matrix::Identity(n, n);
}

double p_var(const Vector& x, const ModelSpec& spec) { return VariationalProblem(spec).p_var(x); }
Vector grad_p_var(const Vector& x, const ModelSpec& spec) { return VariationalProblem(spec).grad_p_var(x); }
Vector consistency_map(const Vector& x, const ModelSpec& spec) {
  check_order_parameter(x, spec.layers());
  return VariationalProblem(spec).consistency_map(x);
}
double pi_value(const Vector& x_o, const ModelSpec& spec) { return VariationalProblem(spec).pi_value(x_o); }
Vector grad_pi(const Vector& x_o, const ModelSpec& spec) { return VariationalProblem(spec).grad_pi(x_o); }
Matrix hessian_pi(const Vector& x_o, const ModelSpec& spec) { return VariationalProblem(spec).hessian_pi(x_o); }

Phase classify_phase(const ModelSpec& spec, const Vector& x_bar, double zero_threshold) {
  if (!spec.zero_field()) return Phase::FieldDriven;
  const double rho = spectral_radius_oo(build_effective(spec));
  if (std::abs(rho - 1.0) < kCriticalWindow) return Phase::Unresolved;
  return x_bar.cwiseAbs().maxCoeff() <= zero_threshold ? Phase::ZeroSolution : Phase::BrokenSymmetry;
}

}  // namespace dbm
