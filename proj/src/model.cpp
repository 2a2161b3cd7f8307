#include "dbm/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace dbm {

namespace {

[[noreturn]] void invalid(const std::string& msg) { throw std::invalid_argument("ModelSpec: " + msg); }

int odd_count(int k) { return (k + 1) / 2; }
int even_count(int k) { return k / 2; }

}  // namespace

bool ModelSpec::zero_field() const {
  return std::all_of(h.begin(), h.end(), [](double v) { return v == 0.0; });
}

void ModelSpec::validate() const {
  const int k = layers();
  if (k < 2) invalid("layer count K must be >= 2");
  if (static_cast<int>(mu.size()) != k - 1) {
    invalid("mu must hold K-1 = " + std::to_string(k - 1) + " superdiagonal couplings");
  }
  if (static_cast<int>(h.size()) != k) invalid("h must hold K = " + std::to_string(k) + " fields");
  double sum = 0.0;
  for (int r = 0; r < k; ++r) {
    if (!std::isfinite(alpha[r]) || alpha[r] < 0.0) invalid("alpha_r >= 0 violated at layer " + std::to_string(r + 1));
    sum += alpha[r];
  }
  if (std::abs(sum - 1.0) > 1e-12) {
    std::ostringstream os;
    os.precision(17);
    os << "sum of alpha must be 1 within 1e-12 (got " << sum << ")";
    invalid(os.str());
  }
  for (int r = 0; r + 1 < k; ++r) {
    if (!std::isfinite(mu[r]) || mu[r] < 0.0) invalid("mu_{r,r+1} >= 0 violated at edge " + std::to_string(r + 1));
  }
  for (int r = 0; r < k; ++r) {
    if (!std::isfinite(h[r]) || h[r] < 0.0) invalid("h_r >= 0 violated at layer " + std::to_string(r + 1));
  }
}

ModelSpec ModelSpec::reversed() const {
  ModelSpec out{alpha, mu, h};
  std::reverse(out.alpha.begin(), out.alpha.end());
  std::reverse(out.mu.begin(), out.mu.end());
  std::reverse(out.h.begin(), out.h.end());
  return out;
}

ModelSpec make_spec(std::vector<double> alpha, std::vector<double> mu, std::vector<double> h) {
  if (h.empty()) h.assign(alpha.size(), 0.0);
  ModelSpec spec{std::move(alpha), std::move(mu), std::move(h)};
  spec.validate();
  return spec;
}

std::vector<double> superdiagonal_from_full(const Matrix& mu_full) {
  const auto k = mu_full.rows();
  if (mu_full.cols() != k) invalid("mu matrix must be square");
  std::vector<double> out;
  for (Eigen::Index r = 0; r < k; ++r) {
    for (Eigen::Index s = 0; s < k; ++s) {
      const double v = mu_full(r, s);
      if (std::abs(r - s) != 1 && v != 0.0) invalid("mu must be tridiagonal with zero diagonal");
      if (v < 0.0) invalid("mu entries must be nonnegative");
      if (v != mu_full(s, r)) invalid("mu must be symmetric (asymmetric couplings are not supported)");
    }
  }
  for (Eigen::Index r = 0; r + 1 < k; ++r) out.push_back(mu_full(r, r + 1));
  return out;
}

EffectiveMatrices build_effective(const ModelSpec& spec) {
  spec.validate();
  const int k = spec.layers();
  EffectiveMatrices em{Matrix::Zero(k, k), Matrix::Zero(k, k)};
  for (int r = 0; r + 1 < k; ++r) {
    const double mu = spec.mu[r];
    em.delta(r, r + 1) = spec.alpha[r] * mu * spec.alpha[r + 1];
    em.delta(r + 1, r) = em.delta(r, r + 1);
    em.m(r, r + 1) = mu * spec.alpha[r + 1];
    em.m(r + 1, r) = mu * spec.alpha[r];
  }
  return em;
}

Matrix OddEvenSplit::reassemble() const {
  const auto no = oo.rows(), ne = ee.rows();
  const auto k = no + ne;
  Matrix a(k, k);
  for (Eigen::Index i = 0; i < no; ++i) {
    for (Eigen::Index j = 0; j < no; ++j) a(2 * i, 2 * j) = oo(i, j);
    for (Eigen::Index j = 0; j < ne; ++j) a(2 * i, 2 * j + 1) = oe(i, j);
  }
  for (Eigen::Index i = 0; i < ne; ++i) {
    for (Eigen::Index j = 0; j < no; ++j) a(2 * i + 1, 2 * j) = eo(i, j);
    for (Eigen::Index j = 0; j < ne; ++j) a(2 * i + 1, 2 * j + 1) = ee(i, j);
  }
  return a;
}

OddEvenSplit odd_even_split(const Matrix& a) {
  if (a.rows() != a.cols()) throw std::invalid_argument("odd_even_split: matrix must be square");
  const int k = static_cast<int>(a.rows());
  const int no = odd_count(k), ne = even_count(k);
  OddEvenSplit s{Matrix(no, no), Matrix(no, ne), Matrix(ne, no), Matrix(ne, ne)};
  // 1-based odd layer 2i+1 sits at storage index 2i; even layer 2i+2 at 2i+1.
  for (int i = 0; i < no; ++i) {
    for (int j = 0; j < no; ++j) s.oo(i, j) = a(2 * i, 2 * j);
    for (int j = 0; j < ne; ++j) s.oe(i, j) = a(2 * i, 2 * j + 1);
  }
  for (int i = 0; i < ne; ++i) {
    for (int j = 0; j < no; ++j) s.eo(i, j) = a(2 * i + 1, 2 * j);
    for (int j = 0; j < ne; ++j) s.ee(i, j) = a(2 * i + 1, 2 * j + 1);
  }
  return s;
}

Vector odd_part(const Vector& x) {
  const int k = static_cast<int>(x.size());
  Vector out(odd_count(k));
  for (int i = 0; i < out.size(); ++i) out[i] = x[2 * i];
  return out;
}

Vector even_part(const Vector& x) {
  const int k = static_cast<int>(x.size());
  Vector out(even_count(k));
  for (int i = 0; i < out.size(); ++i) out[i] = x[2 * i + 1];
  return out;
}

Vector interleave(const Vector& odd, const Vector& even) {
  const auto k = odd.size() + even.size();
  if (odd.size() != even.size() && odd.size() != even.size() + 1) {
    throw std::invalid_argument("interleave: odd/even sizes incompatible");
  }
  Vector x(k);
  for (Eigen::Index i = 0; i < odd.size(); ++i) x[2 * i] = odd[i];
  for (Eigen::Index i = 0; i < even.size(); ++i) x[2 * i + 1] = even[i];
  return x;
}

Matrix m_squared_oo(const EffectiveMatrices& em) {
  const auto s = odd_even_split(em.m);
  return s.oe * s.eo;
}

double spectral_radius_oo_dense(const ModelSpec& spec) {
  const int k = spec.layers();
  const int no = odd_count(k), ne = even_count(k);
  // mu^(oe): odd layer 2i+1 (index 2i) to even layer 2j+2 (index 2j+1).
  Matrix sym_half(no, ne);
  sym_half.setZero();
  for (int i = 0; i < no; ++i) {
    for (int j = 0; j < ne; ++j) {
      const int r = 2 * i, s = 2 * j + 1;
      double mu = 0.0;
      if (s == r + 1) mu = spec.mu[r];
      else if (s == r - 1) mu = spec.mu[s];
      sym_half(i, j) = std::sqrt(spec.alpha[r]) * mu * std::sqrt(spec.alpha[s]);
    }
  }
  // alpha_o^{1/2} mu^(oe) alpha_e mu^(eo) alpha_o^{1/2} = C C^T.
  const Matrix sym = sym_half * sym_half.transpose();
  if (sym.rows() == 1) return sym(0, 0);
  Eigen::SelfAdjointEigenSolver<Matrix> solver(sym, Eigen::EigenvaluesOnly);
  return std::max(0.0, solver.eigenvalues().maxCoeff());
}

SpectralRadius spectral_radius_oo_detailed(const EffectiveMatrices& em, const PowerIterationOptions& options) {
  const Matrix b = m_squared_oo(em);
  const auto n = b.rows();
  SpectralRadius out;
  Vector v = Vector::Constant(n, 1.0 / static_cast<double>(n));
  double rho = 0.0;
  for (int it = 1; it <= options.max_iterations; ++it) {
    Vector w = b * v;
    const double s = w.sum();
    out.iterations = it;
    if (s <= 0.0) {
      // [M^2]^(oo) v = 0 for a positive v means the block vanishes.
      out.rho = 0.0;
      out.converged = b.isZero(0.0);
      out.vector = v;
      if (out.converged) return out;
      break;
    }
    w /= s;
    const double dv = (w - v).cwiseAbs().maxCoeff();
    const bool settled = std::abs(s - rho) <= options.tol * std::max(1.0, s) && dv <= options.tol;
    rho = s;
    v = std::move(w);
    if (settled) {
      out.rho = rho;
      out.converged = true;
      out.vector = v;
      return out;
    }
  }
  // Dense fallback on the similar symmetric block.
  Eigen::EigenSolver<Matrix> solver(b);
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < solver.eigenvalues().size(); ++i) {
    if (std::abs(solver.eigenvalues()[i]) > std::abs(solver.eigenvalues()[best])) best = i;
  }
  out.rho = std::abs(solver.eigenvalues()[best]);
  Vector vec = solver.eigenvectors().col(best).real().cwiseAbs();
  const double total = vec.sum();
  out.vector = total > 0.0 ? Vector(vec / total) : v;
  out.converged = false;
  out.used_dense_fallback = true;
  return out;
}

double spectral_radius_oo(const EffectiveMatrices& em, const PowerIterationOptions& options) {
  return spectral_radius_oo_detailed(em, options).rho;
}

Vector perron_vector(const ModelSpec& spec, const PowerIterationOptions& options) {
  spec.validate();
  for (int r = 0; r < spec.layers(); ++r) {
    if (spec.alpha[r] <= 0.0) {
      throw std::invalid_argument("perron_vector: alpha_" + std::to_string(r + 1) +
                                  " = 0 makes [M^2]^(oo) reducible");
    }
  }
  for (std::size_t r = 0; r < spec.mu.size(); ++r) {
    if (spec.mu[r] <= 0.0) {
      throw std::invalid_argument("perron_vector: mu_{" + std::to_string(r + 1) + "," + std::to_string(r + 2) +
                                  "} = 0 makes [M^2]^(oo) reducible");
    }
  }
  return spectral_radius_oo_detailed(build_effective(spec), options).vector;
}

std::vector<SubMachine> decouple(const ModelSpec& spec) {
  spec.validate();
  const int k = spec.layers();
  std::vector<SubMachine> blocks;
  int r = 0;
  while (r < k) {
    if (spec.alpha[r] == 0.0) {
      ++r;
      continue;
    }
    int end = r + 1;
    while (end < k && spec.alpha[end] > 0.0 && spec.mu[end - 1] > 0.0) ++end;
    SubMachine b;
    b.first = r;
    b.count = end - r;
    b.weight = std::accumulate(spec.alpha.begin() + r, spec.alpha.begin() + end, 0.0);
    if (b.count >= 2) {
      for (int s = r; s < end; ++s) {
        b.spec.alpha.push_back(spec.alpha[s] / b.weight);
        b.spec.h.push_back(spec.h[s]);
        if (s + 1 < end) b.spec.mu.push_back(spec.mu[s] * b.weight);
      }
      // Renormalise exactly onto the simplex after the division.
      double sum = std::accumulate(b.spec.alpha.begin(), b.spec.alpha.end(), 0.0);
      b.spec.alpha.back() += 1.0 - sum;
    } else {
      b.spec.alpha = {1.0};
      b.spec.h = {spec.h[r]};
    }
    blocks.push_back(std::move(b));
    r = end;
  }
  return blocks;
}

bool is_coupled_chain(const ModelSpec& spec) {
  for (double a : spec.alpha) if (a <= 0.0) return false;
  for (double m : spec.mu) if (m <= 0.0) return false;
  return true;
}

}  // namespace dbm
