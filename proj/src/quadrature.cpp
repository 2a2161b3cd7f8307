#include "dbm/quadrature.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace dbm {

void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights) {
  if (n < 1) throw std::invalid_argument("gauss_legendre: order must be >= 1");
  nodes.assign(n, 0.0);
  weights.assign(n, 0.0);
  const int half = (n + 1) / 2;
  for (int i = 0; i < half; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = pk;
      }
      if (n == 1) p0 = 1.0;
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    // recompute derivative at the converged root
    double p0 = 1.0, p1 = x;
    for (int k = 2; k <= n; ++k) {
      const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = pk;
    }
    if (n == 1) p0 = 1.0;
    dp = n * (x * p1 - p0) / (x * x - 1.0);
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    nodes[i] = -x;
    nodes[n - 1 - i] = x;
    weights[i] = w;
    weights[n - 1 - i] = w;
  }
}

// Golub-Welsch on the probabilists' Hermite Jacobi matrix.
QuadratureRule gauss_hermite(int order) {
  if (order < 1) throw std::invalid_argument("gauss_hermite: order must be >= 1");
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(order);
  Eigen::VectorXd sub(std::max(order - 1, 0));
  for (int k = 1; k < order; ++k) sub[k - 1] = std::sqrt(static_cast<double>(k));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
  solver.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
  QuadratureRule rule;
  rule.order = order;
  rule.nodes.resize(order);
  rule.weights.resize(order);
  double total = 0.0;
  for (int i = 0; i < order; ++i) {
    rule.nodes[i] = solver.eigenvalues()[i];
    const double v0 = solver.eigenvectors()(0, i);
    rule.weights[i] = v0 * v0;
    total += rule.weights[i];
  }
  for (auto& w : rule.weights) w /= total;
  return rule;
}

GradedLegendre::GradedLegendre(int panel_order) : panel_order_(panel_order) {
  if (panel_order < 2) throw std::invalid_argument("GradedLegendre: panel order must be >= 2");
  gauss_legendre(panel_order, ref_nodes_, ref_weights_);
}

QuadratureRule GradedLegendre::rule_for(double h) const {
  constexpr double L = kTruncation;
  constexpr double kMaxPanel = 1.0;
  const double hh = std::max(h, 0.0);
  const double base = hh > 0.0 ? std::min(0.5, std::numbers::pi / (2.0 * std::sqrt(hh))) : 0.5;
  const double z0 = -std::sqrt(hh);
  auto step = [&](double dist) { return std::min(kMaxPanel, std::max(base, 0.5 * dist)); };

  std::vector<double> breaks;
  if (z0 <= -L) {
    // Kink sits outside the truncated support; grade from the left edge.
    double b = -L;
    breaks.push_back(b);
    while (b < L) {
      b = std::min(L, b + step(b - z0));
      breaks.push_back(b);
    }
  } else {
    std::vector<double> left;
    double b = z0;
    while (b > -L) {
      b = std::max(-L, b - step(z0 - b));
      left.push_back(b);
    }
    breaks.assign(left.rbegin(), left.rend());
    breaks.push_back(z0);
    b = z0;
    while (b < L) {
      b = std::min(L, b + step(b - z0));
      breaks.push_back(b);
    }
  }

  QuadratureRule rule;
  rule.order = panel_order_;
  rule.nodes.reserve(breaks.size() * ref_nodes_.size());
  rule.weights.reserve(breaks.size() * ref_nodes_.size());
  const double norm = 1.0 / std::sqrt(2.0 * std::numbers::pi);
  for (std::size_t p = 0; p + 1 < breaks.size(); ++p) {
    const double a = breaks[p], c = breaks[p + 1];
    if (c - a < 1e-15) continue;
    const double mid = 0.5 * (a + c), rad = 0.5 * (c - a);
    for (std::size_t k = 0; k < ref_nodes_.size(); ++k) {
      const double z = mid + rad * ref_nodes_[k];
      rule.nodes.push_back(z);
      rule.weights.push_back(rad * ref_weights_[k] * norm * std::exp(-0.5 * z * z));
    }
  }
  return rule;
}

}  // namespace dbm
