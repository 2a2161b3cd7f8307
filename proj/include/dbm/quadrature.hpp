#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace dbm {

// Nodes and weights for expectations over a standard normal variable z.
// Weights already include the Gaussian density, so E[g(z)] ~ sum_i w_i g(z_i)
// and the weights of every rule built here sum to one.
struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
  int order = 0;

  std::size_t size() const { return nodes.size(); }

  template <class Fn>
  double expect(Fn&& fn) const {
    double acc = 0.0;
    for (std::size_t i = 0; i < nodes.size(); ++i) acc += weights[i] * fn(nodes[i]);
    return acc;
  }
};

enum class QuadratureScheme { GradedLegendre, GaussHermite };

struct QuadratureConfig {
  QuadratureScheme scheme = QuadratureScheme::GradedLegendre;
  // Nodes per panel for GradedLegendre, total nodes for GaussHermite.
  int order = 16;
};

// Gauss-Legendre nodes/weights on [-1, 1].
void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights);

// Probabilists' Gauss-Hermite rule (weight exp(-z^2/2)/sqrt(2 pi)).
QuadratureRule gauss_hermite(int order);

// Composite Gauss-Legendre rule on |z| <= kTruncation whose panels shrink
// around z0 = -sqrt(h), where y = z sqrt(h) + h crosses zero. Panel
// half-widths never exceed the distance pi/(2 sqrt h) from the real axis to
// the poles of tanh(y), so every integrand of the form g(z sqrt h + h) with g
// built from tanh / log cosh is integrated to near machine precision.
class GradedLegendre {
 public:
  static constexpr double kTruncation = 9.0;

  explicit GradedLegendre(int panel_order = 16);

  QuadratureRule rule_for(double h) const;
  int panel_order() const { return panel_order_; }

 private:
  int panel_order_;
  std::vector<double> ref_nodes_;
  std::vector<double> ref_weights_;
};

}  // namespace dbm
