#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <vector>

namespace dbm {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Layers are numbered 1..K in documentation and parity arguments ("odd"
// layers are 1, 3, 5, ...). Storage is 0-based, so layer r lives at index
// r - 1 and the odd layers are the even storage indices 0, 2, 4, ...
struct ModelSpec {
  std::vector<double> alpha;  // K form factors on the simplex
  std::vector<double> mu;     // K-1 couplings mu_{r,r+1} >= 0
  std::vector<double> h;      // K fields h_r >= 0

  int layers() const { return static_cast<int>(alpha.size()); }
  bool zero_field() const;

  // Throws std::invalid_argument naming the violated invariant.
  void validate() const;

  // Spec with layer order reversed (layer r becomes layer K + 1 - r).
  ModelSpec reversed() const;
};

ModelSpec make_spec(std::vector<double> alpha, std::vector<double> mu, std::vector<double> h = {});

// Extract mu_{r,r+1} from a full K x K coupling matrix. Rejects non-symmetric,
// non-tridiagonal, nonzero-diagonal or negative input.
std::vector<double> superdiagonal_from_full(const Matrix& mu_full);

struct EffectiveMatrices {
  Matrix delta;  // Delta_{rs} = alpha_r mu_{rs} alpha_s
  Matrix m;      // M_{rs}     = mu_{rs} alpha_s
};

EffectiveMatrices build_effective(const ModelSpec& spec);

// Blocks of a K x K matrix keeping odd/even (1-based) rows and columns.
struct OddEvenSplit {
  Matrix oo, oe, eo, ee;
  Matrix reassemble() const;
};

OddEvenSplit odd_even_split(const Matrix& a);

// Odd/even (1-based) components of a K-vector, and the inverse operation.
Vector odd_part(const Vector& x);
Vector even_part(const Vector& x);
Vector interleave(const Vector& odd, const Vector& even);

// [M^2]^(oo) = M^(oe) M^(eo).
Matrix m_squared_oo(const EffectiveMatrices& em);

struct PowerIterationOptions {
  double tol = 1e-12;
  int max_iterations = 20000;
};

struct SpectralRadius {
  double rho = 0.0;
  int iterations = 0;
  bool converged = false;
  bool used_dense_fallback = false;
  Vector vector;  // nonnegative, unit sum
};

// rho([M^2]^(oo)) by power iteration from the all-ones vector. When the
// iteration does not settle (reducible block) the dense eigenvalue solve on
// the symmetrised block is used instead and flagged.
SpectralRadius spectral_radius_oo_detailed(const EffectiveMatrices& em,
                                           const PowerIterationOptions& options = {});
double spectral_radius_oo(const EffectiveMatrices& em, const PowerIterationOptions& options = {});

// Dense route used by the form-factor search: largest eigenvalue of the
// symmetric matrix alpha_o^{1/2} mu^(oe) alpha_e mu^(eo) alpha_o^{1/2},
// which is similar to [M^2]^(oo).
double spectral_radius_oo_dense(const ModelSpec& spec);

// Perron eigenvector of [M^2]^(oo), strictly positive with unit sum.
// Requires every alpha_r > 0 and every mu_{r,r+1} > 0.
Vector perron_vector(const ModelSpec& spec, const PowerIterationOptions& options = {});

// Decoupling at vanishing form factors or couplings. Each block is an
// independent chain over layers [first, first + spec.layers()); its spec has
// alpha' = alpha / S and mu' = mu S (S the block's alpha mass) so that the
// block's M matrix equals the restriction of the full M. Layers with
// alpha_r = 0 do not belong to any block.
struct SubMachine {
  int first = 0;     // 0-based index of the first layer in the block
  int count = 0;     // number of layers
  double weight = 0; // S = sum of alpha over the block
  ModelSpec spec;    // valid only when count >= 2
};

std::vector<SubMachine> decouple(const ModelSpec& spec);
bool is_coupled_chain(const ModelSpec& spec);

}  // namespace dbm
