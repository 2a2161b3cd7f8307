#pragma once

#include "dbm/model.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace dbm {

// Finite-N layer partition: N_r from alpha_r N by largest remainder, every
// layer holding at least one spin. Sites of layer r occupy
// [offset[r], offset[r] + sizes[r]).
struct SystemSize {
  int n = 0;
  std::vector<int> sizes;
  std::vector<int> offsets;

  int layers() const { return static_cast<int>(sizes.size()); }
  static SystemSize from_alpha(const std::vector<double>& alpha, int n);
  static SystemSize from_sizes(std::vector<int> sizes);
};

// One realisation of the disorder. For each adjacent pair the Hamiltonian
// contains both orientations J^{r,r+1} (N_r x N_{r+1}) and J^{r+1,r}
// (N_{r+1} x N_r), each entry N(mu/2N, mu/2N); a spin pair therefore couples
// through their sum. Fields are N(h_r, h_r).
struct DisorderSample {
  SystemSize size;
  std::vector<Matrix> forward;   // J^{r,r+1}
  std::vector<Matrix> backward;  // J^{r+1,r}
  Vector field;                  // h~_i, length N
  std::uint64_t seed = 0;

  // Effective N_r x N_{r+1} coupling J^{r,r+1} + (J^{r+1,r})^T.
  Matrix coupling(int edge) const;
};

DisorderSample sample_disorder(const ModelSpec& spec, const SystemSize& size, std::uint64_t seed);
// Deterministic sample with the given effective couplings (forward blocks,
// backward blocks zero) and fields; used for hand-made instances.
DisorderSample make_disorder(const SystemSize& size, std::vector<Matrix> coupling, Vector field);

// H_N(sigma) for sigma in {-1, +1}^N.
double energy(const std::vector<int>& sigma, const DisorderSample& disorder);

enum class Engine { Enumeration, BlockGibbs };
const char* to_string(Engine e);

struct GibbsEstimate {
  Vector m;         // layer magnetisations <m_r>
  Vector q;         // layer overlaps <q_r>
  Vector stderr_m;  // zero for enumeration
  Vector stderr_q;
  Vector site_mean;  // <sigma_i>
  std::optional<double> pressure;  // exact p_N (enumeration only)
  Engine method = Engine::Enumeration;
  double autocorrelation = 0.0;  // integrated autocorrelation time in sweeps (Gibbs only)
};

inline constexpr int kEnumerationCap = 24;

// Exact Gibbs averages. The smaller parity class (odd or even layers) is
// enumerated in Gray-code order and the other class is traced out
// analytically; chunks of the enumeration run in parallel and are merged in a
// fixed order, so the result does not depend on the thread count.
GibbsEstimate exact_enumerate(const DisorderSample& disorder);
// Brute-force sum over all 2^N configurations via energy(); serial reference.
GibbsEstimate exact_enumerate_reference(const DisorderSample& disorder);

struct GibbsOptions {
  int sweeps = 2000;
  int burn_in = 500;
  int replicas = 2;
  int batches = 20;
  std::uint64_t seed = 0;
};

// Bipartite heat-bath sampler: all odd layers update given the even layers,
// then the reverse. Chains start from random configurations.
GibbsEstimate run_block_gibbs(const DisorderSample& disorder, const GibbsOptions& options);
// Same chain with serial loops and without the vectorised field products.
GibbsEstimate run_block_gibbs_reference(const DisorderSample& disorder, const GibbsOptions& options);

// Heat-bath probability of sigma_i = +1 given local field `field`.
double heat_bath_up(double field);

struct QuenchedOptions {
  int n_disorder = 1;
  std::uint64_t base_seed = 0;
  Engine engine = Engine::Enumeration;
  GibbsOptions gibbs;  // seed ignored; derived per sample
};

struct QuenchedReport {
  int n_disorder = 0;
  int n = 0;
  Engine engine = Engine::Enumeration;
  Vector mean_m, stderr_m;  // over disorder samples
  Vector mean_q, stderr_q;
  Vector mean_m_minus_q, stderr_m_minus_q;  // paired per-sample differences
  // Per-site identity E<sigma_i>^2 = E<sigma_i>, averaged over sites.
  double site_identity_mean = 0.0;
  double site_identity_stderr = 0.0;
  // Enumeration only.
  std::optional<double> mean_pressure, stderr_pressure, var_pressure, stderr_var_pressure;
  std::vector<double> pressures;
  std::vector<std::uint64_t> disorder_seeds;
};

// Runs the engine over n_disorder independent samples (in parallel) and
// aggregates in sample order with compensated summation.
QuenchedReport quenched_run(const ModelSpec& spec, const SystemSize& size, const QuenchedOptions& options);

std::uint64_t disorder_seed(std::uint64_t base_seed, int sample);
std::uint64_t spin_seed(std::uint64_t base_seed, int sample);

}  // namespace dbm
