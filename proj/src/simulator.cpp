#include "dbm/simulator.hpp"

#include "dbm/one_body.hpp"
#include "dbm/rng.hpp"

#include <boost/random/normal_distribution.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <exception>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>

namespace dbm {

// ---- sizes and disorder --------------------------------------------------------

SystemSize SystemSize::from_sizes(std::vector<int> sizes) {
  if (sizes.size() < 2) throw std::invalid_argument("SystemSize: need at least two layers");
  SystemSize s;
  s.sizes = std::move(sizes);
  for (int v : s.sizes) {
    if (v < 1) throw std::invalid_argument("SystemSize: every layer needs N_r >= 1");
    s.offsets.push_back(s.n);
    s.n += v;
  }
  return s;
}

SystemSize SystemSize::from_alpha(const std::vector<double>& alpha, int n) {
  const int k = static_cast<int>(alpha.size());
  if (n < k) {
    throw std::invalid_argument("SystemSize: N = " + std::to_string(n) + " cannot give each of " + std::to_string(k) +
                                " layers a spin");
  }
  std::vector<int> sizes(k);
  std::vector<double> frac(k);
  int assigned = 0;
  for (int r = 0; r < k; ++r) {
    const double raw = alpha[r] * n;
    sizes[r] = static_cast<int>(std::floor(raw));
    frac[r] = raw - sizes[r];
    assigned += sizes[r];
  }
  std::vector<int> order(k);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return frac[a] > frac[b]; });
  for (int i = 0; assigned < n; i = (i + 1) % k, ++assigned) ++sizes[order[i]];
  // Layers left empty borrow a spin from the largest layer.
  for (int r = 0; r < k; ++r) {
    if (sizes[r] == 0) {
      const auto largest = std::max_element(sizes.begin(), sizes.end()) - sizes.begin();
      --sizes[largest];
      sizes[r] = 1;
    }
  }
  return from_sizes(std::move(sizes));
}

Matrix DisorderSample::coupling(int edge) const { return forward[edge] + backward[edge].transpose(); }

DisorderSample sample_disorder(const ModelSpec& spec, const SystemSize& size, std::uint64_t seed) {
  spec.validate();
  if (size.layers() != spec.layers()) throw std::invalid_argument("sample_disorder: layer count mismatch");
  const int k = spec.layers();
  const double n = size.n;
  std::mt19937_64 gen(seed);
  boost::random::normal_distribution<double> normal(0.0, 1.0);

  DisorderSample d;
  d.size = size;
  d.seed = seed;
  auto draw = [&](Matrix& block, double mean_var) {
    if (mean_var == 0.0) {
      block.setZero();
      return;
    }
    const double sd = std::sqrt(mean_var);
    for (Eigen::Index i = 0; i < block.rows(); ++i) {
      for (Eigen::Index j = 0; j < block.cols(); ++j) block(i, j) = mean_var + sd * normal(gen);
    }
  };
  for (int r = 0; r + 1 < k; ++r) {
    const double mv = spec.mu[r] / (2.0 * n);
    d.forward.emplace_back(size.sizes[r], size.sizes[r + 1]);
    draw(d.forward.back(), mv);
    d.backward.emplace_back(size.sizes[r + 1], size.sizes[r]);
    draw(d.backward.back(), mv);
  }
  d.field.resize(size.n);
  for (int r = 0; r < k; ++r) {
    const double h = spec.h[r];
    const double sd = std::sqrt(h);
    for (int i = 0; i < size.sizes[r]; ++i) d.field[size.offsets[r] + i] = h == 0.0 ? 0.0 : h + sd * normal(gen);
  }
  return d;
}

DisorderSample make_disorder(const SystemSize& size, std::vector<Matrix> coupling, Vector field) {
  if (static_cast<int>(coupling.size()) != size.layers() - 1 || field.size() != size.n) {
    throw std::invalid_argument("make_disorder: shape mismatch");
  }
  DisorderSample d;
  d.size = size;
  for (int r = 0; r + 1 < size.layers(); ++r) {
    if (coupling[r].rows() != size.sizes[r] || coupling[r].cols() != size.sizes[r + 1]) {
      throw std::invalid_argument("make_disorder: coupling block shape mismatch");
    }
    d.backward.push_back(Matrix::Zero(size.sizes[r + 1], size.sizes[r]));
  }
  d.forward = std::move(coupling);
  d.field = std::move(field);
  return d;
}

double energy(const std::vector<int>& sigma, const DisorderSample& disorder) {
  const auto& size = disorder.size;
  if (static_cast<int>(sigma.size()) != size.n) {
    throw std::invalid_argument("energy: spin vector has length " + std::to_string(sigma.size()) + ", expected " +
                                std::to_string(size.n));
  }
  double e = 0.0;
  for (int r = 0; r + 1 < size.layers(); ++r) {
    const int a = size.offsets[r], b = size.offsets[r + 1];
    for (int i = 0; i < size.sizes[r]; ++i) {
      for (int j = 0; j < size.sizes[r + 1]; ++j) {
        e -= (disorder.forward[r](i, j) + disorder.backward[r](j, i)) * sigma[a + i] * sigma[b + j];
      }
    }
  }
  for (int i = 0; i < size.n; ++i) e -= disorder.field[i] * sigma[i];
  return e;
}

const char* to_string(Engine e) { return e == Engine::Enumeration ? "Enumeration" : "BlockGibbs"; }

double heat_bath_up(double field) { return 1.0 / (1.0 + std::exp(-2.0 * field)); }

namespace {

void layer_averages(const SystemSize& size, GibbsEstimate& est) {
  const int k = size.layers();
  est.m = Vector::Zero(k);
  est.q = Vector::Zero(k);
  for (int r = 0; r < k; ++r) {
    const auto seg = est.site_mean.segment(size.offsets[r], size.sizes[r]);
    est.m[r] = seg.mean();
    est.q[r] = seg.squaredNorm() / size.sizes[r];
  }
  est.stderr_m = Vector::Zero(k);
  est.stderr_q = Vector::Zero(k);
}

void check_enumerable(const DisorderSample& d) {
  if (d.size.n > kEnumerationCap) {
    throw std::invalid_argument("exact enumeration limited to N <= " + std::to_string(kEnumerationCap) + " (got " +
                                std::to_string(d.size.n) + ")");
  }
}

// Running log-sum-exp accumulator over weighted site sums.
struct Accumulator {
  double shift = -std::numeric_limits<double>::infinity();
  double z = 0.0;
  Vector enumerated, traced;

  void add(double logw, const Vector& sigma, const Vector& tanh_g) {
    if (logw > shift) {
      const double scale = std::exp(shift - logw);
      z *= scale;
      enumerated *= scale;
      traced *= scale;
      shift = logw;
    }
    const double w = std::exp(logw - shift);
    z += w;
    enumerated += w * sigma;
    traced += w * tanh_g;
  }

  void merge(const Accumulator& o) {
    if (o.z == 0.0) return;
    const double top = std::max(shift, o.shift);
    const double a = z == 0.0 ? 0.0 : std::exp(shift - top), b = std::exp(o.shift - top);
    z = a * z + b * o.z;
    enumerated = a * enumerated + b * o.enumerated;
    traced = a * traced + b * o.traced;
    shift = top;
  }
};

}  // namespace

GibbsEstimate exact_enumerate(const DisorderSample& disorder) {
  check_enumerable(disorder);
  const auto& size = disorder.size;
  const int k = size.layers();

  // Parity classes by layer (0-based even index = odd layer).
  std::vector<int> cls[2];
  for (int r = 0; r < k; ++r) {
    for (int i = 0; i < size.sizes[r]; ++i) cls[r % 2].push_back(size.offsets[r] + i);
  }
  const int e_parity = cls[0].size() <= cls[1].size() ? 0 : 1;
  const auto& e_sites = cls[e_parity];
  const auto& t_sites = cls[1 - e_parity];
  const int ne = static_cast<int>(e_sites.size()), nt = static_cast<int>(t_sites.size());

  std::vector<int> local(size.n);
  for (int i = 0; i < ne; ++i) local[e_sites[i]] = i;
  for (int j = 0; j < nt; ++j) local[t_sites[j]] = j;

  // c(j, i): coupling between traced site j and enumerated site i.
  Matrix c = Matrix::Zero(nt, ne);
  for (int r = 0; r + 1 < k; ++r) {
    const Matrix w = disorder.coupling(r);
    const bool r_enumerated = (r % 2) == e_parity;
    for (int a = 0; a < size.sizes[r]; ++a) {
      for (int b = 0; b < size.sizes[r + 1]; ++b) {
        const int sa = local[size.offsets[r] + a], sb = local[size.offsets[r + 1] + b];
        if (r_enumerated) c(sb, sa) += w(a, b); else c(sa, sb) += w(a, b);
      }
    }
  }
  Vector he(ne), ht(nt);
  for (int i = 0; i < ne; ++i) he[i] = disorder.field[e_sites[i]];
  for (int j = 0; j < nt; ++j) ht[j] = disorder.field[t_sites[j]];

  const std::uint64_t states = std::uint64_t{1} << ne;
  const int chunks = static_cast<int>(std::min<std::uint64_t>(states, 64));
  std::vector<Accumulator> acc(chunks);

#pragma omp parallel for schedule(dynamic, 1)
  for (int ch = 0; ch < chunks; ++ch) {
    const std::uint64_t begin = states * ch / chunks, end = states * (ch + 1) / chunks;
    Accumulator& a = acc[ch];
    a.enumerated = Vector::Zero(ne);
    a.traced = Vector::Zero(nt);
    Vector sigma(ne), tanh_g(nt);
    const std::uint64_t gray = begin ^ (begin >> 1);
    for (int i = 0; i < ne; ++i) sigma[i] = ((gray >> i) & 1U) ? 1.0 : -1.0;
    Vector g = ht + c * sigma;
    double lin = he.dot(sigma);
    for (std::uint64_t s = begin; s < end; ++s) {
      double logw = lin;
      for (int j = 0; j < nt; ++j) {
        logw += log_2cosh(g[j]);
        tanh_g[j] = std::tanh(g[j]);
      }
      a.add(logw, sigma, tanh_g);
      if (s + 1 < end) {
        const int bit = std::countr_zero(s + 1);
        sigma[bit] = -sigma[bit];
        g += 2.0 * sigma[bit] * c.col(bit);
        lin += 2.0 * sigma[bit] * he[bit];
      }
    }
  }
  Accumulator total = acc[0];
  for (int ch = 1; ch < chunks; ++ch) total.merge(acc[ch]);

  GibbsEstimate est;
  est.method = Engine::Enumeration;
  est.site_mean = Vector::Zero(size.n);
  for (int i = 0; i < ne; ++i) est.site_mean[e_sites[i]] = total.enumerated[i] / total.z;
  for (int j = 0; j < nt; ++j) est.site_mean[t_sites[j]] = total.traced[j] / total.z;
  est.pressure = (total.shift + std::log(total.z)) / size.n;
  layer_averages(size, est);
  return est;
}

GibbsEstimate exact_enumerate_reference(const DisorderSample& disorder) {
  check_enumerable(disorder);
  const int n = disorder.size.n;
  const std::uint64_t states = std::uint64_t{1} << n;
  std::vector<double> minus_h(states);
  std::vector<int> sigma(n);
  for (std::uint64_t s = 0; s < states; ++s) {
    for (int i = 0; i < n; ++i) sigma[i] = ((s >> i) & 1U) ? 1 : -1;
    minus_h[s] = -energy(sigma, disorder);
  }
  const double top = *std::max_element(minus_h.begin(), minus_h.end());
  double z = 0.0;
  Vector sums = Vector::Zero(n);
  for (std::uint64_t s = 0; s < states; ++s) {
    const double w = std::exp(minus_h[s] - top);
    z += w;
    for (int i = 0; i < n; ++i) sums[i] += ((s >> i) & 1U) ? w : -w;
  }
  GibbsEstimate est;
  est.method = Engine::Enumeration;
  est.site_mean = sums / z;
  est.pressure = (top + std::log(z)) / n;
  layer_averages(disorder.size, est);
  return est;
}

// ---- block Gibbs -----------------------------------------------------------------

namespace {

void check_gibbs(const GibbsOptions& o) {
  if (!(o.sweeps > o.burn_in && o.burn_in >= 0)) {
    throw std::invalid_argument("run_block_gibbs: requires sweeps > burn_in >= 0");
  }
  if (o.replicas < 2) throw std::invalid_argument("run_block_gibbs: overlaps need at least two replicas");
  if (o.batches < 2) throw std::invalid_argument("run_block_gibbs: need at least two batches");
}

struct BatchStats {
  double mean = 0.0, stderr = 0.0, tau = 0.0;
};

// Batch-means error of a time series; tau from var(batch mean) = 2 tau var / b.
BatchStats batch_means(const std::vector<double>& series, int batches) {
  BatchStats out;
  const int n = static_cast<int>(series.size());
  const int nb = std::min(batches, n);
  const int b = n / nb;
  const int skip = n - nb * b;
  std::vector<double> means(nb, 0.0);
  for (int i = 0; i < nb; ++i) {
    for (int j = 0; j < b; ++j) means[i] += series[skip + i * b + j];
    means[i] /= b;
  }
  const double m = std::accumulate(means.begin(), means.end(), 0.0) / nb;
  double vb = 0.0;
  for (double v : means) vb += (v - m) * (v - m);
  vb /= (nb - 1);
  double mean_all = 0.0;
  for (int i = skip; i < n; ++i) mean_all += series[i];
  mean_all /= (n - skip);
  double vs = 0.0;
  for (int i = skip; i < n; ++i) vs += (series[i] - mean_all) * (series[i] - mean_all);
  vs /= std::max(1, n - skip - 1);
  out.mean = mean_all;
  out.stderr = std::sqrt(vb / nb);
  out.tau = vs > 0.0 ? 0.5 * b * vb / vs : 0.0;
  return out;
}

// Per-layer spin blocks, one column per replica.
struct ChainState {
  std::vector<Matrix> spins;
};

struct Series {
  std::vector<std::vector<double>> m, q;  // [layer][measurement]
  Vector site_sum;
  int measurements = 0;
};

// One chain driver shared by the vectorised and the serial reference kernels;
// only the local-field computation and update loop differ.
template <class HalfSweep>
GibbsEstimate drive_chain(const DisorderSample& disorder, const GibbsOptions& o, HalfSweep&& half_sweep) {
  check_gibbs(o);
  const auto& size = disorder.size;
  const int k = size.layers(), reps = o.replicas;
  const std::uint64_t init_key = rng::derive_key(o.seed, "init");
  const std::uint64_t update_key = rng::derive_key(o.seed, "update");

  ChainState st;
  for (int r = 0; r < k; ++r) {
    Matrix s(size.sizes[r], reps);
    for (int i = 0; i < size.sizes[r]; ++i) {
      for (int a = 0; a < reps; ++a) {
        const std::uint64_t counter = static_cast<std::uint64_t>(size.offsets[r] + i) * reps + a;
        s(i, a) = rng::uniform(init_key, counter) < 0.5 ? 1.0 : -1.0;
      }
    }
    st.spins.push_back(std::move(s));
  }

  Series ser;
  ser.m.assign(k, {});
  ser.q.assign(k, {});
  ser.site_sum = Vector::Zero(size.n);
  const int pairs = reps * (reps - 1) / 2;
  for (int sweep = 0; sweep < o.sweeps; ++sweep) {
    for (int parity = 0; parity < 2; ++parity) {
      const std::uint64_t base = (static_cast<std::uint64_t>(sweep) * 2 + parity) * size.n;
      half_sweep(st, parity, update_key, base);
    }
    if (sweep < o.burn_in) continue;
    ++ser.measurements;
    for (int r = 0; r < k; ++r) {
      const Matrix& s = st.spins[r];
      ser.m[r].push_back(s.mean());
      double q = 0.0;
      for (int a = 0; a < reps; ++a) {
        for (int b = a + 1; b < reps; ++b) q += s.col(a).dot(s.col(b));
      }
      ser.q[r].push_back(q / (pairs * size.sizes[r]));
      ser.site_sum.segment(size.offsets[r], size.sizes[r]) += s.rowwise().mean();
    }
  }

  GibbsEstimate est;
  est.method = Engine::BlockGibbs;
  est.m.resize(k);
  est.q.resize(k);
  est.stderr_m.resize(k);
  est.stderr_q.resize(k);
  for (int r = 0; r < k; ++r) {
    const auto bm = batch_means(ser.m[r], o.batches);
    const auto bq = batch_means(ser.q[r], o.batches);
    est.m[r] = bm.mean;
    est.stderr_m[r] = bm.stderr;
    est.q[r] = bq.mean;
    est.stderr_q[r] = bq.stderr;
    est.autocorrelation = std::max({est.autocorrelation, bm.tau, bq.tau});
  }
  est.site_mean = ser.site_sum / ser.measurements;
  return est;
}

}  // namespace

GibbsEstimate run_block_gibbs(const DisorderSample& disorder, const GibbsOptions& options) {
  const auto& size = disorder.size;
  const int k = size.layers();
  std::vector<Matrix> w;
  for (int r = 0; r + 1 < k; ++r) w.push_back(disorder.coupling(r));
  const int reps = options.replicas;

  auto half_sweep = [&](ChainState& st, int parity, std::uint64_t key, std::uint64_t base) {
    for (int r = parity; r < k; r += 2) {
      Matrix field = disorder.field.segment(size.offsets[r], size.sizes[r]).replicate(1, reps);
      // Column-wise products: Eigen's matrix-vector kernel beats its
      // matrix-matrix path for so few replicas.
      for (int a = 0; a < reps; ++a) {
        if (r > 0) field.col(a).noalias() += w[r - 1].transpose() * st.spins[r - 1].col(a);
        if (r + 1 < k) field.col(a).noalias() += w[r] * st.spins[r + 1].col(a);
      }
      Matrix& s = st.spins[r];
      const int nr = size.sizes[r], off = size.offsets[r];
#pragma omp parallel for schedule(static)
      for (int i = 0; i < nr; ++i) {
        for (int a = 0; a < reps; ++a) {
          const std::uint64_t counter = (base + off + i) * reps + a;
          s(i, a) = rng::uniform(key, counter) < heat_bath_up(field(i, a)) ? 1.0 : -1.0;
        }
      }
    }
  };
  return drive_chain(disorder, options, half_sweep);
}

GibbsEstimate run_block_gibbs_reference(const DisorderSample& disorder, const GibbsOptions& options) {
  const auto& size = disorder.size;
  const int k = size.layers();
  const int reps = options.replicas;

  auto half_sweep = [&](ChainState& st, int parity, std::uint64_t key, std::uint64_t base) {
    for (int r = parity; r < k; r += 2) {
      const int nr = size.sizes[r], off = size.offsets[r];
      for (int i = 0; i < nr; ++i) {
        for (int a = 0; a < reps; ++a) {
          double f = disorder.field[off + i];
          if (r > 0) {
            for (int j = 0; j < size.sizes[r - 1]; ++j) {
              f += (disorder.forward[r - 1](j, i) + disorder.backward[r - 1](i, j)) * st.spins[r - 1](j, a);
            }
          }
          if (r + 1 < k) {
            for (int j = 0; j < size.sizes[r + 1]; ++j) {
              f += (disorder.forward[r](i, j) + disorder.backward[r](j, i)) * st.spins[r + 1](j, a);
            }
          }
          const std::uint64_t counter = (base + off + i) * reps + a;
          st.spins[r](i, a) = rng::uniform(key, counter) < heat_bath_up(f) ? 1.0 : -1.0;
        }
      }
    }
  };
  return drive_chain(disorder, options, half_sweep);
}

// ---- quenched averages -------------------------------------------------------------

std::uint64_t disorder_seed(std::uint64_t base_seed, int sample) {
  return rng::derive_key(base_seed, "disorder", static_cast<std::uint64_t>(sample));
}

std::uint64_t spin_seed(std::uint64_t base_seed, int sample) {
  return rng::derive_key(base_seed, "spins", static_cast<std::uint64_t>(sample));
}

namespace {

// Neumaier-compensated sum.
class CompensatedSum {
 public:
  void add(double v) {
    const double t = sum_ + v;
    comp_ += std::abs(sum_) >= std::abs(v) ? (sum_ - t) + v : (v - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0, comp_ = 0.0;
};

struct MeanError {
  double mean = 0.0, stderr = 0.0, var = 0.0;
};

MeanError mean_error(const std::vector<double>& v) {
  MeanError out;
  const double n = static_cast<double>(v.size());
  CompensatedSum s;
  for (double x : v) s.add(x);
  out.mean = s.value() / n;
  if (v.size() > 1) {
    CompensatedSum d;
    for (double x : v) d.add((x - out.mean) * (x - out.mean));
    out.var = d.value() / (n - 1);
    out.stderr = std::sqrt(out.var / n);
  }
  return out;
}

struct SampleSummary {
  Vector m, q;
  double site_identity = 0.0;
  double pressure = 0.0;
};

}  // namespace

QuenchedReport quenched_run(const ModelSpec& spec, const SystemSize& size, const QuenchedOptions& options) {
  if (options.n_disorder < 1) throw std::invalid_argument("quenched_run: n_disorder must be >= 1");
  spec.validate();
  if (options.engine == Engine::Enumeration && size.n > kEnumerationCap) {
    throw std::invalid_argument("quenched_run: enumeration limited to N <= " + std::to_string(kEnumerationCap));
  }
  if (options.engine == Engine::BlockGibbs) {
    GibbsOptions probe = options.gibbs;
    check_gibbs(probe);
  }
  const int nd = options.n_disorder, k = spec.layers();
  std::vector<SampleSummary> out(nd);
  std::exception_ptr failure;

#pragma omp parallel for schedule(dynamic, 1)
  for (int d = 0; d < nd; ++d) {
    try {
      const auto disorder = sample_disorder(spec, size, disorder_seed(options.base_seed, d));
      GibbsEstimate est;
      if (options.engine == Engine::Enumeration) {
        est = exact_enumerate(disorder);
      } else {
        GibbsOptions go = options.gibbs;
        go.seed = spin_seed(options.base_seed, d);
        est = run_block_gibbs(disorder, go);
      }
      out[d].m = est.m;
      out[d].q = est.q;
      out[d].site_identity = (est.site_mean.array().square() - est.site_mean.array()).mean();
      out[d].pressure = est.pressure.value_or(0.0);
    } catch (...) {
#pragma omp critical
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);

  QuenchedReport rep;
  rep.n_disorder = nd;
  rep.n = size.n;
  rep.engine = options.engine;
  rep.mean_m.resize(k);
  rep.stderr_m.resize(k);
  rep.mean_q.resize(k);
  rep.stderr_q.resize(k);
  rep.mean_m_minus_q.resize(k);
  rep.stderr_m_minus_q.resize(k);
  for (int r = 0; r < k; ++r) {
    std::vector<double> m(nd), q(nd), diff(nd);
    for (int d = 0; d < nd; ++d) {
      m[d] = out[d].m[r];
      q[d] = out[d].q[r];
      diff[d] = m[d] - q[d];
    }
    const auto em = mean_error(m), eq = mean_error(q), ed = mean_error(diff);
    rep.mean_m[r] = em.mean;
    rep.stderr_m[r] = em.stderr;
    rep.mean_q[r] = eq.mean;
    rep.stderr_q[r] = eq.stderr;
    rep.mean_m_minus_q[r] = ed.mean;
    rep.stderr_m_minus_q[r] = ed.stderr;
  }
  std::vector<double> site(nd);
  for (int d = 0; d < nd; ++d) site[d] = out[d].site_identity;
  const auto es = mean_error(site);
  rep.site_identity_mean = es.mean;
  rep.site_identity_stderr = es.stderr;
  for (int d = 0; d < nd; ++d) rep.disorder_seeds.push_back(disorder_seed(options.base_seed, d));
  if (options.engine == Engine::Enumeration) {
    for (int d = 0; d < nd; ++d) rep.pressures.push_back(out[d].pressure);
    const auto ep = mean_error(rep.pressures);
    rep.mean_pressure = ep.mean;
    rep.stderr_pressure = ep.stderr;
    rep.var_pressure = ep.var;
    // Normal-theory standard error of a sample variance.
    rep.stderr_var_pressure = nd > 1 ? ep.var * std::sqrt(2.0 / (nd - 1)) : 0.0;
  }
  return rep;
}

}  // namespace dbm
