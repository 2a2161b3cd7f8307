#include "doctest.h"

#include "dbm/rng.hpp"
#include "dbm/simulator.hpp"

#include <omp.h>

#include <cmath>
#include <numeric>
#include <random>

using namespace dbm;

namespace {

// Dense N x N coupling with both orientations, independent of energy().
Matrix dense_couplings(const DisorderSample& d) {
  Matrix j = Matrix::Zero(d.size.n, d.size.n);
  for (int r = 0; r + 1 < d.size.layers(); ++r) {
    j.block(d.size.offsets[r], d.size.offsets[r + 1], d.size.sizes[r], d.size.sizes[r + 1]) = d.forward[r];
    j.block(d.size.offsets[r + 1], d.size.offsets[r], d.size.sizes[r + 1], d.size.sizes[r]) = d.backward[r];
  }
  return j;
}

double energy_oracle(const std::vector<int>& sigma, const DisorderSample& d) {
  const Matrix j = dense_couplings(d);
  double e = 0.0;
  for (int a = 0; a < d.size.n; ++a) {
    for (int b = 0; b < d.size.n; ++b) e -= j(a, b) * sigma[a] * sigma[b];
    e -= d.field[a] * sigma[a];
  }
  return e;
}

std::vector<int> random_spins(std::mt19937_64& rng, int n) {
  std::vector<int> s(n);
  for (auto& v : s) v = (rng() & 1U) ? 1 : -1;
  return s;
}

const ModelSpec kBalanced = make_spec({0.5, 0.5}, {4.0}, {0.1, 0.1});

}  // namespace

TEST_CASE("rng derivation is deterministic and label-sensitive") {
  CHECK(rng::derive_key(1, "disorder", 0) == rng::derive_key(1, "disorder", 0));
  CHECK(rng::derive_key(1, "disorder", 0) != rng::derive_key(1, "spins", 0));
  CHECK(rng::derive_key(1, "disorder", 0) != rng::derive_key(1, "disorder", 1));
  CHECK(rng::derive_key(1, "disorder", 0) != rng::derive_key(2, "disorder", 0));
  double mean = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const double u = rng::uniform(42, i);
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    mean += u;
  }
  CHECK(std::abs(mean / 100000 - 0.5) < 5 * std::sqrt(1.0 / 12 / 100000));
}

TEST_CASE("layer sizes by largest remainder") {
  const auto s = SystemSize::from_alpha({0.5, 0.5}, 2000);
  CHECK(s.sizes == std::vector<int>{1000, 1000});
  const auto t = SystemSize::from_alpha({0.2, 0.35, 0.45}, 10);
  CHECK(std::accumulate(t.sizes.begin(), t.sizes.end(), 0) == 10);
  CHECK(t.sizes == std::vector<int>{2, 4, 4});
  CHECK(t.offsets == std::vector<int>{0, 2, 6});
  const auto z = SystemSize::from_alpha({0.0, 0.5, 0.5}, 9);
  CHECK(z.sizes[0] == 1);
  CHECK(z.n == 9);
  CHECK_THROWS_AS(SystemSize::from_alpha({0.5, 0.5}, 1), std::invalid_argument);
  CHECK_THROWS_AS(SystemSize::from_sizes({3, 0}), std::invalid_argument);
}

TEST_CASE("sample_disorder") {
  const auto size = SystemSize::from_alpha({0.25, 0.25, 0.5}, 12);
  const auto zero = sample_disorder(make_spec({0.25, 0.25, 0.5}, {0.0, 1.0}), size, 3);
  CHECK(zero.forward[0].isZero());
  CHECK(zero.backward[0].isZero());
  CHECK_FALSE(zero.forward[1].isZero());
  CHECK(zero.field.isZero());

  const auto a = sample_disorder(kBalanced, SystemSize::from_alpha(kBalanced.alpha, 20), 99);
  const auto b = sample_disorder(kBalanced, SystemSize::from_alpha(kBalanced.alpha, 20), 99);
  const auto c = sample_disorder(kBalanced, SystemSize::from_alpha(kBalanced.alpha, 20), 100);
  CHECK(a.forward[0] == b.forward[0]);
  CHECK(a.backward[0] == b.backward[0]);
  CHECK(a.field == b.field);
  CHECK(a.forward[0] != c.forward[0]);

  // Law of large numbers over 10^6 entries.
  const auto spec = make_spec({0.5, 0.5}, {2.0}, {0.3, 0.3});
  const auto big = sample_disorder(spec, SystemSize::from_alpha(spec.alpha, 2000), 7);
  const double expected = 2.0 / (2.0 * 2000);
  for (const Matrix* block : {&big.forward[0], &big.backward[0]}) {
    const double count = static_cast<double>(block->size());
    const double mean = block->mean();
    const double var = (block->array() - mean).square().sum() / (count - 1);
    CHECK(std::abs(mean - expected) < 5 * std::sqrt(expected / count));
    CHECK(std::abs(var - expected) < 5 * expected * std::sqrt(2.0 / count));
  }
  const double fmean = big.field.mean();
  CHECK(std::abs(fmean - 0.3) < 5 * std::sqrt(0.3 / 2000));
}

TEST_CASE("energy") {
  std::mt19937_64 rng(1);
  const auto size = SystemSize::from_sizes({3, 3, 2});
  const auto blank = make_disorder(size, {Matrix::Zero(3, 3), Matrix::Zero(3, 2)}, Vector::Zero(8));
  for (int t = 0; t < 5; ++t) CHECK(energy(random_spins(rng, 8), blank) == 0.0);

  const auto spec = make_spec({0.375, 0.375, 0.25}, {3.0, 2.0}, {0.0, 0.0, 0.0});
  const auto d = sample_disorder(spec, size, 5);
  for (int t = 0; t < 10; ++t) {
    auto s = random_spins(rng, 8);
    const double e = energy(s, d);
    for (auto& v : s) v = -v;
    CHECK(energy(s, d) == doctest::Approx(e).epsilon(1e-14));
  }
  const auto dh = sample_disorder(make_spec({0.375, 0.375, 0.25}, {3.0, 2.0}, {0.2, 0.5, 1.0}), size, 6);
  for (int t = 0; t < 10; ++t) {
    const auto s = random_spins(rng, 8);
    CHECK(std::abs(energy(s, dh) - energy_oracle(s, dh)) < 1e-12);
  }
  CHECK_THROWS_AS(energy(std::vector<int>(7, 1), dh), std::invalid_argument);
}

TEST_CASE("enumeration: zero disorder and a hand-computed pair") {
  const auto size = SystemSize::from_sizes({2, 3});
  const auto blank = make_disorder(size, {Matrix::Zero(2, 3)}, Vector::Zero(5));
  const auto e = exact_enumerate(blank);
  CHECK(*e.pressure == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(e.m.isZero());
  CHECK(e.q.isZero());

  const double j = 0.7, h1 = 0.3, h2 = -0.2;
  const auto pair = make_disorder(SystemSize::from_sizes({1, 1}), {Matrix::Constant(1, 1, j)},
                                  (Vector(2) << h1, h2).finished());
  double z = 0.0, s1 = 0.0;
  for (int a : {-1, 1}) {
    for (int b : {-1, 1}) {
      const double w = std::exp(j * a * b + h1 * a + h2 * b);
      z += w;
      s1 += a * w;
    }
  }
  const auto p = exact_enumerate(pair);
  CHECK(*p.pressure == doctest::Approx(0.5 * std::log(z)).epsilon(1e-14));
  CHECK(p.m[0] == doctest::Approx(s1 / z).epsilon(1e-14));
  CHECK(p.q[0] == doctest::Approx((s1 / z) * (s1 / z)).epsilon(1e-14));
}

TEST_CASE("enumeration matches the brute-force reference") {
  std::mt19937_64 rng(2);
  const std::vector<ModelSpec> specs = {
      make_spec({0.5, 0.5}, {4.0}, {0.1, 0.1}),
      make_spec({0.3, 0.7}, {3.0}, {0.5, 0.0}),
      make_spec({0.2, 0.3, 0.5}, {4.0, 2.0}, {0.2, 0.1, 0.3}),
      make_spec({0.25, 0.25, 0.25, 0.25}, {5.0, 1.0, 3.0}, {0.0, 0.0, 0.0, 0.0}),
  };
  for (const auto& spec : specs) {
    for (int n : {8, 13, 16}) {
      const auto d = sample_disorder(spec, SystemSize::from_alpha(spec.alpha, n), rng());
      const auto fast = exact_enumerate(d);
      const auto ref = exact_enumerate_reference(d);
      CHECK(std::abs(*fast.pressure - *ref.pressure) < 1e-12);
      CHECK((fast.site_mean - ref.site_mean).cwiseAbs().maxCoeff() < 1e-12);
      CHECK((fast.q - ref.q).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
  CHECK_THROWS_AS(exact_enumerate(sample_disorder(kBalanced, SystemSize::from_alpha(kBalanced.alpha, 25), 1)),
                  std::invalid_argument);
}

TEST_CASE("enumeration overlap equals the two-replica double sum") {
  const auto d = sample_disorder(kBalanced, SystemSize::from_alpha(kBalanced.alpha, 8), 17);
  const int n = 8, states = 1 << n;
  std::vector<double> w(states);
  std::vector<int> s(n);
  double z = 0.0;
  for (int a = 0; a < states; ++a) {
    for (int i = 0; i < n; ++i) s[i] = ((a >> i) & 1) ? 1 : -1;
    z += w[a] = std::exp(-energy(s, d));
  }
  Vector q = Vector::Zero(2);
  for (int a = 0; a < states; ++a) {
    for (int b = 0; b < states; ++b) {
      const double ww = w[a] * w[b] / (z * z);
      for (int i = 0; i < n; ++i) {
        const int layer = i < 4 ? 0 : 1;
        q[layer] += ww * (((a >> i) & 1) ? 1 : -1) * (((b >> i) & 1) ? 1 : -1) / 4.0;
      }
    }
  }
  const auto est = exact_enumerate(d);
  CHECK((est.q - q).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("enumeration does not depend on the thread count") {
  const auto d = sample_disorder(kBalanced, SystemSize::from_alpha(kBalanced.alpha, 20), 23);
  omp_set_num_threads(1);
  const auto one = exact_enumerate(d);
  omp_set_num_threads(4);
  const auto four = exact_enumerate(d);
  omp_set_num_threads(omp_get_num_procs());
  CHECK(*one.pressure == *four.pressure);
  CHECK(one.site_mean == four.site_mean);
}

TEST_CASE("heat-bath rule satisfies detailed balance") {
  for (double f : {-2.0, -0.3, 0.0, 0.5, 1.7}) {
    const double up = heat_bath_up(f);
    // Two-state toy with energy -f sigma: P(+)/P(-) = exp(2 f).
    CHECK(up / (1.0 - up) == doctest::Approx(std::exp(2.0 * f)).epsilon(1e-12));
  }
}

TEST_CASE("block Gibbs: independent spins") {
  const auto size = SystemSize::from_sizes({200, 200});
  std::mt19937_64 rng(4);
  std::normal_distribution<double> nd(0.3, 0.5);
  Vector field(400);
  for (auto& v : field) v = nd(rng);
  const auto d = make_disorder(size, {Matrix::Zero(200, 200)}, field);
  GibbsOptions o;
  o.sweeps = 2000;
  o.burn_in = 100;
  o.seed = 9;
  const auto est = run_block_gibbs(d, o);
  for (int r = 0; r < 2; ++r) {
    const double exact = field.segment(200 * r, 200).array().tanh().mean();
    const double exact_q = field.segment(200 * r, 200).array().tanh().square().mean();
    CHECK(std::abs(est.m[r] - exact) < 4 * est.stderr_m[r]);
    CHECK(std::abs(est.q[r] - exact_q) < 4 * est.stderr_q[r]);
  }
  const double site_err = std::sqrt(1.0 / (2 * (o.sweeps - o.burn_in)));
  for (int i = 0; i < 400; i += 37) CHECK(std::abs(est.site_mean[i] - std::tanh(field[i])) < 5 * site_err);
}

TEST_CASE("block Gibbs against enumeration at N = 16") {
  const auto spec = make_spec({0.5, 0.5}, {4.0}, {0.3, 0.3});
  const auto d = sample_disorder(spec, SystemSize::from_alpha(spec.alpha, 16), 31);
  const auto exact = exact_enumerate(d);
  GibbsOptions o;
  o.sweeps = 40000;
  o.burn_in = 1000;
  o.seed = 5;
  const auto est = run_block_gibbs(d, o);
  for (int r = 0; r < 2; ++r) {
    CHECK(std::abs(est.m[r] - exact.m[r]) < 4 * est.stderr_m[r]);
    CHECK(std::abs(est.q[r] - exact.q[r]) < 4 * est.stderr_q[r]);
  }
  CHECK(est.autocorrelation > 0.0);
}

TEST_CASE("block Gibbs kernels agree and ignore the thread count") {
  const auto spec = make_spec({0.3, 0.4, 0.3}, {4.0, 3.0}, {0.1, 0.2, 0.3});
  const auto d = sample_disorder(spec, SystemSize::from_alpha(spec.alpha, 60), 8);
  GibbsOptions o;
  o.sweeps = 300;
  o.burn_in = 50;
  o.seed = 12;
  const auto ref = run_block_gibbs_reference(d, o);
  omp_set_num_threads(1);
  const auto one = run_block_gibbs(d, o);
  omp_set_num_threads(3);
  const auto three = run_block_gibbs(d, o);
  omp_set_num_threads(omp_get_num_procs());
  CHECK(one.m == three.m);
  CHECK(one.q == three.q);
  CHECK((one.m - ref.m).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((one.q - ref.q).cwiseAbs().maxCoeff() < 1e-12);

  GibbsOptions bad = o;
  bad.burn_in = bad.sweeps;
  CHECK_THROWS_AS(run_block_gibbs(d, bad), std::invalid_argument);
}

TEST_CASE("quenched enumeration: Nishimori identities and determinism") {
  QuenchedOptions o;
  o.n_disorder = 60;
  o.base_seed = 2024;
  const auto size = SystemSize::from_alpha(kBalanced.alpha, 10);
  const auto rep = quenched_run(kBalanced, size, o);
  for (int r = 0; r < 2; ++r) {
    const double combined = std::hypot(rep.stderr_m[r], rep.stderr_q[r]);
    CHECK(std::abs(rep.mean_m[r] - rep.mean_q[r]) < 4 * combined);
  }
  CHECK(std::abs(rep.site_identity_mean) < 4 * rep.site_identity_stderr);
  REQUIRE(rep.mean_pressure);
  CHECK(rep.pressures.size() == 60);

  omp_set_num_threads(1);
  const auto again = quenched_run(kBalanced, size, o);
  omp_set_num_threads(omp_get_num_procs());
  CHECK(again.pressures == rep.pressures);
  CHECK(again.mean_m == rep.mean_m);
}

TEST_CASE("quenched enumeration: global flip symmetry at zero field") {
  QuenchedOptions o;
  o.n_disorder = 10;
  o.base_seed = 1;
  const auto spec = make_spec({0.5, 0.5}, {4.0});
  const auto rep = quenched_run(spec, SystemSize::from_alpha(spec.alpha, 12), o);
  CHECK(rep.mean_m.cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("quenched magnetisation grows with the field") {
  QuenchedOptions o;
  o.n_disorder = 80;
  o.base_seed = 77;
  const auto size = SystemSize::from_sizes({6, 6});
  const auto low = quenched_run(make_spec({0.5, 0.5}, {2.0}, {0.1, 0.1}), size, o);
  const auto high = quenched_run(make_spec({0.5, 0.5}, {2.0}, {0.8, 0.1}), size, o);
  const double se = std::hypot(low.stderr_m[0], high.stderr_m[0]);
  CHECK(high.mean_m[0] - low.mean_m[0] > -4 * se);
  CHECK(high.mean_m[0] > low.mean_m[0]);
}
