#pragma once

#include "dbm/model.hpp"

#include <random>
#include <vector>

namespace test {

// Random simplex point with each component at least `floor` before renormalising.
inline std::vector<double> random_alpha(std::mt19937_64& rng, int k, double floor = 0.05) {
  std::uniform_real_distribution<double> u(floor, 1.0);
  std::vector<double> a(k);
  double s = 0.0;
  for (auto& v : a) s += (v = u(rng));
  for (auto& v : a) v /= s;
  return a;
}

inline dbm::ModelSpec random_spec(std::mt19937_64& rng, int k, double mu_lo, double mu_hi, double h_lo,
                                  double h_hi) {
  std::uniform_real_distribution<double> mu(mu_lo, mu_hi), h(h_lo, h_hi);
  dbm::ModelSpec spec;
  spec.alpha = random_alpha(rng, k);
  for (int r = 0; r + 1 < k; ++r) spec.mu.push_back(mu(rng));
  for (int r = 0; r < k; ++r) spec.h.push_back(h_hi > 0.0 ? h(rng) : 0.0);
  spec.validate();
  return spec;
}

// All points of the simplex with coordinates in multiples of 1/n.
inline std::vector<std::vector<double>> simplex_grid(int k, int n) {
  std::vector<std::vector<double>> out;
  std::vector<int> c(k, 0);
  auto rec = [&](auto&& self, int i, int left) -> void {
    if (i == k - 1) {
      c[i] = left;
      std::vector<double> a(k);
      for (int j = 0; j < k; ++j) a[j] = static_cast<double>(c[j]) / n;
      out.push_back(a);
      return;
    }
    for (int v = 0; v <= left; ++v) {
      c[i] = v;
      self(self, i + 1, left - v);
    }
  };
  rec(rec, 0, n);
  return out;
}

}  // namespace test
