#pragma once

#include <cstdint>
#include <string_view>

// Seed derivation and counter-based uniforms.
//
// Every random stream is keyed by derive_key(base_seed, label, index) with a
// fixed label ("disorder", "spins", "replica", ...). Gibbs updates draw their
// uniforms from uniform(key, counter), a pure function of the key and a
// counter built from (sweep, site, replica), so results do not depend on the
// thread schedule.
namespace dbm::rng {

// splitmix64 finaliser.
constexpr std::uint64_t mix(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// 64-bit FNV-1a of a label.
constexpr std::uint64_t hash_label(std::string_view label) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : label) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

constexpr std::uint64_t derive_key(std::uint64_t base_seed, std::string_view label, std::uint64_t index = 0) {
  return mix(mix(base_seed ^ hash_label(label)) + index);
}

// Uniform double in [0, 1) with 53 random bits.
constexpr double uniform(std::uint64_t key, std::uint64_t counter) {
  return static_cast<double>(mix(key ^ mix(counter)) >> 11) * 0x1.0p-53;
}

}  // namespace dbm::rng
