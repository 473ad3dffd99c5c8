#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace crowdbp {

using Seed = std::uint64_t;

/// SplitMix64 finalizer. Used to derive independent child seeds.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Derives a child seed from a parent and a path of indices, e.g.
/// derive_seed(master, {sweep_point, trial, stage}). The result depends only on
/// the arguments, so trials can run in any order or thread.
constexpr Seed derive_seed(Seed parent, std::initializer_list<std::uint64_t> path) noexcept {
  std::uint64_t state = mix64(parent);
  for (std::uint64_t step : path) state = mix64(state ^ mix64(step + 0x632be59bd9b4e019ULL));
  return state;
}

/// Pipeline stages that consume randomness. Each gets its own child stream.
enum class Stage : std::uint64_t {
  graph = 1,
  truth = 2,
  answers = 3,
  estimator = 4,
  subsample = 5,
};

constexpr Seed derive_seed(Seed parent, Stage stage) noexcept {
  return derive_seed(parent, {static_cast<std::uint64_t>(stage)});
}

using Rng = std::mt19937_64;

inline Rng make_rng(Seed seed) { return Rng(seed); }

/// Uniform draw in [0, 1).
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace crowdbp
