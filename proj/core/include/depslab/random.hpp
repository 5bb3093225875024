// Counter-based seeding. Every random stream is identified by
// (master seed, iteration, purpose) and seeded through splitmix64, so any
// stream can be regenerated without replaying the ones before it.
#pragma once

#include <cstdint>
#include <optional>
#include <random>

namespace depslab {

using Rng = std::mt19937_64;

enum class Purpose : std::uint64_t {
  kInit = 1,
  kTrain = 2,
  kEval = 3,
  kDesign = 4,
  kAnneal = 5,
  kPrefit = 6,
  kTest = 7,
};

std::uint64_t splitmix64(std::uint64_t& state);
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t iteration, Purpose purpose);
Rng make_rng(std::uint64_t master, std::uint64_t iteration, Purpose purpose);

// Value of DEPSLAB_SEED if set and parseable.
std::optional<std::uint64_t> seed_from_environment();

inline double standard_normal(Rng& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  return dist(rng);
}

inline double uniform(Rng& rng, double lo, double hi) {
  std::uniform_real_distribution<double> dist(lo, hi);
  return dist(rng);
}

}  // namespace depslab
