#include "depslab/random.hpp"

#include <cstdlib>
#include <string>

namespace depslab {

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t iteration, Purpose purpose) {
  std::uint64_t state = master;
  std::uint64_t h = splitmix64(state);
  state = h ^ iteration;
  h = splitmix64(state);
  state = h ^ static_cast<std::uint64_t>(purpose);
  return splitmix64(state);
}

Rng make_rng(std::uint64_t master, std::uint64_t iteration, Purpose purpose) {
  return Rng(derive_seed(master, iteration, purpose));
}

std::optional<std::uint64_t> seed_from_environment() {
  const char* raw = std::getenv("DEPSLAB_SEED");
  if (raw == nullptr || *raw == '\0') return std::nullopt;
  try {
    std::size_t used = 0;
    const unsigned long long v = std::stoull(raw, &used, 10);
    if (used != std::string(raw).size()) return std::nullopt;
    return static_cast<std::uint64_t>(v);
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

}  // namespace depslab
