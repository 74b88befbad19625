#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace consol {

// All randomness in the library flows through this wrapper around
// std::mt19937_64. The distribution helpers are hand-rolled because the
// standard library's distributions are implementation-defined; with these a
// given seed produces the same stream on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  // Uniform double in [0, 1) built from the top 53 bits of one draw.
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Unbiased integer in [0, n) by rejection. n must be nonzero.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = (0 - n) % n;  // 2^64 mod n
    std::uint64_t x = gen_();
    while (x < limit) x = gen_();
    return x % n;
  }

  // Fisher-Yates permutation of {0, ..., n-1}.
  std::vector<std::size_t> permutation(std::size_t n);

  // Uniform sample of k distinct indices from {0, ..., n-1}, in sampled
  // order (partial Fisher-Yates from the front). k == n permutes everything.
  std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k);

 private:
  std::mt19937_64 gen_;
};

// Derives an independent stream seed from a master seed, a purpose salt and
// a counter, so that one config-level seed drives init/sampling/batching
// without the streams overlapping.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t salt,
                          std::uint64_t counter = 0);

// Purpose salts used by the trainer; fixed so runs are reproducible from the
// single config seed.
inline constexpr std::uint64_t kSeedSaltInit = 1;
inline constexpr std::uint64_t kSeedSaltCollocation = 2;
inline constexpr std::uint64_t kSeedSaltSample = 3;
inline constexpr std::uint64_t kSeedSaltBatch = 4;

}  // namespace consol
