#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace srgbm::rng {

// Reproducibility contract: every trajectory/worker i draws from a stream
// derived deterministically from (seed, purpose, i), so Monte Carlo results
// do not depend on scheduling or the number of threads.

inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// xoshiro256** (Blackman/Vigna). Small state so a million concurrent worker
// streams stay cheap; satisfies UniformRandomBitGenerator.
class Xoshiro256ss {
 public:
  using result_type = std::uint64_t;

  Xoshiro256ss() : Xoshiro256ss(0) {}
  explicit Xoshiro256ss(std::uint64_t seed) {
    std::uint64_t sm = seed;
    for (auto& w : s_) w = splitmix64(sm);
  }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type(0); }

  result_type operator()() {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }
  std::uint64_t s_[4];
};

enum class Stream : std::uint64_t {
  fpt_trajectory = 1,
  panel_worker = 2,
  histogram_worker = 3,
  matrix_fit = 4,
  fit_rep = 5,
  fit_year = 6,
  ci_draw = 7,
  fraction_worker = 8,
  synthetic_series = 9,
};

inline std::uint64_t stream_id(Stream purpose, std::uint64_t index) {
  return (static_cast<std::uint64_t>(purpose) << 48) | index;
}

inline Xoshiro256ss make_stream(std::uint64_t seed, Stream purpose,
                                std::uint64_t index) {
  // Distinct (seed, purpose, index) triples map to distinct splitmix chains.
  std::uint64_t sm = seed;
  std::uint64_t h = splitmix64(sm) ^ (0x9E3779B97F4A7C15ULL *
                                      (stream_id(purpose, index) + 1));
  return Xoshiro256ss(h);
}

// Per-worker generator plus its Gaussian sampler. The normal_distribution
// keeps its cached spare with the stream so draws stay a pure function of
// the stream, independent of what other workers do.
struct WorkerRng {
  Xoshiro256ss engine;
  std::normal_distribution<double> normal{};

  WorkerRng() = default;
  WorkerRng(std::uint64_t seed, Stream purpose, std::uint64_t index)
      : engine(make_stream(seed, purpose, index)) {}

  // Uniform on [0, 1) with 53-bit resolution.
  double uniform() { return static_cast<double>(engine() >> 11) * 0x1.0p-53; }
  double gauss() { return normal(engine); }
};

// A family of persistent per-worker streams for ensemble stepping.
class EnsembleRng {
 public:
  EnsembleRng(std::uint64_t seed, Stream purpose, std::uint64_t base,
              std::size_t n) {
    workers_.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
      workers_.emplace_back(seed, purpose, base + i);
  }

  WorkerRng& worker(std::size_t i) { return workers_[i]; }
  std::size_t size() const { return workers_.size(); }

 private:
  std::vector<WorkerRng> workers_;
};

}  // namespace srgbm::rng
