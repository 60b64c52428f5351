// Seeding and parallel execution helpers shared by the Monte Carlo engines.
#ifndef JBASIM_PARALLEL_HPP
#define JBASIM_PARALLEL_HPP

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <mutex>
#include <random>
#include <thread>
#include <vector>

namespace jbasim {

using Rng = std::mt19937_64;

/// Independent random streams used inside one shot. Keeping them separate makes
/// the field noise of a shot identical whatever the qubit does.
enum class Stream : std::uint64_t {
  kPreparation = 1,
  kJumps = 2,
  kFieldNoise = 3,
  kAmplifierNoise = 4,
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Per-shot seed: master seed xor shot index, whitened.
inline std::uint64_t shot_seed(std::uint64_t master, std::uint64_t shot) {
  return splitmix64(master ^ shot);
}

inline Rng make_stream(std::uint64_t shot_seed_value, Stream stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(shot_seed_value),
                    static_cast<std::uint32_t>(shot_seed_value >> 32),
                    static_cast<std::uint32_t>(stream)};
  return Rng(seq);
}

/// Process-wide cap on worker threads (0 means hardware concurrency).
inline unsigned& thread_cap() {
  static unsigned cap = 0;
  return cap;
}

inline unsigned worker_count(std::size_t tasks) {
  unsigned hw = thread_cap() != 0 ? thread_cap() : std::max(1u, std::thread::hardware_concurrency());
  return static_cast<unsigned>(std::min<std::size_t>(hw, std::max<std::size_t>(tasks, 1)));
}

/// Runs body(i) for i in [0, n). Results must be written to per-index slots so the
/// outcome does not depend on scheduling. The first exception is rethrown.
template <typename Body>
void parallel_for(std::size_t n, Body&& body) {
  const unsigned workers = worker_count(n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < n; i += workers) body(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace jbasim

#endif  // JBASIM_PARALLEL_HPP
