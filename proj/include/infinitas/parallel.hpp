#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <initializer_list>
#include <random>
#include <thread>
#include <vector>

namespace infinitas {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Seed of an independent random substream identified by a tuple of keys
/// (base seed, node index, radius index, start index, ...).
inline std::uint64_t substream_seed(std::initializer_list<std::uint64_t> keys) {
    std::uint64_t h = 0x243F6A8885A308D3ULL;
    for (auto k : keys) h = splitmix64(h ^ splitmix64(k));
    return h;
}

using Rng = std::mt19937_64;

inline Rng make_rng(std::initializer_list<std::uint64_t> keys) { return Rng(substream_seed(keys)); }

/// Worker count: INFINITAS_THREADS if set to a positive integer, otherwise the
/// hardware concurrency.
inline unsigned thread_count() {
    if (const char* env = std::getenv("INFINITAS_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v > 0) return static_cast<unsigned>(v);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

namespace detail {
inline thread_local bool in_parallel_region = false;
}

/// Runs body(i) for i in [0, n). Results must be written by index so that the
/// outcome does not depend on scheduling. The exception of the smallest failing
/// index is rethrown after all workers finish. Nested calls run serially on the
/// calling worker.
template <typename Body>
void parallel_for(std::size_t n, Body&& body) {
    const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(thread_count(), n));
    if (workers <= 1 || detail::in_parallel_region) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::vector<std::exception_ptr> errors(n);
    std::atomic<std::size_t> next{0};
    auto run = [&] {
        const bool outer = detail::in_parallel_region;
        detail::in_parallel_region = true;
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                body(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
        detail::in_parallel_region = outer;
    };
    std::vector<std::thread> pool;
    pool.reserve(workers - 1);
    for (unsigned t = 1; t < workers; ++t) pool.emplace_back(run);
    run();
    for (auto& th : pool) th.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

}  // namespace infinitas
