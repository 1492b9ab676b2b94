#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <mutex>
#include <random>
#include <thread>
#include <vector>

namespace bsdelab {

// ---------------------------------------------------------------------------
// Worker count. Every parallel loop writes results by index, so output never
// depends on this value.
// ---------------------------------------------------------------------------

namespace detail {
inline std::atomic<int>& worker_slot() {
    static std::atomic<int> w{1};
    return w;
}
}  // namespace detail

inline int worker_count() { return detail::worker_slot().load(); }
inline void set_worker_count(int w) { detail::worker_slot().store(std::max(1, w)); }

/// Calls body(begin, end) on contiguous chunks of [0, n).
template <class Body>
void parallel_for(std::size_t n, Body&& body, int workers = worker_count()) {
    if (n == 0) return;
    const auto w = static_cast<std::size_t>(std::clamp<int>(workers, 1, 256));
    if (w == 1 || n < 2 * w) {
        body(std::size_t{0}, n);
        return;
    }
    const std::size_t chunk = (n + w - 1) / w;
    std::vector<std::thread> pool;
    std::exception_ptr err;
    std::mutex mu;
    for (std::size_t c = 0; c < w; ++c) {
        const std::size_t lo = c * chunk, hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([&, lo, hi] {
            try {
                body(lo, hi);
            } catch (...) {
                std::lock_guard lk(mu);
                if (!err) err = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    if (err) std::rethrow_exception(err);
}

// ---------------------------------------------------------------------------
// Keyed random substreams
// ---------------------------------------------------------------------------

enum class StreamTag : std::uint32_t { Diffusion = 1, Jumps = 2, Exit = 3 };

inline std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Generator for (seed, path, tag). Streams are keyed, not sequential.
/// The key is hashed once; seed_seq over 624 words cost more than the path itself.
inline std::mt19937_64 substream(std::uint64_t seed, std::uint64_t path, StreamTag tag) {
    std::uint64_t h = splitmix64(seed);
    h = splitmix64(h ^ path);
    h = splitmix64(h ^ static_cast<std::uint64_t>(tag));
    return std::mt19937_64(h);
}

/// Uniform on the open interval (0, 1).
inline double open_uniform(std::mt19937_64& g) {
    for (;;) {
        const double u = std::generate_canonical<double, 53>(g);
        if (u > 0.0 && u < 1.0) return u;
    }
}

}  // namespace bsdelab
