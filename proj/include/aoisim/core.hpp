#ifndef AOISIM_CORE_HPP
#define AOISIM_CORE_HPP

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace aoisim {

/// Simulation time and durations are double milliseconds throughout.
using Millis = double;

using NodeId = std::string;

/// Counter-based 64-bit mixer (splitmix64). Used wherever a draw must be
/// reproducible from (seed, label, counters) alone, independent of call
/// order -- e.g. per-message channel noise shared by all policies.
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t fnv1a(std::uint64_t h, const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::uint64_t fnv1a_str(std::uint64_t h, const std::string& s) {
    return fnv1a(h, s.data(), s.size());
}

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;

/// Deterministic per-event random source. Draws are pure functions of the
/// construction inputs and the draw index, so two consumers that build the
/// same key observe the same stream regardless of interleaving.
class EventRng {
public:
    EventRng(std::uint64_t seed, const std::string& label,
             std::uint64_t a = 0, std::uint64_t b = 0) {
        std::uint64_t h = fnv1a_str(kFnvOffset ^ seed, label);
        h = fnv1a(h, &a, sizeof a);
        h = fnv1a(h, &b, sizeof b);
        state_ = h;
    }

    std::uint64_t next_u64() { return mix64(state_ += 0x9e3779b97f4a7c15ULL); }

    /// Uniform in [0, 1).
    double next_unit() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    /// Uniform in [lo, hi).
    double next_range(double lo, double hi) {
        return lo + (hi - lo) * next_unit();
    }

private:
    std::uint64_t state_;
};

struct SimError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace aoisim

#endif  // AOISIM_CORE_HPP
