#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>

#include "tiltshield/errors.hpp"

namespace tiltshield {

// splitmix64, used both to whiten seeds and to derive independent
// substreams from (seed, tag...) tuples.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

// Deterministic random source. All sampling helpers are hand-rolled on top
// of std::mt19937_64 so that draws are identical across platforms and
// standard libraries (std::uniform_int_distribution et al. are not
// portable). That keeps experiment output byte-reproducible.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

    // Independent substream for a (base, parts...) tuple. Draw order in one
    // substream never affects another, which is what lets shield decisions
    // be sequenced per (seed, episode, step, cell).
    static Rng derive(std::uint64_t base, std::initializer_list<std::uint64_t> parts) {
        std::uint64_t h = splitmix64(base);
        for (std::uint64_t p : parts) {
            h = splitmix64(h ^ (p + 0x9e3779b97f4a7c15ull));
        }
        return Rng(h);
    }

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1), 53-bit resolution.
    double uniform01() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform_real(double lo, double hi) {
        return lo + (hi - lo) * uniform01();
    }

    // Inclusive bounds. Modulo bias is below 2^-50 for the spans used here.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        if (lo > hi) throw ContractError("uniform_int: lo > hi");
        const auto span = static_cast<std::uint64_t>(hi - lo) + 1u;
        return lo + static_cast<std::int64_t>(next_u64() % span);
    }

    bool bernoulli(double p) {
        if (p <= 0.0) return false;
        if (p >= 1.0) return true;
        return uniform01() < p;
    }

    // Index sampled proportionally to the (non-negative) weights.
    std::size_t categorical(std::span<const double> weights) {
        if (weights.empty()) throw ContractError("categorical: empty weight vector");
        double total = 0.0;
        for (double w : weights) {
            if (w < 0.0) throw ContractError("categorical: negative weight");
            total += w;
        }
        if (total <= 0.0) throw ContractError("categorical: weights sum to zero");
        const double u = uniform01() * total;
        double acc = 0.0;
        for (std::size_t i = 0; i + 1 < weights.size(); ++i) {
            acc += weights[i];
            if (u < acc) return i;
        }
        return weights.size() - 1;
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace tiltshield
