#pragma once

// Counter-based random streams. A stream is a (key, counter) pair; draw i of
// stream k is mix(k, i), so replicates can be generated in any order or in
// parallel and still reproduce bit for bit.

#include "cmest/core.hpp"

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <numbers>
#include <unordered_set>
#include <vector>

namespace cmest {

inline constexpr std::uint64_t splitmix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Derives a child key from a parent key and a list of indices. The scheme is
/// key_{j+1} = splitmix64(key_j ^ splitmix64(index_j + j)).
inline std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> path) noexcept {
    std::uint64_t key = splitmix64(master);
    std::uint64_t j = 0;
    for (auto idx : path) key = splitmix64(key ^ splitmix64(idx + 0x632be59bd9b4e019ULL * ++j));
    return key;
}

/// UniformRandomBitGenerator over a counter-based stream.
class CounterRng {
public:
    using result_type = std::uint64_t;

    explicit CounterRng(std::uint64_t key) noexcept : key_(splitmix64(key)) {}

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept { return splitmix64(key_ ^ splitmix64(counter_++)); }

    /// Independent child stream; does not advance this one.
    CounterRng split(std::uint64_t index) const noexcept { return CounterRng(derive_seed(key_, {index})); }

    std::uint64_t counter() const noexcept { return counter_; }

    /// Uniform on [0, 1).
    double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

    /// Uniform integer on [0, bound).
    std::uint64_t below(std::uint64_t bound) noexcept {
        // Lemire's multiply-shift with rejection.
        unsigned __int128 m = static_cast<unsigned __int128>((*this)()) * bound;
        auto low = static_cast<std::uint64_t>(m);
        if (low < bound) {
            const std::uint64_t threshold = (0 - bound) % bound;
            while (low < threshold) {
                m = static_cast<unsigned __int128>((*this)()) * bound;
                low = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

    /// Standard normal via Box-Muller (both halves are used).
    double normal() noexcept {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    Vector normal_vector(Eigen::Index dim) {
        Vector v(dim);
        for (Eigen::Index i = 0; i < dim; ++i) v[i] = normal();
        return v;
    }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// Floyd's algorithm: `count` distinct integers from [0, population), in
/// draw order.
inline std::vector<std::uint64_t> sample_without_replacement(std::uint64_t population, std::uint64_t count,
                                                             CounterRng& rng) {
    detail::require(count <= population, "sample_without_replacement: count exceeds population");
    std::vector<std::uint64_t> out;
    out.reserve(count);
    std::unordered_set<std::uint64_t> seen;
    seen.reserve(count * 2);
    for (std::uint64_t j = population - count; j < population; ++j) {
        const std::uint64_t t = rng.below(j + 1);
        if (seen.insert(t).second) {
            out.push_back(t);
        } else {
            seen.insert(j);
            out.push_back(j);
        }
    }
    return out;
}

}  // namespace cmest
