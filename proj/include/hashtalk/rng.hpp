#pragma once

// Deterministic randomness helpers. Every stochastic routine in the library
// draws through these so that results are reproducible bit-for-bit across
// platforms and standard library versions. std::shuffle and the distribution
// classes are deliberately avoided: their outputs are implementation-defined.

#include <cstdint>
#include <random>
#include <vector>

#include "hashtalk/error.hpp"

namespace hashtalk::rng {

using Engine = std::mt19937_64;

// splitmix64 step, used to derive child seeds from a master seed.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Derives a child seed from (seed, a, b, c). Used to give each bit, step,
// tree, fold or restart its own stream so that evaluation order (or future
// parallelism) cannot perturb results.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a,
                                 std::uint64_t b = 0, std::uint64_t c = 0) {
    std::uint64_t s = seed;
    std::uint64_t out = splitmix64(s);
    s ^= a * 0x9e3779b97f4a7c15ULL;
    out ^= splitmix64(s);
    s ^= b * 0xc2b2ae3d27d4eb4fULL;
    out ^= splitmix64(s);
    s ^= c * 0x165667b19e3779f9ULL;
    out ^= splitmix64(s);
    return out;
}

inline Engine make_engine(std::uint64_t seed) { return Engine(seed); }

// Unbiased draw from [0, n) via rejection sampling.
inline std::size_t uniform_index(Engine& eng, std::size_t n) {
    if (n == 0) throw Error("uniform_index: empty range");
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
        x = eng();
    } while (x >= limit);
    return static_cast<std::size_t>(x % n);
}

// Uniform double in [0, 1) with 53 bits of precision.
inline double uniform_real(Engine& eng) {
    return static_cast<double>(eng() >> 11) * 0x1.0p-53;
}

template <typename T>
void shuffle(std::vector<T>& v, Engine& eng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        std::size_t j = uniform_index(eng, i);
        std::swap(v[i - 1], v[j]);
    }
}

inline std::vector<std::size_t> permutation(std::size_t n, Engine& eng) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    shuffle(idx, eng);
    return idx;
}

// k distinct indices from [0, n), in shuffled order.
inline std::vector<std::size_t> sample_without_replacement(std::size_t n,
                                                           std::size_t k,
                                                           Engine& eng) {
    if (k > n) throw Error("sample_without_replacement: k > n");
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    for (std::size_t i = 0; i < k; ++i) {
        std::size_t j = i + uniform_index(eng, n - i);
        std::swap(idx[i], idx[j]);
    }
    idx.resize(k);
    return idx;
}

}  // namespace hashtalk::rng
