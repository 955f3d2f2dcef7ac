#pragma once

#include <cstdint>
#include <string_view>

namespace profgp {

/// SplitMix64 (Steele, Lea & Flood 2014). Used to expand a single 64-bit seed
/// into generator state and as a bit mixer for derived seeds.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next();

private:
    std::uint64_t state_;
};

std::uint64_t mix64(std::uint64_t x);

/// Stable 64-bit hash of a byte string (FNV-1a followed by a SplitMix64
/// finalizer). Identical on every platform.
std::uint64_t stable_hash(std::string_view bytes);

/// Derive an independent stream seed from a parent seed and a stream index.
std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t stream);

/// xoshiro256** 1.0 (Blackman & Vigna) seeded through SplitMix64.
///
/// The variate transforms below are implemented here rather than taken from
/// <random> because the standard distributions are implementation-defined;
/// datasets and chains must be bit-reproducible across standard libraries.
class Rng {
public:
    using result_type = std::uint64_t;

    explicit Rng(std::uint64_t seed);

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return ~result_type{0}; }
    result_type operator()() { return next(); }

    std::uint64_t next();

    /// Uniform on [0, 1) with 53 random bits.
    double uniform();

    /// Uniform integer on [0, n), unbiased (rejection). n must be > 0.
    std::uint64_t below(std::uint64_t n);

    /// Standard normal via Box-Muller; the second variate of each pair is cached.
    double normal();

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    /// Gamma(shape, rate) via Marsaglia-Tsang; shape < 1 uses the
    /// U^(1/shape) boost.
    double gamma(double shape, double rate);

private:
    std::uint64_t s_[4];
    double cached_normal_ = 0.0;
    bool has_cached_ = false;
};

}  // namespace profgp
