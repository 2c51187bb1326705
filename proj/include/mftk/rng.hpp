#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

#include "mftk/errors.hpp"

namespace mftk {

/// Counter-style 64-bit generator: the SplitMix64 finalizer applied to an
/// affine counter. Every sample is addressable as (seed, stream, counter),
/// so substreams are reproducible no matter in which order they are drawn.
/// The generator is frozen for output reproducibility; do not change the
/// constants or the stream derivation.
class CounterRng {
public:
    explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0) noexcept
        : base_(mix(mix(seed + kGamma) ^ mix(stream * kStreamSalt + kGamma))) {}

    // Independent substream keyed on this stream plus `sub`.
    CounterRng derive(std::uint64_t sub) const noexcept {
        CounterRng r(*this);
        r.base_ = mix(base_ ^ mix(sub * kStreamSalt + kGamma));
        r.cursor_ = 0;
        return r;
    }

    std::uint64_t at(std::uint64_t counter) const noexcept {
        return mix(base_ + (counter + 1) * kGamma);
    }

    // Uniform on (0,1), open on both ends.
    double uniform_at(std::uint64_t counter) const noexcept {
        return (static_cast<double>(at(counter) >> 11) + 0.5) * 0x1.0p-53;
    }

    std::uint64_t next() noexcept { return at(cursor_++); }
    double uniform() noexcept { return uniform_at(cursor_++); }

    double exponential(double rate) noexcept {
        return -std::log(uniform()) / rate;
    }

    // Box-Muller; consumes two counters per value (the sine twin is dropped
    // so that draws stay position-addressable).
    double normal() noexcept {
        const double u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) *
               std::cos(2.0 * std::numbers::pi * u2);
    }

    std::uint64_t poisson(double lambda) {
        if (!(lambda >= 0.0) || !std::isfinite(lambda))
            throw Error("poisson: rate must be finite and nonnegative");
        if (lambda == 0.0) return 0;
        return lambda < 30.0 ? poisson_inversion(lambda) : poisson_ptrs(lambda);
    }

    std::uint64_t cursor() const noexcept { return cursor_; }

private:
    static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ull;
    static constexpr std::uint64_t kStreamSalt = 0xD2B74407B1CE6E93ull;

    static std::uint64_t mix(std::uint64_t x) noexcept {
        x ^= x >> 30;
        x *= 0xBF58476D1CE4E5B9ull;
        x ^= x >> 27;
        x *= 0x94D049BB133111EBull;
        x ^= x >> 31;
        return x;
    }

    // Sequential search on the cdf; one uniform per draw.
    std::uint64_t poisson_inversion(double lambda) noexcept {
        double p = std::exp(-lambda);
        double cdf = p;
        std::uint64_t k = 0;
        const double u = uniform();
        while (u > cdf && k < 2000) {
            ++k;
            p *= lambda / static_cast<double>(k);
            cdf += p;
        }
        return k;
    }

    // Hormann's transformed rejection with squeeze (PTRS), valid for
    // lambda >= 10; we switch at 30.
    std::uint64_t poisson_ptrs(double lambda) noexcept {
        const double slam = std::sqrt(lambda);
        const double loglam = std::log(lambda);
        const double b = 0.931 + 2.53 * slam;
        const double a = -0.059 + 0.02483 * b;
        const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
        const double v_r = 0.9277 - 3.6224 / (b - 2.0);
        for (;;) {
            const double u = uniform() - 0.5;
            const double v = uniform();
            const double us = 0.5 - std::fabs(u);
            const double kf = std::floor((2.0 * a / us + b) * u + lambda + 0.43);
            if (us >= 0.07 && v <= v_r) return static_cast<std::uint64_t>(kf);
            if (kf < 0.0 || (us < 0.013 && v > us)) continue;
            if (std::log(v * inv_alpha / (a / (us * us) + b)) <=
                kf * loglam - lambda - std::lgamma(kf + 1.0))
                return static_cast<std::uint64_t>(kf);
        }
    }

    std::uint64_t base_;
    std::uint64_t cursor_ = 0;
};

} // namespace mftk
