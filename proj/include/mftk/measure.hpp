#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mftk/errors.hpp"
#include "mftk/trace.hpp"

namespace mftk {

/// Normalized mass over a dyadic partition of [0,1].
struct Measure {
    std::vector<double> masses; // 2^depth cells, sums to 1
    int depth = 0;
};

// Non-power-of-two inputs: truncating to the largest dyadic prefix is the
// default (padding would fabricate mass); zero_pad and strict are opt-in.
enum class PadPolicy { truncate, zero_pad, strict };

inline bool is_power_of_two(std::uint64_t n) {
    return n != 0 && (n & (n - 1)) == 0;
}

inline int log2_exact(std::uint64_t n) {
    int d = 0;
    while ((1ull << d) < n) ++d;
    return d;
}

inline Measure to_measure(const Trace& trace,
                          PadPolicy pad = PadPolicy::truncate) {
    std::size_t n = trace.size();
    if (n == 0) throw ParseError("empty trace");
    std::vector<double> v;
    if (is_power_of_two(n)) {
        v = trace.values;
    } else {
        switch (pad) {
        case PadPolicy::strict:
            throw NonDyadicLength("trace length " + std::to_string(n) +
                                  " is not a power of two");
        case PadPolicy::truncate: {
            std::size_t m = 1;
            while (m * 2 <= n) m *= 2;
            v.assign(trace.values.begin(), trace.values.begin() + m);
            break;
        }
        case PadPolicy::zero_pad: {
            std::size_t m = 1;
            while (m < n) m *= 2;
            v = trace.values;
            v.resize(m, 0.0);
            break;
        }
        }
    }
    double total = 0.0;
    for (double x : v) total += x;
    if (!(total > 0.0)) throw ZeroMass("trace has zero total mass");
    Measure mu;
    mu.depth = log2_exact(v.size());
    mu.masses.reserve(v.size());
    for (double x : v) mu.masses.push_back(x / total);
    return mu;
}

} // namespace mftk
