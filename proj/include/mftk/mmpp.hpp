#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "mftk/errors.hpp"
#include "mftk/rng.hpp"
#include "mftk/trace.hpp"

namespace mftk {

/// Discrete-time MMPP: per slot the hidden chain takes one transition
/// step, then a Poisson(rate[state]) count is emitted.
struct MmppModel {
    int n_states = 1;
    std::vector<double> rates;                    // events per slot
    std::vector<std::vector<double>> transitions; // row-stochastic
    std::vector<double> initial;

    struct Meta {
        std::string method; // "histogram" or "scene"
        int requested_states = 0;
        std::vector<std::uint64_t> change_points; // scene method only
        int scene_classes = 0;
        std::vector<std::string> warnings;
    } meta;

    void validate() const {
        if (n_states < 1) throw Error("mmpp: n_states must be >= 1");
        const auto un = static_cast<std::size_t>(n_states);
        if (rates.size() != un || transitions.size() != un ||
            initial.size() != un)
            throw Error("mmpp: field sizes do not match n_states");
        for (double r : rates)
            if (!(r >= 0.0) || !std::isfinite(r))
                throw Error("mmpp: rates must be finite and >= 0");
        for (const auto& row : transitions) {
            if (row.size() != un) throw Error("mmpp: ragged transition row");
            double s = 0.0;
            for (double p : row) {
                if (!(p >= 0.0)) throw Error("mmpp: negative transition");
                s += p;
            }
            if (std::fabs(s - 1.0) > 1e-12)
                throw Error("mmpp: transition row does not sum to 1");
        }
        double s = 0.0;
        for (double p : initial) {
            if (!(p >= 0.0)) throw Error("mmpp: negative initial entry");
            s += p;
        }
        if (std::fabs(s - 1.0) > 1e-12)
            throw Error("mmpp: initial vector does not sum to 1");
    }
};

struct StationaryDistribution {
    std::vector<double> pi;
};

namespace detail {

// Upper quantile edges over sorted values, deduplicated. Edge b is the
// last value of the b-th equal-count chunk; bin b covers
// (edge[b-1], edge[b]] and values above the last edge land in the top bin.
inline std::vector<double> quantile_edges(std::vector<double> sorted,
                                          int bins) {
    std::vector<double> edges;
    const std::size_t n = sorted.size();
    for (int b = 1; b < bins; ++b) {
        const std::size_t idx = n * static_cast<std::size_t>(b) /
                                    static_cast<std::size_t>(bins) -
                                1;
        edges.push_back(sorted[idx]);
    }
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    // an edge equal to the maximum would leave an empty top bin
    while (!edges.empty() && edges.back() >= sorted.back()) edges.pop_back();
    return edges;
}

// bin b covers (edge[b-1], edge[b]]: the first edge not below v names it
inline int bin_of(const std::vector<double>& edges, double v) {
    return static_cast<int>(
        std::lower_bound(edges.begin(), edges.end(), v) - edges.begin());
}

// Rates, Laplace-smoothed transition rows and empirical occupancy from a
// state sequence.
inline MmppModel chain_from_states(const std::vector<int>& states,
                                   const std::vector<double>& values,
                                   int n_states) {
    const auto un = static_cast<std::size_t>(n_states);
    MmppModel m;
    m.n_states = n_states;
    m.rates.assign(un, 0.0);
    m.initial.assign(un, 0.0);
    std::vector<std::uint64_t> occupancy(un, 0);
    std::vector<std::vector<std::uint64_t>> counts(
        un, std::vector<std::uint64_t>(un, 0));
    for (std::size_t t = 0; t < states.size(); ++t) {
        const auto s = static_cast<std::size_t>(states[t]);
        m.rates[s] += values[t];
        ++occupancy[s];
        if (t + 1 < states.size())
            ++counts[s][static_cast<std::size_t>(states[t + 1])];
    }
    for (std::size_t s = 0; s < un; ++s) {
        m.rates[s] = occupancy[s] ? m.rates[s] / static_cast<double>(occupancy[s])
                                  : 0.0;
        m.initial[s] = static_cast<double>(occupancy[s]) /
                       static_cast<double>(states.size());
    }
    m.transitions.assign(un, std::vector<double>(un, 0.0));
    for (std::size_t s = 0; s < un; ++s) {
        double row_total = 0.0;
        for (std::size_t d = 0; d < un; ++d)
            row_total += static_cast<double>(counts[s][d]) + 1.0;
        for (std::size_t d = 0; d < un; ++d)
            m.transitions[s][d] =
                (static_cast<double>(counts[s][d]) + 1.0) / row_total;
    }
    return m;
}

} // namespace detail

/// Histogram fit: equal-probability value bins become states; the rate of
/// a state is the mean trace value inside its bin, transitions are add-one
/// smoothed bin-to-bin frequencies. Ties can collapse bins; the model then
/// carries the actual state count and a warning.
inline MmppModel fit_mmpp_histogram(const Trace& trace, int n_states = 30) {
    trace.validate();
    if (n_states < 1) throw Error("fit_mmpp_histogram: n_states must be >= 1");
    if (trace.size() < 10 * static_cast<std::size_t>(n_states))
        throw TooFewSamples("need at least " + std::to_string(10 * n_states) +
                            " slots for " + std::to_string(n_states) +
                            " states, got " + std::to_string(trace.size()));

    std::vector<double> sorted = trace.values;
    std::sort(sorted.begin(), sorted.end());
    const auto edges = detail::quantile_edges(std::move(sorted), n_states);
    const int actual = static_cast<int>(edges.size()) + 1;

    std::vector<int> states(trace.size());
    for (std::size_t t = 0; t < trace.size(); ++t)
        states[t] = detail::bin_of(edges, trace.values[t]);

    MmppModel m = detail::chain_from_states(states, trace.values, actual);
    m.meta.method = "histogram";
    m.meta.requested_states = n_states;
    if (actual < n_states)
        m.meta.warnings.push_back(
            "states collapsed from " + std::to_string(n_states) + " to " +
            std::to_string(actual) + " (ties in the value distribution)");
    m.validate();
    return m;
}

/// Scene-oriented fit: change points of the windowed mean split the trace
/// into scenes, scenes cluster by mean level, and each class is subdivided
/// by within-class value quantiles. The construction is a parameterized
/// heuristic; with no detected change point it falls back to the histogram
/// fit and says so.
inline MmppModel fit_mmpp_scene(const Trace& trace, int n_states = 300,
                                std::uint64_t scene_window = 64,
                                double scene_threshold = 0.3) {
    trace.validate();
    if (n_states < 1) throw Error("fit_mmpp_scene: n_states must be >= 1");
    if (trace.size() < 10 * static_cast<std::size_t>(n_states))
        throw TooFewSamples("need at least " + std::to_string(10 * n_states) +
                            " slots for " + std::to_string(n_states) +
                            " states, got " + std::to_string(trace.size()));
    if (scene_window < 1) throw Error("fit_mmpp_scene: window must be >= 1");

    const std::size_t n = trace.size();
    const std::size_t w = static_cast<std::size_t>(
        std::min<std::uint64_t>(scene_window, n / 2));

    // change points: adjacent disjoint windows whose means jump by more
    // than the relative threshold
    std::vector<std::uint64_t> cuts;
    if (w >= 1 && std::isfinite(scene_threshold)) {
        std::size_t t = w;
        while (t + w <= n) {
            double before = 0.0, after = 0.0;
            for (std::size_t j = t - w; j < t; ++j) before += trace.values[j];
            for (std::size_t j = t; j < t + w; ++j) after += trace.values[j];
            before /= static_cast<double>(w);
            after /= static_cast<double>(w);
            const double base = std::max(before, 1e-300);
            if (std::fabs(after - before) / base > scene_threshold) {
                cuts.push_back(t);
                t += 2 * w; // clear the straddling window before re-arming
            } else {
                ++t;
            }
        }
    }

    if (cuts.empty()) {
        MmppModel m = fit_mmpp_histogram(trace, n_states);
        m.meta.method = "scene";
        m.meta.warnings.push_back(
            "no scene change detected; fell back to the histogram fit");
        return m;
    }

    // scenes and their mean levels
    std::vector<std::pair<std::size_t, std::size_t>> scenes;
    std::size_t start = 0;
    for (std::uint64_t cut : cuts) {
        scenes.emplace_back(start, static_cast<std::size_t>(cut));
        start = static_cast<std::size_t>(cut);
    }
    scenes.emplace_back(start, n);
    std::vector<double> scene_mean(scenes.size(), 0.0);
    for (std::size_t s = 0; s < scenes.size(); ++s) {
        double sum = 0.0;
        for (std::size_t j = scenes[s].first; j < scenes[s].second; ++j)
            sum += trace.values[j];
        scene_mean[s] =
            sum / static_cast<double>(scenes[s].second - scenes[s].first);
    }

    // cluster scenes by mean level
    const int k_max = std::max(
        1, static_cast<int>(std::floor(std::sqrt(double(n_states)))));
    const int k_classes =
        std::min<int>(static_cast<int>(scenes.size()), k_max);
    std::vector<double> sorted_means = scene_mean;
    std::sort(sorted_means.begin(), sorted_means.end());
    const auto class_edges =
        detail::quantile_edges(std::move(sorted_means), k_classes);
    const int actual_classes = static_cast<int>(class_edges.size()) + 1;

    std::vector<int> slot_class(n, 0);
    for (std::size_t s = 0; s < scenes.size(); ++s) {
        const int cls = detail::bin_of(class_edges, scene_mean[s]);
        for (std::size_t j = scenes[s].first; j < scenes[s].second; ++j)
            slot_class[j] = cls;
    }

    // subdivide each class by its own value quantiles
    const int sub = std::max(1, n_states / actual_classes);
    std::vector<std::vector<double>> class_edges_by_value(
        static_cast<std::size_t>(actual_classes));
    for (int cls = 0; cls < actual_classes; ++cls) {
        std::vector<double> vals;
        for (std::size_t j = 0; j < n; ++j)
            if (slot_class[j] == cls) vals.push_back(trace.values[j]);
        std::sort(vals.begin(), vals.end());
        if (!vals.empty())
            class_edges_by_value[static_cast<std::size_t>(cls)] =
                detail::quantile_edges(std::move(vals), sub);
    }
    std::vector<int> offsets(static_cast<std::size_t>(actual_classes) + 1, 0);
    for (int cls = 0; cls < actual_classes; ++cls)
        offsets[static_cast<std::size_t>(cls) + 1] =
            offsets[static_cast<std::size_t>(cls)] +
            static_cast<int>(
                class_edges_by_value[static_cast<std::size_t>(cls)].size()) +
            1;
    const int total_states = offsets.back();

    std::vector<int> states(n);
    for (std::size_t j = 0; j < n; ++j) {
        const int cls = slot_class[j];
        states[j] =
            offsets[static_cast<std::size_t>(cls)] +
            detail::bin_of(class_edges_by_value[static_cast<std::size_t>(cls)],
                           trace.values[j]);
    }

    MmppModel m = detail::chain_from_states(states, trace.values, total_states);
    m.meta.method = "scene";
    m.meta.requested_states = n_states;
    m.meta.change_points = cuts;
    m.meta.scene_classes = actual_classes;
    if (total_states < n_states)
        m.meta.warnings.push_back("states collapsed to " +
                                  std::to_string(total_states));
    m.validate();
    return m;
}

/// One trace slot per chain step: evolve the state, then emit a Poisson
/// count at that state's rate. Deterministic given the seed.
inline Trace generate_mmpp(const MmppModel& model, std::uint64_t length,
                           std::uint64_t seed) {
    model.validate();
    if (length < 1) throw Error("generate_mmpp: length must be >= 1");
    const auto un = static_cast<std::size_t>(model.n_states);

    // cumulative rows for O(log n) categorical draws
    std::vector<std::vector<double>> cum(un);
    for (std::size_t s = 0; s < un; ++s) {
        cum[s].resize(un);
        double acc = 0.0;
        for (std::size_t d = 0; d < un; ++d) {
            acc += model.transitions[s][d];
            cum[s][d] = acc;
        }
        cum[s][un - 1] = 1.0;
    }
    std::vector<double> cum0(un);
    {
        double acc = 0.0;
        for (std::size_t d = 0; d < un; ++d) {
            acc += model.initial[d];
            cum0[d] = acc;
        }
        cum0[un - 1] = 1.0;
    }
    auto pick = [](const std::vector<double>& c, double u) {
        return static_cast<std::size_t>(
            std::lower_bound(c.begin(), c.end(), u) - c.begin());
    };

    CounterRng rng(seed, 0x6d6d7070ull); // "mmpp"
    std::size_t state = pick(cum0, rng.uniform());
    Trace out;
    out.values.resize(length);
    out.slot_duration = 1.0;
    out.label = "mmpp";
    for (std::uint64_t t = 0; t < length; ++t) {
        state = pick(cum[state], rng.uniform());
        out.values[t] = static_cast<double>(rng.poisson(model.rates[state]));
    }
    return out;
}

/// Power iteration for pi P = pi; smoothing in the fits keeps the chain
/// irreducible so this converges.
inline StationaryDistribution stationary_distribution(const MmppModel& model) {
    model.validate();
    const auto un = static_cast<std::size_t>(model.n_states);
    std::vector<double> pi(un, 1.0 / static_cast<double>(un));
    std::vector<double> next(un, 0.0);
    constexpr int kMaxIter = 200000;
    for (int it = 0; it < kMaxIter; ++it) {
        std::fill(next.begin(), next.end(), 0.0);
        for (std::size_t s = 0; s < un; ++s)
            for (std::size_t d = 0; d < un; ++d)
                next[d] += pi[s] * model.transitions[s][d];
        double norm = 0.0;
        for (double v : next) norm += v;
        for (double& v : next) v /= norm;
        double delta = 0.0;
        for (std::size_t s = 0; s < un; ++s)
            delta = std::max(delta, std::fabs(next[s] - pi[s]));
        pi.swap(next);
        if (delta < 1e-13) return StationaryDistribution{pi};
    }
    throw NonConvergence("stationary distribution: power iteration cap hit");
}

} // namespace mftk
