#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "mftk/errors.hpp"
#include "mftk/fractal.hpp"
#include "mftk/measure.hpp"
#include "mftk/rng.hpp"
#include "mftk/trace.hpp"

namespace mftk {

/// Coefficient of variance decay at time scale 2^i: 2^(-2i(1-H)).
inline double sigma_decay(int i, double hurst) {
    if (!(hurst > 0.0 && hurst <= 1.0))
        throw InvalidHurst("H must be in (0, 1], got " + std::to_string(hurst));
    if (i < 0) throw Error("sigma_decay: scale index must be >= 0");
    return std::exp2(-2.0 * static_cast<double>(i) * (1.0 - hurst));
}

/// The decay values sigma_0..sigma_{N-1}; sigma_0 = 1 and the sequence is
/// nonincreasing for H <= 1.
inline std::vector<double> sigma_schedule(double hurst, int n) {
    if (n < 1) throw Error("sigma_schedule: N must be >= 1");
    std::vector<double> out(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        out[static_cast<std::size_t>(i)] = sigma_decay(i, hurst);
    return out;
}

struct FactorParams {
    double mean = 1.0;
    double cv2 = 0.0;
};

enum class DistFamily { lognormal, deterministic };

struct LogNormalParams {
    double mu = 0.0; // log-scale location
    double s2 = 0.0; // log-scale variance
};

/// Moment-matching bridge into log space: a log-normal with the given mean
/// and squared coefficient of variation.
inline LogNormalParams lognormal_from_moments(double mean, double cv2) {
    if (!(mean > 0.0))
        throw Error("lognormal_from_moments: mean must be positive");
    if (!(cv2 >= 0.0) || !std::isfinite(cv2))
        throw Error("lognormal_from_moments: cv2 must be finite and >= 0");
    LogNormalParams p;
    p.s2 = std::log1p(cv2);
    p.mu = std::log(mean) - p.s2 / 2.0;
    return p;
}

struct HurstEstimateInfo {
    double hurst = 0.0;
    double beta = 0.0;
    double r2 = 0.0;
};

struct FitInfo {
    Stats stats;
    std::optional<HurstEstimateInfo> hurst_estimate;
    std::optional<int> n_min;
    bool ergodic = true;
    int solver_iterations = 0;
    double max_rel_residual = 0.0;
    std::vector<double> residuals;
    std::vector<std::string> warnings;
};

/// Product-of-factors traffic model: N independent per-scale processes,
/// factor i held constant over runs of 2^(i-1) samples.
struct CascadeModel {
    int n = 1;
    double target_mean = 1.0;
    double target_cv2 = 0.0;
    double hurst = 1.0;
    std::vector<FactorParams> factors;
    std::optional<std::pair<double, double>> bounds;
    DistFamily dist_family = DistFamily::lognormal;
    std::optional<FitInfo> fit;

    void validate() const {
        if (n < 1 || n > 60)
            throw Error("cascade model: n must be in [1, 60]");
        if (factors.size() != static_cast<std::size_t>(n))
            throw Error("cascade model: factor count does not match n");
        if (!(target_mean > 0.0))
            throw Error("cascade model: target_mean must be positive");
        if (!(target_cv2 >= 0.0))
            throw Error("cascade model: target_cv2 must be >= 0");
        if (!(hurst > 0.0 && hurst <= 1.0))
            throw InvalidHurst("cascade model: H must be in (0, 1]");
        double prod = 1.0;
        for (const auto& f : factors) {
            if (!(f.mean > 0.0))
                throw Error("cascade model: factor means must be positive");
            if (!(f.cv2 >= 0.0))
                throw Error("cascade model: factor cv2 must be >= 0");
            prod *= f.mean;
        }
        if (std::fabs(prod - target_mean) >
            1e-9 * std::max(1.0, std::fabs(target_mean)))
            throw Error("cascade model: factor means do not multiply to "
                        "target_mean");
        if (bounds && !(bounds->first < bounds->second))
            throw Error("cascade model: bounds must satisfy lo < hi");
    }
};

struct SolveReport {
    std::vector<double> c; // factor cv2 values, c_1..c_N
    int iterations = 0;
    double max_rel_residual = 0.0;
    std::vector<double> residuals; // per-row relative residual
};

namespace detail {

// Row i of the variance system in log form:
//   g_i = sum_{k<=i} ln(2^(k-i-1) c_k + 1) + sum_{k>i} ln(c_k + 1)
//         - ln(sigma_i cv2 + 1)
// with rows i = 0..N-1 and c indexed 1..N.
inline void variance_rows_log(const std::vector<double>& c, double cv2,
                              double hurst, std::vector<double>& g) {
    const int n = static_cast<int>(c.size());
    g.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        double s = 0.0;
        for (int k = 1; k <= n; ++k) {
            const double a =
                k <= i ? std::exp2(static_cast<double>(k - i - 1)) : 1.0;
            s += std::log(a * c[static_cast<std::size_t>(k - 1)] + 1.0);
        }
        g[static_cast<std::size_t>(i)] =
            s - std::log(sigma_decay(i, hurst) * cv2 + 1.0);
    }
}

inline double max_abs_expm1(const std::vector<double>& g) {
    double worst = 0.0;
    for (double v : g) worst = std::max(worst, std::fabs(std::expm1(v)));
    return worst;
}

// Gaussian elimination with partial pivoting; returns false when the
// matrix is numerically singular.
inline bool solve_dense(std::vector<double> a, std::vector<double> b,
                        std::vector<double>& x) {
    const int n = static_cast<int>(b.size());
    auto at = [&](int r, int col) -> double& {
        return a[static_cast<std::size_t>(r) * static_cast<std::size_t>(n) +
                 static_cast<std::size_t>(col)];
    };
    for (int col = 0; col < n; ++col) {
        int piv = col;
        for (int r = col + 1; r < n; ++r)
            if (std::fabs(at(r, col)) > std::fabs(at(piv, col))) piv = r;
        if (std::fabs(at(piv, col)) < 1e-300) return false;
        if (piv != col) {
            for (int k = col; k < n; ++k) std::swap(at(piv, k), at(col, k));
            std::swap(b[static_cast<std::size_t>(piv)],
                      b[static_cast<std::size_t>(col)]);
        }
        for (int r = col + 1; r < n; ++r) {
            const double f = at(r, col) / at(col, col);
            at(r, col) = 0.0;
            for (int k = col + 1; k < n; ++k) at(r, k) -= f * at(col, k);
            b[static_cast<std::size_t>(r)] -=
                f * b[static_cast<std::size_t>(col)];
        }
    }
    x.assign(static_cast<std::size_t>(n), 0.0);
    for (int r = n - 1; r >= 0; --r) {
        double s = b[static_cast<std::size_t>(r)];
        for (int k = r + 1; k < n; ++k)
            s -= at(r, k) * x[static_cast<std::size_t>(k)];
        x[static_cast<std::size_t>(r)] = s / at(r, r);
    }
    return true;
}

} // namespace detail

/// Solves the per-scale variance system for the factor cv2 vector with a
/// damped Newton iteration (numerical Jacobian) started from the uniform
/// guess c_k = (cv2+1)^(1/N) - 1. Iterates on the log form of the rows;
/// the reported residuals are relative on the product scale.
inline SolveReport solve_variance_system(double cv2, double hurst, int n) {
    if (!(hurst > 0.0 && hurst <= 1.0))
        throw InvalidHurst("H must be in (0, 1], got " + std::to_string(hurst));
    if (n < 1) throw Error("solve_variance_system: N must be >= 1");
    if (!(cv2 >= 0.0) || !std::isfinite(cv2))
        throw Error("solve_variance_system: cv2 must be finite and >= 0");

    SolveReport rep;
    if (cv2 == 0.0) {
        rep.c.assign(static_cast<std::size_t>(n), 0.0);
        rep.residuals.assign(static_cast<std::size_t>(n), 0.0);
        return rep;
    }

    const std::size_t un = static_cast<std::size_t>(n);
    std::vector<double> c(un, std::pow(cv2 + 1.0, 1.0 / n) - 1.0);
    std::vector<double> g, g_trial, step, jac(un * un);
    detail::variance_rows_log(c, cv2, hurst, g);

    constexpr int kMaxIter = 200;
    constexpr double kTol = 1e-11;
    for (int iter = 0; iter < kMaxIter; ++iter) {
        const double worst = detail::max_abs_expm1(g);
        if (worst < kTol) {
            rep.iterations = iter;
            break;
        }
        // forward-difference Jacobian
        for (std::size_t k = 0; k < un; ++k) {
            const double h = std::max(1e-7 * std::fabs(c[k]), 1e-9);
            std::vector<double> cp = c;
            cp[k] += h;
            detail::variance_rows_log(cp, cv2, hurst, g_trial);
            for (std::size_t r = 0; r < un; ++r)
                jac[r * un + k] = (g_trial[r] - g[r]) / h;
        }
        std::vector<double> rhs(un);
        for (std::size_t r = 0; r < un; ++r) rhs[r] = -g[r];
        if (!detail::solve_dense(jac, rhs, step)) {
            std::size_t row = 0;
            double wr = 0.0;
            for (std::size_t r = 0; r < un; ++r)
                if (std::fabs(std::expm1(g[r])) > wr) {
                    wr = std::fabs(std::expm1(g[r]));
                    row = r;
                }
            throw Infeasible("singular Jacobian; worst relative residual " +
                             std::to_string(wr) + " at row " +
                             std::to_string(row));
        }
        double norm0 = 0.0;
        for (double v : g) norm0 += v * v;
        double t = 1.0;
        bool accepted = false;
        while (t > 1e-14) {
            std::vector<double> cn(un);
            for (std::size_t k = 0; k < un; ++k)
                cn[k] = std::max(c[k] + t * step[k], 0.0);
            detail::variance_rows_log(cn, cv2, hurst, g_trial);
            double norm1 = 0.0;
            for (double v : g_trial) norm1 += v * v;
            if (norm1 < norm0) {
                c = std::move(cn);
                g = g_trial;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if (!accepted) {
            // the step cannot reduce the residual: no nonnegative solution
            std::size_t row = 0;
            double wr = 0.0;
            for (std::size_t r = 0; r < un; ++r)
                if (std::fabs(std::expm1(g[r])) > wr) {
                    wr = std::fabs(std::expm1(g[r]));
                    row = r;
                }
            throw Infeasible("stalled at relative residual " +
                             std::to_string(wr) + " on row " +
                             std::to_string(row));
        }
        rep.iterations = iter + 1;
    }
    const double worst = detail::max_abs_expm1(g);
    if (worst >= 1e-9)
        throw NonConvergence("no convergence after " +
                             std::to_string(rep.iterations) +
                             " iterations; worst relative residual " +
                             std::to_string(worst));
    rep.c = c;
    rep.residuals.resize(un);
    for (std::size_t r = 0; r < un; ++r)
        rep.residuals[r] = std::fabs(std::expm1(g[r]));
    rep.max_rel_residual = worst;
    return rep;
}

struct RecurrenceReport {
    std::vector<double> c;
    std::vector<double> l_values; // L_1..L_{N+1}
    std::vector<double> residuals;
    double max_rel_residual = 0.0;
};

/// The published elimination recurrence, evaluated verbatim as a
/// diagnostic. Its index bookkeeping is not obviously equivalent to the
/// variance system for N > 2, so agreement with solve_variance_system is
/// reported, never assumed; the fit path does not use this.
inline RecurrenceReport solve_variance_system_recurrence(double cv2,
                                                         double hurst, int n) {
    if (!(hurst > 0.0 && hurst <= 1.0))
        throw InvalidHurst("H must be in (0, 1], got " + std::to_string(hurst));
    if (n < 1) throw Error("recurrence: N must be >= 1");
    if (!(cv2 >= 0.0) || !std::isfinite(cv2))
        throw Error("recurrence: cv2 must be finite and >= 0");

    const std::size_t un = static_cast<std::size_t>(n);
    std::vector<double> l(un + 1, 0.0); // l[i-1] holds L_i; terminal handled below
    std::vector<double> c(un, 0.0);
    l[0] = sigma_decay(0, hurst) * cv2 + 1.0;
    for (int i = 2; i <= n; ++i) {
        double denom = 1.0;
        for (int k = 1; k <= i - 2; ++k)
            denom *= std::exp2(static_cast<double>(k - i)) *
                         c[static_cast<std::size_t>(k - 1)] +
                     1.0;
        if (denom == 0.0)
            throw RecurrenceBreakdown("zero denominator at L_" +
                                      std::to_string(i));
        l[static_cast<std::size_t>(i - 1)] =
            (2.0 * sigma_decay(i - 1, hurst) * cv2 + 2.0) / denom -
            l[static_cast<std::size_t>(i - 2)];
        if (l[static_cast<std::size_t>(i - 1)] == 0.0)
            throw RecurrenceBreakdown("L_" + std::to_string(i) + " is zero");
        c[static_cast<std::size_t>(i - 2)] =
            l[static_cast<std::size_t>(i - 2)] /
                l[static_cast<std::size_t>(i - 1)] -
            1.0;
        if (c[static_cast<std::size_t>(i - 2)] < 0.0)
            throw RecurrenceBreakdown("negative c_" + std::to_string(i - 1));
    }
    l[un] = 1.0; // terminal L_{N+1}
    c[un - 1] = l[un - 1] / l[un] - 1.0;
    if (c[un - 1] < 0.0)
        throw RecurrenceBreakdown("negative c_" + std::to_string(n));

    RecurrenceReport rep;
    rep.c = c;
    rep.l_values.assign(l.begin(), l.end());
    std::vector<double> g;
    detail::variance_rows_log(c, cv2, hurst, g);
    rep.residuals.resize(un);
    for (std::size_t r = 0; r < un; ++r)
        rep.residuals[r] = std::fabs(std::expm1(g[r]));
    rep.max_rel_residual = detail::max_abs_expm1(g);
    return rep;
}

/// The model's aggregated cv2 at scale 2^i: forward evaluation of row i of
/// the variance system, minus one.
inline double predicted_cv2_at_scale(const CascadeModel& model, int i) {
    if (i < 0 || i >= model.n)
        throw Error("predicted_cv2_at_scale: scale index out of range");
    double prod = 1.0;
    for (int k = 1; k <= model.n; ++k) {
        const double a =
            k <= i ? std::exp2(static_cast<double>(k - i - 1)) : 1.0;
        prod *= a * model.factors[static_cast<std::size_t>(k - 1)].cv2 + 1.0;
    }
    return prod - 1.0;
}

struct FitOptions {
    std::optional<int> n_override;
    std::optional<double> hurst_override;
    std::optional<std::pair<double, double>> bounds;
    PadPolicy pad = PadPolicy::truncate;
    int holder_level_lo = 2;
    std::optional<int> holder_level_hi; // default: measure depth
    std::vector<std::uint64_t> scales;  // default: dyadic up to min(2^12, len/4)
    double hard_margin = 1.0;
    double warn_margin = 8.0;
};

// dyadic grid with at least 16 blocks per point; the top scales of a
// shorter grid are too noisy for a stable slope
inline std::vector<std::uint64_t> default_vt_scales(std::size_t length) {
    std::vector<std::uint64_t> scales;
    for (std::uint64_t t = 1; t <= length / 16 && t <= 4096; t *= 2)
        scales.push_back(t);
    return scales;
}

/// Full fit pipeline: moments from the trace, H from the variance-time
/// regression, N from the identification bound, factor cv2 from the
/// variance system, factor means from the N-th root of the trace mean.
inline CascadeModel fit_cascade(const Trace& trace,
                                const FitOptions& opt = {}) {
    trace.validate();
    const Stats stats = basic_stats(trace);
    if (!(stats.mean > 0.0))
        throw ZeroMass("cannot fit a cascade to an all-zero trace");

    CascadeModel model;
    FitInfo info;
    info.stats = stats;
    model.target_mean = stats.mean;
    model.target_cv2 = stats.cv2;
    model.bounds = opt.bounds;

    if (stats.cv2 == 0.0) {
        // constant trace: no stochastic factors
        model.n = opt.n_override.value_or(1);
        model.hurst = opt.hurst_override.value_or(1.0);
        model.dist_family = DistFamily::deterministic;
        info.warnings.push_back("constant trace: deterministic model");
    } else {
        if (opt.hurst_override) {
            model.hurst = *opt.hurst_override;
            if (!(model.hurst > 0.0 && model.hurst <= 1.0))
                throw InvalidHurst("H override must be in (0, 1]");
        } else {
            const auto scales = opt.scales.empty()
                                    ? default_vt_scales(trace.size())
                                    : opt.scales;
            const HurstEstimate est =
                estimate_hurst(variance_time_curve(trace, scales));
            info.hurst_estimate =
                HurstEstimateInfo{est.hurst, est.beta, est.r2};
            if (!(est.hurst > 0.5 && est.hurst <= 1.0))
                throw InvalidHurst(
                    "estimated H " + std::to_string(est.hurst) +
                    " outside (0.5, 1]; pass an override to force a fit");
            model.hurst = est.hurst;
        }
        if (opt.n_override) {
            model.n = *opt.n_override;
            if (model.n < 1) throw Error("fit_cascade: N must be >= 1");
        } else {
            const Measure mu = to_measure(trace, opt.pad);
            const int hi = opt.holder_level_hi.value_or(mu.depth);
            const HolderSummary holder =
                estimate_holder(mu, opt.holder_level_lo, hi);
            // the identification bound is not scale-invariant; the fit
            // treats values as unitless intensities and evaluates it on
            // the unit-mean rescaling of the trace
            Stats unit_stats;
            unit_stats.mean = 1.0;
            unit_stats.variance = stats.cv2;
            unit_stats.cv2 = stats.cv2;
            const IdentifiabilityReport rep =
                min_process_count(unit_stats, holder, trace.size(),
                                  opt.hard_margin, opt.warn_margin);
            info.n_min = rep.n_min;
            info.ergodic = rep.ergodic;
            if (!rep.ergodic)
                throw NonErgodicTrace("2^" + std::to_string(rep.n_min) +
                                      " reaches the trace length " +
                                      std::to_string(trace.size()) + "; " +
                                      rep.detail);
            if (rep.short_trace_warning)
                info.warnings.push_back(rep.detail);
            model.n = rep.n_min;
        }
        model.dist_family = DistFamily::lognormal;
    }

    const double factor_mean =
        std::pow(model.target_mean, 1.0 / static_cast<double>(model.n));
    model.factors.assign(static_cast<std::size_t>(model.n),
                         FactorParams{factor_mean, 0.0});
    if (model.target_cv2 > 0.0) {
        const SolveReport sol =
            solve_variance_system(model.target_cv2, model.hurst, model.n);
        for (int k = 0; k < model.n; ++k)
            model.factors[static_cast<std::size_t>(k)].cv2 =
                sol.c[static_cast<std::size_t>(k)];
        info.solver_iterations = sol.iterations;
        info.max_rel_residual = sol.max_rel_residual;
        info.residuals = sol.residuals;
    }
    model.fit = std::move(info);
    model.validate();
    return model;
}

struct GenerationStats {
    std::uint64_t draws = 0;
    std::uint64_t redraws = 0;
};

namespace detail {

inline double normal_cdf(double z) {
    return 0.5 * std::erfc(-z / std::sqrt(2.0));
}

// Acceptance probability of one factor draw under the clamp interval.
inline double bounds_acceptance(const FactorParams& f, DistFamily family,
                                double lo, double hi) {
    if (family == DistFamily::deterministic || f.cv2 == 0.0)
        return (lo <= f.mean && f.mean <= hi) ? 1.0 : 0.0;
    const LogNormalParams p = lognormal_from_moments(f.mean, f.cv2);
    const double s = std::sqrt(p.s2);
    const double upper = normal_cdf((std::log(hi) - p.mu) / s);
    const double lower = lo > 0.0 ? normal_cdf((std::log(lo) - p.mu) / s) : 0.0;
    return upper - lower;
}

} // namespace detail

/// Synthesizes a trace of the given length: sample k is the product over
/// processes i of the factor draw with index floor(k / 2^(i-1)), so factor
/// i is held for runs of 2^(i-1) slots. Fully determined by the seed; with
/// bounds set, out-of-range factor draws are rejected and redrawn.
inline Trace generate(const CascadeModel& model, std::uint64_t length,
                      std::uint64_t seed, GenerationStats* stats = nullptr) {
    model.validate();
    if (length < 1) throw Error("generate: length must be >= 1");

    const std::size_t un = static_cast<std::size_t>(model.n);
    double lo = 0.0, hi = 0.0;
    const bool bounded = model.bounds.has_value();
    if (bounded) {
        lo = model.bounds->first;
        hi = model.bounds->second;
        for (std::size_t i = 0; i < un; ++i) {
            const double acc = detail::bounds_acceptance(
                model.factors[i], model.dist_family, lo, hi);
            if (acc < 0.01)
                throw BoundsTooTight(
                    "factor " + std::to_string(i + 1) +
                    " acceptance probability " + std::to_string(acc) +
                    " below 1%");
        }
    }

    std::vector<LogNormalParams> params(un);
    std::vector<bool> stochastic(un, false);
    for (std::size_t i = 0; i < un; ++i) {
        if (model.dist_family == DistFamily::lognormal &&
            model.factors[i].cv2 > 0.0) {
            params[i] = lognormal_from_moments(model.factors[i].mean,
                                               model.factors[i].cv2);
            stochastic[i] = true;
        }
    }

    GenerationStats local;
    std::vector<CounterRng> streams;
    streams.reserve(un);
    for (std::size_t i = 0; i < un; ++i)
        streams.emplace_back(seed, static_cast<std::uint64_t>(i + 1));

    auto draw_factor = [&](std::size_t i, std::uint64_t m) -> double {
        if (!stochastic[i]) {
            ++local.draws;
            return model.factors[i].mean;
        }
        const CounterRng sub = streams[i].derive(m);
        const double s = std::sqrt(params[i].s2);
        for (std::uint64_t t = 0; t < 100000; ++t) {
            const double u1 = sub.uniform_at(2 * t);
            const double u2 = sub.uniform_at(2 * t + 1);
            const double z = std::sqrt(-2.0 * std::log(u1)) *
                             std::cos(2.0 * std::numbers::pi * u2);
            const double x = std::exp(params[i].mu + s * z);
            ++local.draws;
            if (!bounded || (lo <= x && x <= hi)) return x;
            ++local.redraws;
        }
        throw BoundsTooTight("factor " + std::to_string(i + 1) +
                             " rejected 100000 consecutive draws");
    };

    Trace out;
    out.values.resize(length);
    out.slot_duration = 1.0;
    out.label = "cascade";
    std::vector<double> current(un, 1.0);
    for (std::uint64_t k = 0; k < length; ++k) {
        for (std::size_t i = 0; i < un; ++i) {
            const std::uint64_t period = 1ull << i; // 2^(i-1) for process i=1..N
            if (k % period == 0) current[i] = draw_factor(i, k >> i);
        }
        double prod = 1.0;
        for (std::size_t i = 0; i < un; ++i) prod *= current[i];
        if (!(prod > 0.0) || !std::isfinite(prod))
            throw Error("generate: non-positive sample (internal)");
        out.values[k] = prod;
    }
    if (stats) *stats = local;
    return out;
}

} // namespace mftk
