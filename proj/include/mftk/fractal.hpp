#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "mftk/errors.hpp"
#include "mftk/measure.hpp"
#include "mftk/trace.hpp"

namespace mftk {

struct VtPoint {
    std::uint64_t scale = 1;
    double variance = 0.0;
    double cv2 = 0.0;
};

/// Variance of the aggregated series against the aggregation scale.
struct VarianceTimeCurve {
    std::vector<VtPoint> points;
};

struct HurstEstimate {
    double hurst = 0.5;
    double beta = -1.0; // slope of log variance vs log scale, beta = 2(H-1)
    double r2 = 0.0;
};

/// Coarse Holder exponents for the finest-level cells of a measure.
/// Cells with zero mass at any used level carry NaN and are excluded
/// from the extremes.
struct HolderSummary {
    std::vector<double> alphas;
    double alpha_min = 0.0;
    double alpha_max = 0.0;
    int level_lo = 0;
    int level_hi = 0;
    std::size_t cells_used = 0;
    std::size_t cells_excluded = 0;
    std::string detail;
};

struct IdentifiabilityReport {
    int n_min = 1;
    bool ergodic = true;
    bool short_trace_warning = false;
    std::string detail;
};

namespace detail {

struct OlsFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 1.0;
};

// Plain least squares; r2 defined as 1 when the fit is exact (including
// the zero-spread case), so a flat curve reports a perfect horizontal fit.
inline OlsFit ols(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    double sx = 0.0, sy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sx += x[i];
        sy += y[i];
    }
    const double mx = sx / static_cast<double>(n);
    const double my = sy / static_cast<double>(n);
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    OlsFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double ss_res = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = y[i] - (f.intercept + f.slope * x[i]);
        ss_res += r * r;
    }
    f.r2 = syy > 0.0 ? std::max(0.0, 1.0 - ss_res / syy)
                     : (ss_res == 0.0 ? 1.0 : 0.0);
    return f;
}

} // namespace detail

/// Aggregates the trace at each scale and records variance and cv2.
/// Scales must be distinct and small enough to leave >= 4 blocks.
inline VarianceTimeCurve variance_time_curve(const Trace& trace,
                                             std::vector<std::uint64_t> scales) {
    if (scales.size() < 3)
        throw TooFewScales("need at least 3 scales, got " +
                           std::to_string(scales.size()));
    std::sort(scales.begin(), scales.end());
    for (std::size_t i = 1; i < scales.size(); ++i)
        if (scales[i] == scales[i - 1])
            throw InvalidScale("duplicate scale " + std::to_string(scales[i]));
    VarianceTimeCurve curve;
    curve.points.reserve(scales.size());
    for (std::uint64_t T : scales) {
        if (T < 1 || T > trace.size() / 4)
            throw InvalidScale("scale " + std::to_string(T) +
                               " leaves fewer than 4 blocks (length " +
                               std::to_string(trace.size()) + ")");
        const Stats s = basic_stats(aggregate(trace, T));
        curve.points.push_back({T, s.variance, s.cv2});
    }
    return curve;
}

/// Least-squares slope of log variance vs log scale; H = 1 + beta/2.
inline HurstEstimate estimate_hurst(const VarianceTimeCurve& curve) {
    if (curve.points.size() < 3)
        throw TooFewScales("need at least 3 points, got " +
                           std::to_string(curve.points.size()));
    std::vector<double> x, y;
    x.reserve(curve.points.size());
    y.reserve(curve.points.size());
    for (const auto& p : curve.points) {
        if (!(p.variance > 0.0))
            throw ZeroVariancePoint("variance is zero at scale " +
                                    std::to_string(p.scale));
        x.push_back(std::log(static_cast<double>(p.scale)));
        y.push_back(std::log(p.variance));
    }
    const auto fit = detail::ols(x, y);
    HurstEstimate h;
    h.beta = fit.slope;
    h.hurst = 1.0 + fit.slope / 2.0;
    h.r2 = fit.r2;
    return h;
}

/// Per-cell regression of log cell mass vs log cell width across dyadic
/// levels [level_lo, level_hi]. The finest-level cell inherits the masses
/// of its ancestors; cells hitting a zero-mass ancestor are excluded.
inline HolderSummary estimate_holder(const Measure& mu, int level_lo,
                                     int level_hi) {
    if (level_lo < 1 || level_lo >= level_hi || level_hi > mu.depth ||
        level_hi - level_lo < 2)
        throw InsufficientDepth(
            "level range [" + std::to_string(level_lo) + ", " +
            std::to_string(level_hi) + "] invalid for depth " +
            std::to_string(mu.depth));

    // level_masses[j] holds the 2^j cell masses of level j.
    std::vector<std::vector<double>> level_masses(
        static_cast<std::size_t>(mu.depth) + 1);
    level_masses[static_cast<std::size_t>(mu.depth)] = mu.masses;
    for (int j = mu.depth - 1; j >= level_lo; --j) {
        const auto& fine = level_masses[static_cast<std::size_t>(j) + 1];
        auto& coarse = level_masses[static_cast<std::size_t>(j)];
        coarse.resize(fine.size() / 2);
        for (std::size_t c = 0; c < coarse.size(); ++c)
            coarse[c] = fine[2 * c] + fine[2 * c + 1];
    }

    const int nlev = level_hi - level_lo + 1;
    std::vector<double> xs(static_cast<std::size_t>(nlev));
    for (int j = level_lo; j <= level_hi; ++j)
        xs[static_cast<std::size_t>(j - level_lo)] =
            -static_cast<double>(j) * std::log(2.0);

    HolderSummary out;
    out.level_lo = level_lo;
    out.level_hi = level_hi;
    out.alphas.assign(mu.masses.size(),
                      std::numeric_limits<double>::quiet_NaN());
    out.alpha_min = std::numeric_limits<double>::infinity();
    out.alpha_max = -std::numeric_limits<double>::infinity();

    std::vector<double> ys(static_cast<std::size_t>(nlev));
    const std::size_t ncells = mu.masses.size();
    for (std::size_t cell = 0; cell < ncells; ++cell) {
        bool ok = true;
        for (int j = level_lo; j <= level_hi && ok; ++j) {
            const std::size_t anc = cell >> (mu.depth - j);
            const double m = level_masses[static_cast<std::size_t>(j)][anc];
            if (!(m > 0.0))
                ok = false;
            else
                ys[static_cast<std::size_t>(j - level_lo)] = std::log(m);
        }
        if (!ok) {
            ++out.cells_excluded;
            continue;
        }
        const double alpha = detail::ols(xs, ys).slope;
        out.alphas[cell] = alpha;
        out.alpha_min = std::min(out.alpha_min, alpha);
        out.alpha_max = std::max(out.alpha_max, alpha);
        ++out.cells_used;
    }
    if (out.cells_used == 0)
        throw AllZeroCells("no cell has positive mass at all used levels");
    std::ostringstream d;
    d << "levels " << level_lo << ".." << level_hi << ", cells used "
      << out.cells_used << ", excluded " << out.cells_excluded;
    out.detail = d.str();
    return out;
}

/// Minimum process count: smallest integer strictly greater than
/// [log(E + var) - log E] / log(a_max + a_min - a_max*a_min), floored at 1.
/// A trace is non-ergodic when 2^n_min reaches its length; a warning zone
/// starts at one eighth of the length.
inline IdentifiabilityReport min_process_count(const Stats& stats,
                                               const HolderSummary& holder,
                                               std::uint64_t trace_length,
                                               double hard_margin = 1.0,
                                               double warn_margin = 8.0) {
    if (!(stats.mean > 0.0))
        throw Error("min_process_count: mean must be positive");
    if (!std::isfinite(holder.alpha_min) || !std::isfinite(holder.alpha_max))
        throw Error("min_process_count: alpha extremes must be finite");
    const double arg = holder.alpha_max + holder.alpha_min -
                       holder.alpha_max * holder.alpha_min;
    if (!(arg > 0.0))
        throw DegenerateDenominator("log argument " + std::to_string(arg) +
                                    " is not positive");
    const double denom = std::log(arg);
    if (denom == 0.0)
        throw DegenerateDenominator("log argument equals 1");
    const double numer =
        std::log(stats.mean + stats.variance) - std::log(stats.mean);
    const double bound = numer / denom;
    IdentifiabilityReport rep;
    rep.n_min = std::max(1, static_cast<int>(std::floor(bound)) + 1);

    const double len = static_cast<double>(trace_length);
    const double pow2n = std::exp2(static_cast<double>(rep.n_min));
    rep.ergodic = pow2n < len / hard_margin;
    rep.short_trace_warning = pow2n >= len / warn_margin;

    std::ostringstream d;
    d << "bound " << bound << ", n_min " << rep.n_min << ", 2^n_min " << pow2n
      << " vs length " << trace_length;
    if (!rep.ergodic)
        d << "; non-ergodic: 2^n_min reaches the trace length";
    else if (rep.short_trace_warning)
        d << "; warning: 2^n_min within 1/" << warn_margin
          << " of the trace length";
    if (stats.mean < 0.1 || stats.mean > 10.0)
        d << "; note: the bound is evaluated on the trace's native scale "
             "(mean "
          << stats.mean << ") and is not scale-invariant";
    rep.detail = d.str();
    return rep;
}

} // namespace mftk
