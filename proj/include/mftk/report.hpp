#pragma once

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "mftk/errors.hpp"
#include "mftk/fractal.hpp"
#include "mftk/netsim.hpp"
#include "mftk/trace.hpp"

namespace mftk {

// Shortest-exact decimal formatting keeps every emitted file reproducible
// byte for byte across runs.
inline std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline const char* kSweepCsvHeader =
    "load,mean_q_shaper,mean_q_sw_in,mean_q_sw_out,loss_shaper,loss_sw_in,"
    "loss_sw_out,interarrival_var_s2,frames_delivered,frames_excluded,seed";

inline std::string sweep_csv_row(double load, const SimMetrics& m) {
    std::string row = fmt_double(load);
    row += "," + fmt_double(m.shaper.mean_len);
    row += "," + fmt_double(m.sw_in.mean_len);
    row += "," + fmt_double(m.sw_out.mean_len);
    row += "," + fmt_double(m.shaper.loss_prob);
    row += "," + fmt_double(m.sw_in.loss_prob);
    row += "," + fmt_double(m.sw_out.loss_prob);
    row += ",";
    row += m.interarrival_variance ? fmt_double(*m.interarrival_variance)
                                   : "nan";
    row += "," + std::to_string(m.frames_delivered);
    row += "," + std::to_string(m.frames_excluded);
    row += "," + std::to_string(m.seed);
    return row;
}

inline void write_sweep_csv(const LoadSweep& sweep, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path + "'");
    out << kSweepCsvHeader << "\n";
    for (const auto& row : sweep.rows)
        out << sweep_csv_row(row.load, row.metrics) << "\n";
    if (!out) throw IoError("write failed for '" + path + "'");
}

/// Long-format comparison table: one row per (model, load).
inline void write_compare_csv(
    const std::vector<std::pair<std::string, LoadSweep>>& series,
    const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path + "'");
    out << "model," << kSweepCsvHeader << "\n";
    for (const auto& [name, sweep] : series)
        for (const auto& row : sweep.rows)
            out << name << "," << sweep_csv_row(row.load, row.metrics) << "\n";
    if (!out) throw IoError("write failed for '" + path + "'");
}

/// Flat key=value analysis report.
inline void write_kv_report(
    const std::vector<std::pair<std::string, std::string>>& entries,
    const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path + "'");
    for (const auto& [k, v] : entries) out << k << "=" << v << "\n";
    if (!out) throw IoError("write failed for '" + path + "'");
}

/// Per-cell Holder exponents as (cell_index, alpha); excluded cells are
/// skipped.
inline void write_alphas_csv(const HolderSummary& holder,
                             const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path + "'");
    out << "cell_index,alpha\n";
    for (std::size_t i = 0; i < holder.alphas.size(); ++i)
        if (std::isfinite(holder.alphas[i]))
            out << i << "," << fmt_double(holder.alphas[i]) << "\n";
    if (!out) throw IoError("write failed for '" + path + "'");
}

} // namespace mftk
