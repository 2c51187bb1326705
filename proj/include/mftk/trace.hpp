#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "mftk/errors.hpp"

namespace mftk {

/// Equally spaced traffic intensity series, one nonnegative value per slot.
/// Values are unitless intensities; the caller's unit goes into `label`.
struct Trace {
    std::vector<double> values;
    double slot_duration = 1.0; // seconds
    std::string label;

    std::size_t size() const noexcept { return values.size(); }

    void validate() const {
        if (values.empty()) throw ParseError("empty trace");
        if (!(slot_duration > 0.0))
            throw Error("trace: slot_duration must be > 0");
        for (double v : values)
            if (!std::isfinite(v) || v < 0.0)
                throw Error("trace: values must be finite and >= 0");
    }
};

struct Stats {
    double mean = 0.0;
    double variance = 0.0;
    double cv2 = 0.0; // variance / mean^2, 0 for a degenerate all-zero trace
};

enum class TraceFormat { plain, csv_column };

namespace detail {

// from_chars keeps parsing byte-exact and locale-independent
inline double parse_value(const std::string& tok, std::size_t line_no) {
    const char* first = tok.data();
    const char* last = tok.data() + tok.size();
    while (first < last && (*first == ' ' || *first == '\t')) ++first;
    while (last > first &&
           (*(last - 1) == ' ' || *(last - 1) == '\t'))
        --last;
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc{} || ptr != last)
        throw ParseError("non-numeric value '" + tok + "' on line " +
                         std::to_string(line_no));
    if (!std::isfinite(v))
        throw ParseError("non-finite value on line " + std::to_string(line_no));
    if (v < 0.0)
        throw ParseError("negative value on line " + std::to_string(line_no));
    return v;
}

inline std::string strip_cr(std::string s) {
    if (!s.empty() && s.back() == '\r') s.pop_back();
    return s;
}

inline std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

} // namespace detail

/// Reads a trace file. `plain` is one decimal per line (LF or CRLF);
/// `csv_column` requires a header row and a column name.
inline Trace load_trace(const std::string& path, TraceFormat format,
                        double slot_duration, const std::string& column = "") {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "'");
    Trace t;
    t.slot_duration = slot_duration;
    t.label = path;

    std::string line;
    std::size_t line_no = 0;
    if (format == TraceFormat::plain) {
        while (std::getline(in, line)) {
            ++line_no;
            line = detail::strip_cr(line);
            if (line.empty() && in.eof()) break;
            if (line.empty())
                throw ParseError("blank line " + std::to_string(line_no));
            t.values.push_back(detail::parse_value(line, line_no));
        }
    } else {
        if (!std::getline(in, line))
            throw ParseError("empty trace");
        ++line_no;
        const auto header = detail::split_csv(detail::strip_cr(line));
        std::size_t col = header.size();
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == column) col = i;
        if (col == header.size())
            throw ParseError("column '" + column + "' not found in header");
        while (std::getline(in, line)) {
            ++line_no;
            line = detail::strip_cr(line);
            if (line.empty() && in.eof()) break;
            const auto fields = detail::split_csv(line);
            if (fields.size() != header.size())
                throw ParseError("wrong field count on line " +
                                 std::to_string(line_no));
            t.values.push_back(detail::parse_value(fields[col], line_no));
        }
    }
    if (t.values.empty()) throw ParseError("empty trace");
    t.validate();
    return t;
}

inline void save_trace_plain(const Trace& t, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path + "'");
    char buf[64];
    for (double v : t.values) {
        std::snprintf(buf, sizeof buf, "%.17g\n", v);
        out << buf;
    }
    if (!out) throw IoError("write failed for '" + path + "'");
}

/// Block means over non-overlapping windows of length T; the trailing
/// partial block is discarded so every output value averages exactly T
/// inputs. Slot duration scales by T.
inline Trace aggregate(const Trace& trace, std::uint64_t T) {
    if (T < 1) throw InvalidScale("aggregation scale must be >= 1");
    if (T > trace.size())
        throw InvalidScale("aggregation scale " + std::to_string(T) +
                           " exceeds trace length " +
                           std::to_string(trace.size()));
    Trace out;
    out.slot_duration = trace.slot_duration * static_cast<double>(T);
    out.label = trace.label;
    const std::size_t blocks = trace.size() / T;
    out.values.reserve(blocks);
    for (std::size_t b = 0; b < blocks; ++b) {
        double sum = 0.0;
        for (std::size_t j = 0; j < T; ++j) sum += trace.values[b * T + j];
        out.values.push_back(sum / static_cast<double>(T));
    }
    return out;
}

/// Population mean/variance (Welford); cv2 = variance / mean^2.
inline Stats basic_stats(const Trace& trace) {
    if (trace.values.empty()) throw ParseError("empty trace");
    double mean = 0.0;
    double m2 = 0.0;
    std::size_t n = 0;
    for (double v : trace.values) {
        ++n;
        const double d = v - mean;
        mean += d / static_cast<double>(n);
        m2 += d * (v - mean);
    }
    Stats s;
    s.mean = mean;
    s.variance = m2 / static_cast<double>(n);
    s.cv2 = mean > 0.0 ? s.variance / (mean * mean) : 0.0;
    return s;
}

} // namespace mftk
