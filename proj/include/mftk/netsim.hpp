#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <optional>
#include <queue>
#include <string>
#include <unordered_map>
#include <vector>

#include "mftk/errors.hpp"
#include "mftk/rng.hpp"
#include "mftk/trace.hpp"

namespace mftk {

/// Gigabit Ethernet evaluation topology: shaper queue feeding a
/// non-blocking switch with finite input/output queues, store-and-forward
/// service at link rate on both ports.
struct NetworkConfig {
    double link_rate = 1e9;                 // bits/s
    std::uint64_t shaper_capacity = 10000;  // packets
    std::uint64_t switch_in_capacity = 5000;
    std::uint64_t switch_out_capacity = 5000;
    std::uint64_t mtu_payload = 1500; // bytes
    std::uint64_t per_packet_overhead = 38; // preamble 8 + MAC/FCS 18 + IFG 12
    std::uint64_t min_payload = 46;   // Ethernet 64 B minimum frame less MAC/FCS
    double frame_rate = 24.0;         // MPEG frames/s

    void validate() const {
        if (!(link_rate > 0.0)) throw ConfigError("link_rate must be > 0");
        if (shaper_capacity < 1 || switch_in_capacity < 1 ||
            switch_out_capacity < 1)
            throw ConfigError("queue capacities must be >= 1");
        if (mtu_payload < 1) throw ConfigError("mtu_payload must be >= 1");
        if (!(frame_rate > 0.0)) throw ConfigError("frame_rate must be > 0");
    }
};

/// Splits a frame into MTU-sized packets and returns their wire sizes:
/// payload clamped to the Ethernet minimum, plus the per-packet overhead.
inline std::vector<std::uint64_t> frame_to_packets(std::uint64_t frame_bytes,
                                                   const NetworkConfig& cfg) {
    if (frame_bytes < 1) throw ConfigError("frame_bytes must be >= 1");
    std::vector<std::uint64_t> wire;
    std::uint64_t remaining = frame_bytes;
    while (remaining > 0) {
        const std::uint64_t payload = std::min(remaining, cfg.mtu_payload);
        remaining -= payload;
        wire.push_back(std::max(payload, cfg.min_payload) +
                       cfg.per_packet_overhead);
    }
    return wire;
}

enum class SourceKind { trace_replay, cascade, mmpp, poisson_cross };

/// A traffic source. Primary kinds carry a frame-size sequence (bytes per
/// frame; model-backed sources are materialized to a trace first) replayed
/// at the configured frame rate, wrapping if the run outlasts it.
/// poisson_cross emits full-MTU packets at rate_scale packets per second
/// straight into the switch output queue.
struct SourceSpec {
    SourceKind kind = SourceKind::trace_replay;
    Trace frames;
    double rate_scale = 1.0;
};

struct QueueStats {
    double mean_len = 0.0;       // waiting packets, time-averaged post-warmup
    double mean_in_system = 0.0; // waiting + in service
    std::uint64_t arrivals = 0;  // post-warmup counters
    std::uint64_t departures = 0;
    std::uint64_t drops = 0;
    double loss_prob = 0.0; // drops / arrivals post-warmup
    // full-run counters backing the conservation identity
    std::uint64_t total_arrivals = 0;
    std::uint64_t total_departures = 0;
    std::uint64_t total_drops = 0;
    std::uint64_t final_occupancy = 0;
};

struct SimMetrics {
    QueueStats shaper;
    QueueStats sw_in;
    QueueStats sw_out;
    std::optional<double> interarrival_variance; // s^2, gap-free frame pairs
    std::uint64_t frames_delivered = 0;
    std::uint64_t frames_excluded = 0; // lost at least one packet
    double sim_time = 0.0;
    std::uint64_t seed = 0;

    // queue metrics survive a degenerate run; the variance does not
    double interarrival_variance_or_throw() const {
        if (!interarrival_variance)
            throw NoFramesDelivered(
                "fewer than two consecutive frames were delivered; "
                "inter-arrival variance is undefined");
        return *interarrival_variance;
    }
};

namespace detail {

struct Packet {
    double wire_bytes = 0.0;
    std::uint64_t frame_id = kNoFrame;
    bool last_of_frame = false;
    static constexpr std::uint64_t kNoFrame = ~0ull;
};

struct Station {
    double rate_bps = 1e9;
    std::uint64_t capacity = 1;
    bool pass_through = false;

    std::deque<Packet> q;
    bool busy = false;
    Packet in_service;

    double t_last = 0.0;
    double area_q = 0.0;
    double area_sys = 0.0;
    QueueStats stats;

    void integrate_to(double t, double warmup, double duration) {
        const double from = std::max(t_last, warmup);
        const double to = std::min(t, duration);
        if (to > from) {
            const double len = static_cast<double>(q.size());
            area_q += len * (to - from);
            area_sys += (len + (busy ? 1.0 : 0.0)) * (to - from);
        }
        t_last = t;
    }
};

struct Event {
    double t = 0.0;
    std::uint32_t src = 0;
    std::uint64_t seq = 0;
    enum Kind { kFrameEmit, kCrossEmit, kServiceDone } kind = kFrameEmit;
    std::uint32_t station = 0;
    std::uint64_t payload = 0; // frame index or cross-source index
};

struct EventAfter {
    bool operator()(const Event& a, const Event& b) const {
        if (a.t != b.t) return a.t > b.t;
        if (a.src != b.src) return a.src > b.src;
        return a.seq > b.seq;
    }
};

struct FrameRec {
    std::uint64_t remaining = 0; // packets not yet departed or dropped
    bool dropped = false;
    bool drop_counted = false;
};

// frame sizes are handed over as real-valued intensities; they become
// whole bytes here, with sub-byte positives rounded up to one byte
inline std::uint64_t frame_bytes_of(double raw) {
    const long long b = std::llround(raw);
    return static_cast<std::uint64_t>(std::max(1ll, b));
}

} // namespace detail

/// Event-driven run of the shaper -> switch pipeline. The frame source
/// emits at frame_rate; every packet loss excludes its frame from the
/// inter-arrival statistic; a frame ends when its last packet leaves the
/// output port. Bit-identical for a given seed.
inline SimMetrics run_simulation(const NetworkConfig& cfg,
                                 const SourceSpec& primary,
                                 const std::vector<SourceSpec>& cross,
                                 double duration, double warmup,
                                 std::uint64_t seed) {
    cfg.validate();
    if (!(duration > warmup) || !(warmup >= 0.0))
        throw ConfigError("need duration > warmup >= 0");
    if (primary.kind == SourceKind::poisson_cross)
        throw ConfigError("primary source cannot be poisson_cross");
    if (primary.frames.values.empty())
        throw ConfigError("primary source has no frame sizes");
    if (!(primary.rate_scale >= 0.0))
        throw ConfigError("rate_scale must be >= 0");
    for (const auto& c : cross) {
        if (c.kind != SourceKind::poisson_cross)
            throw ConfigError("cross sources must be poisson_cross");
        if (!(c.rate_scale >= 0.0))
            throw ConfigError("cross rate must be >= 0");
    }

    using detail::Event;
    using detail::Packet;
    using detail::Station;

    Station shaper{cfg.link_rate, cfg.shaper_capacity, false, {}, false, {},
                   0.0, 0.0, 0.0, {}};
    Station sw_in{cfg.link_rate, cfg.switch_in_capacity, true, {}, false, {},
                  0.0, 0.0, 0.0, {}};
    Station sw_out{cfg.link_rate, cfg.switch_out_capacity, false, {}, false,
                   {}, 0.0, 0.0, 0.0, {}};
    Station* stations[3] = {&shaper, &sw_in, &sw_out};

    std::priority_queue<Event, std::vector<Event>, detail::EventAfter> pq;
    std::uint64_t seq = 0;
    const double cross_wire_bytes = static_cast<double>(
        cfg.mtu_payload + cfg.per_packet_overhead);

    std::vector<CounterRng> cross_rng;
    cross_rng.reserve(cross.size());
    for (std::size_t i = 0; i < cross.size(); ++i)
        cross_rng.emplace_back(seed, 0x63726f73ull + i); // "cros" + index

    std::unordered_map<std::uint64_t, detail::FrameRec> frames;
    std::vector<std::pair<std::uint64_t, double>> ends; // (frame id, end time)
    std::uint64_t frames_delivered = 0;
    std::uint64_t frames_excluded = 0;

    // forward declaration of packet movement through the pipeline
    auto start_service = [&](std::uint32_t st_idx, double t) {
        Station& st = *stations[st_idx];
        st.in_service = st.q.front();
        st.q.pop_front();
        st.busy = true;
        pq.push(Event{t + st.in_service.wire_bytes * 8.0 / st.rate_bps,
                      100 + st_idx, seq++, Event::kServiceDone, st_idx, 0});
    };

    std::function<void(std::uint32_t, const Packet&, double)> arrive =
        [&](std::uint32_t st_idx, const Packet& pkt, double t) {
            Station& st = *stations[st_idx];
            st.integrate_to(t, warmup, duration);
            ++st.stats.total_arrivals;
            if (t >= warmup) ++st.stats.arrivals;
            if (st.pass_through) {
                // non-blocking fabric: forwarded with zero switching delay
                ++st.stats.total_departures;
                if (t >= warmup) ++st.stats.departures;
                arrive(st_idx + 1, pkt, t);
                return;
            }
            if (!st.busy) {
                st.q.push_back(pkt);
                start_service(st_idx, t);
            } else if (st.q.size() < st.capacity) {
                st.q.push_back(pkt);
            } else {
                ++st.stats.total_drops;
                if (t >= warmup) ++st.stats.drops;
                if (pkt.frame_id != Packet::kNoFrame) {
                    auto it = frames.find(pkt.frame_id);
                    if (it != frames.end()) {
                        it->second.dropped = true;
                        if (!it->second.drop_counted && t >= warmup) {
                            it->second.drop_counted = true;
                            ++frames_excluded;
                        }
                        if (--it->second.remaining == 0) frames.erase(it);
                    }
                }
            }
        };

    auto depart = [&](std::uint32_t st_idx, double t) {
        Station& st = *stations[st_idx];
        st.integrate_to(t, warmup, duration);
        const Packet pkt = st.in_service;
        st.busy = false;
        ++st.stats.total_departures;
        if (t >= warmup) ++st.stats.departures;
        if (!st.q.empty()) start_service(st_idx, t);
        if (st_idx + 1 < 3) {
            arrive(st_idx + 1, pkt, t);
        } else if (pkt.frame_id != Packet::kNoFrame) {
            auto it = frames.find(pkt.frame_id);
            if (it != frames.end() && --it->second.remaining == 0) {
                if (!it->second.dropped) {
                    if (t >= warmup) {
                        ++frames_delivered;
                        ends.emplace_back(pkt.frame_id, t);
                    }
                }
                frames.erase(it);
            }
        }
    };

    pq.push(Event{0.0, 0, seq++, Event::kFrameEmit, 0, 0});
    for (std::size_t i = 0; i < cross.size(); ++i)
        if (cross[i].rate_scale > 0.0)
            pq.push(Event{cross_rng[i].exponential(cross[i].rate_scale),
                          static_cast<std::uint32_t>(1 + i), seq++,
                          Event::kCrossEmit, 0, static_cast<std::uint64_t>(i)});

    while (!pq.empty() && pq.top().t <= duration) {
        const Event ev = pq.top();
        pq.pop();
        switch (ev.kind) {
        case Event::kFrameEmit: {
            const std::uint64_t k = ev.payload;
            const double raw =
                primary.frames.values[k % primary.frames.values.size()] *
                primary.rate_scale;
            if (raw > 0.0) {
                const auto wire =
                    frame_to_packets(detail::frame_bytes_of(raw), cfg);
                auto& rec = frames[k];
                rec.remaining = wire.size();
                for (std::size_t p = 0; p < wire.size(); ++p)
                    arrive(0,
                           detail::Packet{static_cast<double>(wire[p]), k,
                                          p + 1 == wire.size()},
                           ev.t);
            }
            const double t_next =
                static_cast<double>(k + 1) / cfg.frame_rate;
            if (t_next <= duration)
                pq.push(Event{t_next, 0, seq++, Event::kFrameEmit, 0, k + 1});
            break;
        }
        case Event::kCrossEmit: {
            const std::size_t i = ev.payload;
            arrive(2,
                   detail::Packet{cross_wire_bytes, detail::Packet::kNoFrame,
                                  false},
                   ev.t);
            pq.push(Event{ev.t + cross_rng[i].exponential(cross[i].rate_scale),
                          ev.src, seq++, Event::kCrossEmit, 0, ev.payload});
            break;
        }
        case Event::kServiceDone:
            depart(ev.station, ev.t);
            break;
        }
    }

    SimMetrics m;
    m.sim_time = duration;
    m.seed = seed;
    const double window = duration - warmup;
    QueueStats* outs[3] = {&m.shaper, &m.sw_in, &m.sw_out};
    for (int s = 0; s < 3; ++s) {
        Station& st = *stations[s];
        st.integrate_to(duration, warmup, duration);
        st.stats.mean_len = st.area_q / window;
        st.stats.mean_in_system = st.area_sys / window;
        st.stats.loss_prob =
            st.stats.arrivals
                ? static_cast<double>(st.stats.drops) /
                      static_cast<double>(st.stats.arrivals)
                : 0.0;
        st.stats.final_occupancy = st.q.size() + (st.busy ? 1 : 0);
        if (st.stats.total_arrivals != st.stats.total_departures +
                                           st.stats.total_drops +
                                           st.stats.final_occupancy)
            throw Error("queue conservation identity violated (internal)");
        *outs[s] = st.stats;
    }
    m.frames_delivered = frames_delivered;
    m.frames_excluded = frames_excluded;

    // variance of end-to-end gaps over consecutively numbered frames
    std::sort(ends.begin(), ends.end());
    std::vector<double> gaps;
    for (std::size_t i = 1; i < ends.size(); ++i)
        if (ends[i].first == ends[i - 1].first + 1)
            gaps.push_back(ends[i].second - ends[i - 1].second);
    if (gaps.size() >= 2) {
        double mean = 0.0;
        for (double g : gaps) mean += g;
        mean /= static_cast<double>(gaps.size());
        double var = 0.0;
        for (double g : gaps) var += (g - mean) * (g - mean);
        m.interarrival_variance = var / static_cast<double>(gaps.size());
    }
    return m;
}

struct LoadRow {
    double load = 0.0;
    SimMetrics metrics;
};

struct LoadSweep {
    std::vector<LoadRow> rows;
    std::vector<std::string> warnings;
};

/// Mean offered bit rate of a frame source over the frames a run of the
/// given duration will emit (wire bits, after segmentation and padding).
inline double offered_bits_per_second(const NetworkConfig& cfg,
                                      const SourceSpec& primary,
                                      double duration) {
    const auto n_frames = static_cast<std::uint64_t>(
        std::floor(duration * cfg.frame_rate)) + 1;
    double total_bits = 0.0;
    for (std::uint64_t k = 0; k < n_frames; ++k) {
        const double raw =
            primary.frames.values[k % primary.frames.values.size()] *
            primary.rate_scale;
        if (raw <= 0.0) continue;
        for (std::uint64_t w : frame_to_packets(detail::frame_bytes_of(raw), cfg))
            total_bits += static_cast<double>(w) * 8.0;
    }
    return total_bits / (static_cast<double>(n_frames) / cfg.frame_rate);
}

/// One run per load: Poisson cross traffic is calibrated so the total
/// offered bit rate is load * link_rate, per-row seed = seed xor row index.
inline LoadSweep sweep_load(const NetworkConfig& cfg,
                            const SourceSpec& primary,
                            const std::vector<double>& loads, double duration,
                            double warmup, std::uint64_t seed) {
    cfg.validate();
    if (loads.empty()) throw ConfigError("loads must be nonempty");
    for (std::size_t i = 0; i < loads.size(); ++i) {
        if (!(loads[i] > 0.0 && loads[i] < 1.0))
            throw ConfigError("loads must lie in (0, 1)");
        if (i > 0 && !(loads[i] > loads[i - 1]))
            throw ConfigError("loads must be strictly increasing");
    }
    const double primary_bps = offered_bits_per_second(cfg, primary, duration);
    const double cross_wire_bits =
        static_cast<double>(cfg.mtu_payload + cfg.per_packet_overhead) * 8.0;

    LoadSweep sweep;
    for (std::size_t row = 0; row < loads.size(); ++row) {
        const double target_bps = loads[row] * cfg.link_rate;
        const double cross_pps =
            std::max(0.0, target_bps - primary_bps) / cross_wire_bits;
        if (target_bps < primary_bps)
            sweep.warnings.push_back(
                "load " + std::to_string(loads[row]) +
                ": primary source alone exceeds the target bit rate");
        std::vector<SourceSpec> cross;
        if (cross_pps > 0.0)
            cross.push_back(
                SourceSpec{SourceKind::poisson_cross, Trace{}, cross_pps});
        SimMetrics metrics = run_simulation(cfg, primary, cross, duration,
                                            warmup, seed ^ row);
        sweep.rows.push_back(LoadRow{loads[row], std::move(metrics)});
    }

    // total loss should not decrease with offered load beyond binomial noise
    auto total_loss = [&](const SimMetrics& m, double& n_offered) {
        const std::uint64_t drops =
            m.shaper.drops + m.sw_in.drops + m.sw_out.drops;
        const std::uint64_t cross_offered =
            m.sw_out.arrivals >= m.sw_in.departures
                ? m.sw_out.arrivals - m.sw_in.departures
                : 0;
        const std::uint64_t offered = m.shaper.arrivals + cross_offered;
        n_offered = static_cast<double>(std::max<std::uint64_t>(offered, 1));
        return static_cast<double>(drops) / n_offered;
    };
    for (std::size_t i = 1; i < sweep.rows.size(); ++i) {
        double n_prev = 1.0, n_cur = 1.0;
        const double p_prev = total_loss(sweep.rows[i - 1].metrics, n_prev);
        const double p_cur = total_loss(sweep.rows[i].metrics, n_cur);
        const double allow =
            3.0 * (std::sqrt(std::max(p_prev * (1 - p_prev), 1e-12) / n_prev) +
                   std::sqrt(std::max(p_cur * (1 - p_cur), 1e-12) / n_cur));
        if (p_cur + allow < p_prev)
            sweep.warnings.push_back(
                "loss probability decreased beyond noise between loads " +
                std::to_string(sweep.rows[i - 1].load) + " and " +
                std::to_string(sweep.rows[i].load));
    }
    return sweep;
}

struct Mm1Result {
    double mean_in_system = 0.0;
    double mean_sojourn = 0.0;
    double lambda_hat = 0.0;
    std::uint64_t departures = 0;
    double elapsed = 0.0;
};

/// Single-queue calibration mode: Poisson arrivals, exponential service
/// (continuous "wire sizes"), effectively unbounded buffer. The first
/// tenth of the departures is treated as warmup.
inline Mm1Result run_mm1_calibration(double rho, double mu,
                                     std::uint64_t departures,
                                     std::uint64_t seed) {
    if (!(rho > 0.0 && rho < 1.0))
        throw ConfigError("rho must be in (0, 1)");
    if (!(mu > 0.0)) throw ConfigError("mu must be > 0");
    if (departures < 100) throw ConfigError("need at least 100 departures");

    const double lambda = rho * mu;
    CounterRng arr_rng(seed, 0x6172ull);
    CounterRng srv_rng(seed, 0x7372ull);

    std::deque<double> queue_arrivals; // arrival times of waiting jobs
    double t = 0.0;
    double next_arrival = arr_rng.exponential(lambda);
    double service_end = std::numeric_limits<double>::infinity();
    double served_arrival_time = 0.0; // arrival time of the job in service
    bool busy = false;

    const std::uint64_t warmup_departures = departures / 10;
    std::uint64_t done = 0;
    double t0 = 0.0;           // time when measurement starts
    double area = 0.0;         // number-in-system integral after t0
    double sojourn_sum = 0.0;
    std::uint64_t arrivals_measured = 0;
    double t_last = 0.0;

    auto advance = [&](double now) {
        const double n_sys =
            static_cast<double>(queue_arrivals.size()) + (busy ? 1.0 : 0.0);
        if (done >= warmup_departures && now > t_last)
            area += n_sys * (now - t_last);
        t_last = now;
    };

    while (done < departures) {
        if (next_arrival <= service_end) {
            advance(next_arrival);
            t = next_arrival;
            if (done >= warmup_departures) ++arrivals_measured;
            if (!busy) {
                busy = true;
                served_arrival_time = t;
                service_end = t + srv_rng.exponential(mu);
            } else {
                queue_arrivals.push_back(t);
            }
            next_arrival = t + arr_rng.exponential(lambda);
        } else {
            advance(service_end);
            t = service_end;
            ++done;
            if (done == warmup_departures) t0 = t;
            if (done > warmup_departures)
                sojourn_sum += t - served_arrival_time;
            if (!queue_arrivals.empty()) {
                served_arrival_time = queue_arrivals.front();
                queue_arrivals.pop_front();
                service_end = t + srv_rng.exponential(mu);
            } else {
                busy = false;
                service_end = std::numeric_limits<double>::infinity();
            }
        }
    }

    Mm1Result r;
    r.departures = departures - warmup_departures;
    r.elapsed = t - t0;
    r.mean_in_system = area / r.elapsed;
    r.mean_sojourn = sojourn_sum / static_cast<double>(r.departures);
    r.lambda_hat = static_cast<double>(arrivals_measured) / r.elapsed;
    return r;
}

} // namespace mftk
