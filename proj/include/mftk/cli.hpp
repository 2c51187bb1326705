#pragma once

#include <cmath>
#include <cstdint>
#include <iostream>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mftk/cascade.hpp"
#include "mftk/errors.hpp"
#include "mftk/fractal.hpp"
#include "mftk/manifest.hpp"
#include "mftk/measure.hpp"
#include "mftk/mmpp.hpp"
#include "mftk/model_io.hpp"
#include "mftk/netsim.hpp"
#include "mftk/report.hpp"
#include "mftk/trace.hpp"

namespace mftk::cli {

struct CommonOpts {
    std::string trace_path;
    std::string format = "plain";
    std::string column;
    double slot = 1.0;
    std::string out;
    std::optional<std::uint64_t> seed;
};

inline Trace load_input_trace(const CommonOpts& c) {
    if (c.format != "plain" && c.format != "csv_column")
        throw ParseError("unknown trace format '" + c.format + "'");
    const TraceFormat fmt =
        c.format == "plain" ? TraceFormat::plain : TraceFormat::csv_column;
    return load_trace(c.trace_path, fmt, c.slot, c.column);
}

inline std::uint64_t resolve_seed(const std::optional<std::uint64_t>& seed,
                                  RunManifest& manifest) {
    if (seed) {
        manifest.seed = *seed;
        return *seed;
    }
    std::random_device rd;
    const std::uint64_t drawn =
        (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
    manifest.seed = drawn;
    manifest.notes.push_back("seed drawn automatically; recorded here for "
                             "replay");
    return drawn;
}

inline std::vector<double> parse_loads(const std::string& spec) {
    std::vector<double> loads;
    std::string cur;
    for (char ch : spec + ",") {
        if (ch == ',') {
            if (!cur.empty()) {
                try {
                    loads.push_back(std::stod(cur));
                } catch (const std::exception&) {
                    throw ConfigError("bad load value '" + cur + "'");
                }
                cur.clear();
            }
        } else {
            cur.push_back(ch);
        }
    }
    return loads;
}

inline NetworkConfig load_config(const std::string& path) {
    if (path.empty()) return NetworkConfig{};
    return network_config_from_json(load_json(path));
}

// model files are dispatched on their schema field
struct AnyModel {
    std::optional<CascadeModel> cascade;
    std::optional<MmppModel> mmpp;
};

inline AnyModel load_any_model(const std::string& path) {
    const auto j = load_json(path);
    AnyModel m;
    const std::string schema = j.value("schema", "");
    if (schema == kCascadeSchema)
        m.cascade = cascade_from_json(j);
    else if (schema == kMmppSchema)
        m.mmpp = mmpp_from_json(j);
    else
        throw ParseError("unrecognized model schema '" + schema + "' in " +
                         path);
    return m;
}

inline Trace frames_from_model(const AnyModel& m, std::uint64_t length,
                               std::uint64_t seed) {
    if (m.cascade) return generate(*m.cascade, length, seed);
    return generate_mmpp(*m.mmpp, length, seed);
}

inline int run_analyze(const CommonOpts& common, int level_lo,
                       std::optional<int> level_hi,
                       const std::vector<std::string>& argv) {
    const Trace trace = load_input_trace(common);
    const Stats stats = basic_stats(trace);
    std::vector<std::pair<std::string, std::string>> kv;
    kv.emplace_back("trace.path", common.trace_path);
    kv.emplace_back("trace.length", std::to_string(trace.size()));
    kv.emplace_back("trace.slot_duration", fmt_double(trace.slot_duration));
    kv.emplace_back("stats.mean", fmt_double(stats.mean));
    kv.emplace_back("stats.variance", fmt_double(stats.variance));
    kv.emplace_back("stats.cv2", fmt_double(stats.cv2));

    std::optional<HolderSummary> holder;
    bool wrote_alphas = false;
    const std::string alphas_path = common.out + ".alphas.csv";
    try {
        const auto curve =
            variance_time_curve(trace, default_vt_scales(trace.size()));
        const auto hurst = estimate_hurst(curve);
        kv.emplace_back("hurst.H", fmt_double(hurst.hurst));
        kv.emplace_back("hurst.beta", fmt_double(hurst.beta));
        kv.emplace_back("hurst.r2", fmt_double(hurst.r2));
    } catch (const Error& e) {
        kv.emplace_back("hurst.error", e.what());
    }
    try {
        const Measure mu = to_measure(trace);
        const int hi = level_hi.value_or(mu.depth);
        holder = estimate_holder(mu, level_lo, hi);
        kv.emplace_back("holder.alpha_min", fmt_double(holder->alpha_min));
        kv.emplace_back("holder.alpha_max", fmt_double(holder->alpha_max));
        kv.emplace_back("holder.levels",
                        std::to_string(holder->level_lo) + ".." +
                            std::to_string(holder->level_hi));
        kv.emplace_back("holder.cells_used",
                        std::to_string(holder->cells_used));
        kv.emplace_back("holder.cells_excluded",
                        std::to_string(holder->cells_excluded));
        write_alphas_csv(*holder, alphas_path);
        wrote_alphas = true;
    } catch (const Error& e) {
        kv.emplace_back("holder.error", e.what());
    }
    if (holder) {
        try {
            const auto rep = min_process_count(stats, *holder, trace.size());
            kv.emplace_back("ident.n_min", std::to_string(rep.n_min));
            kv.emplace_back("ident.ergodic", rep.ergodic ? "true" : "false");
            kv.emplace_back("ident.short_trace_warning",
                            rep.short_trace_warning ? "true" : "false");
            kv.emplace_back("ident.detail", rep.detail);
        } catch (const Error& e) {
            kv.emplace_back("ident.error", e.what());
        }
    }
    write_kv_report(kv, common.out);

    RunManifest manifest;
    manifest.command_line = argv;
    manifest.inputs.push_back(common.trace_path);
    manifest.outputs.push_back(common.out);
    if (wrote_alphas) manifest.outputs.push_back(alphas_path);
    manifest.write(common.out + ".manifest.json");
    return 0;
}

inline int run_fit(const CommonOpts& common, std::optional<int> n_override,
                   std::optional<double> hurst_override,
                   const std::string& bounds_spec, const std::string& pad,
                   const std::vector<std::string>& argv) {
    const Trace trace = load_input_trace(common);
    FitOptions opt;
    opt.n_override = n_override;
    opt.hurst_override = hurst_override;
    if (!bounds_spec.empty()) {
        const auto vals = parse_loads(bounds_spec);
        if (vals.size() != 2 || !(vals[0] < vals[1]))
            throw ConfigError("--bounds expects 'lo,hi' with lo < hi");
        opt.bounds = std::make_pair(vals[0], vals[1]);
    }
    if (pad == "truncate")
        opt.pad = PadPolicy::truncate;
    else if (pad == "zeropad")
        opt.pad = PadPolicy::zero_pad;
    else if (pad == "strict")
        opt.pad = PadPolicy::strict;
    else
        throw ConfigError("--pad must be truncate, zeropad or strict");

    const CascadeModel model = fit_cascade(trace, opt);
    save_json(to_json(model), common.out);

    RunManifest manifest;
    manifest.command_line = argv;
    manifest.inputs.push_back(common.trace_path);
    manifest.outputs.push_back(common.out);
    for (const auto& w : model.fit ? model.fit->warnings
                                   : std::vector<std::string>{})
        manifest.notes.push_back(w);
    manifest.write(common.out + ".manifest.json");
    return 0;
}

inline int run_mmpp_fit(const CommonOpts& common, int states,
                        const std::string& method, std::uint64_t scene_window,
                        double scene_threshold,
                        const std::vector<std::string>& argv) {
    const Trace trace = load_input_trace(common);
    MmppModel model;
    if (method == "histogram")
        model = fit_mmpp_histogram(trace, states);
    else if (method == "scene")
        model = fit_mmpp_scene(trace, states, scene_window, scene_threshold);
    else
        throw ConfigError("--method must be histogram or scene");
    save_json(to_json(model), common.out);

    RunManifest manifest;
    manifest.command_line = argv;
    manifest.inputs.push_back(common.trace_path);
    manifest.outputs.push_back(common.out);
    for (const auto& w : model.meta.warnings) manifest.notes.push_back(w);
    manifest.write(common.out + ".manifest.json");
    return 0;
}

inline int run_generate(const std::string& model_path, std::uint64_t length,
                        double slot, const CommonOpts& common,
                        const std::vector<std::string>& argv) {
    RunManifest manifest;
    manifest.command_line = argv;
    const std::uint64_t seed = resolve_seed(common.seed, manifest);
    const AnyModel m = load_any_model(model_path);
    Trace out;
    if (m.cascade) {
        GenerationStats gen_stats;
        out = generate(*m.cascade, length, seed, &gen_stats);
        manifest.notes.push_back("factor draws: " +
                                 std::to_string(gen_stats.draws) +
                                 ", redraws: " +
                                 std::to_string(gen_stats.redraws));
    } else {
        out = generate_mmpp(*m.mmpp, length, seed);
    }
    out.slot_duration = slot;
    save_trace_plain(out, common.out);
    manifest.inputs.push_back(model_path);
    manifest.outputs.push_back(common.out);
    manifest.write(common.out + ".manifest.json");
    return 0;
}

struct SimOpts {
    std::string model_path;
    std::string config_path;
    std::string loads_spec;
    double duration = 60.0;
    double warmup = -1.0; // default: 10% of duration
};

inline SourceSpec make_primary(const CommonOpts& common, const SimOpts& sim,
                               const NetworkConfig& cfg, std::uint64_t seed,
                               RunManifest& manifest) {
    SourceSpec primary;
    if (!common.trace_path.empty()) {
        primary.kind = SourceKind::trace_replay;
        primary.frames = load_input_trace(common);
        manifest.inputs.push_back(common.trace_path);
    } else if (!sim.model_path.empty()) {
        const AnyModel m = load_any_model(sim.model_path);
        const auto n_frames = static_cast<std::uint64_t>(std::floor(
                                  sim.duration * cfg.frame_rate)) +
                              1;
        primary.kind = m.cascade ? SourceKind::cascade : SourceKind::mmpp;
        primary.frames = frames_from_model(m, n_frames, seed + 1);
        manifest.inputs.push_back(sim.model_path);
    } else {
        throw ConfigError("need --trace or --model as the primary source");
    }
    return primary;
}

inline int run_sweep(const CommonOpts& common, const SimOpts& sim,
                     const std::vector<std::string>& argv) {
    RunManifest manifest;
    manifest.command_line = argv;
    const std::uint64_t seed = resolve_seed(common.seed, manifest);
    const NetworkConfig cfg = load_config(sim.config_path);
    manifest.config = to_json(cfg);
    if (!sim.config_path.empty())
        manifest.inputs.push_back(sim.config_path);
    const double warmup =
        sim.warmup >= 0.0 ? sim.warmup : 0.1 * sim.duration;
    const SourceSpec primary = make_primary(common, sim, cfg, seed, manifest);
    const auto loads = parse_loads(sim.loads_spec);
    const LoadSweep sweep =
        sweep_load(cfg, primary, loads, sim.duration, warmup, seed);
    write_sweep_csv(sweep, common.out);
    for (const auto& w : sweep.warnings) manifest.notes.push_back(w);
    manifest.outputs.push_back(common.out);
    manifest.write(common.out + ".manifest.json");
    return 0;
}

inline int run_simulate(const CommonOpts& common, const SimOpts& sim,
                        std::optional<double> load,
                        const std::vector<std::string>& argv) {
    RunManifest manifest;
    manifest.command_line = argv;
    const std::uint64_t seed = resolve_seed(common.seed, manifest);
    const NetworkConfig cfg = load_config(sim.config_path);
    manifest.config = to_json(cfg);
    if (!sim.config_path.empty())
        manifest.inputs.push_back(sim.config_path);
    const double warmup =
        sim.warmup >= 0.0 ? sim.warmup : 0.1 * sim.duration;
    const SourceSpec primary = make_primary(common, sim, cfg, seed, manifest);

    std::vector<SourceSpec> cross;
    double load_out =
        offered_bits_per_second(cfg, primary, sim.duration) / cfg.link_rate;
    if (load) {
        if (!(*load > 0.0 && *load < 1.0))
            throw ConfigError("--load must lie in (0, 1)");
        const double primary_bps =
            offered_bits_per_second(cfg, primary, sim.duration);
        const double cross_wire_bits =
            static_cast<double>(cfg.mtu_payload + cfg.per_packet_overhead) *
            8.0;
        const double cross_pps =
            std::max(0.0, *load * cfg.link_rate - primary_bps) /
            cross_wire_bits;
        if (cross_pps > 0.0)
            cross.push_back(
                SourceSpec{SourceKind::poisson_cross, Trace{}, cross_pps});
        load_out = *load;
    }
    const SimMetrics metrics =
        run_simulation(cfg, primary, cross, sim.duration, warmup, seed);
    {
        std::ofstream out(common.out, std::ios::binary);
        if (!out) throw IoError("cannot write '" + common.out + "'");
        out << kSweepCsvHeader << "\n"
            << sweep_csv_row(load_out, metrics) << "\n";
    }
    manifest.outputs.push_back(common.out);
    manifest.write(common.out + ".manifest.json");
    return 0;
}

inline int run_compare(const CommonOpts& common, const SimOpts& sim,
                       int states, int scene_states,
                       std::uint64_t scene_window, double scene_threshold,
                       const std::vector<std::string>& argv) {
    RunManifest manifest;
    manifest.command_line = argv;
    const std::uint64_t seed = resolve_seed(common.seed, manifest);
    const NetworkConfig cfg = load_config(sim.config_path);
    manifest.config = to_json(cfg);
    if (!sim.config_path.empty())
        manifest.inputs.push_back(sim.config_path);
    const double warmup =
        sim.warmup >= 0.0 ? sim.warmup : 0.1 * sim.duration;
    const Trace trace = load_input_trace(common);
    manifest.inputs.push_back(common.trace_path);
    const auto loads = parse_loads(sim.loads_spec);
    const auto n_frames = static_cast<std::uint64_t>(std::floor(
                              sim.duration * cfg.frame_rate)) +
                          1;

    std::vector<std::pair<std::string, Trace>> model_frames;
    model_frames.emplace_back("replay", trace);
    std::vector<std::string> skipped;
    try {
        const CascadeModel cascade = fit_cascade(trace);
        model_frames.emplace_back("cascade",
                                  generate(cascade, n_frames, seed + 1));
    } catch (const Error& e) {
        skipped.push_back(std::string("cascade: ") + e.what());
    }
    try {
        const MmppModel hist = fit_mmpp_histogram(trace, states);
        model_frames.emplace_back("mmpp-hist",
                                  generate_mmpp(hist, n_frames, seed + 2));
    } catch (const Error& e) {
        skipped.push_back(std::string("mmpp-hist: ") + e.what());
    }
    try {
        const MmppModel scene = fit_mmpp_scene(trace, scene_states,
                                               scene_window, scene_threshold);
        model_frames.emplace_back("mmpp-scene",
                                  generate_mmpp(scene, n_frames, seed + 3));
    } catch (const Error& e) {
        skipped.push_back(std::string("mmpp-scene: ") + e.what());
    }

    std::vector<std::pair<std::string, LoadSweep>> series;
    for (const auto& [name, frames] : model_frames) {
        SourceSpec primary;
        primary.kind = name == "replay"      ? SourceKind::trace_replay
                       : name == "cascade"   ? SourceKind::cascade
                                             : SourceKind::mmpp;
        primary.frames = frames;
        series.emplace_back(
            name, sweep_load(cfg, primary, loads, sim.duration, warmup, seed));
    }
    write_compare_csv(series, common.out);

    // closeness of each model's inter-arrival variance curve to the replay
    const std::string ranking_path = common.out + ".ranking.txt";
    {
        std::ofstream out(ranking_path, std::ios::binary);
        if (!out) throw IoError("cannot write '" + ranking_path + "'");
        const LoadSweep* replay = nullptr;
        for (const auto& [name, sweep] : series)
            if (name == "replay") replay = &sweep;
        std::vector<std::pair<double, std::string>> scored;
        for (const auto& [name, sweep] : series) {
            if (name == "replay" || !replay) continue;
            double sum = 0.0;
            int used = 0;
            for (std::size_t i = 0; i < sweep.rows.size(); ++i) {
                const auto& a = sweep.rows[i].metrics.interarrival_variance;
                const auto& b = replay->rows[i].metrics.interarrival_variance;
                if (a && b) {
                    sum += std::fabs(*a - *b);
                    ++used;
                }
            }
            if (used > 0)
                scored.emplace_back(sum / used, name);
            else
                skipped.push_back(name + ": no defined inter-arrival "
                                         "variance at any load");
        }
        std::sort(scored.begin(), scored.end());
        out << "rank,model,mean_abs_iav_gap_vs_replay\n";
        for (std::size_t i = 0; i < scored.size(); ++i)
            out << i + 1 << "," << scored[i].second << ","
                << fmt_double(scored[i].first) << "\n";
        for (const auto& s : skipped) out << "skipped," << s << "\n";
    }
    for (const auto& s : skipped) manifest.notes.push_back("skipped " + s);
    manifest.outputs.push_back(common.out);
    manifest.outputs.push_back(ranking_path);
    manifest.write(common.out + ".manifest.json");
    return 0;
}

/// Parses argv (without the program name) and dispatches; returns the
/// process exit code: 0 ok, 1 domain error, 2 usage error.
inline int execute(const std::vector<std::string>& args) {
    CLI::App app{"multifractal traffic modeling toolkit"};
    app.require_subcommand(1);

    CommonOpts common;
    SimOpts sim;
    int level_lo = 2;
    std::optional<int> level_hi;
    std::optional<int> n_override;
    std::optional<double> hurst_override;
    std::string bounds_spec;
    std::string pad = "truncate";
    std::string model_path;
    std::uint64_t length = 0;
    double gen_slot = 1.0;
    int states = 30;
    int scene_states = 300;
    std::string mmpp_method = "histogram";
    std::uint64_t scene_window = 64;
    double scene_threshold = 0.3;
    std::optional<double> sim_load;

    auto add_trace_opts = [&](CLI::App* cmd, bool required) {
        auto* t = cmd->add_option("--trace", common.trace_path,
                                  "input trace file");
        if (required) t->required();
        cmd->add_option("--format", common.format, "plain or csv_column");
        cmd->add_option("--column", common.column,
                        "column name for csv_column format");
        cmd->add_option("--slot", common.slot, "slot duration in seconds");
    };
    auto add_out = [&](CLI::App* cmd) {
        cmd->add_option("--out", common.out, "output file")->required();
    };
    auto add_seed = [&](CLI::App* cmd) {
        cmd->add_option("--seed", common.seed, "64-bit seed (drawn and "
                                               "recorded when absent)");
    };
    auto add_sim_opts = [&](CLI::App* cmd) {
        cmd->add_option("--duration", sim.duration, "simulated seconds");
        cmd->add_option("--warmup", sim.warmup,
                        "warmup seconds (default 10% of duration)");
        cmd->add_option("--config", sim.config_path,
                        "network config JSON file");
    };

    auto* analyze = app.add_subcommand("analyze",
                                       "trace statistics, Hurst and Holder "
                                       "analysis, identification bound");
    add_trace_opts(analyze, true);
    add_out(analyze);
    analyze->add_option("--jlo", level_lo, "lowest dyadic level");
    analyze->add_option("--jhi", level_hi, "highest dyadic level");

    auto* fit = app.add_subcommand("fit", "fit a cascade model to a trace");
    add_trace_opts(fit, true);
    add_out(fit);
    fit->add_option("--n", n_override, "override the process count");
    fit->add_option("--hurst", hurst_override, "override the Hurst exponent");
    fit->add_option("--bounds", bounds_spec, "factor clamp interval lo,hi");
    fit->add_option("--pad", pad, "non-dyadic policy: truncate|zeropad|strict");

    auto* mmpp_fit = app.add_subcommand("mmpp-fit",
                                        "fit an MMPP baseline to a trace");
    add_trace_opts(mmpp_fit, true);
    add_out(mmpp_fit);
    mmpp_fit->add_option("--states", states, "state count");
    mmpp_fit->add_option("--method", mmpp_method, "histogram or scene");
    mmpp_fit->add_option("--scene-window", scene_window,
                         "scene detector window, slots");
    mmpp_fit->add_option("--scene-threshold", scene_threshold,
                         "relative jump threshold");

    auto* gen = app.add_subcommand("generate",
                                   "synthesize a trace from a model file");
    gen->add_option("--model", model_path, "model JSON file")->required();
    gen->add_option("--length", length, "number of slots")->required();
    gen->add_option("--slot", gen_slot, "output slot duration, seconds");
    add_out(gen);
    add_seed(gen);

    auto* simulate = app.add_subcommand("simulate",
                                        "one simulation run, metrics CSV");
    add_trace_opts(simulate, false);
    simulate->add_option("--model", sim.model_path, "model file as primary "
                                                    "source");
    add_out(simulate);
    add_seed(simulate);
    add_sim_opts(simulate);
    simulate->add_option("--load", sim_load,
                         "target link load in (0,1); adds calibrated cross "
                         "traffic");

    auto* sweep = app.add_subcommand("sweep",
                                     "simulate across a load grid");
    add_trace_opts(sweep, false);
    sweep->add_option("--model", sim.model_path, "model file as primary "
                                                 "source");
    sweep->add_option("--loads", sim.loads_spec, "comma-separated loads in "
                                                 "(0,1)")
        ->required();
    add_out(sweep);
    add_seed(sweep);
    add_sim_opts(sweep);

    auto* compare = app.add_subcommand(
        "compare", "fit all models and sweep each against the replayed trace");
    add_trace_opts(compare, true);
    compare->add_option("--loads", sim.loads_spec, "comma-separated loads in "
                                                   "(0,1)")
        ->required();
    add_out(compare);
    add_seed(compare);
    add_sim_opts(compare);
    compare->add_option("--states", states, "histogram MMPP states");
    compare->add_option("--scene-states", scene_states, "scene MMPP states");
    compare->add_option("--scene-window", scene_window,
                        "scene detector window, slots");
    compare->add_option("--scene-threshold", scene_threshold,
                        "relative jump threshold");

    std::vector<std::string> argv_record;
    argv_record.reserve(args.size());
    for (const auto& a : args) argv_record.push_back(a);

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        std::cout << app.help() << std::flush;
        return 0;
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n" << app.help() << std::flush;
        return 2;
    }

    try {
        if (analyze->parsed())
            return run_analyze(common, level_lo, level_hi, argv_record);
        if (fit->parsed())
            return run_fit(common, n_override, hurst_override, bounds_spec,
                           pad, argv_record);
        if (mmpp_fit->parsed())
            return run_mmpp_fit(common, states, mmpp_method, scene_window,
                                scene_threshold, argv_record);
        if (gen->parsed())
            return run_generate(model_path, length, gen_slot, common,
                                argv_record);
        if (simulate->parsed())
            return run_simulate(common, sim, sim_load, argv_record);
        if (sweep->parsed()) return run_sweep(common, sim, argv_record);
        if (compare->parsed())
            return run_compare(common, sim, states, scene_states,
                               scene_window, scene_threshold, argv_record);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    std::cerr << app.help() << std::flush;
    return 2;
}

} // namespace mftk::cli
