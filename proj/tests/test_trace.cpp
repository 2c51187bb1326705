#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "mftk/measure.hpp"
#include "mftk/rng.hpp"
#include "mftk/trace.hpp"
#include "oracles.hpp"

using namespace mftk;

namespace {

std::string write_temp(const std::string& name, const std::string& content) {
    const auto path =
        (std::filesystem::temp_directory_path() / name).string();
    std::ofstream out(path, std::ios::binary);
    out << content;
    return path;
}

} // namespace

TEST_CASE("plain format load") {
    const auto path = write_temp("mftk_plain.txt", "2\n3\n5\n");
    const Trace t = load_trace(path, TraceFormat::plain, 0.04);
    REQUIRE(t.values == std::vector<double>{2, 3, 5});
    REQUIRE(t.slot_duration == 0.04);
}

TEST_CASE("plain format accepts CRLF and missing trailing newline") {
    const auto path = write_temp("mftk_crlf.txt", "1\r\n2.5\r\n7");
    const Trace t = load_trace(path, TraceFormat::plain, 1.0);
    REQUIRE(t.values == std::vector<double>{1, 2.5, 7});
}

TEST_CASE("negative value reports its line") {
    const auto path = write_temp("mftk_neg.txt", "2\n-1\n5\n");
    try {
        load_trace(path, TraceFormat::plain, 1.0);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        REQUIRE(std::string(e.what()).find("line 2") != std::string::npos);
    }
}

TEST_CASE("non-numeric value reports its line") {
    const auto path = write_temp("mftk_bad.txt", "2\nabc\n");
    try {
        load_trace(path, TraceFormat::plain, 1.0);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        REQUIRE(std::string(e.what()).find("line 2") != std::string::npos);
    }
}

TEST_CASE("empty file is rejected") {
    const auto path = write_temp("mftk_empty.txt", "");
    REQUIRE_THROWS_AS(load_trace(path, TraceFormat::plain, 1.0), ParseError);
}

TEST_CASE("missing file is an IoError") {
    REQUIRE_THROWS_AS(load_trace("/nonexistent/x.txt", TraceFormat::plain, 1.0),
                      IoError);
}

TEST_CASE("csv_column format selects the named column") {
    const auto path = write_temp("mftk_cols.csv",
                                 "time,bytes,flags\n0,100,1\n1,250,0\n");
    const Trace t = load_trace(path, TraceFormat::csv_column, 1.0, "bytes");
    REQUIRE(t.values == std::vector<double>{100, 250});
    REQUIRE_THROWS_AS(
        load_trace(path, TraceFormat::csv_column, 1.0, "nosuch"), ParseError);
}

TEST_CASE("trace round-trips through the plain writer") {
    const Trace t = oracles::make_trace({0.0, 1.5, 123456789.0, 0.1});
    const auto path =
        (std::filesystem::temp_directory_path() / "mftk_rt.txt").string();
    save_trace_plain(t, path);
    const Trace back = load_trace(path, TraceFormat::plain, 1.0);
    REQUIRE(back.values == t.values);
}

TEST_CASE("aggregate block means") {
    const Trace t = oracles::make_trace({1, 3, 2, 4}, 0.5);
    const Trace a = aggregate(t, 2);
    REQUIRE(a.values == std::vector<double>{2, 3});
    REQUIRE(a.slot_duration == 1.0);
}

TEST_CASE("aggregate identity and constants") {
    const Trace t = oracles::make_trace({5, 5, 5, 5, 5});
    REQUIRE(aggregate(t, 1).values == t.values);
    REQUIRE(aggregate(t, 2).values == std::vector<double>{5, 5});
}

TEST_CASE("aggregate discards the trailing partial block") {
    const Trace t = oracles::make_trace({1, 2, 3});
    REQUIRE(aggregate(t, 2).values == std::vector<double>{1.5});
}

TEST_CASE("aggregate scale bounds") {
    const Trace t = oracles::make_trace({1, 2, 3});
    REQUIRE_THROWS_AS(aggregate(t, 0), InvalidScale);
    REQUIRE_THROWS_AS(aggregate(t, 4), InvalidScale);
}

TEST_CASE("aggregate matches the brute-force oracle and preserves means") {
    CounterRng rng(11, 0);
    std::vector<double> v(1000);
    for (auto& x : v) x = rng.uniform() * 10.0;
    const Trace t = oracles::make_trace(v);
    for (std::size_t T : {1, 2, 3, 7, 50}) {
        const Trace a = aggregate(t, T);
        const auto expect = oracles::brute_block_means(v, T);
        REQUIRE(a.values.size() == expect.size());
        for (std::size_t i = 0; i < expect.size(); ++i)
            REQUIRE(a.values[i] == Catch::Approx(expect[i]).epsilon(1e-14));
        // mean over the used prefix is preserved
        const std::size_t used = (v.size() / T) * T;
        const double prefix_mean = oracles::naive_mean(
            std::vector<double>(v.begin(), v.begin() + used));
        REQUIRE(oracles::naive_mean(a.values) ==
                Catch::Approx(prefix_mean).margin(1e-12));
    }
}

TEST_CASE("aggregate composes across scales") {
    CounterRng rng(12, 0);
    std::vector<double> v(360);
    for (auto& x : v) x = rng.uniform();
    const Trace t = oracles::make_trace(v);
    for (auto [a, b] : {std::pair<std::uint64_t, std::uint64_t>{2, 3},
                        {3, 4},
                        {6, 5}}) {
        const Trace two_step = aggregate(aggregate(t, a), b);
        const Trace one_step = aggregate(t, a * b);
        REQUIRE(two_step.values.size() == one_step.values.size());
        for (std::size_t i = 0; i < one_step.values.size(); ++i)
            REQUIRE(two_step.values[i] ==
                    Catch::Approx(one_step.values[i]).epsilon(1e-12));
    }
}

TEST_CASE("basic stats on small cases") {
    const Stats constant = basic_stats(oracles::make_trace({2, 2, 2, 2}));
    REQUIRE(constant.mean == 2.0);
    REQUIRE(constant.variance == 0.0);
    REQUIRE(constant.cv2 == 0.0);

    const Stats two = basic_stats(oracles::make_trace({0, 2}));
    REQUIRE(two.mean == 1.0);
    REQUIRE(two.variance == 1.0);
    REQUIRE(two.cv2 == 1.0);

    const Stats zero = basic_stats(oracles::make_trace({0, 0, 0}));
    REQUIRE(zero.mean == 0.0);
    REQUIRE(zero.cv2 == 0.0);
}

TEST_CASE("basic stats agrees with the two-pass oracle") {
    CounterRng rng(13, 0);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> v(257 + trial * 13);
        for (auto& x : v) x = rng.uniform() * 1000.0;
        const Stats s = basic_stats(oracles::make_trace(v));
        REQUIRE(s.mean ==
                Catch::Approx(oracles::naive_mean(v)).epsilon(1e-10));
        REQUIRE(s.variance ==
                Catch::Approx(oracles::naive_variance(v)).epsilon(1e-10));
    }
}

TEST_CASE("to_measure normalizes") {
    const Measure uniform = to_measure(oracles::make_trace({1, 1, 1, 1}));
    REQUIRE(uniform.depth == 2);
    REQUIRE(uniform.masses == std::vector<double>{0.25, 0.25, 0.25, 0.25});

    const Measure two = to_measure(oracles::make_trace({3, 1}));
    REQUIRE(two.depth == 1);
    REQUIRE(two.masses == std::vector<double>{0.75, 0.25});
}

TEST_CASE("to_measure rejects zero mass") {
    REQUIRE_THROWS_AS(to_measure(oracles::make_trace({0, 0, 0})), ZeroMass);
}

TEST_CASE("to_measure pad policies") {
    const Trace t = oracles::make_trace({1, 2, 3});
    const Measure trunc = to_measure(t); // default truncates to [1, 2]
    REQUIRE(trunc.depth == 1);
    REQUIRE(trunc.masses == std::vector<double>{1.0 / 3.0, 2.0 / 3.0});

    const Measure padded = to_measure(t, PadPolicy::zero_pad);
    REQUIRE(padded.depth == 2);
    REQUIRE(padded.masses[3] == 0.0);

    REQUIRE_THROWS_AS(to_measure(t, PadPolicy::strict), NonDyadicLength);
}

TEST_CASE("to_measure masses sum to one and preserve order") {
    CounterRng rng(14, 0);
    std::vector<double> v(256);
    for (auto& x : v) x = rng.uniform() * 5.0;
    const Measure mu = to_measure(oracles::make_trace(v));
    double sum = 0.0;
    for (double m : mu.masses) sum += m;
    REQUIRE(sum == Catch::Approx(1.0).margin(1e-12));
    for (std::size_t i = 1; i < v.size(); ++i)
        REQUIRE((v[i] < v[i - 1]) == (mu.masses[i] < mu.masses[i - 1]));
}
