#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "mftk/rng.hpp"

using mftk::CounterRng;

TEST_CASE("counter rng is deterministic and stream-separated") {
    CounterRng a(42, 1);
    CounterRng b(42, 1);
    CounterRng c(42, 2);
    for (int i = 0; i < 100; ++i) {
        const auto va = a.next();
        REQUIRE(va == b.next());
        REQUIRE(va != c.next()); // equal values would be a 2^-64 fluke
    }
}

TEST_CASE("samples are position-addressable") {
    CounterRng r(7, 3);
    const double u5 = r.uniform_at(5);
    const double u2 = r.uniform_at(2);
    CounterRng fresh(7, 3);
    REQUIRE(fresh.uniform_at(2) == u2);
    REQUIRE(fresh.uniform_at(5) == u5);

    const CounterRng d1 = r.derive(9);
    const CounterRng d2 = CounterRng(7, 3).derive(9);
    REQUIRE(d1.at(0) == d2.at(0));
    REQUIRE(d1.at(0) != r.at(0));
}

TEST_CASE("uniform moments") {
    CounterRng r(1, 0);
    const int n = 1000000;
    double sum = 0.0, sum2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double u = r.uniform();
        REQUIRE(u > 0.0);
        REQUIRE(u < 1.0);
        sum += u;
        sum2 += u * u;
    }
    const double mean = sum / n;
    const double var = sum2 / n - mean * mean;
    REQUIRE(mean == Catch::Approx(0.5).margin(0.002));
    REQUIRE(var == Catch::Approx(1.0 / 12.0).margin(0.002));
}

TEST_CASE("normal moments") {
    CounterRng r(2, 0);
    const int n = 1000000;
    double sum = 0.0, sum2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double z = r.normal();
        sum += z;
        sum2 += z * z;
    }
    const double mean = sum / n;
    const double var = sum2 / n - mean * mean;
    REQUIRE(mean == Catch::Approx(0.0).margin(0.004));
    REQUIRE(var == Catch::Approx(1.0).margin(0.01));
}

TEST_CASE("poisson moments across both sampler branches") {
    for (double lambda : {0.4, 4.0, 25.0, 40.0, 400.0}) {
        CounterRng r(3, static_cast<std::uint64_t>(lambda * 100));
        const int n = 200000;
        double sum = 0.0, sum2 = 0.0;
        for (int i = 0; i < n; ++i) {
            const double k = static_cast<double>(r.poisson(lambda));
            sum += k;
            sum2 += k * k;
        }
        const double mean = sum / n;
        const double var = sum2 / n - mean * mean;
        // mean and variance both equal lambda; allow 4 standard errors
        const double se_mean = std::sqrt(lambda / n);
        REQUIRE(mean == Catch::Approx(lambda).margin(4.0 * se_mean + 1e-9));
        REQUIRE(var == Catch::Approx(lambda).epsilon(0.03));
    }
}

TEST_CASE("poisson edge cases") {
    CounterRng r(4, 0);
    REQUIRE(r.poisson(0.0) == 0);
    REQUIRE_THROWS_AS(r.poisson(-1.0), mftk::Error);
}
