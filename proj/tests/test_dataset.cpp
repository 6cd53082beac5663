#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <random>

#include "srf/dataset.hpp"
#include "test_util.hpp"

using namespace srf;
using test::random_array;

namespace {

TimeSeries series_of(std::size_t rows, std::size_t d, std::uint64_t seed = 5) {
    std::mt19937_64 rng(seed);
    return TimeSeries{random_array({rows, d}, rng), 0.3, "test"};
}

}  // namespace

TEST_CASE("split boundaries follow floor of cumulative fractions") {
    auto s10 = split_series(series_of(10, 2), {0.6, 0.2, 0.2});
    CHECK(s10[0].length() == 6);
    CHECK(s10[1].length() == 2);
    CHECK(s10[2].length() == 2);

    auto s11 = split_series(series_of(11, 2), {0.6, 0.2, 0.2});
    CHECK(s11[0].length() == 6);  // floor(6.6)
    CHECK(s11[1].length() == 2);  // floor(8.8) - 6
    CHECK(s11[2].length() == 3);
}

TEST_CASE("reassembling the splits reproduces the source exactly") {
    TimeSeries ts = series_of(23, 3);
    auto parts = split_series(ts, {0.6, 0.2, 0.2});
    std::vector<double> glued;
    for (const auto& p : parts)
        glued.insert(glued.end(), p.values.data.begin(), p.values.data.end());
    REQUIRE(glued.size() == ts.values.data.size());
    CHECK(std::memcmp(glued.data(), ts.values.data.data(), glued.size() * sizeof(double)) == 0);
}

TEST_CASE("split validation") {
    CHECK_THROWS_AS(split_series(series_of(10, 1), {0.5, 0.2, 0.2}), std::invalid_argument);
    CHECK_THROWS_AS(split_series(series_of(10, 1), {0.6, -0.2, 0.6}), std::invalid_argument);
    // a segment shorter than k + l cannot form a single pair
    CHECK_THROWS_WITH_AS(split_series(series_of(20, 1), {0.6, 0.2, 0.2}, 11),
                         doctest::Contains("at least 11"), std::invalid_argument);
}

TEST_CASE("windows enumerate the sliding pairs in order") {
    TimeSeries ts{Array::matrix(5, 1, {10, 11, 12, 13, 14}), 1.0, "tiny"};
    WindowedDataset ds = build_windows(ts, 2, 1);
    REQUIRE(ds.size() == 3);  // N = T - l - k + 1
    // first pair covers source rows 1..2 and targets row 3 in 1-based terms
    CHECK(ds.windows.data[0] == 10);
    CHECK(ds.windows.data[1] == 11);
    CHECK(ds.targets.data[0] == 12);
    CHECK(ds.index_map[0] == 1);
    CHECK(ds.index_map[2] == 3);
    CHECK(ds.targets.data[2] == 14);
}

TEST_CASE("k = 1, l = 1 degenerates to a one-step dataset") {
    TimeSeries ts = series_of(40, 2);
    WindowedDataset ds = build_windows(ts, 1, 1);
    CHECK(ds.size() == 39);
}

TEST_CASE("window/target alignment holds across random shapes") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t T = 12 + rng() % 40;
        const std::size_t d = 1 + rng() % 4;
        const std::size_t k = 1 + rng() % 5;
        const std::size_t l = 1 + rng() % 3;
        if (T < k + l) continue;
        TimeSeries ts = series_of(T, d, rng());
        WindowedDataset ds = build_windows(ts, k, l);
        CHECK(ds.size() == T - l - k + 1);
        for (std::size_t t = 0; t < ds.size(); ++t) {
            const std::size_t last = ds.index_map[t];
            for (std::size_t c = 0; c < d; ++c) {
                CHECK(ds.target_row(t)[c] == ts.row(last + l)[c]);
                CHECK(ds.window_flat(t)[(k - 1) * d + c] == ts.row(last)[c]);
                CHECK(ds.window_flat(t)[c] == ts.row(last + 1 - k)[c]);
            }
        }
    }
}

TEST_CASE("too-short series are rejected with the required minimum") {
    CHECK_THROWS_WITH_AS(build_windows(series_of(10, 1), 8, 3), doctest::Contains("k + l = 11"),
                         std::invalid_argument);
}

TEST_CASE("normalizer uses the population convention") {
    TimeSeries ts{Array::matrix(3, 1, {1, 2, 3}), 1.0, "tiny"};
    Normalizer norm = fit_normalizer(ts);
    CHECK(norm.mean.data[0] == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(norm.std.data[0] == doctest::Approx(std::sqrt(2.0 / 3.0)).epsilon(1e-15));
}

TEST_CASE("standardized training data has mean 0 and std 1") {
    TimeSeries ts = series_of(500, 3);
    Normalizer norm = fit_normalizer(ts);
    TimeSeries scaled = norm.apply(ts);
    for (std::size_t c = 0; c < 3; ++c) {
        double mean = 0.0, var = 0.0;
        for (std::size_t t = 0; t < scaled.length(); ++t) mean += scaled.values.at(t, c);
        mean /= static_cast<double>(scaled.length());
        for (std::size_t t = 0; t < scaled.length(); ++t) {
            const double v = scaled.values.at(t, c) - mean;
            var += v * v;
        }
        var /= static_cast<double>(scaled.length());
        CHECK(std::abs(mean) < 1e-9);
        CHECK(std::abs(std::sqrt(var) - 1.0) < 1e-9);
    }
}

TEST_CASE("invert(apply(x)) round-trips within 1e-12") {
    TimeSeries ts = series_of(100, 2);
    Normalizer norm = fit_normalizer(ts);
    Array round = norm.invert(norm.apply(ts.values));
    for (std::size_t i = 0; i < round.numel(); ++i)
        CHECK(std::abs(round.data[i] - ts.values.data[i]) < 1e-12);
}

TEST_CASE("zero-variance components are rejected by name") {
    TimeSeries ts{Array::matrix(3, 2, {1, 7, 2, 7, 3, 7}), 1.0, "flat"};
    CHECK_THROWS_WITH_AS(fit_normalizer(ts), doctest::Contains("component 1"),
                         std::invalid_argument);
}

TEST_CASE("normalizer statistics never leak from validation or test rows") {
    TimeSeries ts = series_of(100, 2, 17);
    auto splits = split_series(ts, {0.6, 0.2, 0.2});
    Normalizer base = fit_normalizer(splits[0]);

    // perturb the val/test region of the source; the fitted stats must not move
    TimeSeries tampered = ts;
    for (std::size_t t = 60; t < 100; ++t)
        for (std::size_t c = 0; c < 2; ++c) tampered.values.at(t, c) += 1000.0;
    Normalizer after = fit_normalizer(split_series(tampered, {0.6, 0.2, 0.2})[0]);
    CHECK(std::memcmp(base.mean.data.data(), after.mean.data.data(), 2 * sizeof(double)) == 0);
    CHECK(std::memcmp(base.std.data.data(), after.std.data.data(), 2 * sizeof(double)) == 0);
}

TEST_CASE("time series files round-trip losslessly") {
    TimeSeries ts = series_of(37, 3, 23);
    ts.dt_record = 0.3;
    ts.origin = "lorenz63-paper";
    const std::string path = "/tmp/srf_test_series.ts";
    write_timeseries(path, ts);
    TimeSeries back = read_timeseries(path);
    CHECK(back.dim() == 3);
    CHECK(back.dt_record == ts.dt_record);
    CHECK(back.origin == ts.origin);
    REQUIRE(back.values.data.size() == ts.values.data.size());
    CHECK(std::memcmp(back.values.data.data(), ts.values.data.data(),
                      ts.values.data.size() * sizeof(double)) == 0);
    std::remove(path.c_str());
}

TEST_CASE("malformed series files are rejected") {
    const std::string path = "/tmp/srf_test_bad.ts";
    {
        std::FILE* f = std::fopen(path.c_str(), "w");
        std::fputs("2 0.3 demo\n1.0 2.0\n3.0\n", f);  // ragged body
        std::fclose(f);
    }
    CHECK_THROWS_AS(read_timeseries(path), std::runtime_error);
    CHECK_THROWS_AS(read_timeseries("/tmp/srf_does_not_exist.ts"), std::runtime_error);
    std::remove(path.c_str());
}

TEST_CASE("time series validation catches non-finite values") {
    TimeSeries ts{Array::matrix(2, 1, {1.0, std::nan("")}), 1.0, "nan"};
    CHECK_THROWS_AS(validate_timeseries(ts), std::invalid_argument);
}
