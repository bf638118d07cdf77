#include "rapper/trace.hpp"

#include <doctest.h>

#include <random>
#include <sstream>

using namespace rapper;

namespace {

TraceSeries random_series(std::uint64_t seed, std::size_t n, int interval_ms = 10) {
    std::mt19937_64 rng(seed);
    TraceSeries series;
    series.interval_ms = interval_ms;
    for (std::size_t i = 0; i < n; ++i) {
        Sample s;
        s.t_ms = static_cast<std::int64_t>(i) * interval_ms;
        for (int e = 0; e < kEventCount; ++e)
            s.counts[e] = static_cast<std::int64_t>(rng() % 1000000);
        series.samples.push_back(s);
    }
    return series;
}

std::string emit_to_string(const TraceSeries& series) {
    std::ostringstream out;
    emit_trace(series, out);
    return out.str();
}

TraceSeries parse_from_string(const std::string& text) {
    std::istringstream in(text);
    return parse_trace(in);
}

}  // namespace

TEST_CASE("parse_trace reads header and rows") {
    const std::string text =
        "# rapper-trace v1 interval_ms=10\n"
        "t_ms,instructions,cache_references,cache_misses,branches,branch_misses\n"
        "0,100,50,5,60,6\n"
        "10,101,51,6,61,7\n"
        "20,102,52,7,62,8\n";
    TraceSeries series = parse_from_string(text);
    CHECK(series.interval_ms == 10);
    REQUIRE(series.samples.size() == 3);
    CHECK(series.samples[0].instructions() == 100);
    CHECK(series.samples[2].branch_misses() == 8);
}

TEST_CASE("parse_trace reports row and column for negative counts") {
    const std::string text =
        "# rapper-trace v1 interval_ms=10\n"
        "t_ms,instructions,cache_references,cache_misses,branches,branch_misses\n"
        "0,100,50,5,60,6\n"
        "10,101,51,6,-4,7\n";
    try {
        parse_from_string(text);
        FAIL("expected TraceError");
    } catch (const TraceError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("row 1") != std::string::npos);
        CHECK(msg.find("branches") != std::string::npos);
    }
}

TEST_CASE("parse_trace rejects malformed input") {
    CHECK_THROWS_AS(parse_from_string("garbage\n"), TraceError);
    CHECK_THROWS_AS(parse_from_string("# rapper-trace v1 interval_ms=abc\n"), TraceError);
    CHECK_THROWS_AS(
        parse_from_string("# rapper-trace v1 interval_ms=10\nwrong,columns\n"), TraceError);
    // non-monotonic timestamps
    CHECK_THROWS_AS(parse_from_string(
                        "# rapper-trace v1 interval_ms=10\n"
                        "t_ms,instructions,cache_references,cache_misses,branches,"
                        "branch_misses\n"
                        "10,1,1,1,1,1\n"
                        "10,1,1,1,1,1\n"),
                    TraceError);
    // non-numeric field names its position
    try {
        parse_from_string(
            "# rapper-trace v1 interval_ms=10\n"
            "t_ms,instructions,cache_references,cache_misses,branches,branch_misses\n"
            "0,1,x,1,1,1\n");
        FAIL("expected TraceError");
    } catch (const TraceError& e) {
        CHECK(std::string(e.what()).find("cache_references") != std::string::npos);
    }
}

TEST_CASE("emit_trace writes canonical files") {
    TraceSeries empty;
    empty.interval_ms = 10;
    CHECK(emit_to_string(empty) ==
          "# rapper-trace v1 interval_ms=10\n"
          "t_ms,instructions,cache_references,cache_misses,branches,branch_misses\n");

    TraceSeries one = random_series(1, 1);
    const std::string text = emit_to_string(one);
    CHECK(std::count(text.begin(), text.end(), '\n') == 3);
}

TEST_CASE("parse/emit round-trip is the identity on canonical files") {
    for (std::uint64_t seed : {7ULL, 8ULL, 9ULL}) {
        TraceSeries series = random_series(seed, 500);
        const std::string text = emit_to_string(series);
        CHECK(emit_to_string(parse_from_string(text)) == text);
    }
}

TEST_CASE("sliding_windows counts and coverage") {
    TraceSeries series = random_series(3, 100);
    auto one = sliding_windows(series, 100, 1);
    CHECK(one.size() == 1);

    series = random_series(3, 105);
    auto six = sliding_windows(series, 100, 1);
    REQUIRE(six.size() == 6);
    CHECK(six.back().start_index == 5);

    CHECK_THROWS_AS(sliding_windows(random_series(1, 50), 100, 1), TraceError);
}

TEST_CASE("sliding_windows count formula over random (n, w, stride)") {
    std::mt19937_64 rng(42);
    for (int trial = 0; trial < 50; ++trial) {
        const int w = 1 + static_cast<int>(rng() % 40);
        const int n = w + static_cast<int>(rng() % 100);
        const int stride = 1 + static_cast<int>(rng() % 10);
        auto windows = sliding_windows(random_series(trial, static_cast<std::size_t>(n)), w,
                                       stride);
        CHECK(windows.size() == static_cast<std::size_t>((n - w) / stride + 1));
        for (std::size_t k = 0; k < windows.size(); ++k)
            CHECK(windows[k].start_index == k * static_cast<std::size_t>(stride));
    }
}

TEST_CASE("non-overlapping windows reconstruct the series") {
    TraceSeries series = random_series(11, 60);
    auto windows = sliding_windows(series, 20, 20);
    REQUIRE(windows.size() == 3);
    for (std::size_t k = 0; k < windows.size(); ++k)
        for (int i = 0; i < 20; ++i)
            for (int e = 0; e < kEventCount; ++e)
                CHECK(windows[k].values(i, e) ==
                      static_cast<double>(series.samples[k * 20 + i].counts[e]));
}

TEST_CASE("window default spans one second at the default cadence") {
    CHECK(kDefaultWindowLength * kDefaultIntervalMs == 1000);
}

TEST_CASE("gap detection marks windows spanning a missing interval") {
    TraceSeries series = random_series(5, 30);
    for (std::size_t i = 15; i < series.samples.size(); ++i)
        series.samples[i].t_ms += 100;  // gap between sample 14 and 15
    auto windows = sliding_windows(series, 10, 1);
    CHECK(windows[0].spans_gap == false);
    CHECK(windows[6].spans_gap == true);   // covers samples 6..15
    CHECK(windows[14].spans_gap == true);  // covers samples 14..23
    CHECK(windows[15].spans_gap == false);
}

TEST_CASE("fit_normalizer degenerate and constant inputs") {
    Window zeros;
    zeros.values = Eigen::MatrixXd::Zero(10, kEventCount);
    NormStats stats = fit_normalizer({zeros});
    CHECK(stats.mean.isZero());
    CHECK(stats.scale.isOnes());

    Window constant;
    constant.values = Eigen::MatrixXd::Constant(10, kEventCount, 3.5);
    stats = fit_normalizer({constant});
    CHECK(stats.mean.isApproxToConstant(3.5));
    CHECK(stats.scale.isOnes());

    CHECK_THROWS_AS(fit_normalizer({}), TraceError);
}

TEST_CASE("fit_normalizer matches two-pass statistics oracle") {
    std::mt19937_64 rng(99);
    std::vector<Window> windows;
    for (int k = 0; k < 4; ++k) {
        Window w;
        w.values.resize(25, kEventCount);
        for (int i = 0; i < 25; ++i)
            for (int e = 0; e < kEventCount; ++e)
                w.values(i, e) = static_cast<double>(rng() % 10000) / 7.0;
        windows.push_back(w);
    }
    NormStats stats = fit_normalizer(windows);

    // independent two-pass computation, plain loops
    for (int e = 0; e < kEventCount; ++e) {
        double sum = 0.0;
        std::size_t n = 0;
        for (const auto& w : windows)
            for (int i = 0; i < 25; ++i) {
                sum += w.values(i, e);
                ++n;
            }
        const double mean = sum / static_cast<double>(n);
        double sq = 0.0;
        for (const auto& w : windows)
            for (int i = 0; i < 25; ++i) sq += (w.values(i, e) - mean) * (w.values(i, e) - mean);
        const double sd = std::sqrt(sq / static_cast<double>(n));
        CHECK(stats.mean(e) == doctest::Approx(mean).epsilon(1e-12));
        CHECK(stats.scale(e) == doctest::Approx(sd).epsilon(1e-12));
    }
}

TEST_CASE("normalize identity, zeroing, and inverse") {
    Window w;
    w.values.resize(8, kEventCount);
    std::mt19937_64 rng(1);
    for (int i = 0; i < 8; ++i)
        for (int e = 0; e < kEventCount; ++e)
            w.values(i, e) = static_cast<double>(rng() % 1000);

    NormStats identity;
    identity.mean = Eigen::VectorXd::Zero(kEventCount);
    identity.scale = Eigen::VectorXd::Ones(kEventCount);
    CHECK((normalize(w, identity).values.array() == w.values.array()).all());

    NormStats stats = fit_normalizer({w});
    Window constant;
    constant.values.resize(4, kEventCount);
    constant.values.rowwise() = stats.mean.transpose();
    CHECK(normalize(constant, stats).values.isZero(1e-12));

    Window back = denormalize(normalize(w, stats), stats);
    CHECK((back.values - w.values).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("normalization is an affine map") {
    std::mt19937_64 rng(2);
    NormStats stats;
    stats.mean = Eigen::VectorXd::Random(kEventCount) * 10.0;
    stats.scale = Eigen::VectorXd::Random(kEventCount).cwiseAbs() + Eigen::VectorXd::Ones(5);
    for (int trial = 0; trial < 10; ++trial) {
        Window a, b;
        a.values = Eigen::MatrixXd::Random(6, kEventCount);
        b.values = Eigen::MatrixXd::Random(6, kEventCount);
        const double alpha = static_cast<double>(rng() % 100) / 10.0;
        Window mix;
        // affine: N(a + alpha*(b-a)) = N(a) + alpha*(N(b) - N(a))
        mix.values = a.values + alpha * (b.values - a.values);
        Eigen::MatrixXd lhs = normalize(mix, stats).values;
        Eigen::MatrixXd rhs = normalize(a, stats).values +
                              alpha * (normalize(b, stats).values - normalize(a, stats).values);
        CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-9);
    }
}

TEST_CASE("cross-event inconsistency is flagged, not rejected") {
    Sample s;
    s.counts[1] = 10;  // cache references
    s.counts[2] = 20;  // cache misses exceed references
    s.counts[3] = 10;
    s.counts[4] = 5;
    CHECK_FALSE(s.consistent());
    const std::string text =
        "# rapper-trace v1 interval_ms=10\n"
        "t_ms,instructions,cache_references,cache_misses,branches,branch_misses\n"
        "0,1,10,20,10,5\n";
    TraceSeries series = parse_from_string(text);  // kept, no throw
    CHECK(series.samples.size() == 1);
}
