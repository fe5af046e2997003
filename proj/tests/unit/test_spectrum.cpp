#include <doctest.h>

#include "dlmac/errors.hpp"
#include "dlmac/rng.hpp"
#include "dlmac/spectrum.hpp"

#include <cmath>
#include <filesystem>
#include <sstream>

using namespace dlmac;

namespace {

RawTrace random_raw(std::size_t rows, std::size_t bands, std::uint64_t seed) {
    Rng rng(seed);
    RawTrace t;
    t.samples = Matrix(rows, bands);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t b = 0; b < bands; ++b) t.samples(r, b) = rng.uniform(-100.0, -40.0);
    return t;
}

// Integer-grid interpolation: slot k sits at 9k us, between samples
// floor(9k/100) and the next one.
double oracle_interp(const RawTrace& raw, std::size_t band, std::size_t k) {
    const std::size_t us = 9 * k;
    const std::size_t l = us / 100;
    if (l + 1 >= raw.length()) return raw.samples(raw.length() - 1, band);
    const double frac = static_cast<double>(us - 100 * l) / 100.0;
    const double a = raw.samples(l, band), b = raw.samples(l + 1, band);
    return a + (b - a) * frac;
}

} // namespace

TEST_CASE("upsampling factor is floor(Ts / Tslot)") {
    CHECK(upsampling_factor(100.0, 9.0) == 11);
    CHECK(upsampling_factor(9.0, 9.0) == 1);
    CHECK_THROWS_AS(upsampling_factor(5.0, 9.0), DimensionError);
}

TEST_CASE("linear interpolation") {
    CHECK(linear_interpolate(0.0, -80.0, 100.0, -60.0, 50.0) == doctest::Approx(-70.0));
    CHECK(linear_interpolate(0.0, -80.0, 100.0, -60.0, 0.0) == -80.0);
    // t = 9 between -80 and -60 over 100 us
    CHECK(linear_interpolate(0.0, -80.0, 100.0, -60.0, 9.0) == doctest::Approx(-78.2));
}

TEST_CASE("interpolate_time matches the integer-grid oracle and holds the last value") {
    const auto raw = random_raw(7, 21, 11);
    const auto up = interpolate_time(raw);
    REQUIRE(up.length() == 77);
    CHECK(up.sample_interval_us == 9.0);
    for (std::size_t k = 0; k < up.length(); ++k)
        for (std::size_t b = 0; b < 21; ++b) CHECK(up.samples(k, b) == doctest::Approx(oracle_interp(raw, b, k)).epsilon(1e-12));
    // rows at exact sample times reproduce the samples
    CHECK(up.samples(0, 3) == raw.samples(0, 3));
    // slots past 600 us hold the last sample
    CHECK(up.samples(76, 5) == raw.samples(6, 5));
}

TEST_CASE("interpolation needs two samples") {
    const auto raw = random_raw(1, 30, 1);
    CHECK_THROWS_AS(interpolate_time(raw), InsufficientDataError);
    CHECK_THROWS_AS(preprocess(raw), InsufficientDataError);
}

TEST_CASE("channel averaging over 21 sub-bands, full width") {
    const auto up = random_raw(20, 79, 5);
    const auto res = map_to_channels(up);
    REQUIRE(res.trace.n_channels() == 13);
    CHECK(res.partial_channels == std::vector<int>{13});
    CHECK(res.omitted_channels.empty());
    for (int ch = 1; ch <= 13; ++ch) {
        const std::size_t first = 5 * static_cast<std::size_t>(ch - 1);
        const std::size_t last = std::min<std::size_t>(first + 20, 78);
        for (std::size_t r = 0; r < up.length(); ++r) {
            double sum = 0.0;
            for (std::size_t b = first; b <= last; ++b) sum += up.samples(r, b);
            CHECK(res.trace.samples(r, ch - 1) == doctest::Approx(sum / static_cast<double>(last - first + 1)).epsilon(1e-12));
        }
    }
}

TEST_CASE("strict edge policy omits channel 13") {
    const auto up = random_raw(4, 79, 6);
    const auto res = map_to_channels(up, {AvgDomain::db, EdgePolicy::strict});
    CHECK(res.trace.n_channels() == 12);
    CHECK(res.omitted_channels == std::vector<int>{13});
}

TEST_CASE("narrow captures keep only covered channels") {
    const auto up = random_raw(3, 21, 7);
    const auto res = map_to_channels(up, {AvgDomain::db, EdgePolicy::strict});
    CHECK(res.trace.n_channels() == 1);
    CHECK(res.omitted_channels.size() == 12);
    // channel centre 2412 MHz sits at sub-band 10 (2402 + 10)
    CHECK(RawTrace::subband_freq_mhz(10) == ProcessedTrace::channel_center_mhz(1));
}

TEST_CASE("constant rows map to the same constant (both domains)") {
    Rng rng(3);
    RawTrace up;
    up.samples = Matrix(50, 79);
    for (std::size_t r = 0; r < 50; ++r) {
        const double v = rng.uniform(-100.0, -30.0);
        for (std::size_t b = 0; b < 79; ++b) up.samples(r, b) = v;
    }
    for (auto domain : {AvgDomain::db, AvgDomain::linear}) {
        const auto res = map_to_channels(up, {domain, EdgePolicy::truncate});
        for (std::size_t r = 0; r < 50; ++r)
            for (int c = 0; c < res.trace.n_channels(); ++c)
                CHECK(res.trace.samples(r, c) == doctest::Approx(up.samples(r, 0)).epsilon(1e-12));
    }
}

TEST_CASE("linear-domain averaging is the power mean") {
    RawTrace up;
    up.samples = Matrix(1, 21, -90.0);
    up.samples(0, 0) = -60.0;
    const auto res = map_to_channels(up, {AvgDomain::linear, EdgePolicy::strict});
    const double expect = 10.0 * std::log10((std::pow(10.0, -6.0) + 20.0 * std::pow(10.0, -9.0)) / 21.0);
    CHECK(res.trace.samples(0, 0) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("fused preprocess equals the two-step path exactly") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto raw = random_raw(30, 21 + 10 * seed, seed);
        for (auto edge : {EdgePolicy::strict, EdgePolicy::truncate}) {
            const ChannelMapOptions opt{AvgDomain::db, edge};
            const auto two = map_to_channels(interpolate_time(raw), opt);
            const auto one = preprocess(raw, opt);
            CHECK(one.trace.samples == two.trace.samples);
            CHECK(one.partial_channels == two.partial_channels);
            CHECK(one.omitted_channels == two.omitted_channels);
        }
    }
}

TEST_CASE("trace files round-trip exactly") {
    const auto dir = std::filesystem::temp_directory_path() / "dlmac_test_spectrum";
    std::filesystem::create_directories(dir);
    const auto raw = random_raw(12, 46, 9);
    save_raw_trace(raw, dir / "raw.csv");
    const auto raw2 = load_raw_trace(dir / "raw.csv");
    CHECK(raw2.samples == raw.samples);
    CHECK(raw2.sample_interval_us == 100.0);

    const auto proc = preprocess(raw).trace;
    save_processed_trace(proc, dir / "proc.csv");
    const auto proc2 = load_processed_trace(dir / "proc.csv");
    CHECK(proc2.samples == proc.samples);
    CHECK(proc2.slot_us == 9.0);
    std::filesystem::remove_all(dir);
}

TEST_CASE("malformed trace files are rejected") {
    {
        std::istringstream in("1,2,3\n");
        CHECK_THROWS_AS(parse_raw_trace(in), ParseError);
    }
    {
        std::istringstream in("# ts_us=100 nbands=5\n1,2,3,4,5\n");
        CHECK_THROWS_AS(parse_raw_trace(in), ParseError);
    }
    {
        std::ostringstream s;
        s << "# ts_us=100 nbands=21\n";
        for (int i = 0; i < 20; ++i) s << "-80,";
        s << "\n"; // one value short
        std::istringstream in(s.str());
        CHECK_THROWS_AS(parse_raw_trace(in), ParseError);
    }
    {
        std::istringstream in("# slot_us=9 channels=2\n-80,abc\n");
        CHECK_THROWS_AS(parse_processed_trace(in), ParseError);
    }
}

TEST_CASE("synthetic traces") {
    SynthScenario sc;
    sc.duration_samples = 200;
    sc.n_subbands = 46;
    InterfererSpec burst;
    burst.first_subband = 25;
    burst.last_subband = 45;
    burst.period_samples = 10;
    burst.duty = 0.3;
    burst.active_power_dbm = -60.0;
    sc.interferers = {burst};

    SUBCASE("periodic burst follows its period and leaves other bands at the floor") {
        const auto t = synthesize_trace(sc);
        const double on = 10.0 * std::log10(std::pow(10.0, -6.0) + std::pow(10.0, -9.5));
        const double off = 10.0 * std::log10(std::pow(10.0, -9.5) + std::pow(10.0, -15.0));
        for (std::size_t s = 0; s < 200; ++s) {
            CHECK(t.samples(s, 0) == -95.0);
            CHECK(t.samples(s, 30) == doctest::Approx(s % 10 < 3 ? on : off).epsilon(1e-12));
        }
    }
    SUBCASE("same seed, same trace; jitter changes with the seed") {
        sc.jitter_db = 1.0;
        const auto a = synthesize_trace(sc);
        const auto b = synthesize_trace(sc);
        CHECK(a.samples == b.samples);
        sc.seed = 2;
        CHECK(!(synthesize_trace(sc).samples == a.samples));
    }
    SUBCASE("csma-like on/off runs respect their bounds") {
        InterfererSpec c;
        c.pattern = InterfererPattern::csma_like;
        c.on_min_samples = 3;
        c.on_max_samples = 5;
        c.off_min_samples = 2;
        c.off_max_samples = 4;
        const auto sched = interferer_schedule(c, 5000, 4, 0);
        std::size_t s = 0;
        while (s < sched.size() && sched[s] < 0) ++s;
        while (s < sched.size()) {
            std::size_t on = 0, off = 0;
            while (s < sched.size() && sched[s] >= 0) ++on, ++s;
            while (s < sched.size() && sched[s] < 0) ++off, ++s;
            if (s >= sched.size()) break; // last run may be cut by the end
            CHECK(on >= 3);
            CHECK(on <= 5);
            CHECK(off >= 2);
            CHECK(off <= 4);
        }
    }
    SUBCASE("hopping interferer stays inside its range") {
        InterfererSpec h;
        h.pattern = InterfererPattern::frequency_hopping;
        h.first_subband = 5;
        h.last_subband = 15;
        h.hop_width = 3;
        h.dwell_samples = 4;
        const auto sched = interferer_schedule(h, 1000, 8, 0);
        for (int v : sched) {
            CHECK(v >= 5);
            CHECK(v + 3 - 1 <= 15);
        }
    }
    SUBCASE("invalid scenarios") {
        sc.interferers[0].last_subband = 46;
        CHECK_THROWS_AS(synthesize_trace(sc), ConfigError);
        sc.interferers[0].last_subband = 45;
        sc.interferers[0].duty = 0.0;
        CHECK_THROWS_AS(synthesize_trace(sc), ConfigError);
    }
}
