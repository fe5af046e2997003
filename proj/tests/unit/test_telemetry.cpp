#include <doctest.h>

#include "dlmac/errors.hpp"
#include "dlmac/telemetry.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>

using namespace dlmac;

namespace {

TxopOutcome txop(std::uint64_t end, bool ok, std::uint64_t bits, std::uint32_t member = 0) {
    TxopOutcome o;
    o.start_slot = end - 119;
    o.end_slot = end;
    o.channel = 6;
    o.mcs = 3;
    o.success = ok;
    o.bits_delivered = ok ? bits : 0;
    o.packets_carried = static_cast<std::uint32_t>(bits / 12000);
    o.member = member;
    return o;
}

SimReport sample_report(std::string label, std::uint64_t seed, double scale) {
    SimReport r;
    r.label = std::move(label);
    r.seed = seed;
    r.run_slots = 3000;
    r.interval_slots = 1000;
    r.log.begin_slot = 500;
    r.log.run_slots = 3000;
    r.members.resize(1);
    const auto k = static_cast<std::uint64_t>(scale);
    for (std::uint64_t i = 0; i < k; ++i) {
        const std::uint64_t end = 700 + 300 * i;
        r.log.txops.push_back(txop(end, true, 24000));
        r.log.packets.push_back({end, 50 + 10 * i, 0});
        r.log.packets.push_back({end, 80 + 10 * i, 0});
    }
    r.log.txops.push_back(txop(3400, false, 12000));
    r.log.drop_slots = {900, 3499};
    r.log.switch_slots = {1600};
    finalize_report(r);
    return r;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

} // namespace

TEST_CASE("aggregate: worked examples") {
    RunLog log;
    log.begin_slot = 0;
    log.run_slots = 1000;
    SUBCASE("12000 bits in 1000 slots is 12 bits per slot") {
        log.txops.push_back(txop(500, true, 12000));
        const auto iv = aggregate(log, 1000);
        REQUIRE(iv.size() == 1);
        CHECK(iv[0].throughput() == 12.0);
    }
    SUBCASE("delays 100 and 300 average to 200") {
        log.packets = {{400, 100, 0}, {800, 300, 0}};
        CHECK(*aggregate(log, 1000)[0].mean_delay() == 200.0);
    }
    SUBCASE("no delivery leaves the delay absent, not zero") {
        log.txops.push_back(txop(500, false, 12000));
        const auto iv = aggregate(log, 1000);
        CHECK(!iv[0].mean_delay().has_value());
        CHECK(iv[0].failures == 1);
        CHECK(iv[0].throughput() == 0.0);
    }
    SUBCASE("events outside the run are rejected") {
        log.packets = {{1000, 5, 0}};
        CHECK_THROWS_AS(aggregate(log, 1000), DimensionError);
        CHECK_THROWS_AS(aggregate(RunLog{}, 0), ConfigError);
    }
}

TEST_CASE("intervals tile the run") {
    for (std::uint64_t run : {1ULL, 999ULL, 1000ULL, 1001ULL, 7777ULL}) {
        RunLog log;
        log.begin_slot = 123;
        log.run_slots = run;
        const auto iv = aggregate(log, 1000);
        CHECK(iv.size() == (run + 999) / 1000);
        std::uint64_t next = 123, total = 0;
        for (std::size_t i = 0; i < iv.size(); ++i) {
            CHECK(iv[i].index == i);
            CHECK(iv[i].begin_slot == next);
            CHECK(iv[i].slots <= 1000);
            next += iv[i].slots;
            total += iv[i].slots;
        }
        CHECK(total == run);
    }
}

TEST_CASE("finalize_report sums the log") {
    const auto r = sample_report("x", 1, 5);
    REQUIRE(r.intervals.size() == 3);
    CHECK(r.total_bits == 5 * 24000);
    CHECK(r.delivered_packets == 10);
    CHECK(r.successes == 5);
    CHECK(r.failures == 1);
    CHECK(r.switches == 1);
    CHECK(r.drops == 2);
    CHECK(r.throughput() == doctest::Approx(120000.0 / 3000.0));
    std::uint64_t d = 0;
    for (const auto& p : r.log.packets) d += p.delay_slots;
    CHECK(r.delay_sum == d);
    CHECK(*r.mean_delay() == doctest::Approx(static_cast<double>(d) / 10.0));
    std::uint64_t bits = 0;
    for (const auto& iv : r.intervals) bits += iv.bits;
    CHECK(bits == r.total_bits);
    CHECK(r.intervals[0].switches == 0);
    CHECK(r.intervals[1].switches == 1);
    CHECK(r.intervals[2].drops == 1);
}

TEST_CASE("run CSV round trip") {
    auto r = sample_report("dlmac[switch.t_d:20]", 4, 6);
    const auto text = report_to_csv(r);
    const auto back = report_from_csv(text);
    CHECK(back.label == r.label);
    CHECK(back.seed == 4);
    CHECK(back.total_bits == r.total_bits);
    CHECK(back.delay_sum == r.delay_sum);
    CHECK(back.intervals.size() == r.intervals.size());
    CHECK(back.members.size() == r.members.size());
    CHECK(report_to_csv(back) == text);
    CHECK_THROWS_AS(report_from_csv(""), ParseError);
    CHECK_THROWS_AS(report_from_csv(text.substr(0, text.size() / 2)), ParseError);
}

TEST_CASE("mean_std") {
    const std::vector<double> v{2, 4, 4, 4, 5, 5, 7, 9};
    const auto m = mean_std(v);
    CHECK(m.mean == 5.0);
    CHECK(m.n == 8);
    // sample standard deviation: sqrt(32 / 7)
    CHECK(m.stddev == doctest::Approx(std::sqrt(32.0 / 7.0)));
    const std::vector<double> one{3.0};
    CHECK(mean_std(one).stddev == 0.0);
    CHECK(mean_std(std::span<const double>{}).n == 0);
}

TEST_CASE("summaries group by label in first-seen order") {
    std::vector<SimReport> rs{sample_report("b", 1, 4), sample_report("a", 1, 6), sample_report("b", 2, 8)};
    const auto g = summarize(rs);
    REQUIRE(g.size() == 2);
    CHECK(g[0].label == "b");
    CHECK(g[0].seeds == std::vector<std::uint64_t>{1, 2});
    const std::vector<double> tp{rs[0].throughput(), rs[2].throughput()};
    CHECK(g[0].throughput.mean == doctest::Approx(mean_std(tp).mean));
    CHECK(g[0].throughput.stddev == doctest::Approx(mean_std(tp).stddev));
    CHECK(g[0].intervals.size() == 3);
    CHECK(summary_csv(g).find("\nb,") != std::string::npos);
    CHECK(!intervals_csv(g).empty());
}

TEST_CASE("SVG error bars span three standard deviations") {
    std::vector<SimReport> rs{sample_report("p", 1, 2), sample_report("p", 2, 8)};
    const auto g = summarize(rs);
    const auto svg = render_svg(g, PlotMetric::throughput);
    CHECK(svg.rfind("<svg", 0) == 0);
    CHECK(svg.find("</svg>") != std::string::npos);
    CHECK(svg.find("3 sigma") != std::string::npos);
    // Each bar is a vertical line; with a 340 px plot height and the axis top
    // at 1.05 * max(mean + 3 sigma), an unclamped bar is 6 sigma tall.
    const std::regex bar(R"re(<line x1="([0-9.]+)" y1="([0-9.]+)" x2="\1" y2="([0-9.]+)" stroke="#)re");
    std::vector<double> spans;
    for (auto it = std::sregex_iterator(svg.begin(), svg.end(), bar); it != std::sregex_iterator(); ++it)
        spans.push_back(std::stod((*it)[2]) - std::stod((*it)[3]));
    const auto& iv = g[0].intervals;
    REQUIRE(spans.size() == iv.size());
    double ymax = 0.0;
    for (const auto& i : iv) ymax = std::max(ymax, i.throughput.mean + 3.0 * i.throughput.stddev);
    ymax *= 1.05;
    std::size_t checked = 0;
    for (std::size_t i = 0; i < iv.size(); ++i) {
        if (iv[i].throughput.mean < 3.0 * iv[i].throughput.stddev) continue; // lower end clamped at 0
        CHECK(spans[i] == doctest::Approx(6.0 * iv[i].throughput.stddev * 340.0 / ymax).epsilon(1e-3));
        ++checked;
    }
    CHECK(checked >= 1);
    CHECK(!render_svg(g, PlotMetric::delay).empty());
}

TEST_CASE("emitted files are byte-identical across calls and reload") {
    const auto dir = std::filesystem::temp_directory_path() / "dlmac_test_telemetry";
    std::filesystem::remove_all(dir);
    std::vector<SimReport> rs{sample_report("dlmac", 1, 5), sample_report("csma+iwl", 1, 3), sample_report("dlmac", 2, 6)};
    emit_report(rs, dir / "a");
    emit_report(rs, dir / "b");
    for (const char* f : {"summary.csv", "intervals.csv", "plots/throughput.svg", "plots/delay.svg", "runs/index.txt",
                          "runs/dlmac_seed1.csv"})
        CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));

    const auto back = load_reports(dir / "a" / "runs");
    REQUIRE(back.size() == 3);
    CHECK(back[1].label == "csma+iwl");
    emit_summary(back, dir / "c");
    CHECK(slurp(dir / "c" / "summary.csv") == slurp(dir / "a" / "summary.csv"));
    CHECK(slurp(dir / "c" / "intervals.csv") == slurp(dir / "a" / "intervals.csv"));

    CHECK_THROWS_AS(emit_summary(std::vector<SimReport>{}, dir / "d"), EmptyOutputError);
    CHECK_THROWS_AS(load_reports(dir / "missing"), MissingInputError);
    std::filesystem::remove_all(dir);
}

TEST_CASE("summary table lists every group") {
    std::vector<SimReport> rs{sample_report("dlmac", 1, 5), sample_report("opt", 1, 9)};
    const auto t = summary_table(summarize(rs));
    CHECK(t.find("dlmac") != std::string::npos);
    CHECK(t.find("opt") != std::string::npos);
}
