#include <doctest.h>

#include "dlmac/errors.hpp"
#include "dlmac/rng.hpp"
#include "dlmac/simcore.hpp"

#include <cmath>

using namespace dlmac;

namespace {

// Piecewise-constant levels with noise on every channel.
ProcessedTrace random_trace(std::size_t slots, int channels, std::uint64_t seed, double lo = -100.0, double hi = -55.0) {
    Rng rng(seed);
    ProcessedTrace t;
    t.samples = Matrix(slots, static_cast<std::size_t>(channels));
    for (int c = 0; c < channels; ++c) {
        double level = rng.uniform(lo, hi);
        for (std::size_t s = 0; s < slots; ++s) {
            if (rng.bernoulli(0.004)) level = rng.uniform(lo, hi);
            t.samples(s, static_cast<std::size_t>(c)) = level + rng.uniform(-3.0, 3.0);
        }
    }
    return t;
}

NeuralModel constant_jcara(int mcs) {
    NeuralModel m(Architecture::mlp(360, {}, 10));
    std::fill(m.params().begin(), m.params().end(), 0.0);
    m.params()[360 * 10 + static_cast<std::size_t>(mcs_to_class(mcs))] = 5.0;
    m.info().task = TaskKind::jcara;
    m.info().channels = {6};
    m.info().normalization = {-100.0, -30.0};
    return m;
}

// Scores each channel by the sum of its K2 SINR features, so it follows the
// cleaner channel.
NeuralModel greedy_switch(std::vector<int> channels) {
    const std::size_t M = channels.size();
    NeuralModel m(Architecture::mlp(5 * M, {}, M));
    std::fill(m.params().begin(), m.params().end(), 0.0);
    for (std::size_t c = 0; c < M; ++c)
        for (std::size_t k = 0; k < 5; ++k) m.params()[(5 * c + k) * M + c] = 1.0;
    m.info().task = TaskKind::switch_channel;
    m.info().channels = std::move(channels);
    m.info().normalization = {-20.0, 60.0};
    m.info().rssi_min_dbm = -100.0;
    m.info().rssi_max_dbm = -50.0;
    return m;
}

std::uint64_t sum_bits(const SimReport& r) {
    std::uint64_t b = 0;
    for (const auto& o : r.log.txops) b += o.bits_delivered;
    return b;
}

void check_accounting(const SimReport& r, std::size_t buffer = 10) {
    CHECK(sum_bits(r) == r.total_bits);
    std::uint64_t interval_bits = 0, interval_slots = 0;
    for (const auto& iv : r.intervals) interval_bits += iv.bits, interval_slots += iv.slots;
    CHECK(interval_bits == r.total_bits);
    CHECK(interval_slots == r.run_slots);
    CHECK(r.max_buffer_occupancy <= buffer);
    CHECK(r.half_duplex_violations == 0);
    std::uint64_t dsum = 0;
    for (const auto& p : r.log.packets) {
        CHECK(p.delay_slots > 0);
        dsum += p.delay_slots;
    }
    CHECK(dsum == r.delay_sum);
    if (!r.log.packets.empty()) {
        const double mean = static_cast<double>(dsum) / static_cast<double>(r.log.packets.size());
        CHECK(std::abs(*r.mean_delay() - mean) <= 1e-12 * mean);
    } else {
        CHECK(!r.mean_delay().has_value());
    }
    for (const auto& o : r.log.txops) CHECK(o.success == (o.realized_mean_sinr >= McsLadder::standard().min_sinr_db(o.mcs)));
}

} // namespace

TEST_CASE("traffic source") {
    TrafficConfig cfg;
    SUBCASE("bounded buffer drops the overflow") {
        TrafficSource src(cfg);
        for (int i = 0; i < 15; ++i) src.offer(static_cast<std::uint64_t>(i));
        CHECK(src.backlog() == 10);
        CHECK(src.drops() == 5);
        CHECK(src.arrivals() == 15);
        CHECK(src.front_arrival(0) == 0);
        src.pop(3);
        CHECK(src.front_arrival(0) == 3);
        CHECK_THROWS(src.pop(8));
    }
    SUBCASE("a failed TXOP puts its packets back at the head") {
        TrafficSource src(cfg);
        for (int i = 0; i < 10; ++i) src.offer(static_cast<std::uint64_t>(i));
        const auto flight = src.take(4);
        CHECK(flight == std::vector<std::uint64_t>{0, 1, 2, 3});
        CHECK(src.backlog() == 6);
        for (int i = 10; i < 13; ++i) src.offer(static_cast<std::uint64_t>(i));
        CHECK(src.requeue_front(flight) == 3);
        CHECK(src.backlog() == 10);
        CHECK(src.front_arrival(0) == 0);
        CHECK(src.front_arrival(9) == 9);
        CHECK(src.drops() == 3);
    }
    SUBCASE("Poisson arrivals: 1e5 slots at 0.18 within 5 sigma of 18000") {
        cfg.buffer_capacity = 1u << 30;
        TrafficSource src(cfg);
        Rng rng(12);
        for (std::uint64_t s = 0; s < 100000; ++s) src.arrive(s, rng);
        CHECK(std::abs(static_cast<double>(src.arrivals()) - 18000.0) < 5.0 * std::sqrt(18000.0));
    }
    SUBCASE("validation") {
        cfg.buffer_capacity = 0;
        CHECK_THROWS_AS(TrafficSource{cfg}, ConfigError);
    }
}

TEST_CASE("TXOP capacity") {
    CHECK(txop_capacity_packets(5, 120, 12000) == 4);  // 52 * 1080 / 12000 = 4.68
    CHECK(txop_capacity_packets(0, 120, 12000) == 1);  // 0.585 rounds up to the minimum
    CHECK(txop_capacity_packets(8, 120, 12000) == 7);  // 7.02
    CHECK(txop_capacity_packets(3, 120, 12000) == 2);  // 2.34
}

TEST_CASE("resolve_txop") {
    ProcessedTrace t;
    t.samples = Matrix(400, 6, -77.0);
    LabelConfig lc;
    const auto ok = resolve_txop(t, 6, 10, 3, 9, lc, 12000);
    CHECK(ok.success);
    CHECK(ok.realized_mean_sinr == doctest::Approx(12.0));
    CHECK(ok.packets_carried == 2);
    CHECK(ok.bits_delivered == 24000);
    CHECK(ok.start_slot == 10);
    CHECK(ok.end_slot == 129);
    const auto bad = resolve_txop(t, 6, 10, 4, 9, lc, 12000);
    CHECK(!bad.success);
    CHECK(bad.bits_delivered == 0);
    const auto small = resolve_txop(t, 6, 10, 3, 1, lc, 12000);
    CHECK(small.packets_carried == 1);
    CHECK_THROWS_AS(resolve_txop(t, 6, 281, 3, 1, lc, 12000), InsufficientDataError);
    CHECK_NOTHROW(resolve_txop(t, 6, 280, 3, 1, lc, 12000));
}

TEST_CASE("polling cursor") {
    PollingCursor p(3);
    const std::vector<std::size_t> full{4, 4, 4};
    std::vector<std::size_t> order;
    for (int i = 0; i < 6; ++i) order.push_back(*p.grant(full));
    CHECK(order == std::vector<std::size_t>{0, 1, 2, 0, 1, 2});
    const std::vector<std::size_t> some{0, 3, 0};
    CHECK(*p.grant(some) == 1);
    CHECK(*p.grant(some) == 1);
    const std::vector<std::size_t> none{0, 0, 0};
    const auto before = p.position();
    CHECK(!p.grant(none).has_value());
    CHECK(p.position() == before);
}

TEST_CASE("OPT never fails and always picks the best feasible MCS") {
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        const auto trace = random_trace(60000, 6, seed);
        RunConfig cfg;
        cfg.policy = PolicyKind::opt;
        const auto r = run_simulation(trace, cfg, {}, seed);
        CHECK(r.failures == 0);
        CHECK(r.successes > 0);
        check_accounting(r);
        for (const auto& o : r.log.txops) {
            double sum = 0.0;
            for (std::uint64_t k = o.start_slot; k < o.start_slot + 120; ++k) sum += trace.samples(k, 5);
            const double sinr = -65.0 - sum / 120.0;
            int best = -1;
            for (int i = 0; i <= 8; ++i)
                if (sinr >= McsLadder::standard().min_sinr_db(i)) best = i;
            CHECK(o.mcs == best);
        }
    }
}

TEST_CASE("baselines") {
    SUBCASE("a medium always above -75 dBm keeps CSMA silent") {
        ProcessedTrace t;
        t.samples = Matrix(20000, 6, -70.0);
        for (auto p : {PolicyKind::csma_iwl, PolicyKind::csma_arf}) {
            RunConfig cfg;
            cfg.policy = p;
            const auto r = run_simulation(t, cfg, {}, 1);
            CHECK(r.total_bits == 0);
            CHECK(r.log.txops.empty());
            CHECK(r.throughput() == 0.0);
        }
    }
    SUBCASE("no traffic, no throughput, no delays") {
        const auto trace = random_trace(20000, 6, 4);
        RunConfig cfg;
        cfg.policy = PolicyKind::opt;
        cfg.traffic.lambda_per_slot = 0.0;
        const auto r = run_simulation(trace, cfg, {}, 1);
        CHECK(r.total_bits == 0);
        CHECK(!r.mean_delay().has_value());
    }
    SUBCASE("CSMA transmits only after an idle DIFS as the device sensed it") {
        const auto trace = random_trace(80000, 6, 5, -90.0, -60.0);
        RunConfig cfg;
        cfg.policy = PolicyKind::csma_iwl;
        const auto r = run_simulation(trace, cfg, {}, 3);
        REQUIRE(!r.log.txops.empty());
        check_accounting(r);
        for (const auto& o : r.log.txops) {
            // decision slot is start - 1; it and the DIFS before it were sensed idle
            for (std::uint64_t k = o.start_slot - 4; k < o.start_slot; ++k) CHECK(trace.samples(k, 5) <= -75.0);
        }
    }
    SUBCASE("ARF and IWL runs are reproducible and account exactly") {
        const auto trace = random_trace(80000, 6, 6, -95.0, -70.0);
        for (auto p : {PolicyKind::csma_iwl, PolicyKind::csma_arf}) {
            RunConfig cfg;
            cfg.policy = p;
            const auto a = run_simulation(trace, cfg, {}, 8);
            const auto b = run_simulation(trace, cfg, {}, 8);
            CHECK(report_to_csv(a) == report_to_csv(b));
            check_accounting(a);
        }
    }
}

TEST_CASE("DL policies with fixed-output models") {
    const auto trace = random_trace(50000, 6, 7, -100.0, -70.0);
    const auto mcs0 = constant_jcara(0);
    const auto idle = constant_jcara(-1);
    RunConfig cfg;
    SUBCASE("an always-idle model never transmits") {
        const auto r = run_simulation(trace, cfg, {&idle, nullptr}, 1);
        CHECK(r.log.txops.empty());
    }
    SUBCASE("an always-MCS0 model transmits back to back") {
        const auto r = run_simulation(trace, cfg, {&mcs0, nullptr}, 1);
        REQUIRE(r.log.txops.size() > 2);
        for (std::size_t i = 1; i < r.log.txops.size(); ++i)
            CHECK(r.log.txops[i].start_slot == r.log.txops[i - 1].end_slot + 2);
        for (const auto& o : r.log.txops) CHECK(o.mcs == 0);
        check_accounting(r);
    }
    SUBCASE("DL/CA + IWL and CSMA + DL/MCS run") {
        for (auto p : {PolicyKind::dlca_iwl, PolicyKind::csma_dlmcs}) {
            cfg.policy = p;
            const auto r = run_simulation(trace, cfg, {&mcs0, nullptr}, 2);
            check_accounting(r);
            CHECK(!r.log.txops.empty());
        }
    }
    SUBCASE("model problems") {
        CHECK_THROWS_AS(run_simulation(trace, cfg, {}, 1), ConfigError);
        auto other = mcs0;
        other.info().p_r_dbm = -60.0;
        CHECK_THROWS_AS(run_simulation(trace, cfg, {&other, nullptr}, 1), ModelMismatchError);
        other = mcs0;
        other.info().task = TaskKind::switch_channel;
        CHECK_THROWS_AS(run_simulation(trace, cfg, {&other, nullptr}, 1), ModelMismatchError);
    }
    SUBCASE("trace too short for warm-up plus run") {
        ProcessedTrace t;
        t.samples = Matrix(600, 6, -90.0);
        CHECK_THROWS_AS(run_simulation(t, cfg, {&mcs0, nullptr}, 1), InsufficientDataError);
    }
}

TEST_CASE("channel switching") {
    // channels 1 and 6 take turns being clean every 6000 slots
    ProcessedTrace t;
    const std::size_t L = 80000;
    t.samples = Matrix(L, 6, -90.0);
    Rng rng(3);
    for (std::size_t s = 0; s < L; ++s) {
        const bool first_clean = (s / 6000) % 2 == 0;
        t.samples(s, 0) = (first_clean ? -92.0 : -60.0) + rng.uniform(-1.0, 1.0);
        t.samples(s, 5) = (first_clean ? -60.0 : -92.0) + rng.uniform(-1.0, 1.0);
    }
    const auto jcara = constant_jcara(0);
    const auto sw = greedy_switch({1, 6});

    RunConfig cfg;
    cfg.switching.mode = SwitchMode::timer;
    cfg.switching.channels = {1, 6};
    cfg.switching.t_d_slots = 40;
    const auto r = run_simulation(t, cfg, {&jcara, &sw}, 5);
    check_accounting(r);
    CHECK(r.switches >= 5);
    CHECK(r.switch_evaluations <= r.run_slots / cfg.switching.t_c_slots + 1);
    // nothing starts inside a switch window
    for (auto sw_slot : r.log.switch_slots)
        for (const auto& o : r.log.txops) {
            const bool inside = o.start_slot > sw_slot && o.start_slot <= sw_slot + 40;
            CHECK(!inside);
        }
    // following the clean channel beats sitting on one
    RunConfig fixed;
    fixed.channel = 6;
    const auto stay = run_simulation(t, fixed, {&jcara, nullptr}, 5);
    CHECK(r.total_bits > stay.total_bits);

    SUBCASE("instant mode evaluates after every TXOP") {
        RunConfig inst = cfg;
        inst.policy = PolicyKind::dlmac_instant;
        const auto ri = run_simulation(t, inst, {&jcara, &sw}, 5);
        CHECK(ri.switch_evaluations == ri.log.txops.size());
        check_accounting(ri);
    }
    SUBCASE("mismatched switch channel set") {
        RunConfig bad = cfg;
        bad.switching.channels = {1, 11};
        ProcessedTrace wide;
        wide.samples = Matrix(20000, 11, -90.0);
        CHECK_THROWS_AS(run_simulation(wide, bad, {&jcara, &sw}, 5), ModelMismatchError);
    }
}

TEST_CASE("gateway") {
    const auto trace = random_trace(120000, 6, 11, -100.0, -70.0);
    RunConfig one;
    one.policy = PolicyKind::opt;
    RunConfig three = one;
    three.members = 3;
    const auto r1 = run_simulation(trace, one, {}, 2);
    const auto r3 = run_simulation(trace, three, {}, 2);
    check_accounting(r3);
    REQUIRE(r3.members.size() == 3);
    // saturated buffers: the gateway makes the same decisions either way
    std::uint64_t bits = 0;
    for (const auto& m : r3.members) bits += m.bits;
    CHECK(bits == r3.total_bits);
    CHECK(static_cast<double>(r3.total_bits) == doctest::Approx(static_cast<double>(r1.total_bits)).epsilon(0.01));
    // round-robin grants once every buffer has filled
    for (std::size_t i = 3; i < r3.log.txops.size(); ++i)
        CHECK(r3.log.txops[i].member == (r3.log.txops[i - 1].member + 1) % 3);
    for (const auto& m : r3.members) {
        const double ratio = *m.mean_delay() / *r1.mean_delay();
        // roughly three times; the acceptance run pins the band
        CHECK(ratio > 2.0);
        CHECK(ratio < 4.0);
    }
}

TEST_CASE("run config validation") {
    RunConfig cfg;
    cfg.members = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.members = 1;
    cfg.rssi_min_dbm = -90.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.rssi_max_dbm = -95.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    CHECK(RunConfig{}.warmup_slots() == 600);
}
