#include <doctest.h>

#include "dlmac/errors.hpp"
#include "dlmac/policies.hpp"
#include "dlmac/rng.hpp"

#include <deque>
#include <set>

using namespace dlmac;

namespace {

// Counter oracle for ARF: replay the classic up/down rule.
std::vector<int> arf_oracle(const std::vector<bool>& outcomes, int start) {
    std::vector<int> rates;
    int mcs = start, ups = 0, downs = 0;
    for (bool ok : outcomes) {
        if (ok) {
            downs = 0;
            if (++ups == 10) mcs = std::min(8, mcs + 1), ups = 0;
        } else {
            ups = 0;
            if (++downs == 2) mcs = std::max(0, mcs - 1), downs = 0;
        }
        rates.push_back(mcs);
    }
    return rates;
}

NeuralModel biased_model(TaskKind task, std::size_t inputs, std::size_t classes, std::size_t favourite) {
    NeuralModel m(Architecture::mlp(inputs, {}, classes));
    std::fill(m.params().begin(), m.params().end(), 0.0);
    m.params()[inputs * classes + favourite] = 5.0;
    m.info().task = task;
    m.info().normalization = {-100.0, -30.0};
    return m;
}

} // namespace

TEST_CASE("CSMA: idle channel and zero backoff transmit after exactly DIFS") {
    CsmaConfig cfg;
    cfg.cw_min = 1;
    cfg.cw_max = 1;
    CsmaAccess csma(cfg);
    Rng rng(1);
    CHECK(!csma.step(false, rng));
    CHECK(!csma.step(false, rng));
    CHECK(!csma.step(false, rng));
    CHECK(csma.step(false, rng));
}

TEST_CASE("CSMA: busy slots freeze the counter and restart DIFS") {
    CsmaConfig cfg;
    CsmaAccess csma(cfg);
    Rng rng(5);
    for (int i = 0; i < 4; ++i) csma.step(false, rng);
    REQUIRE(csma.phase() == CsmaAccess::Phase::backoff);
    const auto counter = csma.backoff_counter();
    if (counter > 1) {
        csma.step(false, rng);
        CHECK(csma.backoff_counter() == counter - 1);
        csma.step(true, rng);
        CHECK(csma.backoff_counter() == counter - 1);
        CHECK(csma.phase() == CsmaAccess::Phase::difs);
        CHECK(csma.difs_progress() == 0);
        // DIFS again, then the frozen counter resumes
        for (int i = 0; i < 4; ++i) csma.step(false, rng);
        CHECK(csma.backoff_counter() == counter - 1);
    }
}

TEST_CASE("CSMA: contention window doubles on failure and resets on success") {
    CsmaAccess csma;
    CHECK(csma.cw() == 32);
    csma.on_outcome(false);
    CHECK(csma.cw() == 64);
    for (int i = 0; i < 10; ++i) csma.on_outcome(false);
    CHECK(csma.cw() == 1024);
    csma.on_outcome(true);
    CHECK(csma.cw() == 32);
}

TEST_CASE("CSMA properties under random sensing and outcomes") {
    const std::set<std::size_t> allowed{32, 64, 128, 256, 512, 1024};
    Rng env(17), rng(18);
    CsmaAccess csma;
    std::deque<bool> recent;
    std::size_t transmissions = 0;
    for (int slot = 0; slot < 200000; ++slot) {
        const bool busy = env.bernoulli(0.3);
        recent.push_back(busy);
        if (recent.size() > 4) recent.pop_front();
        if (csma.step(busy, rng)) {
            ++transmissions;
            // the DIFS window right before a transmission is idle
            for (bool b : recent) CHECK(!b);
            csma.on_outcome(env.bernoulli(0.6));
            recent.clear();
        }
        CHECK(allowed.count(csma.cw()) == 1);
        CHECK(csma.backoff_counter() < csma.cw() + 1);
    }
    CHECK(transmissions > 100);
}

TEST_CASE("CSMA: a permanently busy medium never transmits") {
    CsmaAccess csma;
    Rng rng(2);
    for (int i = 0; i < 10000; ++i) CHECK(!csma.step(true, rng));
}

TEST_CASE("CSMA config validation") {
    CsmaConfig cfg;
    cfg.cw_min = 48;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.cw_min = 2048;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("ARF") {
    SUBCASE("10 successes at MCS 2 step up, 2 failures at MCS 3 step down") {
        Arf arf({10, 2, 2});
        for (int i = 0; i < 9; ++i) arf.update(true);
        CHECK(arf.rate() == 2);
        arf.update(true);
        CHECK(arf.rate() == 3);
        arf.update(false);
        CHECK(arf.rate() == 3);
        arf.update(false);
        CHECK(arf.rate() == 2);
    }
    SUBCASE("caps") {
        Arf arf({10, 2, 8});
        for (int i = 0; i < 50; ++i) arf.update(true);
        CHECK(arf.rate() == 8);
        Arf low({10, 2, 0});
        for (int i = 0; i < 50; ++i) low.update(false);
        CHECK(low.rate() == 0);
    }
    SUBCASE("random outcome sequences replay against the counter oracle") {
        Rng rng(3);
        for (int trial = 0; trial < 20; ++trial) {
            std::vector<bool> outcomes(500);
            const double p = rng.uniform(0.5, 0.99);
            for (auto&& o : outcomes) o = rng.bernoulli(p);
            const auto expect = arf_oracle(outcomes, 0);
            Arf arf;
            for (std::size_t i = 0; i < outcomes.size(); ++i) {
                arf.update(outcomes[i]);
                CHECK(arf.rate() == expect[i]);
            }
        }
    }
}

TEST_CASE("IWL sampler") {
    IwlConfig cfg;
    cfg.probe_probability = 0.0;
    SUBCASE("all-success history picks MCS 8") {
        IwlSampler iwl(cfg);
        CHECK(iwl.best() == 8);
    }
    SUBCASE("78 * 0.1 < 52 * 0.9 picks MCS 5") {
        IwlSampler iwl(cfg);
        for (int m = 0; m <= 8; ++m) iwl.set_ratio(m, 0.0);
        iwl.set_ratio(8, 0.1);
        iwl.set_ratio(5, 0.9);
        CHECK(iwl.best() == 5);
    }
    SUBCASE("EWMA update") {
        IwlSampler iwl(cfg);
        iwl.update(4, false);
        CHECK(iwl.ratio(4) == doctest::Approx(0.75));
        iwl.update(4, true);
        CHECK(iwl.ratio(4) == doctest::Approx(0.8125));
    }
    SUBCASE("no probing means a deterministic argmax sequence") {
        IwlSampler a(cfg), b(cfg);
        Rng ra(1), rb(99);
        Rng env(5);
        for (int i = 0; i < 500; ++i) {
            const int ma = a.select(ra), mb = b.select(rb);
            CHECK(ma == mb);
            const bool ok = env.bernoulli(0.2 + 0.08 * (8 - ma));
            a.update(ma, ok);
            b.update(mb, ok);
        }
    }
    SUBCASE("probes only visit neighbours") {
        IwlConfig p;
        p.probe_probability = 1.0;
        IwlSampler iwl(p);
        Rng rng(4);
        for (int i = 0; i < 100; ++i) CHECK(iwl.select(rng) == 7);
        for (int m = 0; m <= 8; ++m) iwl.set_ratio(m, m == 4 ? 1.0 : 0.0);
        for (int i = 0; i < 100; ++i) {
            const int s = iwl.select(rng);
            CHECK((s == 3 || s == 5));
        }
    }
}

TEST_CASE("RSSI queue keeps the newest values contiguous") {
    RssiQueue q(5);
    CHECK_THROWS_AS(q.latest(1), InsufficientDataError);
    for (int i = 0; i < 100; ++i) {
        q.push(i);
        CHECK(q.size() == std::min(i + 1, 5));
        CHECK(q.back() == i);
    }
    const auto w = q.latest(5);
    CHECK(w[0] == 95.0);
    CHECK(w[4] == 99.0);
    CHECK_THROWS_AS(q.latest(6), InsufficientDataError);
}

TEST_CASE("compensation intervals") {
    CompensationConfig cfg;
    using P = std::pair<double, double>;
    CHECK(compensation_interval(3, true, cfg) == P{-93.0, -76.0});
    CHECK(compensation_interval(3, false, cfg) == P{-74.0, -45.0});
    CHECK(compensation_interval(0, false, cfg) == P{-67.0, -45.0});
    CHECK(compensation_interval(8, true, cfg) == P{-93.0, -93.0});
    CHECK_THROWS(compensation_interval(-1, true, cfg));

    Rng rng(8);
    for (int mcs = 0; mcs <= 8; ++mcs)
        for (bool ok : {true, false}) {
            RssiQueue q(1000);
            compensate_after_txop(q, mcs, ok, cfg, rng, 120);
            REQUIRE(q.size() == 120);
            const auto [lo, hi] = compensation_interval(mcs, ok, cfg);
            for (double v : q.latest(120)) {
                CHECK(v >= lo);
                CHECK(v <= hi);
            }
        }
}

TEST_CASE("learned decisions") {
    ForwardScratch scratch;
    RssiQueue q(400);
    for (int i = 0; i < 400; ++i) q.push(-80.0);

    SUBCASE("all-zero model stays idle") {
        NeuralModel m(Architecture::lstm_classifier(3, 120, 4, 4, 10));
        std::fill(m.params().begin(), m.params().end(), 0.0);
        CHECK(dl_jcara_decide(m, q, scratch) == -1);
        // the MCS-only variant never answers -1
        CHECK(dl_mcs_decide(m, q, scratch) == 0);
    }
    SUBCASE("bias picks the class") {
        const auto m = biased_model(TaskKind::jcara, 360, 10, 6);
        CHECK(dl_jcara_decide(m, q, scratch) == 5);
        const auto idle = biased_model(TaskKind::jcara, 360, 10, 0);
        CHECK(dl_jcara_decide(idle, q, scratch) == -1);
        CHECK(dl_mcs_decide(idle, q, scratch) == 0);
    }
    SUBCASE("short history is an error") {
        RssiQueue shortq(400);
        shortq.push(-80.0);
        const auto m = biased_model(TaskKind::jcara, 360, 10, 6);
        CHECK_THROWS_AS(dl_jcara_decide(m, shortq, scratch), InsufficientDataError);
    }
    SUBCASE("wrong task") {
        const auto m = biased_model(TaskKind::switch_channel, 360, 10, 6);
        CHECK_THROWS_AS(dl_jcara_decide(m, q, scratch), ModelMismatchError);
    }
}

TEST_CASE("switch decisions") {
    ForwardScratch scratch;
    auto m = biased_model(TaskKind::switch_channel, 15, 3, 2);
    m.info().channels = {1, 6, 11};
    m.info().k2 = 5;
    std::vector<RssiQueue> queues(3, RssiQueue(600));
    for (int c = 0; c < 3; ++c)
        for (int i = 0; i < 600; ++i) queues[static_cast<std::size_t>(c)].push(-70.0 - 5.0 * c - (i / 120));
    CHECK(switch_decide(m, queues, scratch) == 11);

    const auto x = switch_input(m.info(), queues);
    REQUIRE(x.size() == 15);
    // queue c, TXOP k holds -70 - 5c - k, SINR = -65 - that
    for (int c = 0; c < 3; ++c)
        for (int k = 0; k < 5; ++k) CHECK(x[static_cast<std::size_t>(5 * c + k)] == doctest::Approx(5.0 + 5.0 * c + k));

    std::vector<RssiQueue> two(2, RssiQueue(600));
    CHECK_THROWS_AS(switch_decide(m, two, scratch), ModelMismatchError);
}

TEST_CASE("switch config and names") {
    SwitchConfig cfg;
    CHECK(cfg.t_c_slots == 1200);
    CHECK(cfg.channels == std::vector<int>{1, 6, 11});
    cfg.channels = {1, 1};
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.channels = {14};
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    CHECK(switch_mode_from_string("timer") == SwitchMode::timer);
    CHECK_THROWS_AS(switch_mode_from_string("sometimes"), ConfigError);
    for (auto p : {PolicyKind::dlmac, PolicyKind::dlmac_instant, PolicyKind::csma_iwl, PolicyKind::csma_arf,
                   PolicyKind::csma_dlmcs, PolicyKind::dlca_iwl, PolicyKind::opt})
        CHECK(policy_from_string(to_string(p)) == p);
    CHECK(!needs_jcara_model(PolicyKind::csma_iwl));
    CHECK(needs_jcara_model(PolicyKind::dlca_iwl));
}
