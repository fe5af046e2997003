#include "dlmac/simcore.hpp"

#include "dlmac/errors.hpp"

#include <algorithm>
#include <cmath>

namespace dlmac {

void TrafficConfig::validate() const {
    if (!(lambda_per_slot >= 0.0) || !std::isfinite(lambda_per_slot))
        throw ConfigError("traffic.lambda must be a non-negative number");
    if (payload_bits == 0) throw ConfigError("traffic.payload_bits must be positive");
    if (buffer_capacity == 0) throw ConfigError("traffic.buffer must be positive");
}

TrafficSource::TrafficSource(TrafficConfig cfg) : cfg_(cfg) { cfg_.validate(); }

std::size_t TrafficSource::arrive(std::uint64_t slot, Rng& rng) {
    if (cfg_.lambda_per_slot <= 0.0) return 0;
    const std::uint32_t n = rng.poisson(cfg_.lambda_per_slot);
    std::size_t dropped = 0;
    for (std::uint32_t i = 0; i < n; ++i)
        if (!offer(slot)) ++dropped;
    return dropped;
}

bool TrafficSource::offer(std::uint64_t slot) {
    ++arrivals_;
    if (buffer_.size() >= cfg_.buffer_capacity) {
        ++drops_;
        return false;
    }
    buffer_.push_back(slot);
    max_occupancy_ = std::max(max_occupancy_, buffer_.size());
    return true;
}

void TrafficSource::pop(std::size_t n) {
    if (n > buffer_.size()) throw DimensionError("popping more packets than buffered");
    buffer_.erase(buffer_.begin(), buffer_.begin() + static_cast<std::ptrdiff_t>(n));
}

std::vector<std::uint64_t> TrafficSource::take(std::size_t n) {
    if (n > buffer_.size()) throw DimensionError("taking more packets than buffered");
    std::vector<std::uint64_t> out(buffer_.begin(), buffer_.begin() + static_cast<std::ptrdiff_t>(n));
    pop(n);
    return out;
}

std::size_t TrafficSource::requeue_front(const std::vector<std::uint64_t>& packets) {
    buffer_.insert(buffer_.begin(), packets.begin(), packets.end());
    std::size_t dropped = 0;
    while (buffer_.size() > cfg_.buffer_capacity) {
        buffer_.pop_back();
        ++drops_;
        ++dropped;
    }
    max_occupancy_ = std::max(max_occupancy_, buffer_.size());
    return dropped;
}

std::uint32_t txop_capacity_packets(int mcs, std::size_t txop_slots, std::size_t payload_bits,
                                    const McsLadder& ladder) {
    const double bits = ladder.rate_mbps(mcs) * static_cast<double>(txop_slots) * kSlotUs;
    const auto n = static_cast<std::uint32_t>(std::floor(bits / static_cast<double>(payload_bits)));
    return std::max<std::uint32_t>(1, n);
}

TxopOutcome resolve_txop(const ProcessedTrace& trace, int channel, std::uint64_t start_slot, int mcs,
                         std::uint32_t backlog, const LabelConfig& label, std::size_t payload_bits,
                         const McsLadder& ladder) {
    if (mcs < 0 || mcs > kMaxMcs) throw DimensionError("TXOP needs an MCS in 0..8");
    if (!trace.has_channel(channel)) throw DimensionError("channel " + std::to_string(channel) + " not in trace");
    if (start_slot + label.txop_slots > trace.length())
        throw InsufficientDataError("TXOP at slot " + std::to_string(start_slot) + " runs past the trace end");
    const auto col = static_cast<std::size_t>(channel - 1);
    double sum = 0.0;
    for (std::size_t k = 0; k < label.txop_slots; ++k) sum += trace.samples(start_slot + k, col);
    const double mean = sum / static_cast<double>(label.txop_slots);

    TxopOutcome o;
    o.start_slot = start_slot;
    o.end_slot = start_slot + label.txop_slots - 1;
    o.channel = channel;
    o.mcs = mcs;
    o.realized_mean_sinr = sinr_from_mean_rssi(mean, label.p_r_dbm);
    o.success = o.realized_mean_sinr >= ladder.min_sinr_db(mcs);
    o.packets_carried = std::min(backlog, txop_capacity_packets(mcs, label.txop_slots, payload_bits, ladder));
    o.bits_delivered = o.success ? static_cast<std::uint64_t>(o.packets_carried) * payload_bits : 0;
    return o;
}

std::optional<std::size_t> PollingCursor::grant(std::span<const std::size_t> backlogs) {
    if (backlogs.size() != members_) throw DimensionError("backlog list does not match gateway size");
    for (std::size_t k = 0; k < members_; ++k) {
        const std::size_t m = (cursor_ + k) % members_;
        if (backlogs[m] > 0) {
            cursor_ = (m + 1) % members_;
            return m;
        }
    }
    return std::nullopt;
}

void RunConfig::validate() const {
    label.validate();
    csma.validate();
    traffic.validate();
    if (members == 0) throw ConfigError("a gateway needs at least one member");
    if (interval_slots == 0) throw ConfigError("sim.interval_slots must be positive");
    if (switching.mode != SwitchMode::off || policy == PolicyKind::dlmac_instant) switching.validate();
    if (rssi_min_dbm.has_value() != rssi_max_dbm.has_value())
        throw ConfigError("sim.rssi_min and sim.rssi_max must be given together");
    if (rssi_min_dbm && !(*rssi_max_dbm > *rssi_min_dbm)) throw ConfigError("sim.rssi_min must be below sim.rssi_max");
}

double SensingAudit::sense(int channel, std::uint64_t slot, bool deaf) {
    ++reads_;
    if (deaf) ++violations_;
    return trace_->samples(slot, static_cast<std::size_t>(channel - 1));
}

// ---------------------------------------------------------------------------

namespace {

void check_jcara_model(const NeuralModel& m, const LabelConfig& label) {
    const auto& info = m.info();
    if (info.task != TaskKind::jcara) throw ModelMismatchError("channel-access model file holds a '" +
                                                        std::string(to_string(info.task)) + "' model");
    if (info.txop_slots != label.txop_slots || info.k1 != label.k1)
        throw ModelMismatchError("channel-access model was trained with different TXOP/K1 settings");
    if (info.p_r_dbm != label.p_r_dbm) throw ModelMismatchError("channel-access model was trained with a different P_r");
}

void check_switch_model(const NeuralModel& m, const LabelConfig& label, std::span<const int> channels) {
    const auto& info = m.info();
    if (info.task != TaskKind::switch_channel)
        throw ModelMismatchError("switch model file holds a '" + std::string(to_string(info.task)) + "' model");
    if (!std::equal(info.channels.begin(), info.channels.end(), channels.begin(), channels.end()))
        throw ModelMismatchError("switch model channel set differs from the configured one");
    if (info.txop_slots != label.txop_slots || info.k2 != label.k2)
        throw ModelMismatchError("switch model was trained with different TXOP/K2 settings");
    if (info.p_r_dbm != label.p_r_dbm) throw ModelMismatchError("switch model was trained with a different P_r");
}

bool uses_csma(PolicyKind p) {
    return p == PolicyKind::csma_iwl || p == PolicyKind::csma_arf || p == PolicyKind::csma_dlmcs;
}

class Simulation {
public:
    Simulation(const ProcessedTrace& trace, const RunConfig& cfg, const Models& models, std::uint64_t seed)
        : trace_(trace), cfg_(cfg), models_(models), audit_(trace), csma_(cfg.csma), arf_(cfg.arf), iwl_(cfg.iwl),
          policy_rng_(Rng::derive(seed, 200)), comp_rng_(Rng::derive(seed, 300)), cursor_(cfg.members) {
        cfg_.validate();
        mode_ = cfg_.policy == PolicyKind::dlmac_instant ? SwitchMode::instant : cfg_.switching.mode;
        channels_ = mode_ == SwitchMode::off ? std::vector<int>{cfg_.channel} : cfg_.switching.channels;
        for (int ch : channels_)
            if (!trace_.has_channel(ch)) throw ConfigError("trace has no channel " + std::to_string(ch));

        if (needs_jcara_model(cfg_.policy)) {
            if (!models_.jcara) throw ConfigError("policy " + std::string(to_string(cfg_.policy)) +
                                                  " needs a channel-access model");
            check_jcara_model(*models_.jcara, cfg_.label);
        }
        if (mode_ != SwitchMode::off) {
            if (!models_.switching) throw ConfigError("channel switching needs a switch model");
            check_switch_model(*models_.switching, cfg_.label, channels_);
        }

        warmup_ = cfg_.warmup_slots();
        begin_ = cfg_.begin_slot ? cfg_.begin_slot : warmup_;
        if (begin_ < warmup_) throw ConfigError("sim.begin_slot leaves no room for the warm-up");
        end_ = cfg_.run_slots ? begin_ + cfg_.run_slots : trace_.length();
        if (end_ > trace_.length() || end_ <= begin_)
            throw InsufficientDataError("trace of " + std::to_string(trace_.length()) +
                                        " slots is too short for warm-up plus the requested run");

        const std::size_t qcap = 2 * warmup_ + cfg_.label.txop_slots;
        queues_.assign(channels_.size(), RssiQueue(qcap));
        for (std::size_t m = 0; m < cfg_.members; ++m) {
            sources_.emplace_back(cfg_.traffic);
            traffic_rng_.push_back(Rng::derive(seed, 100 + m));
        }
        if (channels_.size() > 1) {
            Rng init = Rng::derive(seed, 400);
            active_ = static_cast<std::size_t>(init.uniform_int(channels_.size()));
        }
        report_.label = cfg_.label_override.empty() ? std::string(to_string(cfg_.policy)) : cfg_.label_override;
        report_.seed = seed;
        report_.run_slots = end_ - begin_;
        report_.interval_slots = cfg_.interval_slots;
        report_.log.begin_slot = begin_;
        report_.log.run_slots = end_ - begin_;
    }

    SimReport run() {
        for (std::uint64_t s = begin_ - warmup_; s < begin_; ++s) sense_all(s);
        range_ = entire_range();
        timer_start_ = begin_;

        for (std::uint64_t s = begin_; s < end_; ++s) {
            for (std::size_t m = 0; m < sources_.size(); ++m) {
                const std::size_t dropped = sources_[m].arrive(s, traffic_rng_[m]);
                for (std::size_t k = 0; k < dropped; ++k) report_.log.drop_slots.push_back(s);
            }
            if (activity_ != Activity::sensing) {
                if (s == busy_end_) finish(s);
                continue;
            }
            sense_all(s);
            if (mode_ == SwitchMode::timer && s - timer_start_ >= cfg_.switching.t_c_slots) {
                timer_start_ = s;
                if (evaluate_switch(s)) continue;
            }
            if (!any_backlog()) continue;
            const int mcs = decide(s);
            if (mcs < 0) continue;
            if (s + cfg_.label.txop_slots >= end_) continue; // would not finish inside the run
            start_txop(s, mcs);
        }

        report_.members.resize(sources_.size());
        for (std::size_t m = 0; m < sources_.size(); ++m) {
            auto& ms = report_.members[m];
            ms.arrivals = sources_[m].arrivals();
            ms.drops = sources_[m].drops();
            ms.max_occupancy = sources_[m].max_occupancy();
        }
        for (const auto& p : report_.log.packets) {
            auto& ms = report_.members[p.member];
            ++ms.packets;
            ms.bits += cfg_.traffic.payload_bits;
            ms.delay_sum += p.delay_slots;
        }
        report_.half_duplex_violations = audit_.violations();
        finalize_report(report_);
        if (!cfg_.keep_log) report_.log = RunLog{report_.log.begin_slot, report_.log.run_slots, {}, {}, {}, {}};
        return std::move(report_);
    }

private:
    enum class Activity { sensing, txop, switching };

    void sense_all(std::uint64_t s) {
        const bool deaf = activity_ != Activity::sensing;
        for (std::size_t c = 0; c < channels_.size(); ++c) queues_[c].push(audit_.sense(channels_[c], s, deaf));
    }

    std::pair<double, double> entire_range() const {
        if (cfg_.rssi_min_dbm) return {*cfg_.rssi_min_dbm, *cfg_.rssi_max_dbm};
        if (models_.jcara) return {models_.jcara->info().rssi_min_dbm, models_.jcara->info().rssi_max_dbm};
        if (models_.switching)
            return {models_.switching->info().rssi_min_dbm, models_.switching->info().rssi_max_dbm};
        // Fall back to what the device itself observed during warm-up.
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (const auto& q : queues_)
            for (double v : q.latest(warmup_)) {
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
        return {lo, hi};
    }

    bool any_backlog() const {
        for (const auto& src : sources_)
            if (src.backlog() > 0) return true;
        return false;
    }

    int active_channel() const { return channels_[active_]; }

    int decide(std::uint64_t s) {
        const auto& q = queues_[active_];
        switch (cfg_.policy) {
        case PolicyKind::opt: {
            if (s + 1 + cfg_.label.txop_slots > trace_.length()) return kNoAccess;
            return genie_decision(s + 1);
        }
        case PolicyKind::dlmac:
        case PolicyKind::dlmac_instant:
            return dl_jcara_decide(*models_.jcara, q, scratch_);
        case PolicyKind::dlca_iwl:
            return dl_jcara_decide(*models_.jcara, q, scratch_) >= 0 ? iwl_.select(policy_rng_) : kNoAccess;
        case PolicyKind::csma_iwl:
        case PolicyKind::csma_arf:
        case PolicyKind::csma_dlmcs: {
            const bool busy = q.back() > cfg_.csma.busy_threshold_dbm;
            if (!csma_.step(busy, policy_rng_)) return kNoAccess;
            if (cfg_.policy == PolicyKind::csma_iwl) return iwl_.select(policy_rng_);
            if (cfg_.policy == PolicyKind::csma_arf) return arf_.rate();
            return dl_mcs_decide(*models_.jcara, q, scratch_);
        }
        }
        return kNoAccess;
    }

    /// Genie decision for the TXOP starting at `start`; reads the future
    /// trace, which only the oracle may do.
    int genie_decision(std::uint64_t start) const {
        const auto col = static_cast<std::size_t>(active_channel() - 1);
        double sum = 0.0;
        for (std::size_t k = 0; k < cfg_.label.txop_slots; ++k) sum += trace_.samples(start + k, col);
        return mcs_for_sinr(sinr_from_mean_rssi(sum / static_cast<double>(cfg_.label.txop_slots), cfg_.label.p_r_dbm));
    }

    void start_txop(std::uint64_t s, int mcs) {
        std::vector<std::size_t> backlogs(sources_.size());
        for (std::size_t m = 0; m < sources_.size(); ++m) backlogs[m] = sources_[m].backlog();
        const auto member = cursor_.grant(backlogs);
        if (!member) return;
        pending_member_ = *member;
        pending_mcs_ = mcs;
        pending_start_ = s + 1;
        const auto cap = txop_capacity_packets(mcs, cfg_.label.txop_slots, cfg_.traffic.payload_bits);
        in_flight_ = sources_[*member].take(std::min<std::size_t>(backlogs[*member], cap));
        pending_backlog_ = static_cast<std::uint32_t>(in_flight_.size());
        activity_ = Activity::txop;
        busy_end_ = s + cfg_.label.txop_slots;
    }

    void finish(std::uint64_t s) {
        if (activity_ == Activity::txop) {
            finish_txop(s);
        } else {
            for (auto& q : queues_) compensate_uniform(q, range_.first, range_.second, comp_rng_, cfg_.switching.t_d_slots);
            activity_ = Activity::sensing;
        }
    }

    void finish_txop(std::uint64_t s) {
        TxopOutcome o = resolve_txop(trace_, active_channel(), pending_start_, pending_mcs_, pending_backlog_,
                                     cfg_.label, cfg_.traffic.payload_bits);
        o.member = static_cast<std::uint32_t>(pending_member_);
        auto& src = sources_[pending_member_];
        if (o.success) {
            for (auto arrival : in_flight_) report_.log.packets.push_back({s, s - arrival, o.member});
        } else {
            const std::size_t dropped = src.requeue_front(in_flight_);
            for (std::size_t k = 0; k < dropped; ++k) report_.log.drop_slots.push_back(s);
        }
        in_flight_.clear();
        report_.log.txops.push_back(o);

        if (uses_csma(cfg_.policy)) csma_.on_outcome(o.success);
        if (cfg_.policy == PolicyKind::csma_arf) arf_.update(o.success);
        if (cfg_.policy == PolicyKind::csma_iwl || cfg_.policy == PolicyKind::dlca_iwl) iwl_.update(o.mcs, o.success);

        const CompensationConfig comp{cfg_.label.p_r_dbm, cfg_.label.sinr_floor_db};
        for (std::size_t c = 0; c < queues_.size(); ++c) {
            if (c == active_)
                compensate_after_txop(queues_[c], o.mcs, o.success, comp, comp_rng_, cfg_.label.txop_slots);
            else
                compensate_uniform(queues_[c], range_.first, range_.second, comp_rng_, cfg_.label.txop_slots);
        }
        activity_ = Activity::sensing;
        if (mode_ == SwitchMode::instant) evaluate_switch(s);
    }

    /// Returns true when the device went deaf for a switch.
    bool evaluate_switch(std::uint64_t s) {
        ++report_.switch_evaluations;
        const int target = switch_decide(*models_.switching, queues_, scratch_);
        if (target == active_channel()) return false;
        active_ = static_cast<std::size_t>(std::find(channels_.begin(), channels_.end(), target) - channels_.begin());
        report_.log.switch_slots.push_back(s);
        csma_.interrupt();
        if (cfg_.switching.t_d_slots == 0) return false;
        activity_ = Activity::switching;
        busy_end_ = s + cfg_.switching.t_d_slots;
        return true;
    }

    const ProcessedTrace& trace_;
    RunConfig cfg_;
    Models models_;
    SensingAudit audit_;
    CsmaAccess csma_;
    Arf arf_;
    IwlSampler iwl_;
    Rng policy_rng_;
    Rng comp_rng_;
    std::vector<Rng> traffic_rng_;
    PollingCursor cursor_;
    SwitchMode mode_ = SwitchMode::off;
    std::vector<int> channels_;
    std::vector<RssiQueue> queues_;
    std::vector<TrafficSource> sources_;
    std::size_t active_ = 0;
    std::uint64_t warmup_ = 0, begin_ = 0, end_ = 0;
    std::pair<double, double> range_{0.0, 0.0};
    std::uint64_t timer_start_ = 0;
    Activity activity_ = Activity::sensing;
    std::uint64_t busy_end_ = 0;
    std::size_t pending_member_ = 0;
    int pending_mcs_ = 0;
    std::uint64_t pending_start_ = 0;
    std::uint32_t pending_backlog_ = 0;
    std::vector<std::uint64_t> in_flight_;
    ForwardScratch scratch_;
    SimReport report_;
};

} // namespace

SimReport run_simulation(const ProcessedTrace& trace, const RunConfig& cfg, const Models& models,
                         std::uint64_t seed) {
    Simulation sim(trace, cfg, models, seed);
    return sim.run();
}

} // namespace dlmac
