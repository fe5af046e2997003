#pragma once

#include "dlmac/mcs_ladder.hpp"
#include "dlmac/neuralkit.hpp"
#include "dlmac/policies.hpp"
#include "dlmac/rng.hpp"
#include "dlmac/spectrum.hpp"
#include "dlmac/telemetry.hpp"

#include <cstdint>
#include <deque>
#include <optional>
#include <vector>

namespace dlmac {

struct TrafficConfig {
    double lambda_per_slot = 0.18;
    std::size_t payload_bits = 12000; ///< 1500 bytes
    std::size_t buffer_capacity = 10;

    void validate() const;
};

/// Poisson arrivals into a bounded FIFO; overflow is dropped.
class TrafficSource {
public:
    explicit TrafficSource(TrafficConfig cfg = {});

    /// Draws this slot's arrivals; returns how many were dropped.
    std::size_t arrive(std::uint64_t slot, Rng& rng);
    /// Pushes one packet; false (and a drop) when full.
    bool offer(std::uint64_t slot);

    std::size_t backlog() const noexcept { return buffer_.size(); }
    std::uint64_t front_arrival(std::size_t i) const { return buffer_.at(i); }
    void pop(std::size_t n);
    /// Moves the n oldest packets out of the buffer (into a TXOP).
    std::vector<std::uint64_t> take(std::size_t n);
    /// Puts packets from a failed TXOP back at the head; the newest queued
    /// packets are dropped if that overflows the buffer. Returns the drops.
    std::size_t requeue_front(const std::vector<std::uint64_t>& packets);

    std::uint64_t arrivals() const noexcept { return arrivals_; }
    std::uint64_t drops() const noexcept { return drops_; }
    std::size_t max_occupancy() const noexcept { return max_occupancy_; }
    const TrafficConfig& config() const noexcept { return cfg_; }

private:
    TrafficConfig cfg_;
    std::deque<std::uint64_t> buffer_;
    std::uint64_t arrivals_ = 0;
    std::uint64_t drops_ = 0;
    std::size_t max_occupancy_ = 0;
};

/// Packets a TXOP at `mcs` can carry: floor(rate * 1080 us / payload), at least 1.
std::uint32_t txop_capacity_packets(int mcs, std::size_t txop_slots, std::size_t payload_bits,
                                    const McsLadder& ladder = McsLadder::standard());

/// Judges a TXOP occupying [start_slot, start_slot + txop_slots) on `channel`
/// against the ground-truth trace.
TxopOutcome resolve_txop(const ProcessedTrace& trace, int channel, std::uint64_t start_slot, int mcs,
                         std::uint32_t backlog, const LabelConfig& label, std::size_t payload_bits,
                         const McsLadder& ladder = McsLadder::standard());

/// Round-robin polling over member buffers.
class PollingCursor {
public:
    explicit PollingCursor(std::size_t members = 1) : members_(members) {}

    /// Next member with a non-empty buffer starting at the cursor, advancing
    /// past it; nullopt (cursor unchanged) when every buffer is empty.
    std::optional<std::size_t> grant(std::span<const std::size_t> backlogs);
    std::size_t position() const noexcept { return cursor_; }

private:
    std::size_t members_;
    std::size_t cursor_ = 0;
};

struct RunConfig {
    PolicyKind policy = PolicyKind::dlmac;
    LabelConfig label;
    CsmaConfig csma;
    ArfConfig arf;
    IwlConfig iwl;
    SwitchConfig switching;
    TrafficConfig traffic;
    /// Operating channel when switching is off.
    int channel = 6;
    /// Members behind one gateway; 1 is a plain device.
    std::size_t members = 1;
    /// First slot of the run (warm-up precedes it); 0 means "right after warm-up".
    std::uint64_t begin_slot = 0;
    /// 0 runs to the end of the trace.
    std::uint64_t run_slots = 0;
    std::size_t interval_slots = kDefaultIntervalSlots;
    /// dBm range for channels the device has no feedback for; taken from
    /// the model (training trace) when absent.
    std::optional<double> rssi_min_dbm;
    std::optional<double> rssi_max_dbm;
    /// Keep per-TXOP and per-packet logs in the report.
    bool keep_log = true;
    std::string label_override;

    void validate() const;
    std::size_t warmup_slots() const { return label.txop_slots * std::max(label.k1, label.k2); }
};

struct Models {
    const NeuralModel* jcara = nullptr;
    const NeuralModel* switching = nullptr;
};

/// Trace accessor that counts reads a device makes while it cannot listen.
class SensingAudit {
public:
    explicit SensingAudit(const ProcessedTrace& trace) : trace_(&trace) {}
    double sense(int channel, std::uint64_t slot, bool deaf);
    std::uint64_t violations() const noexcept { return violations_; }
    std::uint64_t reads() const noexcept { return reads_; }

private:
    const ProcessedTrace* trace_;
    std::uint64_t violations_ = 0;
    std::uint64_t reads_ = 0;
};

/// One simulated run. Deterministic in (trace, cfg, models, seed).
SimReport run_simulation(const ProcessedTrace& trace, const RunConfig& cfg, const Models& models,
                         std::uint64_t seed);

} // namespace dlmac
