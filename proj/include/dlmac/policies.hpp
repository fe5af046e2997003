#pragma once

#include "dlmac/mcs_ladder.hpp"
#include "dlmac/neuralkit.hpp"
#include "dlmac/rng.hpp"

#include <array>
#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

namespace dlmac {

// ---------------------------------------------------------------------------
// CSMA/CA with binary exponential backoff.

struct CsmaConfig {
    double busy_threshold_dbm = -75.0; ///< busy when the sensed value is strictly above
    std::size_t difs_slots = 4;        ///< 36 us
    std::size_t cw_min = 32;
    std::size_t cw_max = 1024;

    void validate() const;
};

class CsmaAccess {
public:
    enum class Phase { idle, difs, backoff };

    explicit CsmaAccess(CsmaConfig cfg = {});

    /// One sensed slot while the device has something to send. Returns true
    /// when the device may start a TXOP right after this slot.
    bool step(bool sensed_busy, Rng& rng);

    /// ACK/NACK of the TXOP started after the last `true` from step().
    void on_outcome(bool success);

    /// The device stopped listening (e.g. retuned): DIFS starts over and a
    /// drawn counter is kept frozen.
    void interrupt() noexcept;

    Phase phase() const noexcept { return phase_; }
    std::size_t cw() const noexcept { return cw_; }
    std::size_t backoff_counter() const noexcept { return backoff_; }
    std::size_t difs_progress() const noexcept { return difs_; }
    const CsmaConfig& config() const noexcept { return cfg_; }

private:
    CsmaConfig cfg_;
    Phase phase_ = Phase::idle;
    std::size_t cw_;
    std::size_t backoff_ = 0;
    bool counter_drawn_ = false;
    std::size_t difs_ = 0;
};

// ---------------------------------------------------------------------------
// Rate adaptation baselines.

struct ArfConfig {
    int n_up = 10;
    int n_down = 2;
    int initial_mcs = 0;
};

class Arf {
public:
    explicit Arf(ArfConfig cfg = {});
    int rate() const noexcept { return mcs_; }
    void update(bool success);

private:
    ArfConfig cfg_;
    int mcs_;
    int successes_ = 0;
    int failures_ = 0;
};

struct IwlConfig {
    double ewma_weight = 0.25;
    double probe_probability = 0.1;
};

/// Throughput-driven sampling: keeps an EWMA success ratio per MCS and picks
/// the rate with the best rate * ratio, probing a neighbour now and then.
class IwlSampler {
public:
    explicit IwlSampler(IwlConfig cfg = {}, const McsLadder& ladder = McsLadder::standard());

    /// Argmax expected throughput; ties go to the higher rate.
    int best() const;
    int select(Rng& rng);
    void update(int mcs, bool success);

    double ratio(int mcs) const { return ratio_.at(static_cast<std::size_t>(mcs)); }
    void set_ratio(int mcs, double r) { ratio_.at(static_cast<std::size_t>(mcs)) = r; }

private:
    IwlConfig cfg_;
    const McsLadder* ladder_;
    std::array<double, kMaxMcs + 1> ratio_;
};

// ---------------------------------------------------------------------------
// The device's own RSSI history.

/// Append-only history that keeps at least `capacity` most recent values and
/// hands out the newest n as one contiguous span.
class RssiQueue {
public:
    explicit RssiQueue(std::size_t capacity = 0);

    void push(double dbm);
    std::size_t size() const noexcept { return data_.size() - head_; }
    std::size_t capacity() const noexcept { return capacity_; }
    std::span<const double> latest(std::size_t n) const;
    double back() const { return data_.back(); }

private:
    std::size_t capacity_;
    std::size_t head_ = 0;
    std::vector<double> data_;
};

struct CompensationConfig {
    double p_r_dbm = -65.0;
    double sinr_floor_db = -20.0;
};

/// dBm interval [lo, hi] the handcrafted values are drawn from after a TXOP
/// at `mcs` (>= 0) that succeeded or failed.
std::pair<double, double> compensation_interval(int mcs, bool success, const CompensationConfig& cfg,
                                                const McsLadder& ladder = McsLadder::standard());

/// Appends `count` (one TXOP, normally 120) i.i.d. uniform values drawn from
/// compensation_interval().
void compensate_after_txop(RssiQueue& queue, int mcs, bool success, const CompensationConfig& cfg, Rng& rng,
                           std::size_t count, const McsLadder& ladder = McsLadder::standard());

/// Appends `count` values uniform over [lo, hi] (channels the device could not
/// watch and that it has no feedback for).
void compensate_uniform(RssiQueue& queue, double lo, double hi, Rng& rng, std::size_t count);

// ---------------------------------------------------------------------------
// Learned decisions.

/// MCS in -1..8 from the newest 120*K1 values; -1 means stay idle this slot.
int dl_jcara_decide(const NeuralModel& model, const RssiQueue& queue, ForwardScratch& scratch);

/// Best MCS among 0..8 only, for hybrids where access is decided elsewhere.
int dl_mcs_decide(const NeuralModel& model, const RssiQueue& queue, ForwardScratch& scratch);

enum class SwitchMode { off, timer, instant };
std::string_view to_string(SwitchMode m);
SwitchMode switch_mode_from_string(std::string_view s);

struct SwitchConfig {
    SwitchMode mode = SwitchMode::off;
    std::size_t t_c_slots = 1200;
    std::size_t t_d_slots = 20;
    std::vector<int> channels{1, 6, 11};

    void validate() const;
};

/// Channel the switch model rates best given each channel's queue. `queues`
/// are in model channel order.
int switch_decide(const NeuralModel& model, std::span<const RssiQueue> queues, ForwardScratch& scratch);

/// Switch model input built from queues: K2 per-TXOP mean SINRs per channel.
std::vector<double> switch_input(const ModelInfo& info, std::span<const RssiQueue> queues);

// ---------------------------------------------------------------------------

enum class PolicyKind { dlmac, dlmac_instant, csma_iwl, csma_arf, csma_dlmcs, dlca_iwl, opt };

std::string_view to_string(PolicyKind p);
PolicyKind policy_from_string(std::string_view s);

/// Whether the policy needs a channel-access/rate model.
bool needs_jcara_model(PolicyKind p);

} // namespace dlmac
