#include "dlmac/policies.hpp"

#include "dlmac/errors.hpp"

#include <algorithm>

namespace dlmac {

void CsmaConfig::validate() const {
    if (difs_slots == 0) throw ConfigError("csma.difs must be at least one slot");
    if (cw_min == 0 || cw_max < cw_min) throw ConfigError("csma contention window bounds are inconsistent");
    if ((cw_min & (cw_min - 1)) != 0 || (cw_max & (cw_max - 1)) != 0)
        throw ConfigError("csma contention window bounds must be powers of two");
}

CsmaAccess::CsmaAccess(CsmaConfig cfg) : cfg_(cfg), cw_(cfg.cw_min) { cfg_.validate(); }

bool CsmaAccess::step(bool sensed_busy, Rng& rng) {
    if (phase_ == Phase::idle) {
        phase_ = Phase::difs;
        difs_ = 0;
    }
    if (sensed_busy) {
        // Busy medium: DIFS starts over and a drawn counter stays frozen.
        phase_ = Phase::difs;
        difs_ = 0;
        return false;
    }
    if (phase_ == Phase::difs) {
        if (++difs_ < cfg_.difs_slots) return false;
        phase_ = Phase::backoff;
        if (!counter_drawn_) {
            backoff_ = static_cast<std::size_t>(rng.uniform_int(cw_));
            counter_drawn_ = true;
        }
        if (backoff_ > 0) return false;
    } else if (backoff_ > 0) {
        --backoff_;
        if (backoff_ > 0) return false;
    }
    phase_ = Phase::idle;
    counter_drawn_ = false;
    difs_ = 0;
    return true;
}

void CsmaAccess::on_outcome(bool success) {
    cw_ = success ? cfg_.cw_min : std::min(cfg_.cw_max, cw_ * 2);
}

void CsmaAccess::interrupt() noexcept {
    if (phase_ != Phase::idle) phase_ = Phase::difs;
    difs_ = 0;
}

// ---------------------------------------------------------------------------

Arf::Arf(ArfConfig cfg) : cfg_(cfg), mcs_(std::clamp(cfg.initial_mcs, 0, kMaxMcs)) {
    if (cfg_.n_up < 1 || cfg_.n_down < 1) throw ConfigError("ARF thresholds must be at least 1");
}

void Arf::update(bool success) {
    if (success) {
        failures_ = 0;
        if (++successes_ >= cfg_.n_up) {
            mcs_ = std::min(mcs_ + 1, kMaxMcs);
            successes_ = 0;
        }
    } else {
        successes_ = 0;
        if (++failures_ >= cfg_.n_down) {
            mcs_ = std::max(mcs_ - 1, 0);
            failures_ = 0;
        }
    }
}

IwlSampler::IwlSampler(IwlConfig cfg, const McsLadder& ladder) : cfg_(cfg), ladder_(&ladder) {
    if (!(cfg_.ewma_weight > 0.0 && cfg_.ewma_weight <= 1.0)) throw ConfigError("iwl.ewma must be in (0, 1]");
    if (!(cfg_.probe_probability >= 0.0 && cfg_.probe_probability <= 1.0))
        throw ConfigError("iwl.probe must be in [0, 1]");
    ratio_.fill(1.0);
}

int IwlSampler::best() const {
    int best = 0;
    double best_tp = -1.0;
    for (int m = 0; m <= kMaxMcs; ++m) {
        const double tp = ladder_->rate_mbps(m) * ratio_[static_cast<std::size_t>(m)];
        if (tp >= best_tp) {
            best = m;
            best_tp = tp;
        }
    }
    return best;
}

int IwlSampler::select(Rng& rng) {
    const int b = best();
    if (cfg_.probe_probability <= 0.0 || !rng.bernoulli(cfg_.probe_probability)) return b;
    if (b == 0) return 1;
    if (b == kMaxMcs) return kMaxMcs - 1;
    return rng.bernoulli(0.5) ? b + 1 : b - 1;
}

void IwlSampler::update(int mcs, bool success) {
    auto& r = ratio_.at(static_cast<std::size_t>(mcs));
    r = (1.0 - cfg_.ewma_weight) * r + cfg_.ewma_weight * (success ? 1.0 : 0.0);
}

// ---------------------------------------------------------------------------

RssiQueue::RssiQueue(std::size_t capacity) : capacity_(capacity) { data_.reserve(2 * capacity + 1); }

void RssiQueue::push(double dbm) {
    data_.push_back(dbm);
    if (capacity_ > 0 && size() > capacity_) ++head_;
    // Compact once the dead prefix is as large as the live part.
    if (head_ > 0 && head_ >= capacity_) {
        data_.erase(data_.begin(), data_.begin() + static_cast<std::ptrdiff_t>(head_));
        head_ = 0;
    }
}

std::span<const double> RssiQueue::latest(std::size_t n) const {
    if (n > size())
        throw InsufficientDataError("RSSI queue holds " + std::to_string(size()) + " values, " + std::to_string(n) +
                                    " needed");
    return std::span<const double>(data_).subspan(data_.size() - n);
}

std::pair<double, double> compensation_interval(int mcs, bool success, const CompensationConfig& cfg,
                                                const McsLadder& ladder) {
    if (mcs < 0 || mcs > kMaxMcs) throw DimensionError("compensation needs an MCS in 0..8");
    if (success) return {cfg.p_r_dbm - ladder.min_sinr_db(kMaxMcs), cfg.p_r_dbm - ladder.min_sinr_db(mcs)};
    // MCS 0 has no lower row with a finite threshold; its own threshold bounds the range.
    const double upper_sinr = mcs == 0 ? ladder.min_sinr_db(0) : ladder.min_sinr_db(mcs - 1);
    return {cfg.p_r_dbm - upper_sinr, cfg.p_r_dbm - cfg.sinr_floor_db};
}

void compensate_after_txop(RssiQueue& queue, int mcs, bool success, const CompensationConfig& cfg, Rng& rng,
                           std::size_t count, const McsLadder& ladder) {
    const auto [lo, hi] = compensation_interval(mcs, success, cfg, ladder);
    compensate_uniform(queue, lo, hi, rng, count);
}

void compensate_uniform(RssiQueue& queue, double lo, double hi, Rng& rng, std::size_t count) {
    for (std::size_t i = 0; i < count; ++i) queue.push(rng.uniform(lo, hi));
}

// ---------------------------------------------------------------------------

namespace {

void check_jcara_model(const NeuralModel& model) {
    if (model.info().task != TaskKind::jcara) throw ModelMismatchError("model is not a channel-access/rate model");
}

} // namespace

int dl_jcara_decide(const NeuralModel& model, const RssiQueue& queue, ForwardScratch& scratch) {
    check_jcara_model(model);
    const auto window = queue.latest(model.architecture().input_dim());
    std::array<double, kMcsClasses> probs{};
    model.forward(window, probs, scratch);
    return class_to_mcs(static_cast<int>(argmax_lowest(probs)));
}

int dl_mcs_decide(const NeuralModel& model, const RssiQueue& queue, ForwardScratch& scratch) {
    check_jcara_model(model);
    const auto window = queue.latest(model.architecture().input_dim());
    std::array<double, kMcsClasses> probs{};
    model.forward(window, probs, scratch);
    const std::size_t first = static_cast<std::size_t>(mcs_to_class(0));
    const auto best = argmax_lowest(std::span<const double>(probs).subspan(first));
    return static_cast<int>(best);
}

std::string_view to_string(SwitchMode m) {
    switch (m) {
    case SwitchMode::off: return "off";
    case SwitchMode::timer: return "timer";
    case SwitchMode::instant: return "instant";
    }
    return "off";
}

SwitchMode switch_mode_from_string(std::string_view s) {
    if (s == "off") return SwitchMode::off;
    if (s == "timer") return SwitchMode::timer;
    if (s == "instant") return SwitchMode::instant;
    throw ConfigError("unknown switch mode '" + std::string(s) + "'");
}

void SwitchConfig::validate() const {
    if (t_c_slots == 0) throw ConfigError("switch.t_c must be positive");
    if (channels.empty()) throw ConfigError("channel set is empty");
    for (int ch : channels)
        if (ch < 1 || ch > kMaxWifiChannel) throw ConfigError("channel " + std::to_string(ch) + " out of range");
    auto sorted = channels;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
        throw ConfigError("channel set has duplicates");
}

std::vector<double> switch_input(const ModelInfo& info, std::span<const RssiQueue> queues) {
    if (queues.size() != info.channels.size()) throw ModelMismatchError("switch model and queue set disagree");
    std::vector<double> x;
    x.reserve(info.k2 * queues.size());
    for (const auto& q : queues) {
        const auto hist = q.latest(info.k2 * info.txop_slots);
        for (std::size_t k = 0; k < info.k2; ++k)
            x.push_back(sinr_from_mean_rssi(window_mean(hist, k * info.txop_slots, info.txop_slots), info.p_r_dbm));
    }
    return x;
}

int switch_decide(const NeuralModel& model, std::span<const RssiQueue> queues, ForwardScratch& scratch) {
    if (model.info().task != TaskKind::switch_channel) throw ModelMismatchError("model is not a channel-switch model");
    const auto x = switch_input(model.info(), queues);
    std::vector<double> probs(model.architecture().n_classes());
    model.forward(x, probs, scratch);
    return model.info().channels[argmax_lowest(probs)];
}

// ---------------------------------------------------------------------------

std::string_view to_string(PolicyKind p) {
    switch (p) {
    case PolicyKind::dlmac: return "dlmac";
    case PolicyKind::dlmac_instant: return "dlmac_instant";
    case PolicyKind::csma_iwl: return "csma_iwl";
    case PolicyKind::csma_arf: return "csma_arf";
    case PolicyKind::csma_dlmcs: return "csma_dlmcs";
    case PolicyKind::dlca_iwl: return "dlca_iwl";
    case PolicyKind::opt: return "opt";
    }
    return "?";
}

PolicyKind policy_from_string(std::string_view s) {
    for (auto p : {PolicyKind::dlmac, PolicyKind::dlmac_instant, PolicyKind::csma_iwl, PolicyKind::csma_arf,
                   PolicyKind::csma_dlmcs, PolicyKind::dlca_iwl, PolicyKind::opt})
        if (to_string(p) == s) return p;
    throw ConfigError("unknown policy '" + std::string(s) + "'");
}

bool needs_jcara_model(PolicyKind p) {
    return p == PolicyKind::dlmac || p == PolicyKind::dlmac_instant || p == PolicyKind::csma_dlmcs ||
           p == PolicyKind::dlca_iwl;
}

} // namespace dlmac
