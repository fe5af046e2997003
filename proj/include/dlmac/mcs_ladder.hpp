#pragma once

#include "dlmac/spectrum.hpp"

#include <array>
#include <filesystem>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace dlmac {

inline constexpr int kNoAccess = -1;
inline constexpr int kMaxMcs = 8;
inline constexpr int kMcsClasses = kMaxMcs + 2; // -1..8

struct McsEntry {
    int index;
    std::string_view modulation;
    std::string_view code_rate;
    double rate_mbps;
    double min_sinr_db;
};

/// MCS table: index -1 (no access) through 8, 802.11n single stream rates.
class McsLadder {
public:
    static const McsLadder& standard();

    std::span<const McsEntry> entries() const noexcept { return entries_; }
    const McsEntry& at(int index) const;

    double rate_mbps(int index) const { return at(index).rate_mbps; }
    /// -infinity for index -1.
    double min_sinr_db(int index) const { return at(index).min_sinr_db; }

private:
    explicit McsLadder(std::array<McsEntry, kMcsClasses> entries) : entries_(entries) {}
    std::array<McsEntry, kMcsClasses> entries_;
};

constexpr int mcs_to_class(int mcs) { return mcs + 1; }
constexpr int class_to_mcs(int cls) { return cls - 1; }

/// SINR (dB) seen at the receiver when the interference averages `mean_rssi_dbm`.
constexpr double sinr_from_mean_rssi(double mean_rssi_dbm, double p_r_dbm) { return p_r_dbm - mean_rssi_dbm; }

/// Largest index whose minimum SINR is <= sinr; -1 below the MCS 0 threshold.
int mcs_for_sinr(double sinr_db, const McsLadder& ladder = McsLadder::standard());

struct LabelConfig {
    std::size_t txop_slots = 120;
    std::size_t k1 = 3;
    std::size_t k2 = 5;
    std::size_t k3 = 2;
    double p_r_dbm = -65.0;
    /// Stands in for the unspecified minimum SINR of the no-access row.
    double sinr_floor_db = -20.0;
    std::size_t stride = 120;

    void validate() const;
    std::size_t jcara_window() const { return txop_slots * k1; }
    std::size_t switch_history() const { return txop_slots * k2; }
    std::size_t switch_horizon() const { return txop_slots * k3; }
};

struct JcaraSample {
    std::size_t t;                ///< decision time: features are [t - 120*K1, t)
    std::vector<double> features; ///< 120*K1 dBm values, oldest first
    int mcs;                      ///< -1..8
};

struct SwitchSample {
    std::size_t t;
    std::vector<double> features; ///< M*K2 per-TXOP mean SINRs, channel-major
    int channel;                  ///< winning channel number
    int channel_class;            ///< its position in the channel set
};

/// Mean of `series[begin, begin + count)`, summed left to right.
double window_mean(std::span<const double> series, std::size_t begin, std::size_t count);

/// Genie decision for the TXOP occupying [t, t + txop): the best MCS the
/// realised future interference allows.
int opt_decision(std::span<const double> series, std::size_t t, const LabelConfig& cfg,
                 const McsLadder& ladder = McsLadder::standard());

/// Windows at t = 120*K1, 120*K1 + stride, ... while t < L - 120.
std::vector<JcaraSample> label_jcara(std::span<const double> series, const LabelConfig& cfg,
                                     const McsLadder& ladder = McsLadder::standard());
std::vector<JcaraSample> label_jcara(const ProcessedTrace& trace, int channel, const LabelConfig& cfg,
                                     const McsLadder& ladder = McsLadder::standard());
/// Windows of several channels merged in time order (channel order within
/// a slot), for one channel-access model shared by all of them.
std::vector<JcaraSample> label_jcara_pooled(const ProcessedTrace& trace, std::span<const int> channels,
                                            const LabelConfig& cfg, const McsLadder& ladder = McsLadder::standard());

/// Per-TXOP mean SINR features of one channel for the K2 TXOPs before t.
std::vector<double> switch_features(std::span<const double> series, std::size_t t, const LabelConfig& cfg);

std::vector<SwitchSample> label_switch(const ProcessedTrace& trace, std::span<const int> channels,
                                       const LabelConfig& cfg);

// ---------------------------------------------------------------------------
// Dataset files: `# task=<jcara|switch> k1=.. k2=.. k3=.. txop=.. p_r=.. channels=a;b;c features=N`
// followed by one CSV row per sample: features..., label.

enum class TaskKind { jcara, switch_channel };

std::string_view to_string(TaskKind task);
TaskKind task_from_string(std::string_view s);

struct Dataset {
    TaskKind task = TaskKind::jcara;
    LabelConfig label_config;
    std::vector<int> channels;
    std::size_t feature_dim = 0;
    std::vector<std::vector<double>> features;
    std::vector<int> labels; ///< MCS index (jcara) or channel number (switch)

    std::size_t size() const noexcept { return labels.size(); }
    /// Labels mapped to 0-based classifier classes.
    std::vector<int> classes() const;
    std::size_t n_classes() const;
};

Dataset make_dataset(std::span<const JcaraSample> samples, const LabelConfig& cfg, int channel);
Dataset make_dataset(std::span<const JcaraSample> samples, const LabelConfig& cfg, std::span<const int> channels);
Dataset make_dataset(std::span<const SwitchSample> samples, const LabelConfig& cfg, std::span<const int> channels);

void save_dataset(const Dataset& data, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);

} // namespace dlmac
