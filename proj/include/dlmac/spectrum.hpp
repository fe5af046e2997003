#pragma once

#include "dlmac/matrix.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace dlmac {

inline constexpr double kRawSampleIntervalUs = 100.0;
inline constexpr double kSlotUs = 9.0;
inline constexpr std::size_t kMaxSubbands = 79;
inline constexpr std::size_t kSubbandsPerChannel = 21;
inline constexpr int kMaxWifiChannel = 13;

/// Sub-band level RSSI capture: one row per sample time, one column per
/// 1 MHz sub-band starting at 2402 MHz.
struct RawTrace {
    double sample_interval_us = kRawSampleIntervalUs;
    Matrix samples;

    std::size_t length() const noexcept { return samples.rows(); }
    std::size_t n_subbands() const noexcept { return samples.cols(); }

    static constexpr double subband_freq_mhz(std::size_t n) { return 2402.0 + static_cast<double>(n); }

    /// Throws DimensionError / ParseError-free checks of the type invariants.
    void validate() const;
};

/// Wi-Fi channel level RSSI on the mini-slot grid. Column i-1 holds channel i.
struct ProcessedTrace {
    double slot_us = kSlotUs;
    Matrix samples;

    std::size_t length() const noexcept { return samples.rows(); }
    int n_channels() const noexcept { return static_cast<int>(samples.cols()); }
    bool has_channel(int channel) const noexcept { return channel >= 1 && channel <= n_channels(); }

    /// Copy of one channel's time series (channel is 1-based).
    std::vector<double> channel_series(int channel) const;

    static constexpr double channel_center_mhz(int channel) { return 2412.0 + 5.0 * (channel - 1); }
};

// ---------------------------------------------------------------------------
// File I/O. Trace files are CSV with a `#` header line:
//   raw:       `# ts_us=<int> nbands=<int>`
//   processed: `# slot_us=9 channels=<int>`

RawTrace load_raw_trace(const std::filesystem::path& path);
void save_raw_trace(const RawTrace& trace, const std::filesystem::path& path);
RawTrace parse_raw_trace(std::istream& in);

ProcessedTrace load_processed_trace(const std::filesystem::path& path);
void save_processed_trace(const ProcessedTrace& trace, const std::filesystem::path& path);
ProcessedTrace parse_processed_trace(std::istream& in);

// ---------------------------------------------------------------------------
// Preprocessing.

/// Linear interpolant through (t1, v1) and (t2, v2) evaluated at t.
constexpr double linear_interpolate(double t1, double v1, double t2, double v2, double t) {
    return (v2 - v1) / (t2 - t1) * (t - t1) + v1;
}

/// Integer up-sampling factor floor(sample_interval / slot).
std::size_t upsampling_factor(double sample_interval_us, double slot_us = kSlotUs);

/// Value of one sub-band at absolute offset `t_us` from the first sample.
/// Past the last sample the last value is held.
double sample_at(const RawTrace& raw, std::size_t subband, double t_us);

/// Up-samples every sub-band onto the mini-slot grid anchored at the first
/// sample. Output has factor * L rows and sample_interval_us == slot_us.
RawTrace interpolate_time(const RawTrace& raw, double slot_us = kSlotUs);

enum class AvgDomain { db, linear };

/// strict: only channels whose 21 sub-bands are all present.
/// truncate: also channels whose centre sub-band exists and at least 11 of
/// their 21 sub-bands are present; those average over what is available.
enum class EdgePolicy { strict, truncate };

struct ChannelMapOptions {
    AvgDomain domain = AvgDomain::db;
    EdgePolicy edge = EdgePolicy::truncate;
};

struct ChannelMapResult {
    ProcessedTrace trace;
    std::vector<int> partial_channels; ///< emitted from fewer than 21 sub-bands
    std::vector<int> omitted_channels; ///< not enough sub-bands to emit
};

/// Averages the 21 sub-bands around each channel centre.
ChannelMapResult map_to_channels(const RawTrace& upsampled, const ChannelMapOptions& options = {});

/// interpolate_time followed by map_to_channels without materialising the
/// up-sampled sub-band matrix. Produces the same values as the two-step path.
ChannelMapResult preprocess(const RawTrace& raw, const ChannelMapOptions& options = {},
                            double slot_us = kSlotUs);

/// Sub-band index range [first, last] covering a channel (may extend past the
/// available sub-bands).
struct SubbandSpan {
    int first;
    int last;
};
constexpr SubbandSpan channel_subbands(int channel) {
    const int centre = 10 + 5 * (channel - 1);
    return {centre - 10, centre + 10};
}

// ---------------------------------------------------------------------------
// Synthetic coexistence traces.

enum class InterfererPattern { periodic_burst, csma_like, frequency_hopping };

struct InterfererSpec {
    InterfererPattern pattern = InterfererPattern::periodic_burst;
    double active_power_dbm = -60.0;
    double idle_floor_dbm = -150.0;
    std::size_t first_subband = 0;
    std::size_t last_subband = 20;

    // periodic_burst
    std::size_t period_samples = 40;
    double duty = 0.5;
    std::size_t phase_samples = 0;

    // csma_like: on/off durations drawn uniformly from the inclusive ranges
    std::size_t on_min_samples = 2;
    std::size_t on_max_samples = 20;
    std::size_t off_min_samples = 2;
    std::size_t off_max_samples = 40;

    // frequency_hopping: every dwell, active with probability `activity` on a
    // uniformly chosen block of `hop_width` sub-bands inside [first, last]
    std::size_t dwell_samples = 6;
    std::size_t hop_width = 1;
    double activity = 1.0;
};

struct SynthScenario {
    std::size_t duration_samples = 0;
    double sample_interval_us = kRawSampleIntervalUs;
    std::size_t n_subbands = kMaxSubbands;
    double noise_floor_dbm = -95.0;
    /// Standard deviation of Gaussian jitter added to every sample (dB).
    double jitter_db = 0.0;
    std::vector<InterfererSpec> interferers;
    std::uint64_t seed = 1;

    void validate() const;
};

/// On/off schedule of one interferer, one entry per raw sample. For hopping
/// interferers the entry holds the first affected sub-band or -1 when silent.
std::vector<int> interferer_schedule(const InterfererSpec& spec, std::size_t duration_samples,
                                     std::uint64_t seed, std::size_t interferer_index);

RawTrace synthesize_trace(const SynthScenario& scenario);

double dbm_to_mw(double dbm);
double mw_to_dbm(double mw);

} // namespace dlmac
