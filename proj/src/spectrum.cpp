#include "dlmac/spectrum.hpp"

#include "dlmac/errors.hpp"
#include "dlmac/rng.hpp"
#include "text_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace dlmac {

namespace {

struct ChannelBands {
    int channel;
    std::size_t first;
    std::size_t last; // inclusive
    bool partial;
};

std::vector<ChannelBands> plan_channels(std::size_t n_subbands, EdgePolicy edge,
                                        std::vector<int>& partial, std::vector<int>& omitted) {
    std::vector<ChannelBands> plan;
    for (int ch = 1; ch <= kMaxWifiChannel; ++ch) {
        const SubbandSpan span = channel_subbands(ch);
        const auto n = static_cast<int>(n_subbands);
        const int last_avail = std::min(span.last, n - 1);
        const int count = last_avail - span.first + 1;
        const int centre = span.first + 10;
        if (count == static_cast<int>(kSubbandsPerChannel)) {
            plan.push_back({ch, static_cast<std::size_t>(span.first), static_cast<std::size_t>(last_avail), false});
        } else if (edge == EdgePolicy::truncate && centre < n && count >= 11) {
            plan.push_back({ch, static_cast<std::size_t>(span.first), static_cast<std::size_t>(last_avail), true});
            partial.push_back(ch);
        } else {
            omitted.push_back(ch);
        }
    }
    if (plan.empty()) throw EmptyOutputError("no Wi-Fi channel is covered by the available sub-bands");
    return plan;
}

double average_bands(std::span<const double> values, AvgDomain domain) {
    double sum = 0.0;
    if (domain == AvgDomain::db) {
        for (double v : values) sum += v;
        return sum / static_cast<double>(values.size());
    }
    for (double v : values) sum += dbm_to_mw(v);
    return mw_to_dbm(sum / static_cast<double>(values.size()));
}

void check_finite_rectangular(const Matrix& m) {
    for (double v : m.data())
        if (!std::isfinite(v)) throw DimensionError("trace contains a non-finite value");
}

} // namespace

void RawTrace::validate() const {
    if (!(sample_interval_us > 0.0)) throw DimensionError("sample interval must be positive");
    if (n_subbands() < kSubbandsPerChannel || n_subbands() > kMaxSubbands)
        throw DimensionError("raw trace needs between 21 and 79 sub-bands, got " + std::to_string(n_subbands()));
    check_finite_rectangular(samples);
}

std::vector<double> ProcessedTrace::channel_series(int channel) const {
    if (!has_channel(channel))
        throw DimensionError("channel " + std::to_string(channel) + " not present in processed trace");
    return samples.column(static_cast<std::size_t>(channel - 1));
}

// ---------------------------------------------------------------------------

RawTrace parse_raw_trace(std::istream& in) {
    detail::CsvMatrixReader reader(in);
    const auto header = reader.header();
    RawTrace trace;
    trace.sample_interval_us = detail::header_number(header, "ts_us", 1);
    const auto nbands = static_cast<std::size_t>(detail::header_number(header, "nbands", 1));
    if (nbands < kSubbandsPerChannel || nbands > kMaxSubbands)
        throw ParseError(1, "nbands must be in [21, 79]");
    if (!(trace.sample_interval_us > 0.0)) throw ParseError(1, "ts_us must be positive");
    trace.samples = reader.read_rows(nbands);
    return trace;
}

RawTrace load_raw_trace(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open trace file " + path.string());
    return parse_raw_trace(in);
}

void save_raw_trace(const RawTrace& trace, const std::filesystem::path& path) {
    std::ostringstream head;
    head << "# ts_us=" << detail::format_number(trace.sample_interval_us) << " nbands=" << trace.n_subbands();
    detail::write_csv_matrix(path, head.str(), trace.samples);
}

ProcessedTrace parse_processed_trace(std::istream& in) {
    detail::CsvMatrixReader reader(in);
    const auto header = reader.header();
    ProcessedTrace trace;
    trace.slot_us = detail::header_number(header, "slot_us", 1);
    const auto channels = static_cast<std::size_t>(detail::header_number(header, "channels", 1));
    if (channels < 1 || channels > static_cast<std::size_t>(kMaxWifiChannel))
        throw ParseError(1, "channels must be in [1, 13]");
    trace.samples = reader.read_rows(channels);
    return trace;
}

ProcessedTrace load_processed_trace(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open trace file " + path.string());
    return parse_processed_trace(in);
}

void save_processed_trace(const ProcessedTrace& trace, const std::filesystem::path& path) {
    std::ostringstream head;
    head << "# slot_us=" << detail::format_number(trace.slot_us) << " channels=" << trace.n_channels();
    detail::write_csv_matrix(path, head.str(), trace.samples);
}

// ---------------------------------------------------------------------------

std::size_t upsampling_factor(double sample_interval_us, double slot_us) {
    const auto factor = static_cast<std::size_t>(std::floor(sample_interval_us / slot_us));
    if (factor == 0) throw DimensionError("sample interval shorter than a mini-slot");
    return factor;
}

double sample_at(const RawTrace& raw, std::size_t subband, double t_us) {
    const std::size_t n = raw.length();
    const double ts = raw.sample_interval_us;
    const auto l = static_cast<std::size_t>(std::floor(t_us / ts));
    if (l + 1 >= n) return raw.samples(n - 1, subband);
    const double t1 = static_cast<double>(l) * ts;
    return linear_interpolate(t1, raw.samples(l, subband), t1 + ts, raw.samples(l + 1, subband), t_us);
}

RawTrace interpolate_time(const RawTrace& raw, double slot_us) {
    if (raw.length() < 2) throw InsufficientDataError("interpolation needs at least two samples");
    const std::size_t factor = upsampling_factor(raw.sample_interval_us, slot_us);
    const std::size_t rows = factor * raw.length();
    RawTrace out;
    out.sample_interval_us = slot_us;
    out.samples = Matrix(rows, raw.n_subbands());
    for (std::size_t k = 0; k < rows; ++k) {
        const double t = static_cast<double>(k) * slot_us;
        for (std::size_t b = 0; b < raw.n_subbands(); ++b) out.samples(k, b) = sample_at(raw, b, t);
    }
    return out;
}

ChannelMapResult map_to_channels(const RawTrace& upsampled, const ChannelMapOptions& options) {
    ChannelMapResult result;
    const auto plan = plan_channels(upsampled.n_subbands(), options.edge, result.partial_channels,
                                    result.omitted_channels);
    result.trace.slot_us = upsampled.sample_interval_us;
    result.trace.samples = Matrix(upsampled.length(), plan.size());
    for (std::size_t r = 0; r < upsampled.length(); ++r) {
        const auto row = upsampled.samples.row(r);
        for (std::size_t c = 0; c < plan.size(); ++c) {
            const auto& p = plan[c];
            result.trace.samples(r, c) = average_bands(row.subspan(p.first, p.last - p.first + 1), options.domain);
        }
    }
    return result;
}

ChannelMapResult preprocess(const RawTrace& raw, const ChannelMapOptions& options, double slot_us) {
    if (raw.length() < 2) throw InsufficientDataError("interpolation needs at least two samples");
    ChannelMapResult result;
    const auto plan = plan_channels(raw.n_subbands(), options.edge, result.partial_channels,
                                    result.omitted_channels);
    const std::size_t factor = upsampling_factor(raw.sample_interval_us, slot_us);
    const std::size_t rows = factor * raw.length();
    result.trace.slot_us = slot_us;
    result.trace.samples = Matrix(rows, plan.size());
    std::vector<double> row(raw.n_subbands());
    for (std::size_t k = 0; k < rows; ++k) {
        const double t = static_cast<double>(k) * slot_us;
        for (std::size_t b = 0; b < row.size(); ++b) row[b] = sample_at(raw, b, t);
        for (std::size_t c = 0; c < plan.size(); ++c) {
            const auto& p = plan[c];
            result.trace.samples(k, c) =
                average_bands(std::span<const double>(row).subspan(p.first, p.last - p.first + 1), options.domain);
        }
    }
    return result;
}

// ---------------------------------------------------------------------------

double dbm_to_mw(double dbm) { return std::pow(10.0, dbm / 10.0); }
double mw_to_dbm(double mw) { return 10.0 * std::log10(mw); }

void SynthScenario::validate() const {
    if (duration_samples == 0) throw ConfigError("scenario duration must be positive");
    if (n_subbands < kSubbandsPerChannel || n_subbands > kMaxSubbands)
        throw ConfigError("scenario n_subbands must be in [21, 79]");
    if (!(sample_interval_us > 0.0)) throw ConfigError("scenario sample interval must be positive");
    if (jitter_db < 0.0) throw ConfigError("jitter must be non-negative");
    for (const auto& s : interferers) {
        if (!(s.duty > 0.0 && s.duty <= 1.0)) throw ConfigError("interferer duty must be in (0, 1]");
        if (!(s.active_power_dbm > s.idle_floor_dbm))
            throw ConfigError("interferer active power must exceed its idle floor");
        if (s.first_subband > s.last_subband || s.last_subband >= n_subbands)
            throw ConfigError("interferer sub-band range outside the scenario");
        if (s.pattern == InterfererPattern::periodic_burst && s.period_samples == 0)
            throw ConfigError("periodic interferer needs a positive period");
        if (s.pattern == InterfererPattern::csma_like &&
            (s.on_min_samples == 0 || s.on_min_samples > s.on_max_samples || s.off_min_samples > s.off_max_samples))
            throw ConfigError("csma-like interferer needs 0 < on_min <= on_max and off_min <= off_max");
        if (s.pattern == InterfererPattern::frequency_hopping &&
            (s.dwell_samples == 0 || s.hop_width == 0 || s.hop_width > s.last_subband - s.first_subband + 1 ||
             s.activity < 0.0 || s.activity > 1.0))
            throw ConfigError("hopping interferer needs positive dwell and a hop width inside its range");
    }
}

std::vector<int> interferer_schedule(const InterfererSpec& spec, std::size_t duration, std::uint64_t seed,
                                     std::size_t index) {
    std::vector<int> sched(duration, -1);
    Rng rng = Rng::derive(seed, 1000 + index);
    switch (spec.pattern) {
    case InterfererPattern::periodic_burst: {
        const auto on = static_cast<std::size_t>(std::llround(spec.duty * static_cast<double>(spec.period_samples)));
        for (std::size_t s = 0; s < duration; ++s)
            if ((s + spec.phase_samples) % spec.period_samples < on) sched[s] = static_cast<int>(spec.first_subband);
        break;
    }
    case InterfererPattern::csma_like: {
        auto draw = [&](std::size_t lo, std::size_t hi) { return lo + rng.uniform_int(hi - lo + 1); };
        std::size_t s = draw(0, spec.off_max_samples);
        while (s < duration) {
            const std::size_t end = std::min(duration, s + draw(spec.on_min_samples, spec.on_max_samples));
            for (; s < end; ++s) sched[s] = static_cast<int>(spec.first_subband);
            s += draw(spec.off_min_samples, spec.off_max_samples);
        }
        break;
    }
    case InterfererPattern::frequency_hopping: {
        const std::size_t positions = spec.last_subband - spec.first_subband + 2 - spec.hop_width;
        for (std::size_t s = 0; s < duration; s += spec.dwell_samples) {
            const bool active = rng.bernoulli(spec.activity);
            const auto start = static_cast<int>(spec.first_subband + rng.uniform_int(positions));
            if (!active) continue;
            for (std::size_t k = s; k < std::min(duration, s + spec.dwell_samples); ++k) sched[k] = start;
        }
        break;
    }
    }
    return sched;
}

RawTrace synthesize_trace(const SynthScenario& scenario) {
    scenario.validate();
    const std::size_t n = scenario.duration_samples;
    std::vector<std::vector<int>> schedules;
    for (std::size_t i = 0; i < scenario.interferers.size(); ++i)
        schedules.push_back(interferer_schedule(scenario.interferers[i], n, scenario.seed, i));

    RawTrace trace;
    trace.sample_interval_us = scenario.sample_interval_us;
    trace.samples = Matrix(n, scenario.n_subbands);
    Rng jitter = Rng::derive(scenario.seed, 0);
    const double noise_mw = dbm_to_mw(scenario.noise_floor_dbm);
    std::vector<double> active_mw, idle_mw;
    for (const auto& spec : scenario.interferers) {
        active_mw.push_back(dbm_to_mw(spec.active_power_dbm));
        idle_mw.push_back(dbm_to_mw(spec.idle_floor_dbm));
    }

    for (std::size_t s = 0; s < n; ++s) {
        for (std::size_t b = 0; b < scenario.n_subbands; ++b) {
            double total = noise_mw;
            bool touched = false;
            for (std::size_t i = 0; i < scenario.interferers.size(); ++i) {
                const auto& spec = scenario.interferers[i];
                if (b < spec.first_subband || b > spec.last_subband) continue;
                touched = true;
                const int at = schedules[i][s];
                bool on = at >= 0;
                if (on && spec.pattern == InterfererPattern::frequency_hopping)
                    on = b >= static_cast<std::size_t>(at) && b < static_cast<std::size_t>(at) + spec.hop_width;
                total += on ? active_mw[i] : idle_mw[i];
            }
            double v = touched ? mw_to_dbm(total) : scenario.noise_floor_dbm;
            if (scenario.jitter_db > 0.0) v += scenario.jitter_db * jitter.normal();
            trace.samples(s, b) = v;
        }
    }
    return trace;
}

} // namespace dlmac
