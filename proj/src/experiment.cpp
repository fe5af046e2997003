#include "dlmac/experiment.hpp"

#include "dlmac/errors.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>

namespace dlmac {
namespace {

constexpr std::array kPlainKeys = {
    "seed",
    // trace files and segments
    "trace.raw", "trace.processed", "trace.train_slots", "trace.test_begin", "trace.test_slots",
    "preprocess.domain", "preprocess.edge",
    "synth.duration_samples", "synth.sample_interval_us", "synth.n_subbands", "synth.noise_floor_dbm",
    "synth.jitter_db", "synth.seed", "synth.interferers",
    "label.txop_slots", "label.k1", "label.k2", "label.k3", "label.p_r_dbm", "label.sinr_floor_db",
    "label.stride", "label.channel", "label.channels",
    "model.arch", "model.lstm_hidden", "model.dense_hidden", "model.dnn_hidden", "model.switch_hidden",
    "model.jcara", "model.switch",
    "train.learning_rate", "train.beta1", "train.beta2", "train.epsilon", "train.batch_size",
    "train.max_epochs", "train.patience", "train.validation_fraction", "train.seed", "train.class_weights",
    "sim.policies", "sim.channel", "sim.members", "sim.begin_slot", "sim.run_slots", "sim.interval_slots",
    "sim.repetitions", "sim.rssi_min_dbm", "sim.rssi_max_dbm", "sim.keep_log",
    "traffic.lambda", "traffic.payload_bits", "traffic.buffer",
    "csma.threshold_dbm", "csma.difs_slots", "csma.cw_min", "csma.cw_max",
    "arf.n_up", "arf.n_down", "arf.initial_mcs",
    "iwl.ewma_weight", "iwl.probe_probability",
    "switch.mode", "switch.t_c", "switch.t_d", "switch.channels",
};

constexpr std::array kInterfererFields = {
    "pattern", "power_dbm", "idle_dbm", "first_subband", "last_subband", "channel", "period", "duty", "phase",
    "on_min", "on_max", "off_min", "off_max", "dwell", "hop_width", "activity",
};

/// Keys a sweep may vary: anything the simulator reads per run.
bool sweepable(std::string_view key) {
    for (std::string_view prefix : {"sim.", "traffic.", "csma.", "arf.", "iwl.", "switch."})
        if (key.starts_with(prefix)) return key != "sim.policies" && key != "sim.repetitions";
    return false;
}

bool plain_key(std::string_view key) {
    return std::find(kPlainKeys.begin(), kPlainKeys.end(), key) != kPlainKeys.end();
}

InterfererPattern pattern_from_string(const std::string& s) {
    if (s == "periodic" || s == "periodic_burst") return InterfererPattern::periodic_burst;
    if (s == "csma" || s == "csma_like") return InterfererPattern::csma_like;
    if (s == "hopping" || s == "frequency_hopping") return InterfererPattern::frequency_hopping;
    throw ConfigError("unknown interferer pattern '" + s + "'");
}

InterfererSpec interferer_from(const Config& cfg, const std::string& name) {
    const std::string p = "interferer." + name + ".";
    auto key = [&](const char* field) { return p + field; };
    InterfererSpec s;
    s.pattern = pattern_from_string(cfg.get_string(key("pattern"), "periodic"));
    s.active_power_dbm = cfg.get_double(key("power_dbm"), s.active_power_dbm);
    s.idle_floor_dbm = cfg.get_double(key("idle_dbm"), s.idle_floor_dbm);
    if (cfg.has(key("channel"))) {
        const auto ch = cfg.get_int(key("channel"), 0);
        if (ch < 1 || ch > kMaxWifiChannel) throw ConfigError(key("channel") + " must be a channel in 1..13");
        const auto span = channel_subbands(static_cast<int>(ch));
        s.first_subband = static_cast<std::size_t>(std::max(span.first, 0));
        s.last_subband = static_cast<std::size_t>(span.last);
    }
    s.first_subband = cfg.get_size(key("first_subband"), s.first_subband);
    s.last_subband = cfg.get_size(key("last_subband"), s.last_subband);
    s.period_samples = cfg.get_size(key("period"), s.period_samples);
    s.duty = cfg.get_double(key("duty"), s.duty);
    s.phase_samples = cfg.get_size(key("phase"), s.phase_samples);
    s.on_min_samples = cfg.get_size(key("on_min"), s.on_min_samples);
    s.on_max_samples = cfg.get_size(key("on_max"), s.on_max_samples);
    s.off_min_samples = cfg.get_size(key("off_min"), s.off_min_samples);
    s.off_max_samples = cfg.get_size(key("off_max"), s.off_max_samples);
    s.dwell_samples = cfg.get_size(key("dwell"), s.dwell_samples);
    s.hop_width = cfg.get_size(key("hop_width"), s.hop_width);
    s.activity = cfg.get_double(key("activity"), s.activity);
    return s;
}

std::vector<std::size_t> sizes_or(const Config& cfg, std::string_view key, std::vector<std::size_t> fallback) {
    auto v = cfg.get_size_list(key, std::move(fallback));
    for (auto x : v)
        if (x == 0) throw ConfigError("config key '" + std::string(key) + "' must list positive sizes");
    return v;
}

} // namespace

SynthScenario scenario_from_config(const Config& cfg) {
    SynthScenario s;
    s.duration_samples = cfg.get_size("synth.duration_samples", 100000);
    s.sample_interval_us = cfg.get_double("synth.sample_interval_us", s.sample_interval_us);
    s.n_subbands = cfg.get_size("synth.n_subbands", s.n_subbands);
    s.noise_floor_dbm = cfg.get_double("synth.noise_floor_dbm", s.noise_floor_dbm);
    s.jitter_db = cfg.get_double("synth.jitter_db", s.jitter_db);
    s.seed = static_cast<std::uint64_t>(cfg.get_int("synth.seed", cfg.get_int("seed", 1)));
    for (const auto& name : cfg.get_string_list("synth.interferers")) s.interferers.push_back(interferer_from(cfg, name));
    s.validate();
    return s;
}

ChannelMapOptions channel_map_options_from(const Config& cfg) {
    ChannelMapOptions o;
    const auto domain = cfg.get_string("preprocess.domain", "db");
    if (domain == "db") o.domain = AvgDomain::db;
    else if (domain == "linear") o.domain = AvgDomain::linear;
    else throw ConfigError("preprocess.domain must be 'db' or 'linear'");
    const auto edge = cfg.get_string("preprocess.edge", "truncate");
    if (edge == "truncate") o.edge = EdgePolicy::truncate;
    else if (edge == "strict") o.edge = EdgePolicy::strict;
    else throw ConfigError("preprocess.edge must be 'truncate' or 'strict'");
    return o;
}

LabelConfig label_config_from(const Config& cfg) {
    LabelConfig l;
    l.txop_slots = cfg.get_size("label.txop_slots", l.txop_slots);
    l.k1 = cfg.get_size("label.k1", l.k1);
    l.k2 = cfg.get_size("label.k2", l.k2);
    l.k3 = cfg.get_size("label.k3", l.k3);
    l.p_r_dbm = cfg.get_double("label.p_r_dbm", l.p_r_dbm);
    l.sinr_floor_db = cfg.get_double("label.sinr_floor_db", l.sinr_floor_db);
    l.stride = cfg.get_size("label.stride", l.stride);
    l.validate();
    return l;
}

TrainConfig train_config_from(const Config& cfg) {
    TrainConfig t;
    t.learning_rate = cfg.get_double("train.learning_rate", t.learning_rate);
    t.beta1 = cfg.get_double("train.beta1", t.beta1);
    t.beta2 = cfg.get_double("train.beta2", t.beta2);
    t.epsilon = cfg.get_double("train.epsilon", t.epsilon);
    t.batch_size = cfg.get_size("train.batch_size", t.batch_size);
    t.max_epochs = cfg.get_size("train.max_epochs", t.max_epochs);
    t.patience = cfg.get_size("train.patience", t.patience);
    t.validation_fraction = cfg.get_double("train.validation_fraction", t.validation_fraction);
    t.seed = static_cast<std::uint64_t>(cfg.get_int("train.seed", cfg.get_int("seed", 1)));
    t.class_weights = cfg.get_bool("train.class_weights", t.class_weights);
    t.validate();
    return t;
}

Architecture architecture_from(const Config& cfg, TaskKind task) {
    const LabelConfig l = label_config_from(cfg);
    if (task == TaskKind::jcara) {
        const auto arch = cfg.get_string("model.arch", "lstm");
        if (arch == "lstm") {
            const auto hidden = cfg.get_size("model.lstm_hidden", 128);
            const auto dense = cfg.get_size("model.dense_hidden", 64);
            if (hidden == 0 || dense == 0) throw ConfigError("model.lstm_hidden and model.dense_hidden must be positive");
            return Architecture::lstm_classifier(l.k1, l.txop_slots, hidden, dense, kMcsClasses);
        }
        if (arch == "dnn") {
            const auto hidden = sizes_or(cfg, "model.dnn_hidden", {512, 128, 64});
            return Architecture::mlp(l.jcara_window(), hidden, kMcsClasses);
        }
        throw ConfigError("model.arch must be 'lstm' or 'dnn'");
    }
    const auto channels = cfg.get_int_list("switch.channels", SwitchConfig{}.channels);
    if (channels.size() < 2) throw ConfigError("switch.channels needs at least two channels");
    const auto hidden = sizes_or(cfg, "model.switch_hidden", {64, 64, 32});
    return Architecture::mlp(channels.size() * l.k2, hidden, channels.size());
}

RunConfig run_config_from(const Config& cfg, PolicyKind policy) {
    RunConfig r;
    r.policy = policy;
    r.label = label_config_from(cfg);

    r.csma.busy_threshold_dbm = cfg.get_double("csma.threshold_dbm", r.csma.busy_threshold_dbm);
    r.csma.difs_slots = cfg.get_size("csma.difs_slots", r.csma.difs_slots);
    r.csma.cw_min = cfg.get_size("csma.cw_min", r.csma.cw_min);
    r.csma.cw_max = cfg.get_size("csma.cw_max", r.csma.cw_max);

    r.arf.n_up = static_cast<int>(cfg.get_int("arf.n_up", r.arf.n_up));
    r.arf.n_down = static_cast<int>(cfg.get_int("arf.n_down", r.arf.n_down));
    r.arf.initial_mcs = static_cast<int>(cfg.get_int("arf.initial_mcs", r.arf.initial_mcs));

    r.iwl.ewma_weight = cfg.get_double("iwl.ewma_weight", r.iwl.ewma_weight);
    r.iwl.probe_probability = cfg.get_double("iwl.probe_probability", r.iwl.probe_probability);

    r.switching.mode = switch_mode_from_string(cfg.get_string("switch.mode", "off"));
    r.switching.t_c_slots = cfg.get_size("switch.t_c", r.switching.t_c_slots);
    r.switching.t_d_slots = cfg.get_size("switch.t_d", r.switching.t_d_slots);
    r.switching.channels = cfg.get_int_list("switch.channels", r.switching.channels);

    r.traffic.lambda_per_slot = cfg.get_double("traffic.lambda", r.traffic.lambda_per_slot);
    r.traffic.payload_bits = cfg.get_size("traffic.payload_bits", r.traffic.payload_bits);
    r.traffic.buffer_capacity = cfg.get_size("traffic.buffer", r.traffic.buffer_capacity);

    r.channel = static_cast<int>(cfg.get_int("sim.channel", cfg.get_int("label.channel", r.channel)));
    r.members = cfg.get_size("sim.members", r.members);
    r.begin_slot = static_cast<std::uint64_t>(cfg.get_size("sim.begin_slot", 0));
    r.run_slots = static_cast<std::uint64_t>(cfg.get_size("sim.run_slots", 0));
    r.interval_slots = cfg.get_size("sim.interval_slots", r.interval_slots);
    r.rssi_min_dbm = cfg.get_optional_double("sim.rssi_min_dbm");
    r.rssi_max_dbm = cfg.get_optional_double("sim.rssi_max_dbm");
    r.keep_log = cfg.get_bool("sim.keep_log", r.keep_log);
    r.validate();
    return r;
}

std::vector<PolicyKind> policies_from(const Config& cfg) {
    std::vector<PolicyKind> out;
    for (const auto& name : cfg.get_string_list("sim.policies")) {
        try {
            out.push_back(policy_from_string(name));
        } catch (const Error& e) {
            throw ConfigError(std::string("sim.policies: ") + e.what());
        }
    }
    if (out.empty()) out.push_back(PolicyKind::dlmac);
    return out;
}

std::vector<std::uint64_t> seeds_from(const Config& cfg, std::uint64_t base) {
    const auto n = cfg.get_size("sim.repetitions", 10);
    if (n == 0) throw ConfigError("sim.repetitions must be positive");
    std::vector<std::uint64_t> seeds(n);
    for (std::size_t i = 0; i < n; ++i) seeds[i] = base + i;
    return seeds;
}

bool is_known_key(std::string_view key) {
    if (plain_key(key)) return true;
    if (key.starts_with("interferer.")) {
        const auto rest = key.substr(11);
        const auto dot = rest.find('.');
        if (dot == 0 || dot == std::string_view::npos) return false;
        const auto field = rest.substr(dot + 1);
        return std::find(kInterfererFields.begin(), kInterfererFields.end(), field) != kInterfererFields.end();
    }
    if (key.starts_with("sweep.")) {
        const auto target = key.substr(6);
        return plain_key(target) && sweepable(target);
    }
    return false;
}

void validate_config(const Config& cfg) {
    cfg.check_known([](const std::string& k) { return is_known_key(k); });
    try {
        (void)channel_map_options_from(cfg);
        (void)train_config_from(cfg);
        (void)policies_from(cfg);
        (void)seeds_from(cfg, 1);
        (void)architecture_from(cfg, TaskKind::jcara);
        const auto run = run_config_from(cfg);
        if (run.switching.mode != SwitchMode::off) (void)architecture_from(cfg, TaskKind::switch_channel);
        if (cfg.has("synth.interferers") || cfg.has("synth.duration_samples")) (void)scenario_from_config(cfg);
        for (const auto& axis : sweep_axes(cfg)) {
            for (const auto& v : axis.values) {
                Config point = cfg;
                point.set(axis.key, v);
                (void)run_config_from(point);
            }
        }
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        throw ConfigError(e.what());
    }
}

ProcessedTrace trace_segment(const ProcessedTrace& trace, std::size_t begin, std::size_t count) {
    if (begin > trace.length())
        throw InsufficientDataError("segment starts at slot " + std::to_string(begin) + " but the trace has " +
                                    std::to_string(trace.length()));
    const std::size_t n = count == 0 ? trace.length() - begin : count;
    if (begin + n > trace.length())
        throw InsufficientDataError("segment [" + std::to_string(begin) + ", " + std::to_string(begin + n) +
                                    ") runs past the trace end " + std::to_string(trace.length()));
    ProcessedTrace out;
    out.slot_us = trace.slot_us;
    const std::size_t cols = trace.samples.cols();
    out.samples = Matrix(n, cols);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < cols; ++c) out.samples(r, c) = trace.samples(begin + r, c);
    return out;
}

std::vector<SweepAxis> sweep_axes(const Config& cfg) {
    std::vector<SweepAxis> axes;
    for (const auto& [k, v] : cfg.entries()) {
        if (!k.starts_with("sweep.")) continue;
        SweepAxis axis{k.substr(6), split_list(v)};
        if (!sweepable(axis.key)) throw ConfigError("'" + axis.key + "' cannot be swept");
        if (axis.values.empty()) throw ConfigError("sweep axis '" + axis.key + "' has no values");
        axes.push_back(std::move(axis));
    }
    return axes;
}

std::vector<RunSpec> expand_runs(const Config& cfg, std::span<const std::uint64_t> seeds) {
    const auto axes = sweep_axes(cfg);
    const auto policies = policies_from(cfg);
    std::size_t points = 1;
    for (const auto& a : axes) points *= a.values.size();

    std::vector<RunSpec> specs;
    specs.reserve(points * policies.size() * seeds.size());
    std::vector<std::size_t> idx(axes.size(), 0);
    for (std::size_t p = 0; p < points; ++p) {
        Config point = cfg;
        std::string tag;
        for (std::size_t a = 0; a < axes.size(); ++a) {
            point.set(axes[a].key, axes[a].values[idx[a]]);
            tag += (a ? ";" : "") + axes[a].key + ":" + axes[a].values[idx[a]];
        }
        for (auto policy : policies) {
            RunConfig run = run_config_from(point, policy);
            std::string label(to_string(policy));
            if (!tag.empty()) label += "[" + tag + "]";
            run.label_override = label;
            for (auto seed : seeds) specs.push_back({label, run, seed});
        }
        // odometer over the axes, last axis fastest
        for (std::size_t a = axes.size(); a-- > 0;) {
            if (++idx[a] < axes[a].values.size()) break;
            idx[a] = 0;
        }
    }
    return specs;
}

std::vector<SimReport> run_many(const ProcessedTrace& trace, std::span<const RunSpec> specs, const Models& models,
                                std::size_t jobs) {
    std::vector<SimReport> reports(specs.size());
    if (specs.empty()) return reports;
    jobs = std::clamp<std::size_t>(jobs, 1, specs.size());

    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= specs.size()) return;
            try {
                reports[i] = run_simulation(trace, specs[i].run, models, specs[i].seed);
                reports[i].label = specs[i].label;
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next.store(specs.size());
                return;
            }
        }
    };
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(jobs);
        for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(worker);
    }
    if (failure) std::rethrow_exception(failure);
    return reports;
}

} // namespace dlmac
