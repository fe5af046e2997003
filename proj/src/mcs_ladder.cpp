#include "dlmac/mcs_ladder.hpp"

#include "dlmac/errors.hpp"
#include "text_io.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace dlmac {

const McsLadder& McsLadder::standard() {
    static const McsLadder ladder({{
        {-1, "-", "-", 0.0, -std::numeric_limits<double>::infinity()},
        {0, "BPSK", "1/2", 6.5, 2.0},
        {1, "QPSK", "1/2", 13.0, 5.0},
        {2, "QPSK", "3/4", 19.5, 9.0},
        {3, "16-QAM", "1/2", 26.0, 11.0},
        {4, "16-QAM", "3/4", 39.0, 15.0},
        {5, "64-QAM", "2/3", 52.0, 18.0},
        {6, "64-QAM", "3/4", 58.5, 20.0},
        {7, "64-QAM", "5/6", 65.0, 25.0},
        {8, "256-QAM", "3/4", 78.0, 28.0},
    }});
    return ladder;
}

const McsEntry& McsLadder::at(int index) const {
    if (index < kNoAccess || index > kMaxMcs) throw DimensionError("MCS index out of range: " + std::to_string(index));
    return entries_[static_cast<std::size_t>(mcs_to_class(index))];
}

int mcs_for_sinr(double sinr_db, const McsLadder& ladder) {
    int best = kNoAccess;
    for (const auto& e : ladder.entries())
        if (e.index >= 0 && e.min_sinr_db <= sinr_db) best = e.index;
    return best;
}

void LabelConfig::validate() const {
    if (txop_slots == 0) throw ConfigError("txop_slots must be positive");
    if (k1 == 0 || k2 == 0 || k3 == 0) throw ConfigError("K1, K2 and K3 must be at least 1");
    if (stride == 0) throw ConfigError("label stride must be positive");
}

double window_mean(std::span<const double> series, std::size_t begin, std::size_t count) {
    double sum = 0.0;
    for (std::size_t i = begin; i < begin + count; ++i) sum += series[i];
    return sum / static_cast<double>(count);
}

int opt_decision(std::span<const double> series, std::size_t t, const LabelConfig& cfg, const McsLadder& ladder) {
    if (t + cfg.txop_slots > series.size())
        throw InsufficientDataError("TXOP window at slot " + std::to_string(t) + " runs past the end of the trace");
    const double mean = window_mean(series, t, cfg.txop_slots);
    return mcs_for_sinr(sinr_from_mean_rssi(mean, cfg.p_r_dbm), ladder);
}

std::vector<JcaraSample> label_jcara(std::span<const double> series, const LabelConfig& cfg,
                                     const McsLadder& ladder) {
    cfg.validate();
    const std::size_t window = cfg.jcara_window();
    if (series.size() < window + cfg.txop_slots)
        throw InsufficientDataError("trace of " + std::to_string(series.size()) + " slots is shorter than 120*(K1+1)");
    std::vector<JcaraSample> out;
    for (std::size_t t = window; t + cfg.txop_slots < series.size(); t += cfg.stride) {
        JcaraSample s;
        s.t = t;
        s.features.assign(series.begin() + static_cast<std::ptrdiff_t>(t - window),
                          series.begin() + static_cast<std::ptrdiff_t>(t));
        s.mcs = opt_decision(series, t, cfg, ladder);
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<JcaraSample> label_jcara(const ProcessedTrace& trace, int channel, const LabelConfig& cfg,
                                     const McsLadder& ladder) {
    const auto series = trace.channel_series(channel);
    return label_jcara(series, cfg, ladder);
}

std::vector<JcaraSample> label_jcara_pooled(const ProcessedTrace& trace, std::span<const int> channels,
                                            const LabelConfig& cfg, const McsLadder& ladder) {
    if (channels.empty()) throw ConfigError("no channels to label");
    std::vector<JcaraSample> out;
    for (int ch : channels) {
        auto v = label_jcara(trace, ch, cfg, ladder);
        out.insert(out.end(), std::make_move_iterator(v.begin()), std::make_move_iterator(v.end()));
    }
    std::stable_sort(out.begin(), out.end(), [](const JcaraSample& a, const JcaraSample& b) { return a.t < b.t; });
    return out;
}

std::vector<double> switch_features(std::span<const double> series, std::size_t t, const LabelConfig& cfg) {
    if (t < cfg.switch_history() || t > series.size())
        throw InsufficientDataError("not enough history for switch features");
    std::vector<double> out;
    out.reserve(cfg.k2);
    for (std::size_t k = 0; k < cfg.k2; ++k) {
        const std::size_t begin = t - cfg.txop_slots * (cfg.k2 - k);
        out.push_back(sinr_from_mean_rssi(window_mean(series, begin, cfg.txop_slots), cfg.p_r_dbm));
    }
    return out;
}

std::vector<SwitchSample> label_switch(const ProcessedTrace& trace, std::span<const int> channels,
                                       const LabelConfig& cfg) {
    cfg.validate();
    if (channels.empty()) throw ConfigError("switch labeling needs at least one channel");
    std::vector<std::vector<double>> series;
    for (int ch : channels) series.push_back(trace.channel_series(ch));
    const std::size_t history = cfg.switch_history();
    const std::size_t horizon = cfg.switch_horizon();
    if (trace.length() < history + horizon)
        throw InsufficientDataError("trace too short for switch labeling: need 120*(K2+K3) slots");

    std::vector<SwitchSample> out;
    for (std::size_t t = history; t + horizon < trace.length(); t += cfg.stride) {
        SwitchSample s;
        s.t = t;
        std::size_t best = 0;
        double best_sinr = 0.0;
        for (std::size_t m = 0; m < channels.size(); ++m) {
            const auto f = switch_features(series[m], t, cfg);
            s.features.insert(s.features.end(), f.begin(), f.end());
            const double future = sinr_from_mean_rssi(window_mean(series[m], t, horizon), cfg.p_r_dbm);
            if (m == 0 || future > best_sinr || (future == best_sinr && channels[m] < channels[best])) {
                best = m;
                best_sinr = future;
            }
        }
        s.channel = channels[best];
        s.channel_class = static_cast<int>(best);
        out.push_back(std::move(s));
    }
    return out;
}

// ---------------------------------------------------------------------------

std::string_view to_string(TaskKind task) { return task == TaskKind::jcara ? "jcara" : "switch"; }

TaskKind task_from_string(std::string_view s) {
    if (s == "jcara") return TaskKind::jcara;
    if (s == "switch") return TaskKind::switch_channel;
    throw SchemaError("unknown task kind '" + std::string(s) + "'");
}

std::vector<int> Dataset::classes() const {
    std::vector<int> out;
    out.reserve(labels.size());
    for (int label : labels) {
        if (task == TaskKind::jcara) {
            out.push_back(mcs_to_class(label));
        } else {
            const auto it = std::find(channels.begin(), channels.end(), label);
            if (it == channels.end()) throw SchemaError("label channel " + std::to_string(label) + " not in channel set");
            out.push_back(static_cast<int>(it - channels.begin()));
        }
    }
    return out;
}

std::size_t Dataset::n_classes() const {
    return task == TaskKind::jcara ? static_cast<std::size_t>(kMcsClasses) : channels.size();
}

Dataset make_dataset(std::span<const JcaraSample> samples, const LabelConfig& cfg, int channel) {
    Dataset d;
    d.task = TaskKind::jcara;
    d.label_config = cfg;
    d.channels = {channel};
    d.feature_dim = cfg.jcara_window();
    for (const auto& s : samples) {
        d.features.push_back(s.features);
        d.labels.push_back(s.mcs);
    }
    return d;
}

Dataset make_dataset(std::span<const JcaraSample> samples, const LabelConfig& cfg, std::span<const int> channels) {
    if (channels.empty()) throw ConfigError("a dataset needs at least one channel");
    Dataset d = make_dataset(samples, cfg, channels.front());
    d.channels.assign(channels.begin(), channels.end());
    return d;
}

Dataset make_dataset(std::span<const SwitchSample> samples, const LabelConfig& cfg, std::span<const int> channels) {
    Dataset d;
    d.task = TaskKind::switch_channel;
    d.label_config = cfg;
    d.channels.assign(channels.begin(), channels.end());
    d.feature_dim = cfg.k2 * channels.size();
    for (const auto& s : samples) {
        d.features.push_back(s.features);
        d.labels.push_back(s.channel);
    }
    return d;
}

void save_dataset(const Dataset& data, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    const auto& c = data.label_config;
    out << "# task=" << to_string(data.task) << " k1=" << c.k1 << " k2=" << c.k2 << " k3=" << c.k3
        << " txop=" << c.txop_slots << " p_r=" << detail::format_number(c.p_r_dbm)
        << " sinr_floor=" << detail::format_number(c.sinr_floor_db) << " stride=" << c.stride << " channels=";
    for (std::size_t i = 0; i < data.channels.size(); ++i) out << (i ? ";" : "") << data.channels[i];
    out << " features=" << data.feature_dim << "\n";
    std::string line;
    for (std::size_t i = 0; i < data.size(); ++i) {
        line.clear();
        for (double v : data.features[i]) {
            line += detail::format_number(v);
            line += ',';
        }
        line += std::to_string(data.labels[i]);
        line += '\n';
        out << line;
    }
    if (!out) throw IoError("failed writing " + path.string());
}

Dataset load_dataset(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open dataset " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw ParseError(1, "empty dataset file");
    const auto h = detail::parse_header_line(line, 1);
    Dataset d;
    d.task = task_from_string(detail::header_value(h, "task", 1));
    auto as_size = [&](std::string_view key) {
        return static_cast<std::size_t>(detail::parse_integer(detail::header_value(h, key, 1), 1));
    };
    d.label_config.k1 = as_size("k1");
    d.label_config.k2 = as_size("k2");
    d.label_config.k3 = as_size("k3");
    d.label_config.txop_slots = as_size("txop");
    d.label_config.stride = as_size("stride");
    d.label_config.p_r_dbm = detail::header_number(h, "p_r", 1);
    d.label_config.sinr_floor_db = detail::header_number(h, "sinr_floor", 1);
    for (auto tok : detail::split(detail::header_value(h, "channels", 1), ';'))
        d.channels.push_back(static_cast<int>(detail::parse_integer(tok, 1)));
    d.feature_dim = as_size("features");

    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        const auto t = detail::trim(line);
        if (t.empty()) continue;
        const auto cells = detail::split(t, ',');
        if (cells.size() != d.feature_dim + 1)
            throw ParseError(line_no, "expected " + std::to_string(d.feature_dim + 1) + " cells");
        std::vector<double> f(d.feature_dim);
        for (std::size_t i = 0; i < d.feature_dim; ++i) f[i] = detail::parse_number(cells[i], line_no);
        d.features.push_back(std::move(f));
        d.labels.push_back(static_cast<int>(detail::parse_integer(cells.back(), line_no)));
    }
    return d;
}

} // namespace dlmac
