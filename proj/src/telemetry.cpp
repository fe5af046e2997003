#include "dlmac/telemetry.hpp"

#include "dlmac/errors.hpp"
#include "text_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace dlmac {

std::optional<double> IntervalStats::mean_delay() const {
    if (packets == 0) return std::nullopt;
    return static_cast<double>(delay_sum) / static_cast<double>(packets);
}

std::optional<double> MemberStats::mean_delay() const {
    if (packets == 0) return std::nullopt;
    return static_cast<double>(delay_sum) / static_cast<double>(packets);
}

double SimReport::throughput() const {
    return run_slots ? static_cast<double>(total_bits) / static_cast<double>(run_slots) : 0.0;
}

std::optional<double> SimReport::mean_delay() const {
    if (delivered_packets == 0) return std::nullopt;
    return static_cast<double>(delay_sum) / static_cast<double>(delivered_packets);
}

std::vector<IntervalStats> aggregate(const RunLog& log, std::size_t interval_slots) {
    if (interval_slots == 0) throw ConfigError("interval length must be positive");
    std::vector<IntervalStats> out;
    for (std::uint64_t off = 0; off < log.run_slots; off += interval_slots) {
        IntervalStats iv;
        iv.index = out.size();
        iv.begin_slot = log.begin_slot + off;
        iv.slots = std::min<std::uint64_t>(interval_slots, log.run_slots - off);
        out.push_back(iv);
    }
    auto bin = [&](std::uint64_t slot) -> IntervalStats& {
        if (slot < log.begin_slot || slot >= log.begin_slot + log.run_slots)
            throw DimensionError("event at slot " + std::to_string(slot) + " lies outside the run");
        return out[static_cast<std::size_t>((slot - log.begin_slot) / interval_slots)];
    };
    for (const auto& t : log.txops) {
        auto& iv = bin(t.end_slot);
        iv.bits += t.bits_delivered;
        if (t.success) ++iv.successes;
        else ++iv.failures;
    }
    for (const auto& p : log.packets) {
        auto& iv = bin(p.delivered_slot);
        ++iv.packets;
        iv.delay_sum += p.delay_slots;
    }
    for (auto s : log.drop_slots) ++bin(s).drops;
    for (auto s : log.switch_slots) ++bin(s).switches;
    return out;
}

void finalize_report(SimReport& r) {
    r.intervals = aggregate(r.log, r.interval_slots);
    r.total_bits = r.delivered_packets = r.delay_sum = r.successes = r.failures = 0;
    for (const auto& iv : r.intervals) {
        r.total_bits += iv.bits;
        r.delivered_packets += iv.packets;
        r.delay_sum += iv.delay_sum;
        r.successes += iv.successes;
        r.failures += iv.failures;
    }
    r.switches = r.log.switch_slots.size();
    r.drops = r.log.drop_slots.size();
    r.arrivals = 0;
    r.max_buffer_occupancy = 0;
    for (const auto& m : r.members) {
        r.arrivals += m.arrivals;
        r.max_buffer_occupancy = std::max(r.max_buffer_occupancy, m.max_occupancy);
    }
}

// ---------------------------------------------------------------------------

namespace {

std::string fmt(double v) { return detail::format_number(v); }

std::string opt_fmt(const std::optional<double>& v) { return v ? fmt(*v) : std::string("NA"); }

std::uint64_t header_u64(const detail::Header& h, std::string_view key, std::size_t line) {
    return static_cast<std::uint64_t>(detail::parse_integer(detail::header_value(h, key, line), line));
}

constexpr std::string_view kIntervalColumns =
    "interval,begin_slot,slots,bits,packets,delay_sum,successes,failures,switches,drops,throughput,mean_delay";

} // namespace

std::string report_to_csv(const SimReport& r) {
    std::ostringstream out;
    out << "# label=" << r.label << " seed=" << r.seed << " run_slots=" << r.run_slots
        << " interval_slots=" << r.interval_slots << " total_bits=" << r.total_bits
        << " delivered_packets=" << r.delivered_packets << " delay_sum=" << r.delay_sum
        << " successes=" << r.successes << " failures=" << r.failures << " switches=" << r.switches
        << " switch_evaluations=" << r.switch_evaluations << " arrivals=" << r.arrivals << " drops=" << r.drops
        << " max_buffer=" << r.max_buffer_occupancy << " half_duplex_violations=" << r.half_duplex_violations
        << " members=" << r.members.size() << "\n";
    for (std::size_t m = 0; m < r.members.size(); ++m) {
        const auto& ms = r.members[m];
        out << "# member=" << m << " arrivals=" << ms.arrivals << " drops=" << ms.drops << " packets=" << ms.packets
            << " bits=" << ms.bits << " delay_sum=" << ms.delay_sum << " max_occupancy=" << ms.max_occupancy << "\n";
    }
    out << kIntervalColumns << "\n";
    for (const auto& iv : r.intervals) {
        out << iv.index << ',' << iv.begin_slot << ',' << iv.slots << ',' << iv.bits << ',' << iv.packets << ','
            << iv.delay_sum << ',' << iv.successes << ',' << iv.failures << ',' << iv.switches << ',' << iv.drops
            << ',' << fmt(iv.throughput()) << ',' << opt_fmt(iv.mean_delay()) << "\n";
    }
    return out.str();
}

SimReport report_from_csv(std::string_view text) {
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t line_no = 0;
    SimReport r;
    auto next = [&]() -> bool {
        if (!std::getline(in, line)) return false;
        ++line_no;
        return true;
    };
    if (!next()) throw ParseError(1, "empty run report");
    const auto h = detail::parse_header_line(line, line_no);
    r.label = detail::header_value(h, "label", line_no);
    r.seed = header_u64(h, "seed", line_no);
    r.run_slots = header_u64(h, "run_slots", line_no);
    r.interval_slots = header_u64(h, "interval_slots", line_no);
    r.total_bits = header_u64(h, "total_bits", line_no);
    r.delivered_packets = header_u64(h, "delivered_packets", line_no);
    r.delay_sum = header_u64(h, "delay_sum", line_no);
    r.successes = header_u64(h, "successes", line_no);
    r.failures = header_u64(h, "failures", line_no);
    r.switches = header_u64(h, "switches", line_no);
    r.switch_evaluations = header_u64(h, "switch_evaluations", line_no);
    r.arrivals = header_u64(h, "arrivals", line_no);
    r.drops = header_u64(h, "drops", line_no);
    r.max_buffer_occupancy = header_u64(h, "max_buffer", line_no);
    r.half_duplex_violations = header_u64(h, "half_duplex_violations", line_no);
    const auto n_members = header_u64(h, "members", line_no);
    for (std::uint64_t m = 0; m < n_members; ++m) {
        if (!next()) throw ParseError(line_no + 1, "missing member line");
        const auto mh = detail::parse_header_line(line, line_no);
        MemberStats ms;
        ms.arrivals = header_u64(mh, "arrivals", line_no);
        ms.drops = header_u64(mh, "drops", line_no);
        ms.packets = header_u64(mh, "packets", line_no);
        ms.bits = header_u64(mh, "bits", line_no);
        ms.delay_sum = header_u64(mh, "delay_sum", line_no);
        ms.max_occupancy = header_u64(mh, "max_occupancy", line_no);
        r.members.push_back(ms);
    }
    if (!next() || detail::trim(line) != kIntervalColumns) throw ParseError(line_no, "expected interval column header");
    while (next()) {
        const auto t = detail::trim(line);
        if (t.empty()) continue;
        const auto cells = detail::split(t, ',');
        if (cells.size() != 12) throw ParseError(line_no, "expected 12 cells in interval row");
        IntervalStats iv;
        auto u = [&](std::size_t i) { return static_cast<std::uint64_t>(detail::parse_integer(cells[i], line_no)); };
        iv.index = u(0);
        iv.begin_slot = u(1);
        iv.slots = u(2);
        iv.bits = u(3);
        iv.packets = u(4);
        iv.delay_sum = u(5);
        iv.successes = u(6);
        iv.failures = u(7);
        iv.switches = u(8);
        iv.drops = u(9);
        r.intervals.push_back(iv);
    }
    return r;
}

// ---------------------------------------------------------------------------

MeanStd mean_std(std::span<const double> values) {
    MeanStd m;
    m.n = values.size();
    if (values.empty()) return m;
    double sum = 0.0;
    for (double v : values) sum += v;
    m.mean = sum / static_cast<double>(values.size());
    if (values.size() > 1) {
        double ss = 0.0;
        for (double v : values) ss += (v - m.mean) * (v - m.mean);
        m.stddev = std::sqrt(ss / static_cast<double>(values.size() - 1));
    }
    return m;
}

std::vector<GroupSummary> summarize(std::span<const SimReport> reports) {
    std::vector<GroupSummary> groups;
    std::vector<std::vector<const SimReport*>> members;
    for (const auto& r : reports) {
        auto it = std::find_if(groups.begin(), groups.end(), [&](const auto& g) { return g.label == r.label; });
        if (it == groups.end()) {
            groups.push_back({});
            groups.back().label = r.label;
            members.emplace_back();
            it = groups.end() - 1;
        }
        members[static_cast<std::size_t>(it - groups.begin())].push_back(&r);
    }
    for (std::size_t g = 0; g < groups.size(); ++g) {
        auto& gs = groups[g];
        const auto& rs = members[g];
        std::vector<double> tp, delay, succ, fail, sw, drops;
        std::size_t n_intervals = rs.front()->intervals.size();
        for (const auto* r : rs) {
            gs.seeds.push_back(r->seed);
            tp.push_back(r->throughput());
            if (auto d = r->mean_delay()) delay.push_back(*d);
            succ.push_back(static_cast<double>(r->successes));
            fail.push_back(static_cast<double>(r->failures));
            sw.push_back(static_cast<double>(r->switches));
            drops.push_back(static_cast<double>(r->drops));
            n_intervals = std::min(n_intervals, r->intervals.size());
        }
        gs.throughput = mean_std(tp);
        gs.delay = mean_std(delay);
        gs.successes = mean_std(succ);
        gs.failures = mean_std(fail);
        gs.switches = mean_std(sw);
        gs.drops = mean_std(drops);
        for (std::size_t i = 0; i < n_intervals; ++i) {
            IntervalSummary is;
            is.index = i;
            is.begin_slot = rs.front()->intervals[i].begin_slot;
            is.slots = rs.front()->intervals[i].slots;
            std::vector<double> itp, idl;
            for (const auto* r : rs) {
                itp.push_back(r->intervals[i].throughput());
                if (auto d = r->intervals[i].mean_delay()) idl.push_back(*d);
            }
            is.throughput = mean_std(itp);
            is.delay = mean_std(idl);
            gs.intervals.push_back(is);
        }
    }
    return groups;
}

std::string summary_csv(std::span<const GroupSummary> groups) {
    std::ostringstream out;
    out << "label,seeds,throughput_mean,throughput_std,delay_mean,delay_std,successes_mean,failures_mean,"
           "switches_mean,drops_mean\n";
    for (const auto& g : groups) {
        out << g.label << ',' << g.seeds.size() << ',' << fmt(g.throughput.mean) << ',' << fmt(g.throughput.stddev)
            << ',' << (g.delay.n ? fmt(g.delay.mean) : "NA") << ',' << (g.delay.n ? fmt(g.delay.stddev) : "NA") << ','
            << fmt(g.successes.mean) << ',' << fmt(g.failures.mean) << ',' << fmt(g.switches.mean) << ','
            << fmt(g.drops.mean) << "\n";
    }
    return out.str();
}

std::string intervals_csv(std::span<const GroupSummary> groups) {
    std::ostringstream out;
    out << "label,interval,begin_slot,slots,throughput_mean,throughput_std,delay_mean,delay_std,delay_n\n";
    for (const auto& g : groups)
        for (const auto& iv : g.intervals)
            out << g.label << ',' << iv.index << ',' << iv.begin_slot << ',' << iv.slots << ','
                << fmt(iv.throughput.mean) << ',' << fmt(iv.throughput.stddev) << ','
                << (iv.delay.n ? fmt(iv.delay.mean) : "NA") << ',' << (iv.delay.n ? fmt(iv.delay.stddev) : "NA")
                << ',' << iv.delay.n << "\n";
    return out.str();
}

// ---------------------------------------------------------------------------

namespace {

std::string num(double v, const char* spec = "%.2f") {
    char buf[64];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string xml_escape(std::string_view s) {
    std::string out;
    for (char c : s) {
        if (c == '&') out += "&amp;";
        else if (c == '<') out += "&lt;";
        else if (c == '>') out += "&gt;";
        else out += c;
    }
    return out;
}

} // namespace

std::string render_svg(std::span<const GroupSummary> groups, PlotMetric metric) {
    constexpr double W = 760, H = 420, left = 70, right = 170, top = 30, bottom = 50;
    const double pw = W - left - right, ph = H - top - bottom;
    const bool tp = metric == PlotMetric::throughput;

    std::size_t n = 0;
    double ymax = 0.0;
    for (const auto& g : groups) {
        n = std::max(n, g.intervals.size());
        for (const auto& iv : g.intervals) {
            const MeanStd& m = tp ? iv.throughput : iv.delay;
            if (m.n) ymax = std::max(ymax, m.mean + 3.0 * m.stddev);
        }
    }
    if (!(ymax > 0.0)) ymax = 1.0;
    ymax *= 1.05;
    auto xpos = [&](std::size_t i) { return left + (n > 1 ? pw * static_cast<double>(i) / static_cast<double>(n - 1) : pw / 2); };
    auto ypos = [&](double v) { return top + ph * (1.0 - std::clamp(v, 0.0, ymax) / ymax); };

    std::ostringstream s;
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    s << "<text x=\"" << left + pw / 2 << "\" y=\"18\" text-anchor=\"middle\">"
      << (tp ? "Throughput (bits/mini-slot)" : "Mean delay (mini-slots)") << ", error bars: 3 sigma</text>\n";
    s << "<line x1=\"" << left << "\" y1=\"" << top + ph << "\" x2=\"" << left + pw << "\" y2=\"" << top + ph
      << "\" stroke=\"black\"/>\n";
    s << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << top + ph
      << "\" stroke=\"black\"/>\n";
    for (int k = 0; k <= 5; ++k) {
        const double v = ymax * k / 5.0;
        const double y = ypos(v);
        s << "<line x1=\"" << left - 4 << "\" y1=\"" << num(y) << "\" x2=\"" << left << "\" y2=\"" << num(y)
          << "\" stroke=\"black\"/>";
        s << "<text x=\"" << left - 6 << "\" y=\"" << num(y + 4) << "\" text-anchor=\"end\">" << num(v, "%.3g")
          << "</text>\n";
    }
    for (std::size_t i = 0; i < n; ++i)
        s << "<text x=\"" << num(xpos(i)) << "\" y=\"" << top + ph + 16 << "\" text-anchor=\"middle\">" << i + 1
          << "</text>\n";
    s << "<text x=\"" << left + pw / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">Time interval</text>\n";

    for (std::size_t gi = 0; gi < groups.size(); ++gi) {
        const auto& g = groups[gi];
        const char* color = kPalette[gi % std::size(kPalette)];
        std::string points;
        for (const auto& iv : g.intervals) {
            const MeanStd& m = tp ? iv.throughput : iv.delay;
            if (!m.n) continue;
            const double x = xpos(iv.index);
            points += num(x) + "," + num(ypos(m.mean)) + " ";
            s << "<line x1=\"" << num(x) << "\" y1=\"" << num(ypos(m.mean - 3.0 * m.stddev)) << "\" x2=\"" << num(x)
              << "\" y2=\"" << num(ypos(m.mean + 3.0 * m.stddev)) << "\" stroke=\"" << color << "\"/>";
            s << "<circle cx=\"" << num(x) << "\" cy=\"" << num(ypos(m.mean)) << "\" r=\"3\" fill=\"" << color
              << "\"/>\n";
        }
        if (!points.empty()) {
            points.pop_back();
            s << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"" << points
              << "\"/>\n";
        }
        const double ly = top + 14.0 * static_cast<double>(gi) + 8;
        s << "<line x1=\"" << left + pw + 12 << "\" y1=\"" << ly << "\" x2=\"" << left + pw + 32 << "\" y2=\"" << ly
          << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>";
        s << "<text x=\"" << left + pw + 36 << "\" y=\"" << ly + 4 << "\">" << xml_escape(g.label) << "</text>\n";
    }
    s << "</svg>\n";
    return s.str();
}

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
    if (!out) throw IoError("failed writing " + path.string());
}

std::string file_safe(std::string_view s) {
    std::string out;
    for (char c : s) out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.') ? c : '_';
    return out;
}

} // namespace

void emit_summary(std::span<const SimReport> reports, const std::filesystem::path& out_dir) {
    if (reports.empty()) throw EmptyOutputError("no runs to report");
    std::error_code ec;
    std::filesystem::create_directories(out_dir / "plots", ec);
    if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());
    const auto groups = summarize(reports);
    write_text(out_dir / "summary.csv", summary_csv(groups));
    write_text(out_dir / "intervals.csv", intervals_csv(groups));
    write_text(out_dir / "plots" / "throughput.svg", render_svg(groups, PlotMetric::throughput));
    write_text(out_dir / "plots" / "delay.svg", render_svg(groups, PlotMetric::delay));
}

void emit_report(std::span<const SimReport> reports, const std::filesystem::path& out_dir) {
    emit_summary(reports, out_dir);
    std::error_code ec;
    std::filesystem::create_directories(out_dir / "runs", ec);
    if (ec) throw IoError("cannot create " + (out_dir / "runs").string() + ": " + ec.message());
    std::string index;
    for (const auto& r : reports) {
        const std::string name = file_safe(r.label) + "_seed" + std::to_string(r.seed) + ".csv";
        write_text(out_dir / "runs" / name, report_to_csv(r));
        index += name + "\n";
    }
    write_text(out_dir / "runs" / "index.txt", index);
}

std::vector<SimReport> load_reports(const std::filesystem::path& runs_dir) {
    std::vector<std::filesystem::path> files;
    const auto index = runs_dir / "index.txt";
    if (std::filesystem::exists(index)) {
        std::ifstream in(index);
        std::string line;
        while (std::getline(in, line))
            if (!line.empty()) files.push_back(runs_dir / line);
    } else if (std::filesystem::is_directory(runs_dir)) {
        for (const auto& e : std::filesystem::directory_iterator(runs_dir))
            if (e.path().extension() == ".csv") files.push_back(e.path());
        std::sort(files.begin(), files.end());
    }
    if (files.empty()) throw MissingInputError("no run files under " + runs_dir.string());
    std::vector<SimReport> reports;
    for (const auto& f : files) {
        std::ifstream in(f, std::ios::binary);
        if (!in) throw MissingInputError("cannot open run file " + f.string());
        std::ostringstream ss;
        ss << in.rdbuf();
        reports.push_back(report_from_csv(ss.str()));
    }
    return reports;
}

std::string summary_table(std::span<const GroupSummary> groups) {
    std::ostringstream s;
    char buf[256];
    std::snprintf(buf, sizeof buf, "%-28s %5s %14s %12s %12s %12s %9s %9s\n", "label", "seeds", "thr(bit/slot)",
                  "thr_std", "delay(slot)", "delay_std", "fail", "switch");
    s << buf;
    for (const auto& g : groups) {
        const std::string d = g.delay.n ? num(g.delay.mean, "%.2f") : "NA";
        const std::string ds = g.delay.n ? num(g.delay.stddev, "%.2f") : "NA";
        std::snprintf(buf, sizeof buf, "%-28s %5zu %14.4f %12.4f %12s %12s %9.1f %9.1f\n", g.label.c_str(),
                      g.seeds.size(), g.throughput.mean, g.throughput.stddev, d.c_str(), ds.c_str(), g.failures.mean,
                      g.switches.mean);
        s << buf;
    }
    return s.str();
}

} // namespace dlmac
