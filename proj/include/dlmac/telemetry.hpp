#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace dlmac {

inline constexpr std::size_t kDefaultIntervalSlots = 111111; // one second of 9 us slots

struct TxopOutcome {
    std::uint64_t start_slot = 0; ///< first occupied slot
    std::uint64_t end_slot = 0;   ///< last occupied slot; feedback arrives here
    int channel = 0;
    int mcs = 0;
    double realized_mean_sinr = 0.0;
    bool success = false;
    std::uint32_t packets_carried = 0;
    std::uint64_t bits_delivered = 0;
    std::uint32_t member = 0;
};

struct PacketRecord {
    std::uint64_t delivered_slot = 0;
    std::uint64_t delay_slots = 0;
    std::uint32_t member = 0;
};

/// Raw event log of one run over slots [begin_slot, begin_slot + run_slots).
struct RunLog {
    std::uint64_t begin_slot = 0;
    std::uint64_t run_slots = 0;
    std::vector<TxopOutcome> txops;
    std::vector<PacketRecord> packets;
    std::vector<std::uint64_t> drop_slots;
    std::vector<std::uint64_t> switch_slots;
};

struct IntervalStats {
    std::size_t index = 0;
    std::uint64_t begin_slot = 0;
    std::uint64_t slots = 0;
    std::uint64_t bits = 0;
    std::uint64_t packets = 0;
    std::uint64_t delay_sum = 0;
    std::uint64_t successes = 0;
    std::uint64_t failures = 0;
    std::uint64_t switches = 0;
    std::uint64_t drops = 0;

    double throughput() const { return slots ? static_cast<double>(bits) / static_cast<double>(slots) : 0.0; }
    /// Absent when no packet was delivered in the interval.
    std::optional<double> mean_delay() const;
};

struct MemberStats {
    std::uint64_t arrivals = 0;
    std::uint64_t drops = 0;
    std::uint64_t packets = 0;
    std::uint64_t bits = 0;
    std::uint64_t delay_sum = 0;
    std::size_t max_occupancy = 0;

    std::optional<double> mean_delay() const;
};

struct SimReport {
    std::string label; ///< policy name or run tag
    std::uint64_t seed = 0;
    std::uint64_t run_slots = 0;
    std::size_t interval_slots = kDefaultIntervalSlots;
    std::vector<IntervalStats> intervals;
    std::vector<MemberStats> members;
    RunLog log;

    std::uint64_t total_bits = 0;
    std::uint64_t delivered_packets = 0;
    std::uint64_t delay_sum = 0;
    std::uint64_t successes = 0;
    std::uint64_t failures = 0;
    std::uint64_t switches = 0;
    std::uint64_t switch_evaluations = 0;
    std::uint64_t arrivals = 0;
    std::uint64_t drops = 0;
    std::size_t max_buffer_occupancy = 0;
    std::uint64_t half_duplex_violations = 0;

    double throughput() const;
    std::optional<double> mean_delay() const;
};

/// Tiles [begin, begin + run_slots) into intervals of `interval_slots` (the
/// last may be shorter) and bins the log by delivery/end slot.
std::vector<IntervalStats> aggregate(const RunLog& log, std::size_t interval_slots);

/// Fills the totals and intervals of `report` from its log.
void finalize_report(SimReport& report);

/// Deterministic CSV rendering of one run (summary block + interval rows).
std::string report_to_csv(const SimReport& report);
SimReport report_from_csv(std::string_view text);

// ---------------------------------------------------------------------------
// Cross-seed summaries.

struct MeanStd {
    double mean = 0.0;
    double stddev = 0.0; ///< sample standard deviation; 0 for fewer than two values
    std::size_t n = 0;
};

MeanStd mean_std(std::span<const double> values);

struct IntervalSummary {
    std::size_t index = 0;
    std::uint64_t begin_slot = 0;
    std::uint64_t slots = 0;
    MeanStd throughput;
    MeanStd delay; ///< over seeds that delivered something in the interval
};

struct GroupSummary {
    std::string label;
    std::vector<std::uint64_t> seeds;
    MeanStd throughput;
    MeanStd delay;
    MeanStd successes;
    MeanStd failures;
    MeanStd switches;
    MeanStd drops;
    std::vector<IntervalSummary> intervals;
};

/// Runs sharing a label form one group (one line in the plots); groups keep
/// first-seen order.
std::vector<GroupSummary> summarize(std::span<const SimReport> reports);

std::string summary_csv(std::span<const GroupSummary> groups);
std::string intervals_csv(std::span<const GroupSummary> groups);

enum class PlotMetric { throughput, delay };
/// Line plot per group over interval index with +-3 sigma error bars.
std::string render_svg(std::span<const GroupSummary> groups, PlotMetric metric);

/// Writes summary.csv, intervals.csv and plots/{throughput,delay}.svg.
void emit_summary(std::span<const SimReport> reports, const std::filesystem::path& out_dir);

/// emit_summary plus runs/<label>_seed<k>.csv per report and runs/index.txt
/// listing them in order.
void emit_report(std::span<const SimReport> reports, const std::filesystem::path& out_dir);

/// Reads the run files under `runs_dir` (index order when present, else by
/// file name). Logs are not stored, so the reports carry intervals and totals only.
std::vector<SimReport> load_reports(const std::filesystem::path& runs_dir);

/// Table printed by `simulate` and `sweep`.
std::string summary_table(std::span<const GroupSummary> groups);

} // namespace dlmac
